"""Score prediction manifests against reference manifests."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from mdocr.markdown import extract_structure, parse_markdown, structure_accuracy
from mdocr.metrics import (
    DEFAULT_NORMALIZATION,
    NormalizationOptions,
    SampleResult,
    UndefinedMetricError,
    aggregate,
    bleu,
    cer,
    wer,
)
from mdocr.report import MetricReport, default_config
from mdocr.synth import ManifestEntry
from mdocr.tokenizer import TokenizerModel, load_tokenizer, token_efficiency_ratio

WORKERS_ENV = "MDOCR_WORKERS"


class EvalDataError(ValueError):
    """The manifests cannot be paired for evaluation."""


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return value


def _defined(fn, *args) -> Optional[float]:
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def score_sample(
    sample_id: str,
    ref: str,
    hyp: str,
    norm: NormalizationOptions = DEFAULT_NORMALIZATION,
    tokenizer: Optional[TokenizerModel] = None,
) -> SampleResult:
    sa = structure_accuracy(
        extract_structure(parse_markdown(hyp)), extract_structure(parse_markdown(ref))
    )
    return SampleResult(
        sample_id=sample_id,
        bleu=bleu(ref, hyp, norm),
        cer=_defined(cer, ref, hyp, norm),
        wer=_defined(wer, ref, hyp, norm),
        structure_accuracy=sa,
        ter=_defined(token_efficiency_ratio, tokenizer, hyp, ref) if tokenizer is not None else None,
    )


_worker_state: dict = {}


def _init_worker(norm: NormalizationOptions, tokenizer_dir: Optional[str]) -> None:
    _worker_state["norm"] = norm
    _worker_state["tokenizer"] = load_tokenizer(tokenizer_dir) if tokenizer_dir else None


def _score_job(job: tuple[str, str, str]) -> SampleResult:
    sample_id, ref, hyp = job
    return score_sample(sample_id, ref, hyp, _worker_state["norm"], _worker_state["tokenizer"])


def _index(entries: Sequence[ManifestEntry], label: str) -> dict[str, ManifestEntry]:
    out: dict[str, ManifestEntry] = {}
    for e in entries:
        if e.id in out:
            raise EvalDataError(f"duplicate id {e.id!r} in {label} manifest")
        out[e.id] = e
    return out


def evaluate_manifests(
    pred: Sequence[ManifestEntry],
    ref: Sequence[ManifestEntry],
    norm: NormalizationOptions = DEFAULT_NORMALIZATION,
    tokenizer_dir: Optional[Path] = None,
    workers: int = 1,
    model: Optional[str] = None,
) -> MetricReport:
    """Pair entries by id and score every matched pair.

    Samples are reported in reference-manifest order whatever the worker
    count, and aggregation is a single ordered fold, so output is identical
    for any degree of parallelism.
    """
    pred_by_id = _index(pred, "prediction")
    ref_by_id = _index(ref, "reference")
    warnings = [f"no prediction for reference id {i!r}" for i in ref_by_id if i not in pred_by_id]
    warnings += [f"prediction id {i!r} has no reference" for i in pred_by_id if i not in ref_by_id]
    jobs = [(i, e.markdown, pred_by_id[i].markdown) for i, e in ref_by_id.items() if i in pred_by_id]
    if not jobs:
        raise EvalDataError("no sample ids are shared by the two manifests")

    tokenizer = load_tokenizer(tokenizer_dir) if tokenizer_dir is not None else None
    if workers <= 1 or len(jobs) == 1:
        results = [score_sample(i, r, h, norm, tokenizer) for i, r, h in jobs]
    else:
        tok_arg = str(tokenizer_dir) if tokenizer_dir is not None else None
        chunk = max(1, len(jobs) // (workers * 4))
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(norm, tok_arg)) as pool:
            results = list(pool.map(_score_job, jobs, chunksize=chunk))

    config = default_config(norm, tokenizer.fingerprint() if tokenizer is not None else None)
    report = aggregate(results, config)
    return MetricReport(
        per_sample=report.per_sample,
        means=report.means,
        sample_count=report.sample_count,
        config=report.config,
        model=model,
        warnings=tuple(warnings),
    )
