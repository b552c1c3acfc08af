"""CER, WER and sentence-level BLEU with Arabic-aware normalisation."""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from collections.abc import Hashable, Sequence
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Optional

from mdocr import kernels

if TYPE_CHECKING:
    from mdocr.report import MetricReport

BLEU_EPSILON = 1e-9
BLEU_MAX_N = 4

METRIC_NAMES = ("bleu", "cer", "wer", "structure_accuracy", "ter")

_TASHKEEL = {cp: None for cp in range(0x064B, 0x0653)}
_ALEF = str.maketrans({"أ": "ا", "إ": "ا", "آ": "ا"})


class UndefinedMetricError(ValueError):
    """The metric has no value for this input (e.g. an empty reference)."""


@dataclass(frozen=True)
class NormalizationOptions:
    unicode_nfc: bool = True
    strip_tashkeel: bool = False
    normalize_alef: bool = False
    collapse_whitespace: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_NORMALIZATION = NormalizationOptions()


def normalize_text(text: str, opts: NormalizationOptions = DEFAULT_NORMALIZATION) -> str:
    if opts.unicode_nfc:
        text = unicodedata.normalize("NFC", text)
    if opts.strip_tashkeel:
        text = text.translate(_TASHKEEL)
    if opts.normalize_alef:
        text = text.translate(_ALEF)
    if opts.unicode_nfc and (opts.strip_tashkeel or opts.normalize_alef):
        # removing marks can expose new compositions (alef + madda/hamza);
        # each round consumes a combining mark, so this terminates
        while True:
            again = unicodedata.normalize("NFC", text)
            if opts.normalize_alef:
                again = again.translate(_ALEF)
            if again == text:
                break
            text = again
    if opts.collapse_whitespace:
        text = " ".join(text.split())
    return text


def edit_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Unit-cost Levenshtein distance between two symbol sequences.

    Strings are compared code point by code point. Other sequences may hold
    any hashable symbols.
    """
    if isinstance(a, str) and isinstance(b, str):
        return kernels.str_distance(a, b)
    ids: dict = {}
    ia = [ids.setdefault(x, len(ids)) for x in a]
    ib = [ids.setdefault(x, len(ids)) for x in b]
    return kernels.int_distance(ia, ib)


def cer(ref: str, hyp: str, opts: NormalizationOptions = DEFAULT_NORMALIZATION) -> float:
    """Character error rate; may exceed 1 when the hypothesis is much longer."""
    ref = normalize_text(ref, opts)
    hyp = normalize_text(hyp, opts)
    if not ref:
        raise UndefinedMetricError("CER is undefined for an empty reference")
    return kernels.str_distance(ref, hyp) / len(ref)


def wer(ref: str, hyp: str, opts: NormalizationOptions = DEFAULT_NORMALIZATION) -> float:
    ref_words = normalize_text(ref, opts).split()
    hyp_words = normalize_text(hyp, opts).split()
    if not ref_words:
        raise UndefinedMetricError("WER is undefined for a reference with no words")
    return edit_distance(ref_words, hyp_words) / len(ref_words)


def _ngrams(words: Sequence[str], n: int) -> Counter:
    return Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))


def bleu(
    ref: str,
    hyp: str,
    opts: NormalizationOptions = DEFAULT_NORMALIZATION,
    max_n: int = BLEU_MAX_N,
    epsilon: float = BLEU_EPSILON,
) -> float:
    """Sentence-level BLEU over whitespace tokens.

    Orders above the hypothesis length are dropped from the geometric mean, so
    a one-word exact match scores 1.0. A zero precision is replaced by
    ``epsilon``. Empty hypothesis or reference scores 0.
    """
    ref_words = normalize_text(ref, opts).split()
    hyp_words = normalize_text(hyp, opts).split()
    if not ref_words or not hyp_words:
        return 0.0
    orders = min(max_n, len(hyp_words))
    score = 1.0
    for n in range(1, orders + 1):
        hyp_counts = _ngrams(hyp_words, n)
        ref_counts = _ngrams(ref_words, n)
        matched = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        precision = matched / (len(hyp_words) - n + 1)
        score *= (precision if precision > 0 else epsilon) ** (1.0 / orders)
    if len(hyp_words) < len(ref_words):
        score *= math.exp(1.0 - len(ref_words) / len(hyp_words))
    return min(score, 1.0)


@dataclass(frozen=True)
class SampleResult:
    """Scores for one prediction/reference pair; ``None`` marks a skipped metric."""

    sample_id: str
    bleu: Optional[float] = None
    cer: Optional[float] = None
    wer: Optional[float] = None
    structure_accuracy: Optional[float] = None
    ter: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def mean_metrics(results: Sequence[SampleResult]) -> dict[str, Optional[float]]:
    means: dict[str, Optional[float]] = {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in results if getattr(r, name) is not None]
        # fsum is exactly rounded, so the mean does not depend on sample order
        means[name] = math.fsum(values) / len(values) if values else None
    return means


def aggregate(results: Sequence[SampleResult], config: Optional[dict] = None) -> "MetricReport":
    """Macro-average per-sample scores into a :class:`MetricReport`."""
    from mdocr.report import MetricReport, default_config

    if not results:
        raise ValueError("cannot aggregate an empty result list")
    return MetricReport(
        per_sample=tuple(results),
        means=mean_metrics(results),
        sample_count=len(results),
        config=dict(config) if config is not None else default_config(),
    )
