"""Metric reports: JSON persistence and Markdown comparison tables."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from mdocr.metrics import (
    BLEU_EPSILON,
    BLEU_MAX_N,
    DEFAULT_NORMALIZATION,
    METRIC_NAMES,
    NormalizationOptions,
    SampleResult,
    mean_metrics,
)

REPORT_FORMAT = "mdocr-report-v1"
SA_DEFINITION = "levenshtein-block-tags-v1"

# column title, metric key, higher is better
TABLE_COLUMNS = (
    ("BLEU (↑)", "bleu", True),
    ("CER (↓)", "cer", False),
    ("WER (↓)", "wer", False),
    ("Structure Acc (↑)", "structure_accuracy", True),
)


class ReportError(ValueError):
    """A report file is malformed or internally inconsistent."""


def default_config(
    norm: NormalizationOptions = DEFAULT_NORMALIZATION, tokenizer_id: Optional[str] = None
) -> dict:
    return {
        "normalization": norm.as_dict(),
        "bleu": {"max_n": BLEU_MAX_N, "epsilon": BLEU_EPSILON, "mode": "sentence-macro"},
        "structure_accuracy": SA_DEFINITION,
        "ter_tokenizer": tokenizer_id,
        "character_unit": "nfc-code-point",
        "word_split": "unicode-whitespace",
    }


@dataclass(frozen=True)
class MetricReport:
    per_sample: tuple[SampleResult, ...]
    means: dict
    sample_count: int
    config: dict
    model: Optional[str] = None
    warnings: tuple[str, ...] = field(default=())

    def to_json(self) -> str:
        payload = {
            "format": REPORT_FORMAT,
            "model": self.model,
            "sample_count": self.sample_count,
            "means": self.means,
            "config": self.config,
            "warnings": list(self.warnings),
            "per_sample": [r.as_dict() for r in self.per_sample],
        }
        # repr-precision floats; rounding happens only when rendering tables
        return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ReportError(f"report is not valid JSON: {exc}") from exc
        if data.get("format") != REPORT_FORMAT:
            raise ReportError(f"unsupported report format {data.get('format')!r}")
        try:
            per_sample = tuple(SampleResult(**row) for row in data["per_sample"])
            report = cls(
                per_sample=per_sample,
                means={k: data["means"].get(k) for k in METRIC_NAMES},
                sample_count=int(data["sample_count"]),
                config=data["config"],
                model=data.get("model"),
                warnings=tuple(data.get("warnings", ())),
            )
        except (KeyError, TypeError) as exc:
            raise ReportError(f"report is missing or has malformed fields: {exc}") from exc
        report.check()
        return report

    def check(self) -> None:
        if self.sample_count != len(self.per_sample):
            raise ReportError(
                f"sample_count {self.sample_count} != {len(self.per_sample)} per-sample rows"
            )
        expected = mean_metrics(self.per_sample)
        for name in METRIC_NAMES:
            got, want = self.means.get(name), expected[name]
            if (got is None) != (want is None) or (
                got is not None and not math.isclose(got, want, rel_tol=1e-12, abs_tol=1e-15)
            ):
                raise ReportError(f"mean {name}={got} does not match per-sample mean {want}")


def write_report(report: MetricReport, path: Path) -> None:
    Path(path).write_text(report.to_json(), encoding="utf-8")


def load_report(path: Path) -> MetricReport:
    return MetricReport.from_json(Path(path).read_text(encoding="utf-8"))


def render_table(reports: Sequence[MetricReport], names: Optional[Sequence[str]] = None) -> str:
    """Render one row per report, bolding every best value in each column."""
    if not reports:
        raise ValueError("no reports to render")
    names = list(names) if names is not None else [r.model or f"model-{i}" for i, r in enumerate(reports)]
    best: dict[str, Optional[float]] = {}
    for _, key, higher in TABLE_COLUMNS:
        values = [r.means.get(key) for r in reports if r.means.get(key) is not None]
        best[key] = (max(values) if higher else min(values)) if values else None

    lines = [
        "| Model | " + " | ".join(title for title, _, _ in TABLE_COLUMNS) + " |",
        "|---|" + "---:|" * len(TABLE_COLUMNS),
    ]
    for name, report in zip(names, reports):
        cells = []
        for _, key, _ in TABLE_COLUMNS:
            value = report.means.get(key)
            if value is None:
                cells.append("–")
                continue
            cell = f"{value:.4f}"
            cells.append(f"**{cell}**" if value == best[key] else cell)
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
