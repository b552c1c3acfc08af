"""Encoder token-grid arithmetic, context tables and repetition handling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np

from mdocr.tokenizer import ContextSpec, effective_context

DEFAULT_REPETITION_PENALTY = 1.2


class GeometryError(ValueError):
    pass


class PenaltyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderGeometry:
    input_height: int
    input_width: int
    patch_size: int = 4
    merge_stages: int = 3
    hidden_dim: int = 1024

    @property
    def reduction(self) -> int:
        return self.patch_size * 2**self.merge_stages


@dataclass(frozen=True)
class TokenGrid:
    rows: int
    cols: int
    token_count: int
    stages: tuple[tuple[int, int], ...]
    hidden_dim: int

    def chain(self) -> str:
        return " → ".join(f"{h}×{w}" for h, w in self.stages)


def token_grid(geom: EncoderGeometry) -> TokenGrid:
    """Rows, columns and count of encoder output tokens.

    ``stages`` lists the input size, the patch-embedded size and the size
    after each 2x patch-merging stage.
    """
    if geom.patch_size < 1 or geom.merge_stages < 0:
        raise GeometryError("patch_size must be >= 1 and merge_stages >= 0")
    f = geom.reduction
    for name, value in (("height", geom.input_height), ("width", geom.input_width)):
        if value <= 0 or value % f:
            raise GeometryError(f"{name} {value} is not a positive multiple of {f}")
    h, w = geom.input_height // geom.patch_size, geom.input_width // geom.patch_size
    stages = [(geom.input_height, geom.input_width), (h, w)]
    for _ in range(geom.merge_stages):
        h, w = h // 2, w // 2
        stages.append((h, w))
    return TokenGrid(h, w, h * w, tuple(stages), geom.hidden_dim)


@dataclass(frozen=True)
class ContextRow:
    model_name: str
    max_decoder_tokens: int
    compression_ratio: float
    effective_tokens: int


def context_table(specs: Sequence[ContextSpec]) -> list[ContextRow]:
    """Rows sorted by effective context (descending), then by name."""
    if not specs:
        raise ValueError("at least one ContextSpec is required")
    rows = [
        ContextRow(s.model_name, s.max_decoder_tokens, s.compression_ratio_vs_base, effective_context(s))
        for s in specs
    ]
    return sorted(rows, key=lambda r: (-r.effective_tokens, r.model_name))


def format_context_table(rows: Sequence[ContextRow]) -> str:
    lines = ["| Model | Max tokens | Ratio vs base | Effective base tokens |", "|---|---:|---:|---:|"]
    for r in rows:
        lines.append(
            f"| {r.model_name} | {r.max_decoder_tokens} | {r.compression_ratio:.4f} | {r.effective_tokens} |"
        )
    return "\n".join(lines) + "\n"


def apply_repetition_penalty(
    scores: Sequence[float], history: Iterable[int], penalty: float = DEFAULT_REPETITION_PENALTY
) -> np.ndarray:
    """Multiplicative (CTRL-style) penalty on previously generated tokens.

    Each distinct history id is penalised once: positive scores are divided
    by ``penalty``, negative scores multiplied by it.
    """
    if not penalty > 0:
        raise PenaltyConfigError(f"penalty must be > 0, got {penalty}")
    out = np.array(scores, dtype=np.float64, copy=True)
    ids = np.fromiter(sorted(set(history)), dtype=np.int64)
    if ids.size:
        if ids.min() < 0 or ids.max() >= out.size:
            raise IndexError(f"history ids must lie in [0, {out.size})")
        picked = out[ids]
        out[ids] = np.where(picked > 0, picked / penalty, picked * penalty)
    return out


@dataclass(frozen=True)
class RepetitionParams:
    min_ngram: int = 3
    max_ngram: int = 20
    min_repeats: int = 3

    def __post_init__(self) -> None:
        if self.min_ngram < 1:
            raise ValueError("min_ngram must be >= 1")
        if self.min_ngram > self.max_ngram:
            raise ValueError("min_ngram must not exceed max_ngram")
        if self.min_repeats < 2:
            raise ValueError("min_repeats must be >= 2")


@dataclass(frozen=True)
class Repetition:
    period: int
    start: int
    repeats: int


def detect_repetition(
    tokens: Sequence[Hashable], params: RepetitionParams = RepetitionParams()
) -> Optional[Repetition]:
    """Find a tail made of ``>= min_repeats`` copies of one n-gram.

    Periods are tried from ``min_ngram`` upwards and the first that qualifies
    wins; for it the longest such tail is reported.
    """
    n = len(tokens)
    for p in range(params.min_ngram, min(params.max_ngram, n // params.min_repeats) + 1):
        j = n - 1 - p
        while j >= 0 and tokens[j] == tokens[j + p]:
            j -= 1
        repeats = (n - 1 - j) // p
        if repeats >= params.min_repeats:
            return Repetition(p, n - repeats * p, repeats)
    return None


def truncate_repetition(text: str, params: RepetitionParams = RepetitionParams()) -> str:
    """Drop all but one copy of a repeating tail (on whitespace tokens).

    Repeats until no repetition is left. Text without a repeating tail is
    returned unchanged; otherwise the result is space-joined.
    """
    words = text.split()
    hit = detect_repetition(words, params)
    if hit is None:
        return text
    while hit is not None:
        words = words[: hit.start + hit.period]
        hit = detect_repetition(words, params)
    return " ".join(words)
