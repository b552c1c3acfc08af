"""Byte-fallback BPE tokenizers and token-count statistics.

Text is first split into chunks of ``optional leading whitespace + one
non-whitespace run``; merges never cross a chunk boundary. Every chunk starts
as its UTF-8 bytes, so any string can be tokenized.

On disk a tokenizer is a directory with ``vocab.json`` (token string -> id)
and ``merges.txt`` (``#bpe-v1`` header, then one ``left right`` pair per line
in application order). Token strings are the UTF-8 text of the token with
these escapes: ``\\\\`` for a backslash and ``\\xHH`` for every byte that is
whitespace, non-printable, part of an incomplete UTF-8 sequence, or ``<``.
The special tokens are spelled ``<pad>``, ``<s>`` and ``</s>``.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

MERGES_HEADER = "#bpe-v1"
SPECIAL_TOKENS = ("<pad>", "<s>", "</s>")
MAX_VOCAB = 8192

_CHUNK_RE = re.compile(r"\s*\S+|\s+")

Token = Union[bytes, str]  # str only for special tokens


class TokenizerError(ValueError):
    """Invalid tokenizer input, such as an out-of-range id."""


class TokenizerConfigError(TokenizerError):
    """Invalid training configuration."""


class TokenizerFormatError(TokenizerError):
    """A tokenizer directory is malformed."""

    def __init__(self, path: Path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def escape_token(token: bytes) -> str:
    out: list[str] = []
    i = 0
    while i < len(token):
        ch = None
        for k in (1, 2, 3, 4):
            try:
                ch = token[i : i + k].decode("utf-8")
                break
            except UnicodeDecodeError:
                continue
        if ch is None:
            out.append(f"\\x{token[i]:02x}")
            i += 1
            continue
        raw = ch.encode("utf-8")
        if ch == "\\":
            out.append("\\\\")
        elif ch == "<" or ch.isspace() or not ch.isprintable():
            out.extend(f"\\x{b:02x}" for b in raw)
        else:
            out.append(ch)
        i += len(raw)
    return "".join(out)


def unescape_token(text: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if text.startswith("\\\\", i):
                out.append(0x5C)
                i += 2
                continue
            m = re.match(r"\\x([0-9a-fA-F]{2})", text[i : i + 4])
            if not m:
                raise ValueError(f"bad escape at position {i} in {text!r}")
            out.append(int(m.group(1), 16))
            i += 4
            continue
        if ch == "<" or ch.isspace():
            raise ValueError(f"unescaped {ch!r} in token {text!r}")
        out += ch.encode("utf-8")
        i += 1
    return bytes(out)


@dataclass(frozen=True, eq=False)
class TokenizerModel:
    """Immutable BPE model: vocabulary (id order) and ordered merges."""

    tokens: tuple[Token, ...]
    merges: tuple[tuple[bytes, bytes], ...]
    byte_fallback: bool = field(default=True, init=False)
    _ids: dict = field(init=False, repr=False)
    _ranks: dict = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ids: dict[Token, int] = {}
        for i, tok in enumerate(self.tokens):
            if tok in ids:
                raise TokenizerError(f"token {tok!r} appears twice in the vocabulary")
            ids[tok] = i
        for b in range(256):
            if bytes([b]) not in ids:
                raise TokenizerError(f"byte token {b:#04x} missing from vocabulary")
        ranks: dict[tuple[int, int], tuple[int, int]] = {}
        for rank, (left, right) in enumerate(self.merges):
            for part in (left, right, left + right):
                if part not in ids:
                    raise TokenizerError(f"merge {rank} refers to unknown token {part!r}")
            ranks.setdefault((ids[left], ids[right]), (rank, ids[left + right]))
        object.__setattr__(self, "_ids", ids)
        object.__setattr__(self, "_ranks", ranks)
        object.__setattr__(self, "_cache", {})

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    @property
    def specials(self) -> dict[str, int]:
        return {t: self._ids[t] for t in SPECIAL_TOKENS if t in self._ids}

    def token_id(self, token: Token) -> int:
        return self._ids[token]

    def _encode_chunk(self, chunk: bytes) -> tuple[int, ...]:
        cached = self._cache.get(chunk)
        if cached is not None:
            return cached
        ids = self._ids
        seq = [ids[chunk[i : i + 1]] for i in range(len(chunk))]
        ranks = self._ranks
        while len(seq) > 1:
            best = None
            for pair in zip(seq, seq[1:]):
                hit = ranks.get(pair)
                if hit is not None and (best is None or hit[0] < best[1][0]):
                    best = (pair, hit)
            if best is None:
                break
            (left, right), (_, merged) = best
            out = []
            i = 0
            while i < len(seq):
                if i + 1 < len(seq) and seq[i] == left and seq[i + 1] == right:
                    out.append(merged)
                    i += 2
                else:
                    out.append(seq[i])
                    i += 1
            seq = out
        result = tuple(seq)
        self._cache[chunk] = result
        return result

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(_vocab_json(self).encode("utf-8"))
        digest.update(_merges_txt(self).encode("utf-8"))
        return "bpe-v1:" + digest.hexdigest()[:16]


def split_chunks(text: str) -> list[str]:
    return _CHUNK_RE.findall(text)


def byte_level_tokenizer() -> TokenizerModel:
    return TokenizerModel(SPECIAL_TOKENS + tuple(bytes([b]) for b in range(256)), ())


def _pairs(seq: Sequence[int]) -> Iterable[tuple[int, int]]:
    return zip(seq, seq[1:])


def train_bpe(corpus: Sequence[str], vocab_size: int) -> TokenizerModel:
    """Learn merges greedily by pair frequency.

    Each step merges the most frequent adjacent pair; ties go to the pair
    whose ``(left_bytes, right_bytes)`` is lexicographically smallest.
    Training stops at ``vocab_size`` entries or when no pair occurs twice.
    """
    base = len(SPECIAL_TOKENS) + 256
    if vocab_size <= base:
        raise TokenizerConfigError(f"vocab_size must exceed {base}, got {vocab_size}")
    if vocab_size > MAX_VOCAB:
        raise TokenizerConfigError(f"vocab_size above {MAX_VOCAB} is out of scope")
    if not corpus:
        raise TokenizerConfigError("training corpus is empty")

    tokens: list[Token] = list(byte_level_tokenizer().tokens)
    ids: dict[Token, int] = {t: i for i, t in enumerate(tokens)}
    chunk_freq = Counter(
        chunk.encode("utf-8") for text in corpus for chunk in split_chunks(text)
    )
    words = [[ids[c[i : i + 1]] for i in range(len(c))] for c in sorted(chunk_freq)]
    freqs = [chunk_freq[c] for c in sorted(chunk_freq)]

    counts: Counter = Counter()
    where: dict[tuple[int, int], set[int]] = defaultdict(set)
    for w, seq in enumerate(words):
        for pair in _pairs(seq):
            counts[pair] += freqs[w]
            where[pair].add(w)

    def key(pair: tuple[int, int]) -> tuple:
        return (-counts[pair], tokens[pair[0]], tokens[pair[1]], pair)

    heap = [key(p) for p in counts]
    heapq.heapify(heap)
    merges: list[tuple[bytes, bytes]] = []

    while len(tokens) < vocab_size and heap:
        neg, _, _, pair = heapq.heappop(heap)
        if -neg != counts.get(pair, 0):
            continue  # stale entry
        if -neg < 2:
            break
        left, right = tokens[pair[0]], tokens[pair[1]]
        merged_bytes = left + right
        merged = ids.get(merged_bytes)
        if merged is None:
            merged = len(tokens)
            tokens.append(merged_bytes)
            ids[merged_bytes] = merged
        merges.append((left, right))

        touched: set[tuple[int, int]] = set()
        for w in sorted(where.pop(pair, ())):
            seq = words[w]
            for p in _pairs(seq):
                counts[p] -= freqs[w]
                touched.add(p)
            out = []
            i = 0
            while i < len(seq):
                if i + 1 < len(seq) and seq[i] == pair[0] and seq[i + 1] == pair[1]:
                    out.append(merged)
                    i += 2
                else:
                    out.append(seq[i])
                    i += 1
            words[w] = out
            for p in _pairs(out):
                counts[p] += freqs[w]
                where[p].add(w)
                touched.add(p)
        for p in touched:
            if counts[p] <= 0:
                del counts[p]
            else:
                heapq.heappush(heap, key(p))

    return TokenizerModel(tuple(tokens), tuple(merges))


def tokenize(model: TokenizerModel, text: str) -> list[int]:
    out: list[int] = []
    for chunk in split_chunks(text):
        out.extend(model._encode_chunk(chunk.encode("utf-8")))
    return out


def detokenize(model: TokenizerModel, ids: Iterable[int]) -> str:
    """Concatenate token bytes and decode; special tokens contribute nothing."""
    buf = bytearray()
    size = model.vocab_size
    for i in ids:
        if not 0 <= i < size:
            raise TokenizerError(f"token id {i} out of range [0, {size})")
        tok = model.tokens[i]
        if isinstance(tok, bytes):
            buf += tok
    return buf.decode("utf-8", errors="replace")


def token_efficiency_ratio(model: TokenizerModel, hyp_text: str, ref_text: str) -> float:
    """Hypothesis token count over reference token count under one model."""
    from mdocr.metrics import UndefinedMetricError

    ref_len = len(tokenize(model, ref_text))
    if ref_len == 0:
        raise UndefinedMetricError("reference text produced no tokens")
    return len(tokenize(model, hyp_text)) / ref_len


def compression_ratio(model_a: TokenizerModel, model_b: TokenizerModel, corpus: Sequence[str]) -> float:
    """How many ``model_b`` tokens one ``model_a`` token is worth, corpus-summed."""
    if not corpus:
        raise TokenizerError("corpus is empty")
    total_a = sum(len(tokenize(model_a, s)) for s in corpus)
    total_b = sum(len(tokenize(model_b, s)) for s in corpus)
    if total_a == 0 or total_b == 0:
        raise TokenizerError("corpus produced no tokens")
    return total_b / total_a


@dataclass(frozen=True)
class ContextSpec:
    model_name: str
    max_decoder_tokens: int
    compression_ratio_vs_base: float = 1.0

    def __post_init__(self) -> None:
        if self.max_decoder_tokens <= 0:
            raise ValueError("max_decoder_tokens must be positive")
        if not self.compression_ratio_vs_base > 0:
            raise ValueError("compression_ratio_vs_base must be positive")


def effective_context(spec: ContextSpec) -> int:
    """Decoder capacity expressed in base-tokenizer tokens."""
    return math.floor(spec.max_decoder_tokens * spec.compression_ratio_vs_base)


# --------------------------------------------------------------------------
# persistence


def _vocab_json(model: TokenizerModel) -> str:
    lines = []
    for i, tok in enumerate(model.tokens):
        name = tok if isinstance(tok, str) else escape_token(tok)
        lines.append(f"  {json.dumps(name, ensure_ascii=False)}: {i}")
    return "{\n" + ",\n".join(lines) + "\n}\n"


def _merges_txt(model: TokenizerModel) -> str:
    rows = [MERGES_HEADER] + [f"{escape_token(a)} {escape_token(b)}" for a, b in model.merges]
    return "\n".join(rows) + "\n"


def save_tokenizer(model: TokenizerModel, path: Union[str, Path]) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "vocab.json").write_text(_vocab_json(model), encoding="utf-8")
    (path / "merges.txt").write_text(_merges_txt(model), encoding="utf-8")


_KEY_LINE_RE = re.compile(r'^\s*("(?:[^"\\]|\\.)*")\s*:')


def _key_lines(text: str) -> dict[str, list[int]]:
    found: dict[str, list[int]] = defaultdict(list)
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _KEY_LINE_RE.match(line)
        if m:
            found[json.loads(m.group(1))].append(lineno)
    return found


def load_tokenizer(path: Union[str, Path]) -> TokenizerModel:
    path = Path(path)
    vocab_path, merges_path = path / "vocab.json", path / "merges.txt"
    for p in (vocab_path, merges_path):
        if not p.is_file():
            raise TokenizerFormatError(p, None, "file not found")

    text = vocab_path.read_text(encoding="utf-8")
    lines = _key_lines(text)
    try:
        pairs = json.loads(text, object_pairs_hook=list)
    except json.JSONDecodeError as exc:
        raise TokenizerFormatError(vocab_path, exc.lineno, exc.msg) from exc
    if not isinstance(pairs, list):
        raise TokenizerFormatError(vocab_path, 1, "expected a JSON object")

    by_id: dict[int, Token] = {}
    seen: dict[str, int] = {}
    for name, idx in pairs:
        occ = seen.get(name, 0)
        seen[name] = occ + 1
        where = lines.get(name, [])
        lineno = where[occ] if occ < len(where) else None
        if occ:
            raise TokenizerFormatError(vocab_path, lineno, f"duplicate token {name!r}")
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
            raise TokenizerFormatError(vocab_path, lineno, f"invalid id {idx!r} for {name!r}")
        if idx in by_id:
            raise TokenizerFormatError(vocab_path, lineno, f"duplicate id {idx}")
        if name in SPECIAL_TOKENS:
            tok: Token = name
        else:
            try:
                tok = unescape_token(name)
            except ValueError as exc:
                raise TokenizerFormatError(vocab_path, lineno, str(exc)) from exc
            if not tok:
                raise TokenizerFormatError(vocab_path, lineno, "empty token")
        by_id[idx] = tok
    if sorted(by_id) != list(range(len(by_id))):
        missing = next(i for i in range(len(by_id) + 1) if i not in by_id)
        raise TokenizerFormatError(vocab_path, None, f"ids are not dense: {missing} missing")
    tokens = tuple(by_id[i] for i in range(len(by_id)))
    known = {t for t in tokens if isinstance(t, bytes)}
    if len(known) != sum(isinstance(t, bytes) for t in tokens):
        raise TokenizerFormatError(vocab_path, None, "two entries decode to the same bytes")
    for b in range(256):
        if bytes([b]) not in known:
            raise TokenizerFormatError(vocab_path, None, f"byte token \\x{b:02x} missing")

    merges: list[tuple[bytes, bytes]] = []
    merge_lines = merges_path.read_text(encoding="utf-8").splitlines()
    if not merge_lines or merge_lines[0].strip() != MERGES_HEADER:
        raise TokenizerFormatError(merges_path, 1, f"first line must be {MERGES_HEADER!r}")
    for lineno, line in enumerate(merge_lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise TokenizerFormatError(merges_path, lineno, "expected two space-separated tokens")
        try:
            left, right = (unescape_token(p) for p in parts)
        except ValueError as exc:
            raise TokenizerFormatError(merges_path, lineno, str(exc)) from exc
        for part in (left, right, left + right):
            if part not in known:
                raise TokenizerFormatError(
                    merges_path, lineno, f"token {escape_token(part)!r} is not in the vocabulary"
                )
        merges.append((left, right))
    return TokenizerModel(tokens, tuple(merges))
