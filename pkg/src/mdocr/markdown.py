"""Block-level Markdown AST, canonical serializer and Structure Accuracy.

Only a fixed subset is recognised: ATX headings, ``-``/``*``/``1.`` list
items (two spaces of indentation per nesting level), ``>`` blockquotes and
paragraphs separated by blank lines. Inline ``**bold**`` and ``*italic*``
spans are kept as annotations on the block text. Anything else degrades to
a paragraph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Union

from mdocr import kernels

PLAIN = "plain"
BOLD = "bold"
ITALIC = "italic"
_STYLES = (PLAIN, BOLD, ITALIC)

BULLET = "bullet"
ORDERED = "ordered"


class InputEncodingError(ValueError):
    """Raised when Markdown input is not valid UTF-8."""


@dataclass(frozen=True)
class Span:
    text: str
    style: str = PLAIN

    def __post_init__(self) -> None:
        if self.style not in _STYLES:
            raise ValueError(f"unknown span style {self.style!r}")


@dataclass(frozen=True)
class Inline:
    """Inline text as a tuple of styled spans.

    Construct through :func:`make_inline` to get the normal form: whitespace
    collapsed, emphasis spans trimmed, adjacent same-style spans merged.
    """

    spans: tuple[Span, ...] = ()

    @property
    def text(self) -> str:
        return "".join(s.text for s in self.spans)

    def __str__(self) -> str:
        return self.text


def make_inline(spans: Union[str, Iterable[Span]]) -> Inline:
    if isinstance(spans, str):
        spans = [Span(spans)]
    # collapse whitespace across span boundaries
    pieces: list[list] = []
    prev_space = True
    for span in spans:
        out = []
        for ch in span.text:
            if ch.isspace():
                if not prev_space:
                    out.append(" ")
                prev_space = True
            else:
                out.append(ch)
                prev_space = False
        pieces.append([span.style, "".join(out)])
    # move edge spaces out of emphasis spans
    flat: list[list] = []
    for style, text in pieces:
        if not text:
            continue
        if style != PLAIN:
            core = text.strip(" ")
            if not core:
                flat.append([PLAIN, text])
                continue
            if text.startswith(" "):
                flat.append([PLAIN, " "])
            flat.append([style, core])
            if text.endswith(" "):
                flat.append([PLAIN, " "])
        else:
            flat.append([style, text])
    merged: list[list] = []
    for style, text in flat:
        if merged and merged[-1][0] == style:
            if style == PLAIN and merged[-1][1].endswith(" ") and text.startswith(" "):
                text = text[1:]
            merged[-1][1] += text
        else:
            if style == PLAIN and merged and text.startswith(" ") and merged[-1][1].endswith(" "):
                text = text[1:]
            if text:
                merged.append([style, text])
    if merged and merged[-1][0] == PLAIN:
        merged[-1][1] = merged[-1][1].rstrip(" ")
    if merged and merged[0][0] == PLAIN:
        merged[0][1] = merged[0][1].lstrip(" ")
    return Inline(tuple(Span(t, s) for s, t in merged if t))


@dataclass(frozen=True)
class Heading:
    level: int
    inline: Inline

    def __post_init__(self) -> None:
        if not 1 <= self.level <= 6:
            raise ValueError(f"heading level must be in [1, 6], got {self.level}")


@dataclass(frozen=True)
class Paragraph:
    inline: Inline


@dataclass(frozen=True)
class ListItem:
    kind: str
    depth: int
    inline: Inline

    def __post_init__(self) -> None:
        if self.kind not in (BULLET, ORDERED):
            raise ValueError(f"unknown list kind {self.kind!r}")
        if self.depth < 0:
            raise ValueError("list depth must be >= 0")


@dataclass(frozen=True)
class Blockquote:
    inline: Inline


Block = Union[Heading, Paragraph, ListItem, Blockquote]


@dataclass(frozen=True)
class MarkdownDoc:
    blocks: tuple[Block, ...] = ()

    def __post_init__(self) -> None:
        prev_depth = -1
        for block in self.blocks:
            if isinstance(block, ListItem):
                if block.depth > prev_depth + 1:
                    raise ValueError(
                        f"list depth jumps from {max(prev_depth, 0)} to {block.depth}"
                    )
                prev_depth = block.depth
            else:
                prev_depth = -1

    def __len__(self) -> int:
        return len(self.blocks)


def heading(level: int, text: str) -> Heading:
    return Heading(level, make_inline(text))


def paragraph(text: str) -> Paragraph:
    return Paragraph(make_inline(text))


def list_item(kind: str, depth: int, text: str) -> ListItem:
    return ListItem(kind, depth, make_inline(text))


def blockquote(text: str) -> Blockquote:
    return Blockquote(make_inline(text))


# --------------------------------------------------------------------------
# parsing

_HEADING_RE = re.compile(r"^(#{1,6})[ \t]+(.*?)[ \t]*$")
_LIST_RE = re.compile(r"^( *)([-*]|\d{1,9}[.])[ \t]+(.*)$")
_QUOTE_RE = re.compile(r"^ {0,3}>[ \t]?(.*)$")
_ESCAPABLE = frozenset("\\`*_{}[]()#+-.!>|~")


def _parse_inline(text: str) -> Inline:
    spans: list[Span] = []
    buf: list[str] = []
    i, n = 0, len(text)

    def flush() -> None:
        if buf:
            spans.append(Span("".join(buf)))
            buf.clear()

    while i < n:
        ch = text[i]
        if ch == "\\" and i + 1 < n and text[i + 1] in _ESCAPABLE:
            buf.append(text[i + 1])
            i += 2
            continue
        if ch == "*":
            width = 2 if text.startswith("**", i) else 1
            found = _find_closer(text, i + width, width)
            if found is not None:
                flush()
                inner = _unescape(text[i + width : found])
                spans.append(Span(inner, BOLD if width == 2 else ITALIC))
                i = found + width
                continue
        buf.append(ch)
        i += 1
    flush()
    return make_inline(spans)


def _find_closer(text: str, start: int, width: int) -> int | None:
    n = len(text)
    if start >= n or text[start].isspace() or text[start] == "*":
        return None
    j = start
    while j < n:
        ch = text[j]
        if ch == "\\" and j + 1 < n and text[j + 1] in _ESCAPABLE:
            j += 2
            continue
        if ch == "*":
            run = 1
            while j + run < n and text[j + run] == "*":
                run += 1
            if run >= width and not text[j - 1].isspace():
                return j
            return None
        j += 1
    return None


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text) and text[i + 1] in _ESCAPABLE:
            out.append(text[i + 1])
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def parse_markdown(text: Union[str, bytes]) -> MarkdownDoc:
    """Parse Markdown text into a :class:`MarkdownDoc`.

    Bytes are decoded as strict UTF-8. Strings containing lone surrogates are
    rejected the same way.

    Raises:
        InputEncodingError: if the input is not valid UTF-8.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputEncodingError(f"invalid UTF-8 at byte {exc.start}") from exc
    else:
        try:
            text.encode("utf-8")
        except UnicodeEncodeError as exc:
            raise InputEncodingError(f"unencodable code point at index {exc.start}") from exc

    blocks: list[Block] = []
    para: list[str] = []
    quote: list[str] = []
    list_depth = -1

    def flush() -> None:
        if para:
            blocks.append(Paragraph(_parse_inline(" ".join(para))))
            para.clear()
        if quote:
            blocks.append(Blockquote(_parse_inline(" ".join(quote))))
            quote.clear()

    for raw in text.splitlines():
        line = raw.replace("\t", "    ").rstrip()
        if not line.strip():
            flush()
            continue
        m = _QUOTE_RE.match(line)
        if m:
            if para:
                flush()
            quote.append(m.group(1))
            list_depth = -1
            continue
        if quote:
            flush()
        m = _HEADING_RE.match(line.lstrip(" ")) if len(line) - len(line.lstrip(" ")) < 4 else None
        if m and m.group(2):
            flush()
            blocks.append(Heading(len(m.group(1)), _parse_inline(m.group(2))))
            list_depth = -1
            continue
        m = _LIST_RE.match(line)
        if m and m.group(3).strip():
            flush()
            depth = min(len(m.group(1)) // 2, list_depth + 1)
            kind = ORDERED if m.group(2)[0].isdigit() else BULLET
            blocks.append(ListItem(kind, depth, _parse_inline(m.group(3))))
            list_depth = depth
            continue
        para.append(line.strip())
        list_depth = -1
    flush()
    # blocks whose text vanished under normalisation carry no structure
    return MarkdownDoc(tuple(b for b in blocks if b.inline.spans or not isinstance(b, Paragraph)))


# --------------------------------------------------------------------------
# serialization


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("*", "\\*")


def _serialize_inline(inline: Inline, *, at_line_start: bool) -> str:
    parts = []
    for span in inline.spans:
        body = _escape(span.text)
        if span.style == BOLD:
            body = f"**{body}**"
        elif span.style == ITALIC:
            body = f"*{body}*"
        parts.append(body)
    out = "".join(parts)
    if at_line_start and out:
        if out[0] in "#>-+" or re.match(r"\d{1,9}[.]", out):
            m = re.match(r"\d{1,9}", out)
            if m and out[0].isdigit():
                out = out[: m.end()] + "\\" + out[m.end() :]
            else:
                out = "\\" + out
    return out


def _serialize_block(block: Block) -> str:
    if isinstance(block, Heading):
        return "#" * block.level + " " + _serialize_inline(block.inline, at_line_start=False)
    if isinstance(block, ListItem):
        marker = "-" if block.kind == BULLET else "1."
        return "  " * block.depth + marker + " " + _serialize_inline(block.inline, at_line_start=False)
    if isinstance(block, Blockquote):
        return "> " + _serialize_inline(block.inline, at_line_start=False)
    return _serialize_inline(block.inline, at_line_start=True)


def serialize_markdown(doc: MarkdownDoc) -> str:
    """Render *doc* in canonical form.

    Blocks are separated by a blank line, except consecutive list items which
    are separated by a single newline. Non-empty output ends with a newline.
    """
    if not doc.blocks:
        return ""
    out: list[str] = []
    prev: Block | None = None
    for block in doc.blocks:
        if prev is not None:
            out.append("\n" if isinstance(prev, ListItem) and isinstance(block, ListItem) else "\n\n")
        out.append(_serialize_block(block))
        prev = block
    out.append("\n")
    return "".join(out)


# --------------------------------------------------------------------------
# structure


class StructTag(IntEnum):
    H1 = 1
    H2 = 2
    H3 = 3
    H4 = 4
    H5 = 5
    H6 = 6
    BULLET_ITEM = 7
    ORDERED_ITEM = 8
    BLOCKQUOTE = 9
    PARAGRAPH = 10


class StructSeq(tuple):
    """Ordered block tags of a document (a tuple of :class:`StructTag`)."""

    __slots__ = ()

    def __new__(cls, tags: Iterable[StructTag] = ()):
        return super().__new__(cls, (StructTag(t) for t in tags))

    @property
    def tags(self) -> tuple[StructTag, ...]:
        return tuple(self)

    def __repr__(self) -> str:
        return "StructSeq([" + ", ".join(t.name for t in self) + "])"


def block_tag(block: Block) -> StructTag:
    if isinstance(block, Heading):
        return StructTag(block.level)
    if isinstance(block, ListItem):
        return StructTag.BULLET_ITEM if block.kind == BULLET else StructTag.ORDERED_ITEM
    if isinstance(block, Blockquote):
        return StructTag.BLOCKQUOTE
    return StructTag.PARAGRAPH


def extract_structure(doc: MarkdownDoc) -> StructSeq:
    return StructSeq(block_tag(b) for b in doc.blocks)


def structure_accuracy(pred: StructSeq, ref: StructSeq) -> float:
    """Normalised Levenshtein similarity between two tag sequences.

    ``1 - editdist(pred, ref) / max(len(pred), len(ref))``, and 1.0 when both
    are empty. List depth and inline text do not contribute.
    """
    return kernels.int_similarity(pred, ref)
