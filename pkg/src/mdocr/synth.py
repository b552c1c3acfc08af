"""Paired page/Markdown dataset synthesis from local HTML documents.

HTML (a fixed tag subset) is converted to a :class:`MarkdownDoc`, packed
greedily into pages under a character budget, and written out as Markdown
and HTML page files plus a ``manifest.jsonl`` index. An optional external
command renders each page's HTML to an image.
"""

from __future__ import annotations

import html as html_lib
import json
import logging
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Optional, Sequence

from mdocr.markdown import (
    BOLD,
    BULLET,
    ITALIC,
    ORDERED,
    PLAIN,
    Block,
    Blockquote,
    Heading,
    Inline,
    ListItem,
    MarkdownDoc,
    Paragraph,
    Span,
    make_inline,
    serialize_markdown,
)

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
MANIFEST_FIELDS = ("id", "page_index", "markdown", "image", "source")
DEFAULT_MAX_CHARS = 1800
MIN_MAX_CHARS = 200

_VOID = frozenset("area base br col embed hr img input link meta param source track wbr".split())
_DROPPED = frozenset({"script", "style", "head", "title"})
_HEADINGS = {f"h{k}": k for k in range(1, 7)}


class HTMLParseError(ValueError):
    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} at byte {byte_offset}")
        self.byte_offset = byte_offset


class RenderConfigError(ValueError):
    """The renderer command template is unusable."""


class RenderError(RuntimeError):
    def __init__(self, message: str, exit_code: Optional[int] = None):
        super().__init__(message)
        self.exit_code = exit_code


class ManifestError(ValueError):
    pass


class SynthIOError(OSError):
    """Writing the dataset failed; ``written`` lists files already produced."""

    def __init__(self, message: str, written: Sequence[Path]):
        super().__init__(f"{message} ({len(written)} files written before the failure)")
        self.written = list(written)


# --------------------------------------------------------------------------
# HTML -> MarkdownDoc


@dataclass
class _Node:
    tag: str
    offset: int
    children: list = field(default_factory=list)


class _TreeBuilder(HTMLParser):
    def __init__(self, source: str):
        super().__init__(convert_charrefs=True)
        self.source = source
        self.root = _Node("#root", 0)
        self.stack = [self.root]
        starts = [0]
        for i, ch in enumerate(source):
            if ch == "\n":
                starts.append(i + 1)
        self._line_starts = starts

    def byte_offset(self) -> int:
        line, col = self.getpos()
        char = self._line_starts[line - 1] + col
        return len(self.source[:char].encode("utf-8"))

    def handle_starttag(self, tag, attrs):
        node = _Node(tag, self.byte_offset())
        self.stack[-1].children.append(node)
        if tag not in _VOID:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self.stack[-1].children.append(_Node(tag, self.byte_offset()))

    def handle_endtag(self, tag):
        if tag in _VOID:
            return
        top = self.stack[-1]
        if len(self.stack) == 1:
            raise HTMLParseError(f"unexpected closing tag </{tag}>", self.byte_offset())
        if top.tag != tag:
            raise HTMLParseError(
                f"closing tag </{tag}> does not match open <{top.tag}>", self.byte_offset()
            )
        self.stack.pop()

    def handle_data(self, data):
        self.stack[-1].children.append(data)


def _parse_html(source: str) -> _Node:
    builder = _TreeBuilder(source)
    builder.feed(source)
    builder.close()
    if len(builder.stack) > 1:
        node = builder.stack[-1]
        raise HTMLParseError(f"unclosed tag <{node.tag}>", node.offset)
    return builder.root


def _style_for(tag: str, style: str) -> str:
    if tag in ("strong", "b"):
        return BOLD
    if tag in ("em", "i") and style != BOLD:
        return ITALIC
    return style


def _gather(node, style: str, out: list[Span]) -> None:
    if isinstance(node, str):
        out.append(Span(node, style))
        return
    if node.tag in _DROPPED:
        return
    if node.tag == "br":
        out.append(Span(" ", PLAIN))
        return
    for child in node.children:
        _gather(child, _style_for(node.tag, style), out)
    if node.tag in _HEADINGS or node.tag in ("p", "li", "blockquote"):
        out.append(Span(" ", PLAIN))


class _Converter:
    def __init__(self) -> None:
        self.blocks: list[Block] = []
        self.pending: list[Span] = []
        self.last_depth = -1

    def emit(self, block: Block) -> None:
        if not block.inline.spans:
            return
        if isinstance(block, ListItem):
            depth = min(block.depth, self.last_depth + 1)
            block = ListItem(block.kind, depth, block.inline)
            self.last_depth = depth
        else:
            self.last_depth = -1
        self.blocks.append(block)

    def flush(self, quote: bool) -> None:
        if self.pending:
            inline = make_inline(self.pending)
            self.pending = []
            self.emit(Blockquote(inline) if quote else Paragraph(inline))

    def block_inline(self, node: _Node, style: str, skip_lists: bool = False) -> Inline:
        spans: list[Span] = []
        for child in node.children:
            if skip_lists and isinstance(child, _Node) and child.tag in ("ul", "ol"):
                continue
            _gather(child, _style_for(node.tag, style), spans)
        return make_inline(spans)

    def walk(self, node, style: str, quote: bool, list_kind: str, depth: int) -> None:
        if isinstance(node, str):
            self.pending.append(Span(node, style))
            return
        tag = node.tag
        if tag in _DROPPED:
            return
        if tag == "br":
            self.pending.append(Span(" ", PLAIN))
            return
        if tag in _HEADINGS or tag == "p":
            self.flush(quote)
            inline = self.block_inline(node, style)
            if quote:
                self.emit(Blockquote(inline))
            elif tag == "p":
                self.emit(Paragraph(inline))
            else:
                self.emit(Heading(_HEADINGS[tag], inline))
            return
        if tag in ("ul", "ol"):
            self.flush(quote)
            kind = ORDERED if tag == "ol" else BULLET
            for child in node.children:
                if isinstance(child, _Node) and child.tag == "li":
                    self.walk_item(child, style, quote, kind, depth)
                else:
                    self.walk(child, style, quote, kind, depth)
            self.flush(quote)
            return
        if tag == "li":
            self.flush(quote)
            self.walk_item(node, style, quote, list_kind, depth)
            return
        if tag == "blockquote":
            self.flush(quote)
            for child in node.children:
                self.walk(child, style, True, list_kind, depth)
            self.flush(True)
            return
        inner = _style_for(tag, style)
        for child in node.children:
            self.walk(child, inner, quote, list_kind, depth)

    def walk_item(self, node: _Node, style: str, quote: bool, kind: str, depth: int) -> None:
        inline = self.block_inline(node, style, skip_lists=True)
        self.emit(Blockquote(inline) if quote else ListItem(kind, depth, inline))
        for child in node.children:
            if isinstance(child, _Node) and child.tag in ("ul", "ol"):
                self.walk(child, style, quote, kind, depth + 1)


def html_to_markdown(html: str) -> MarkdownDoc:
    """Convert an HTML fragment to a :class:`MarkdownDoc`.

    ``h1``-``h6``, ``p``, ``ul``/``ol``/``li``, ``blockquote``, ``em``/``i``,
    ``strong``/``b`` and ``br`` are mapped; other tags are unwrapped, except
    ``script``, ``style``, ``head`` and ``title`` whose content is dropped.
    Inside a blockquote every block becomes a blockquote block.

    Raises:
        HTMLParseError: on unbalanced tags, with the byte offset of the fault.
    """
    root = _parse_html(html)
    conv = _Converter()
    conv.walk(root, PLAIN, False, BULLET, 0)
    conv.flush(False)
    return MarkdownDoc(tuple(conv.blocks))


# --------------------------------------------------------------------------
# Markdown page -> HTML (input for the external renderer)


def _inline_html(inline: Inline) -> str:
    out = []
    for span in inline.spans:
        text = html_lib.escape(span.text, quote=False)
        if span.style == BOLD:
            text = f"<strong>{text}</strong>"
        elif span.style == ITALIC:
            text = f"<em>{text}</em>"
        out.append(text)
    return "".join(out)


def page_to_html(doc: MarkdownDoc, lang: str = "ar") -> str:
    body: list[str] = []
    open_lists: list[str] = []

    def close_lists(to_depth: int) -> None:
        while len(open_lists) > to_depth:
            body.append(f"</li></{open_lists.pop()}>")

    for block in doc.blocks:
        if isinstance(block, ListItem):
            tag = "ol" if block.kind == ORDERED else "ul"
            if len(open_lists) > block.depth + 1:
                close_lists(block.depth + 1)
            if len(open_lists) == block.depth + 1:
                if open_lists[-1] != tag:
                    close_lists(block.depth)
                else:
                    body.append("</li>")
            if len(open_lists) == block.depth:
                body.append(f"<{tag}>")
                open_lists.append(tag)
            body.append(f"<li>{_inline_html(block.inline)}")
            continue
        close_lists(0)
        if isinstance(block, Heading):
            body.append(f"<h{block.level}>{_inline_html(block.inline)}</h{block.level}>")
        elif isinstance(block, Blockquote):
            body.append(f"<blockquote><p>{_inline_html(block.inline)}</p></blockquote>")
        else:
            body.append(f"<p>{_inline_html(block.inline)}</p>")
    close_lists(0)
    return (
        f'<!DOCTYPE html>\n<html lang="{lang}" dir="rtl">\n<head><meta charset="utf-8"></head>\n'
        "<body>\n" + "\n".join(body) + "\n</body>\n</html>\n"
    )


# --------------------------------------------------------------------------
# pagination


@dataclass(frozen=True)
class PageBudget:
    max_chars: int = DEFAULT_MAX_CHARS

    def __post_init__(self) -> None:
        if self.max_chars < MIN_MAX_CHARS:
            raise ValueError(f"max_chars must be >= {MIN_MAX_CHARS}, got {self.max_chars}")


def _units(blocks: Sequence[Block]) -> list[list[Block]]:
    # nested list items stay with the item above them so pages never start mid-nesting
    units: list[list[Block]] = []
    for block in blocks:
        if isinstance(block, ListItem) and block.depth > 0 and units:
            units[-1].append(block)
        else:
            units.append([block])
    return units


def paginate(doc: MarkdownDoc, budget: PageBudget = PageBudget()) -> list[MarkdownDoc]:
    """Greedily pack whole blocks into pages of at most ``max_chars``.

    A page closes when the next block would push its serialized length over
    the budget; an oversized block gets a page of its own.
    """
    pages: list[MarkdownDoc] = []
    current: list[Block] = []
    for unit in _units(doc.blocks):
        candidate = current + unit
        if current and len(serialize_markdown(MarkdownDoc(tuple(candidate)))) > budget.max_chars:
            pages.append(MarkdownDoc(tuple(current)))
            current = list(unit)
        else:
            current = candidate
    if current:
        pages.append(MarkdownDoc(tuple(current)))
    return pages


def join_pages(pages: Sequence[MarkdownDoc]) -> str:
    """Serialized pages joined by a blank line."""
    return "\n".join(serialize_markdown(p) for p in pages)


# --------------------------------------------------------------------------
# rendering and manifests


def _check_template(cmd_template: str) -> list[str]:
    for placeholder in ("{html}", "{png}"):
        if placeholder not in cmd_template:
            raise RenderConfigError(f"render command template lacks {placeholder}")
    argv = shlex.split(cmd_template)
    if not argv:
        raise RenderConfigError("render command template is empty")
    return argv


def render_page(page_html: Path, cmd_template: str, png_path: Optional[Path] = None) -> Path:
    """Run the external renderer on one page and return the image path.

    Placeholders are substituted per argument after shell-style splitting;
    the command is executed without a shell.
    """
    argv = _check_template(cmd_template)
    page_html = Path(page_html)
    png_path = Path(png_path) if png_path is not None else page_html.with_suffix(".png")
    argv = [a.replace("{html}", str(page_html)).replace("{png}", str(png_path)) for a in argv]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True)
    except OSError as exc:
        raise RenderError(f"cannot run renderer {argv[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        raise RenderError(
            f"renderer exited with status {proc.returncode}: {proc.stderr.strip()[:200]}",
            proc.returncode,
        )
    if not png_path.is_file() or png_path.stat().st_size == 0:
        raise RenderError(f"renderer produced no output at {png_path}", proc.returncode)
    return png_path


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    page_index: int
    markdown: str
    image_path: Optional[str] = None
    source: Optional[str] = None

    def to_json(self) -> str:
        row = {
            "id": self.id,
            "page_index": self.page_index,
            "markdown": self.markdown,
            "image": self.image_path,
            "source": self.source,
        }
        return json.dumps(row, ensure_ascii=False)


def page_id(doc_id: str, page_index: int) -> str:
    return f"{doc_id}-{page_index:04d}"


def validate_manifest(entries: Sequence[ManifestEntry]) -> None:
    """Check id uniqueness, non-empty Markdown and gapless page indices."""
    seen: set[str] = set()
    pages: dict[Optional[str], list[int]] = {}
    for e in entries:
        if e.id in seen:
            raise ManifestError(f"duplicate id {e.id!r}")
        seen.add(e.id)
        if not e.markdown:
            raise ManifestError(f"entry {e.id!r} has empty markdown")
        pages.setdefault(e.source, []).append(e.page_index)
    for source, indices in pages.items():
        if sorted(indices) != list(range(len(indices))):
            raise ManifestError(f"page indices of {source!r} are not contiguous from 0")


def read_manifest(path: Path) -> list[ManifestEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(row, dict) or set(row) != set(MANIFEST_FIELDS):
                raise ManifestError(f"{path}:{lineno}: fields must be exactly {MANIFEST_FIELDS}")
            if not isinstance(row["id"], str) or not isinstance(row["markdown"], str):
                raise ManifestError(f"{path}:{lineno}: id and markdown must be strings")
            if not isinstance(row["page_index"], int) or row["page_index"] < 0:
                raise ManifestError(f"{path}:{lineno}: page_index must be a non-negative integer")
            entries.append(
                ManifestEntry(row["id"], row["page_index"], row["markdown"], row["image"], row["source"])
            )
    return entries


def write_manifest(entries: Sequence[ManifestEntry], path: Path) -> None:
    Path(path).write_text("".join(e.to_json() + "\n" for e in entries), encoding="utf-8")


@dataclass
class SynthResult:
    entries: list[ManifestEntry]
    warnings: list[str]
    manifest_path: Path
    render_failures: int = 0


def build_manifest(
    sources: Sequence[tuple[str, str]],
    out_dir: Path,
    budget: PageBudget = PageBudget(),
    render_cmd: Optional[str] = None,
    workers: int = 1,
    source_names: Optional[dict[str, str]] = None,
) -> SynthResult:
    """Convert, paginate and write every ``(doc_id, html)`` source.

    Writes ``pages/<id>.md``, ``pages/<id>.html``, ``images/<id>.png`` (when a
    renderer is given) and ``manifest.jsonl`` under *out_dir*. Paths in the
    manifest are relative to *out_dir*, so reruns are byte-identical. A
    renderer failure nulls that entry's image and adds a warning.
    """
    doc_ids = [d for d, _ in sources]
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("doc ids must be unique")
    if render_cmd is not None:
        _check_template(render_cmd)
    source_names = source_names or {}
    out_dir = Path(out_dir)
    written: list[Path] = []

    pages: list[tuple[str, int, MarkdownDoc, str]] = []
    for doc_id, html in sorted(sources):
        for index, page in enumerate(paginate(html_to_markdown(html), budget)):
            pages.append((doc_id, index, page, page_id(doc_id, index)))
    ids = [p[3] for p in pages]
    if len(set(ids)) != len(ids):
        raise ValueError("page ids collide; choose doc ids that do not end in -NNNN")

    try:
        (out_dir / "pages").mkdir(parents=True, exist_ok=True)
        if render_cmd is not None:
            (out_dir / "images").mkdir(parents=True, exist_ok=True)
        for _, _, page, pid in pages:
            md_path = out_dir / "pages" / f"{pid}.md"
            md_path.write_text(serialize_markdown(page), encoding="utf-8")
            written.append(md_path)
            html_path = out_dir / "pages" / f"{pid}.html"
            html_path.write_text(page_to_html(page), encoding="utf-8")
            written.append(html_path)
    except OSError as exc:
        raise SynthIOError(f"cannot write pages under {out_dir}: {exc}", written) from exc

    images: dict[str, Optional[str]] = {pid: None for *_, pid in pages}
    warnings: list[str] = []
    failures = 0
    if render_cmd is not None:

        def job(pid: str):
            html_path = out_dir / "pages" / f"{pid}.html"
            png_path = out_dir / "images" / f"{pid}.png"
            try:
                render_page(html_path, render_cmd, png_path)
                return pid, None
            except RenderError as exc:
                return pid, str(exc)

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for pid, error in pool.map(job, ids):
                if error is None:
                    images[pid] = f"images/{pid}.png"
                else:
                    failures += 1
                    warnings.append(f"{pid}: {error}")
                    log.warning("render failed for %s: %s", pid, error)

    entries = [
        ManifestEntry(
            id=pid,
            page_index=index,
            markdown=serialize_markdown(page),
            image_path=images[pid],
            source=source_names.get(doc_id, doc_id),
        )
        for doc_id, index, page, pid in pages
    ]
    validate_manifest(entries)
    manifest_path = out_dir / MANIFEST_NAME
    try:
        write_manifest(entries, manifest_path)
    except OSError as exc:
        raise SynthIOError(f"cannot write {manifest_path}: {exc}", written) from exc
    return SynthResult(entries, warnings, manifest_path, failures)
