import json
import re
import sys
from pathlib import Path

import pytest

from conftest import BOOKS
from mdocr.markdown import (
    BULLET,
    MarkdownDoc,
    StructSeq,
    StructTag,
    extract_structure,
    heading,
    list_item,
    paragraph,
    parse_markdown,
    serialize_markdown,
)
from mdocr.synth import (
    HTMLParseError,
    ManifestEntry,
    ManifestError,
    PageBudget,
    RenderConfigError,
    RenderError,
    build_manifest,
    html_to_markdown,
    join_pages,
    page_to_html,
    paginate,
    read_manifest,
    render_page,
    validate_manifest,
    write_manifest,
)

STUB = """
import sys, pathlib
args = sys.argv[1:]
with open(pathlib.Path(__file__).with_name("calls.log"), "a", encoding="utf-8") as fh:
    fh.write(" ".join(args) + "\\n")
src, dst = args[args.index("--in") + 1], args[args.index("--out") + 1]
if "fail" in pathlib.Path(src).read_text(encoding="utf-8"):
    sys.exit(4)
pathlib.Path(dst).write_bytes(b"PNG" + pathlib.Path(src).read_bytes()[:16])
"""


@pytest.fixture
def stub_renderer(tmp_path):
    script = tmp_path / "stub" / "render.py"
    script.parent.mkdir()
    script.write_text(STUB, encoding="utf-8")
    return f'"{sys.executable}" "{script}" --in {{html}} --out {{png}}', script.parent / "calls.log"


def dom_tags(html: str) -> list[StructTag]:
    """Read block tags straight off the markup of a fixture document."""
    tags = []
    stack: list[str] = []
    for closing, name in re.findall(r"<(/?)([a-z0-9]+)[^>]*>", html):
        if name in ("br",):
            continue
        if closing:
            stack.pop()
            continue
        in_quote = "blockquote" in stack
        if re.fullmatch(r"h[1-6]", name):
            tags.append(StructTag.BLOCKQUOTE if in_quote else StructTag(int(name[1])))
        elif name == "p":
            tags.append(StructTag.BLOCKQUOTE if in_quote else StructTag.PARAGRAPH)
        elif name == "li":
            parent = next(t for t in reversed(stack) if t in ("ul", "ol"))
            tags.append(StructTag.BULLET_ITEM if parent == "ul" else StructTag.ORDERED_ITEM)
        stack.append(name)
    return tags


def test_html_examples():
    assert html_to_markdown("") == MarkdownDoc()
    doc = html_to_markdown("<h1>T</h1><p>x</p>")
    assert doc == MarkdownDoc((heading(1, "T"), paragraph("x")))
    assert serialize_markdown(doc) == "# T\n\nx\n"
    assert html_to_markdown("<ul><li>a</li><li>b</li></ul>") == MarkdownDoc(
        (list_item(BULLET, 0, "a"), list_item(BULLET, 0, "b"))
    )


def test_html_inline_and_unknown_tags():
    doc = html_to_markdown("<div><span>x <strong>b</strong> <i>i</i><br>y</span></div><script>z()</script>")
    assert serialize_markdown(doc) == "x **b** *i* y\n"
    doc = html_to_markdown("<ol><li>one<ul><li>sub</li></ul></li><li>two</li></ol><blockquote><p>a</p><p>b</p></blockquote>")
    assert serialize_markdown(doc) == "1. one\n  - sub\n1. two\n\n> a\n\n> b\n"


@pytest.mark.parametrize(
    "html, offset",
    [("<p>é<b>x</p>", 9), ("<p>x", 0), ("<p>x</p></div>", 8), ("<ul><li>ا</ul>", 10)],
)
def test_unbalanced_html(html, offset):
    with pytest.raises(HTMLParseError) as info:
        html_to_markdown(html)
    assert info.value.byte_offset == offset


def test_structure_matches_dom_for_fixtures():
    books = sorted(BOOKS.glob("*.html"))
    assert len(books) == 10
    for path in books:
        html = path.read_text(encoding="utf-8")
        assert list(extract_structure(html_to_markdown(html))) == dom_tags(html), path.name


def _para(n_chars: int, seed: str) -> str:
    text = (seed + " ") * n_chars
    return text[: n_chars - 1].strip() + "x"


def test_paginate_greedy_by_hand():
    paras = [paragraph(_para(500, f"كلمة{i}")) for i in range(10)]
    assert all(len(serialize_markdown(MarkdownDoc((p,)))) == 501 for p in paras)
    pages = paginate(MarkdownDoc(tuple(paras)), PageBudget(1800))
    assert [len(p) for p in pages] == [3, 3, 3, 1]


def test_paginate_small_doc_single_page():
    doc = html_to_markdown("<h1>T</h1><p>x</p>")
    assert paginate(doc, PageBudget()) == [doc]
    assert paginate(MarkdownDoc(), PageBudget()) == []


def test_paginate_oversized_block_alone():
    big = paragraph(_para(900, "كبير"))
    doc = MarkdownDoc((paragraph("a"), big, paragraph("b")))
    assert [p.blocks for p in paginate(doc, PageBudget(300))] == [(doc.blocks[0],), (big,), (doc.blocks[2],)]


def test_page_budget_minimum():
    with pytest.raises(ValueError):
        PageBudget(199)


@pytest.mark.parametrize("max_chars", [200, 500, 1800, 5000])
def test_pagination_lossless_on_fixtures(max_chars):
    for path in sorted(BOOKS.glob("*.html")):
        doc = html_to_markdown(path.read_text(encoding="utf-8"))
        pages = paginate(doc, PageBudget(max_chars))
        assert parse_markdown(join_pages(pages)) == doc
        for page in pages:
            assert len(serialize_markdown(page)) <= max_chars or len(page) == 1 or page.blocks[1].depth > 0


def test_nested_items_never_start_a_page():
    doc = parse_markdown("- " + "a " * 150 + "\n  - " + "b " * 150 + "\n  - c")
    pages = paginate(doc, PageBudget(200))
    assert len(pages) == 1
    assert parse_markdown(join_pages(pages)) == doc


def test_page_html_is_balanced():
    for path in sorted(BOOKS.glob("*.html"))[:3]:
        doc = html_to_markdown(path.read_text(encoding="utf-8"))
        for page in paginate(doc, PageBudget(600)):
            assert html_to_markdown(page_to_html(page)) == page


def test_manifest_single_page(tmp_path):
    result = build_manifest([("doc", "<h1>T</h1><p>x</p>")], tmp_path)
    assert [e.image_path for e in result.entries] == [None]
    lines = (tmp_path / "manifest.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    row = json.loads(lines[0])
    assert list(row) == ["id", "page_index", "markdown", "image", "source"]
    assert row["markdown"] == "# T\n\nx\n" and row["image"] is None
    assert (tmp_path / "pages" / f"{row['id']}.md").read_text(encoding="utf-8") == row["markdown"]


def test_manifest_counts_pages_per_source(tmp_path):
    two_pages = "".join(f"<p>{_para(150, str(i))}</p>" for i in range(2))
    result = build_manifest([("b", two_pages), ("a", two_pages)], tmp_path, PageBudget(200))
    assert [(e.source, e.page_index) for e in result.entries] == [("a", 0), ("a", 1), ("b", 0), ("b", 1)]
    assert read_manifest(result.manifest_path) == result.entries


def test_renderer_invoked_once_per_page(tmp_path, stub_renderer):
    template, log = stub_renderer
    html = "".join(f"<p>{_para(150, str(i))}</p>" for i in range(3))
    result = build_manifest([("d", html)], tmp_path / "out", PageBudget(200), template)
    calls = log.read_text(encoding="utf-8").splitlines()
    assert len(calls) == len(result.entries) == 3
    for entry in result.entries:
        html_path = tmp_path / "out" / "pages" / f"{entry.id}.html"
        png_path = tmp_path / "out" / "images" / f"{entry.id}.png"
        assert f"--in {html_path} --out {png_path}" in calls
        assert entry.image_path == f"images/{entry.id}.png"
        assert png_path.stat().st_size > 0


def test_renderer_failure_is_a_warning(tmp_path, stub_renderer):
    template, _ = stub_renderer
    result = build_manifest([("ok", "<p>fine</p>"), ("bad", "<p>fail</p>")], tmp_path, render_cmd=template)
    images = {e.id: e.image_path for e in result.entries}
    assert images["bad-0000"] is None and images["ok-0000"] is not None
    assert result.render_failures == 1 and "bad-0000" in result.warnings[0]


def test_render_page_contract(tmp_path):
    page = tmp_path / "p.html"
    page.write_text("<p>x</p>", encoding="utf-8")
    out = render_page(page, "cp {html} {png}")
    assert out == tmp_path / "p.png" and out.read_bytes() == b"<p>x</p>"
    with pytest.raises(RenderConfigError):
        render_page(page, "cp {html} out.png")
    with pytest.raises(RenderError) as info:
        render_page(page, f'"{sys.executable}" -c "import sys; sys.exit(7)" {{html}} {{png}}')
    assert info.value.exit_code == 7
    with pytest.raises(RenderError):
        render_page(page, "true {html} {png}", tmp_path / "missing.png")


def test_manifest_is_deterministic(tmp_path):
    sources = [(p.stem, p.read_text(encoding="utf-8")) for p in sorted(BOOKS.glob("*.html"))]
    a = build_manifest(sources, tmp_path / "a")
    b = build_manifest(list(reversed(sources)), tmp_path / "b")
    assert a.manifest_path.read_bytes() == b.manifest_path.read_bytes()


def test_validate_manifest():
    ok = [ManifestEntry("a-0", 0, "x", None, "a"), ManifestEntry("a-1", 1, "y", None, "a")]
    validate_manifest(ok)
    with pytest.raises(ManifestError):
        validate_manifest(ok + [ManifestEntry("a-0", 2, "z", None, "a")])
    with pytest.raises(ManifestError):
        validate_manifest([ManifestEntry("a-1", 1, "y", None, "a")])
    with pytest.raises(ManifestError):
        validate_manifest([ManifestEntry("a-0", 0, "", None, "a")])


def test_read_manifest_rejects_extra_fields(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest([ManifestEntry("a", 0, "x")], path)
    assert read_manifest(path)[0].source is None
    path.write_text('{"id": "a", "page_index": 0, "markdown": "x", "image": null, "source": null, "extra": 1}\n')
    with pytest.raises(ManifestError, match=":1:"):
        read_manifest(path)


def test_duplicate_doc_ids_rejected(tmp_path):
    with pytest.raises(ValueError):
        build_manifest([("a", "<p>x</p>"), ("a", "<p>y</p>")], tmp_path)
