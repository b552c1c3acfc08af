"""Command-line entry point: ``mdocr {synth,eval,tok-train,tok-stats,geom,report}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 external renderer failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from mdocr.analysis import EncoderGeometry, GeometryError, context_table, format_context_table, token_grid
from mdocr.evaluate import EvalDataError, evaluate_manifests, worker_count
from mdocr.markdown import InputEncodingError
from mdocr.metrics import NormalizationOptions
from mdocr.report import ReportError, load_report, render_table, write_report
from mdocr.synth import (
    HTMLParseError,
    ManifestError,
    PageBudget,
    RenderConfigError,
    SynthIOError,
    build_manifest,
    read_manifest,
)
from mdocr.tokenizer import (
    ContextSpec,
    TokenizerConfigError,
    TokenizerError,
    TokenizerFormatError,
    byte_level_tokenizer,
    compression_ratio,
    load_tokenizer,
    save_tokenizer,
    tokenize,
    train_bpe,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RENDER = 3

log = logging.getLogger("mdocr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _context_arg(value: str) -> tuple[str, int, Optional[float]]:
    # NAME=TOKENS[:RATIO]
    try:
        name, rest = value.split("=", 1)
        tokens, _, ratio = rest.partition(":")
        return name, int(tokens), float(ratio) if ratio else None
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NAME=TOKENS[:RATIO], got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mdocr", description="Markdown OCR evaluation and dataset toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="build a paired page/Markdown dataset from HTML files")
    s.add_argument("html_dir", type=Path)
    s.add_argument("out_dir", type=Path)
    s.add_argument("--max-chars", type=int, default=PageBudget().max_chars)
    s.add_argument("--render-cmd", default=None, help="command template with {html} and {png}")

    e = sub.add_parser("eval", help="score a prediction manifest against a reference manifest")
    e.add_argument("pred", type=Path)
    e.add_argument("ref", type=Path)
    e.add_argument("-o", "--out", type=Path, default=Path("report.json"))
    e.add_argument("--tokenizer", type=Path, default=None, help="tokenizer dir for TER")
    e.add_argument("--model", default=None, help="model name stored in the report")
    e.add_argument("--strip-tashkeel", action="store_true")
    e.add_argument("--normalize-alef", action="store_true")
    e.add_argument("--no-nfc", action="store_true")
    e.add_argument("--keep-whitespace", action="store_true")

    t = sub.add_parser("tok-train", help="train a byte-fallback BPE tokenizer")
    t.add_argument("--corpus", type=Path, required=True, help="UTF-8 text file, one sample per line")
    t.add_argument("--vocab-size", type=int, required=True)
    t.add_argument("--out", type=Path, required=True)

    ts = sub.add_parser("tok-stats", help="token counts, compression ratio, effective context")
    ts.add_argument("--tokenizer", type=Path, required=True)
    ts.add_argument("--baseline", type=Path, default=None, help="default: byte-level tokenizer")
    ts.add_argument("--corpus", type=Path, required=True)
    ts.add_argument("--max-tokens", type=int, default=None)
    ts.add_argument("--ratio", type=float, default=None, help="default: the measured ratio")
    ts.add_argument("--context", type=_context_arg, action="append", default=[],
                    metavar="NAME=TOKENS[:RATIO]")

    g = sub.add_parser("geom", help="encoder token grid for an input size")
    g.add_argument("--height", type=int, required=True)
    g.add_argument("--width", type=int, required=True)
    g.add_argument("--patch", type=int, default=4)
    g.add_argument("--merges", type=int, default=3)
    g.add_argument("--hidden", type=int, default=1024)

    r = sub.add_parser("report", help="render reports as a comparison table")
    r.add_argument("reports", type=Path, nargs="+")
    r.add_argument("--format", choices=["md"], default="md")
    r.add_argument("--names", nargs="+", default=None)
    return p


def _cmd_synth(args) -> int:
    if not args.html_dir.is_dir():
        raise UsageError(f"{args.html_dir} is not a directory")
    files = sorted(args.html_dir.glob("*.html"))
    if not files:
        raise EvalDataError(f"no .html files in {args.html_dir}")
    sources = [(f.stem, f.read_text(encoding="utf-8")) for f in files]
    result = build_manifest(
        sources,
        args.out_dir,
        PageBudget(args.max_chars),
        args.render_cmd,
        workers=worker_count(),
        source_names={f.stem: f.name for f in files},
    )
    print(f"wrote {len(result.entries)} pages from {len(files)} documents to {result.manifest_path}")
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_RENDER if result.render_failures else EXIT_OK


def _cmd_eval(args) -> int:
    norm = NormalizationOptions(
        unicode_nfc=not args.no_nfc,
        strip_tashkeel=args.strip_tashkeel,
        normalize_alef=args.normalize_alef,
        collapse_whitespace=not args.keep_whitespace,
    )
    report = evaluate_manifests(
        read_manifest(args.pred),
        read_manifest(args.ref),
        norm,
        tokenizer_dir=args.tokenizer,
        workers=worker_count(),
        model=args.model or args.pred.stem,
    )
    write_report(report, args.out)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    means = report.means
    shown = " ".join(f"{k}={v:.4f}" for k, v in means.items() if v is not None)
    print(f"{report.sample_count} samples: {shown} -> {args.out}")
    return EXIT_OK


def _read_corpus(path: Path) -> list[str]:
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise EvalDataError(f"corpus {path} is empty")
    return lines


def _cmd_tok_train(args) -> int:
    model = train_bpe(_read_corpus(args.corpus), args.vocab_size)
    save_tokenizer(model, args.out)
    print(f"trained {len(model.merges)} merges, vocab size {model.vocab_size} -> {args.out}")
    return EXIT_OK


def _cmd_tok_stats(args) -> int:
    corpus = _read_corpus(args.corpus)
    target = load_tokenizer(args.tokenizer)
    baseline = load_tokenizer(args.baseline) if args.baseline else byte_level_tokenizer()
    chars = sum(len(s) for s in corpus)
    for label, model in (("tokenizer", target), ("baseline", baseline)):
        count = sum(len(tokenize(model, s)) for s in corpus)
        print(f"{label}: {count} tokens, {count / chars:.4f} tokens/char")
    ratio = compression_ratio(target, baseline, corpus)
    print(f"compression ratio (baseline tokens per tokenizer token): {ratio:.4f}")

    specs = [ContextSpec(n, t, r if r is not None else ratio) for n, t, r in args.context]
    if args.max_tokens is not None:
        specs.append(ContextSpec("tokenizer", args.max_tokens, args.ratio if args.ratio else ratio))
    if specs:
        rows = context_table(specs)
        print()
        print(format_context_table(rows), end="")
        for row in rows:
            print(f"effective context {row.model_name}: {row.effective_tokens}")
    return EXIT_OK


def _cmd_geom(args) -> int:
    grid = token_grid(EncoderGeometry(args.height, args.width, args.patch, args.merges, args.hidden))
    print(grid.chain())
    print(f"{grid.token_count} tokens ({grid.rows} rows × {grid.cols} cols, {grid.hidden_dim}-dim)")
    return EXIT_OK


def _cmd_report(args) -> int:
    reports = [load_report(p) for p in args.reports]
    if args.names is not None and len(args.names) != len(reports):
        raise UsageError("--names must give one name per report")
    names = args.names or [r.model or p.stem for r, p in zip(reports, args.reports)]
    print(render_table(reports, names), end="")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "tok-train": _cmd_tok_train,
    "tok-stats": _cmd_tok_stats,
    "geom": _cmd_geom,
    "report": _cmd_report,
}

_CONFIG_ERRORS = (UsageError, RenderConfigError, GeometryError, TokenizerConfigError)
_DATA_ERRORS = (
    EvalDataError,
    ManifestError,
    ReportError,
    TokenizerFormatError,
    TokenizerError,
    HTMLParseError,
    InputEncodingError,
    UnicodeDecodeError,
    SynthIOError,
    OSError,
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _COMMANDS[args.cmd](args)
    except _CONFIG_ERRORS as exc:
        print(f"mdocr {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"mdocr {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"mdocr {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
