import json
import shutil

import pytest

from conftest import BOOKS, TABLE1, synthetic_manifest
from mdocr.cli import main
from mdocr.synth import read_manifest


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["eval"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_geom(capsys):
    code, out, _ = run(capsys, "geom", "--height", 896, "--width", 672)
    assert code == 0
    assert "896×672 → 224×168 → 112×84 → 56×42 → 28×21" in out
    assert "588 tokens (28 rows × 21 cols, 1024-dim)" in out
    code, _, err = run(capsys, "geom", "--height", 900, "--width", 672)
    assert code == 1 and "height" in err


def test_synth_deterministic_with_stub(tmp_path, capsys):
    books = tmp_path / "books"
    books.mkdir()
    for name in ("book00.html", "book01.html"):
        shutil.copy(BOOKS / name, books / name)
    outs = []
    for run_dir in ("a", "b"):
        code, out, _ = run(capsys, "synth", books, tmp_path / run_dir, "--render-cmd", "cp {html} {png}")
        assert code == 0 and "pages from 2 documents" in out
        outs.append((tmp_path / run_dir / "manifest.jsonl").read_bytes())
    assert outs[0] == outs[1]
    entries = read_manifest(tmp_path / "a" / "manifest.jsonl")
    assert all((tmp_path / "a" / e.image_path).is_file() for e in entries)


def test_synth_renderer_failure_exit_3(tmp_path, capsys):
    books = tmp_path / "books"
    books.mkdir()
    shutil.copy(BOOKS / "book00.html", books)
    code, _, err = run(capsys, "synth", books, tmp_path / "out", "--render-cmd", "false {html} {png}")
    assert code == 3 and "warning" in err
    assert (tmp_path / "out" / "manifest.jsonl").is_file()


def test_synth_bad_template_and_input(tmp_path, capsys):
    books = tmp_path / "books"
    books.mkdir()
    shutil.copy(BOOKS / "book00.html", books)
    code, _, _ = run(capsys, "synth", books, tmp_path / "o", "--render-cmd", "cp {html}")
    assert code == 1
    code, _, _ = run(capsys, "synth", tmp_path / "nowhere", tmp_path / "o")
    assert code == 1
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run(capsys, "synth", empty, tmp_path / "o")[0] == 2


def test_eval_identity_and_errors(tmp_path, capsys, write_entries):
    ref = write_entries(synthetic_manifest(3, seed=9), "ref.jsonl")
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "eval", ref, ref, "-o", out, "--model", "ident")
    assert code == 0 and "3 samples" in stdout
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["means"]["cer"] == 0.0 and report["model"] == "ident"

    partial = write_entries(synthetic_manifest(2, seed=9), "partial.jsonl")
    code, _, err = run(capsys, "eval", partial, ref, "-o", out)
    assert code == 0 and "page-0002" in err

    dup = write_entries([], "dup.jsonl")
    dup.write_text(partial.read_text(encoding="utf-8") * 2, encoding="utf-8")
    assert run(capsys, "eval", dup, ref, "-o", out)[0] == 2
    other = write_entries(synthetic_manifest(1, seed=1), "x.jsonl")
    other.write_text(other.read_text(encoding="utf-8").replace("page-0000", "zzz"), encoding="utf-8")
    assert run(capsys, "eval", other, ref, "-o", out)[0] == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n", encoding="utf-8")
    assert run(capsys, "eval", bad, ref, "-o", out)[0] == 2


def test_tok_train_and_stats(tmp_path, capsys, arabic_corpus):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("\n".join(arabic_corpus) + "\n", encoding="utf-8")
    code, out, _ = run(capsys, "tok-train", "--corpus", corpus, "--vocab-size", 400, "--out", tmp_path / "tok")
    assert code == 0 and "vocab size" in out

    code, out, _ = run(capsys, "tok-stats", "--tokenizer", tmp_path / "tok", "--corpus", corpus)
    ratio = float(out.split("compression ratio (baseline tokens per tokenizer token): ")[1].split()[0])
    assert code == 0 and ratio > 1.0

    code, out, _ = run(capsys, "tok-stats", "--tokenizer", tmp_path / "tok", "--baseline", tmp_path / "tok",
                       "--corpus", corpus, "--max-tokens", 8192, "--ratio", 4.0,
                       "--context", "nougat-base=4096:1")
    assert code == 0
    assert "compression ratio (baseline tokens per tokenizer token): 1.0000" in out
    assert "effective context tokenizer: 32768" in out
    assert "effective context nougat-base: 4096" in out

    assert run(capsys, "tok-train", "--corpus", corpus, "--vocab-size", 10, "--out", tmp_path / "t2")[0] == 1
    (tmp_path / "tok" / "merges.txt").write_text("garbage\n", encoding="utf-8")
    code, _, err = run(capsys, "tok-stats", "--tokenizer", tmp_path / "tok", "--corpus", corpus)
    assert code == 2 and "merges.txt" in err


def test_report_table(capsys):
    files = sorted(TABLE1.glob("*.json"))
    code, out, _ = run(capsys, "report", *files)
    assert code == 0 and len(out.splitlines()) == 7
    assert run(capsys, "report", *files, "--names", "just-one")[0] == 1
