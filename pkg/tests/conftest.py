from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mdocr import _lev_py, kernels  # noqa: E402
from mdocr.synth import ManifestEntry, write_manifest  # noqa: E402
from mdocr.tokenizer import save_tokenizer, train_bpe  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
BOOKS = FIXTURES / "books"
TABLE1 = FIXTURES / "table1"

WORDS = (
    "كان الصباح هادئا حين خرج الفتى إلى السوق القديم وفي المدينة حكايات لا يعرفها إلا من "
    "عاش بين أزقتها قرأ المعلم على تلاميذه فصلا من كتاب التاريخ ثم عاد بيته وقد امتلأ قلبه "
    "بالأمل إن العلم نور يهدي الإنسان ظلمات الجهل كتب الشاعر قصيدته الأولى ليلة ماطرة"
).split()

BACKENDS = [kernels]
if kernels.BACKEND != "python":
    BACKENDS.append(_lev_py)


@pytest.fixture(params=BACKENDS, ids=lambda m: m.BACKEND)
def backend(request):
    return request.param


def arabic_sentence(rng: random.Random, lo: int = 4, hi: int = 12) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def synthetic_page(rng: random.Random) -> str:
    """A random Markdown page using every supported block kind."""
    lines = [f"# {arabic_sentence(rng, 2, 4)}", ""]
    for _ in range(rng.randint(3, 7)):
        kind = rng.random()
        if kind < 0.4:
            words = arabic_sentence(rng, 10, 30).split()
            if rng.random() < 0.3:
                words[0] = f"**{words[0]}**"
            lines += [" ".join(words), ""]
        elif kind < 0.55:
            lines += [f"{'#' * rng.randint(2, 4)} {arabic_sentence(rng, 2, 4)}", ""]
        elif kind < 0.8:
            marker = rng.choice(["-", "1."])
            lines += [f"{marker} {arabic_sentence(rng)}" for _ in range(rng.randint(2, 4))] + [""]
        else:
            lines += [f"> {arabic_sentence(rng)}", ""]
    return "\n".join(lines)


def perturb(rng: random.Random, text: str) -> str:
    """Simulated OCR noise: character drops, swaps and a lost line."""
    chars = list(text)
    for _ in range(rng.randint(0, 6)):
        i = rng.randrange(len(chars))
        if rng.random() < 0.5:
            del chars[i]
        else:
            chars[i] = rng.choice(WORDS)[0]
    lines = "".join(chars).split("\n")
    if len(lines) > 3 and rng.random() < 0.3:
        del lines[rng.randrange(len(lines))]
    return "\n".join(lines)


def synthetic_manifest(n: int, seed: int) -> list[ManifestEntry]:
    rng = random.Random(seed)
    return [
        ManifestEntry(f"page-{i:04d}", 0, synthetic_page(rng), None, f"doc-{i:04d}") for i in range(n)
    ]


@pytest.fixture(scope="session")
def arabic_corpus() -> list[str]:
    rng = random.Random(7)
    return [arabic_sentence(rng, 8, 20) for _ in range(200)]


@pytest.fixture(scope="session")
def trained_tokenizer_dir(tmp_path_factory, arabic_corpus) -> Path:
    path = tmp_path_factory.mktemp("tok")
    save_tokenizer(train_bpe(arabic_corpus, 600), path)
    return path


@pytest.fixture
def write_entries(tmp_path):
    def _write(entries, name: str) -> Path:
        path = tmp_path / name
        write_manifest(entries, path)
        return path

    return _write
