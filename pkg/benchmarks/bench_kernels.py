"""Compare the compiled and pure-Python edit-distance kernels.

Run with ``python benchmarks/bench_kernels.py``. Workloads mirror evaluation:
page-sized Arabic strings for CER, word lists for WER and short block-tag
sequences for Structure Accuracy.
"""

from __future__ import annotations

import argparse
import random
import timeit

from mdocr import _lev_py, kernels

LETTERS = "ابتثجحخدذرزسشصضطظعغفقكلمنهوي "


def page(rng: random.Random, n: int) -> str:
    return "".join(rng.choice(LETTERS) for _ in range(n))


def noisy(rng: random.Random, text: str, edits: int) -> str:
    chars = list(text)
    for _ in range(edits):
        chars[rng.randrange(len(chars))] = rng.choice(LETTERS)
    return "".join(chars)


def workloads(rng: random.Random):
    ref = page(rng, 1800)
    hyp = noisy(rng, ref, 120)
    words_ref = [rng.randrange(500) for _ in range(300)]
    words_hyp = [w if rng.random() > 0.15 else rng.randrange(500) for w in words_ref]
    tags_a = [rng.choice((1, 2, 7, 8, 9, 10)) for _ in range(40)]
    tags_b = [t if rng.random() > 0.1 else 10 for t in tags_a]
    return {
        "cer page (1800 chars)": ("str_distance", (ref, hyp)),
        "wer page (300 words)": ("int_distance", (words_ref, words_hyp)),
        "structure (40 tags)": ("int_similarity", (tags_a, tags_b)),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = [_lev_py] if kernels.BACKEND == "python" else [kernels, _lev_py]
    if len(backends) == 1:
        print("compiled kernel unavailable; timing the pure-Python fallback only")
    print(f"{'workload':<24}" + "".join(f"{b.BACKEND:>14}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for name, (fn, call_args) in workloads(random.Random(args.seed)).items():
        per_call = []
        for backend in backends:
            func = getattr(backend, fn)
            timer = timeit.Timer(lambda: func(*call_args))
            number, _ = timer.autorange()
            per_call.append(min(timer.repeat(args.repeat, number)) / number)
        row = f"{name:<24}" + "".join(f"{t * 1e6:>12.1f}us" for t in per_call)
        if len(per_call) == 2:
            row += f"   {per_call[1] / per_call[0]:>6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
