import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdocr.analysis import (
    DEFAULT_REPETITION_PENALTY,
    EncoderGeometry,
    GeometryError,
    PenaltyConfigError,
    Repetition,
    RepetitionParams,
    apply_repetition_penalty,
    context_table,
    detect_repetition,
    token_grid,
    truncate_repetition,
)
from mdocr.tokenizer import ContextSpec
from oracles import brute_force_repetition


def test_token_grid_published_geometry():
    grid = token_grid(EncoderGeometry(896, 672, 4, 3))
    assert (grid.rows, grid.cols, grid.token_count) == (28, 21, 588)
    assert grid.stages == ((896, 672), (224, 168), (112, 84), (56, 42), (28, 21))
    assert grid.hidden_dim == 1024


def test_token_grid_small_and_invalid():
    assert token_grid(EncoderGeometry(32, 32)).token_count == 1
    with pytest.raises(GeometryError, match="height 900"):
        token_grid(EncoderGeometry(900, 672))
    with pytest.raises(GeometryError, match="width 670"):
        token_grid(EncoderGeometry(896, 670))


def test_token_grid_count_formula_random():
    rng = random.Random(8)
    for _ in range(50):
        patch, merges = rng.randint(1, 8), rng.randint(0, 4)
        f = patch * 2**merges
        h, w = f * rng.randint(1, 40), f * rng.randint(1, 40)
        assert token_grid(EncoderGeometry(h, w, patch, merges)).token_count == (h * w) // (patch**2 * 4**merges)


def test_context_table():
    rows = context_table(
        [ContextSpec("nougat-small", 3584, 1.0), ContextSpec("nougat-base", 4096, 1.0), ContextSpec("arabic-large", 8192, 4.0)]
    )
    assert [(r.model_name, r.effective_tokens) for r in rows] == [
        ("arabic-large", 32768), ("nougat-base", 4096), ("nougat-small", 3584)
    ]
    assert len(context_table([ContextSpec("x", 5, 1.0)])) == 1
    tied = context_table([ContextSpec("b", 100, 1.0), ContextSpec("a", 50, 2.0)])
    assert [r.model_name for r in tied] == ["a", "b"]


def test_penalty_examples():
    assert apply_repetition_penalty([2.0, -1.0, 0.5], {0, 1}, 2.0).tolist() == [1.0, -2.0, 0.5]
    scores = np.random.default_rng(0).normal(size=8)
    assert (apply_repetition_penalty(scores, {1, 3}, 1.0) == scores).all()
    with pytest.raises(PenaltyConfigError):
        apply_repetition_penalty([1.0], {0}, 0.0)
    with pytest.raises(IndexError):
        apply_repetition_penalty([1.0], {1}, 2.0)
    assert DEFAULT_REPETITION_PENALTY > 1


def test_penalty_elementwise_properties():
    rng = np.random.default_rng(1)
    for _ in range(200):
        scores = rng.normal(size=8)
        scores[rng.integers(8)] = 0.0
        history = set(rng.choice(8, size=rng.integers(0, 8), replace=False).tolist())
        penalty = 1.0 + rng.random() * 3
        out = apply_repetition_penalty(scores, history, penalty)
        for i in range(8):
            if i not in history or scores[i] == 0:
                assert out[i] == scores[i]
            else:
                assert out[i] < scores[i]


def test_penalty_never_promotes_history_token():
    rng = np.random.default_rng(2)
    for _ in range(2000):
        scores = rng.normal(size=8)
        history = set(rng.choice(8, size=rng.integers(1, 8), replace=False).tolist())
        out = apply_repetition_penalty(scores, history, 1.0 + rng.random() * 3)
        top = int(np.argmax(out))
        if top in history:
            assert scores[top] == scores.max()


def test_detect_examples():
    assert detect_repetition("a b c d".split()) is None
    assert detect_repetition("x y a b c a b c a b c".split()) == Repetition(3, 2, 3)
    assert detect_repetition("a a a a a a".split(), RepetitionParams(min_ngram=1)) == Repetition(1, 0, 6)


def test_detect_matches_brute_force():
    rng = random.Random(3)
    for _ in range(500):
        seq = [rng.choice("abcd") for _ in range(rng.randint(0, 40))]
        lo = rng.randint(1, 4)
        params = RepetitionParams(lo, rng.randint(lo, 12), rng.randint(2, 4))
        got = detect_repetition(seq, params)
        want = brute_force_repetition(seq, params.min_ngram, params.max_ngram, params.min_repeats)
        assert (got and (got.period, got.start, got.repeats)) == (want or None)


def test_detect_on_periodic_tails():
    rng = random.Random(4)
    for _ in range(300):
        unit = [rng.choice("ab") for _ in range(rng.randint(1, 4))]
        seq = [rng.choice("abcd") for _ in range(rng.randint(0, 6))] + unit * rng.randint(2, 6)
        params = RepetitionParams(1, 8, 2)
        got = detect_repetition(seq, params)
        want = brute_force_repetition(seq, 1, 8, 2)
        assert (got and (got.period, got.start, got.repeats)) == want


def test_params_validation():
    with pytest.raises(ValueError):
        RepetitionParams(5, 3)
    with pytest.raises(ValueError):
        RepetitionParams(min_repeats=1)
    with pytest.raises(ValueError):
        RepetitionParams(min_ngram=0)


def test_truncate_examples():
    text = "نص عادي بدون تكرار"
    assert truncate_repetition(text) is text
    assert truncate_repetition("intro abc abc abc", RepetitionParams(min_ngram=1)) == "intro abc"
    looped = "مقدمة " + "في البيت الكبير " * 8
    assert truncate_repetition(looped) == "مقدمة في البيت الكبير"


@settings(max_examples=500)
@given(st.lists(st.sampled_from("abc"), max_size=30), st.integers(1, 3), st.integers(2, 4))
def test_truncate_idempotent_and_shrinking(words, lo, repeats):
    params = RepetitionParams(lo, 10, repeats)
    text = " ".join(words)
    once = truncate_repetition(text, params)
    assert len(once.split()) <= len(words)
    assert truncate_repetition(once, params) == once
