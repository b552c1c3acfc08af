"""Pure-Python Levenshtein kernels, used when the compiled core is absent."""

from __future__ import annotations

from collections.abc import Sequence

BACKEND = "python"


def _distance(a: Sequence, b: Sequence) -> int:
    n, m = len(a), len(b)
    prefix = 0
    while prefix < n and prefix < m and a[prefix] == b[prefix]:
        prefix += 1
    while n > prefix and m > prefix and a[n - 1] == b[m - 1]:
        n -= 1
        m -= 1
    a = a[prefix:n]
    b = b[prefix:m]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    row = list(range(len(b) + 1))
    for i, ai in enumerate(a, 1):
        diag = row[0]
        row[0] = i
        for j, bj in enumerate(b, 1):
            up = row[j]
            best = diag if ai == bj else diag + 1
            if up + 1 < best:
                best = up + 1
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            row[j] = best
            diag = up
    return row[-1]


def str_distance(a: str, b: str) -> int:
    """Edit distance between two strings, one symbol per code point."""
    return _distance(a, b)


def int_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Edit distance between two sequences of integers."""
    return _distance(tuple(a), tuple(b))


def int_similarity(a: Sequence[int], b: Sequence[int]) -> float:
    """``1 - distance / max(len)``; 1.0 when both sequences are empty."""
    n, m = len(a), len(b)
    if n == 0 and m == 0:
        return 1.0
    return 1.0 - int_distance(a, b) / max(n, m)
