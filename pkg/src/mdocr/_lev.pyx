# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled Levenshtein kernels (unit costs).

Same surface as :mod:`mdocr._lev_py`; selected by :mod:`mdocr.kernels`.
"""

from cpython.mem cimport PyMem_Malloc, PyMem_Free
from cpython.unicode cimport PyUnicode_READ_CHAR
from libc.stdint cimport int64_t
from libc.stdlib cimport malloc, free

BACKEND = "cython"


cdef Py_ssize_t _core(const int64_t* a, Py_ssize_t n, const int64_t* b, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j, prefix = 0, diag, left, up, best
    cdef Py_ssize_t* row
    cdef int64_t ai
    cdef const int64_t* tmp
    while prefix < n and prefix < m and a[prefix] == b[prefix]:
        prefix += 1
    a += prefix
    b += prefix
    n -= prefix
    m -= prefix
    while n > 0 and m > 0 and a[n - 1] == b[m - 1]:
        n -= 1
        m -= 1
    if n == 0:
        return m
    if m == 0:
        return n
    if m > n:
        tmp = a; a = b; b = tmp
        i = n; n = m; m = i
    row = <Py_ssize_t*> malloc((m + 1) * sizeof(Py_ssize_t))
    if row == NULL:
        return -1
    for j in range(m + 1):
        row[j] = j
    for i in range(1, n + 1):
        ai = a[i - 1]
        diag = row[0]
        row[0] = i
        for j in range(1, m + 1):
            up = row[j]
            best = diag + (0 if ai == b[j - 1] else 1)
            if up + 1 < best:
                best = up + 1
            left = row[j - 1] + 1
            if left < best:
                best = left
            row[j] = best
            diag = up
    best = row[m]
    free(row)
    return best


cdef int64_t* _ints(seq, Py_ssize_t n) except NULL:
    cdef int64_t* buf = <int64_t*> PyMem_Malloc((n + 1) * sizeof(int64_t))
    cdef Py_ssize_t i
    if buf == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            buf[i] = seq[i]
    except BaseException:
        PyMem_Free(buf)
        raise
    return buf


cdef int64_t* _codepoints(str s, Py_ssize_t n) except NULL:
    cdef int64_t* buf = <int64_t*> PyMem_Malloc((n + 1) * sizeof(int64_t))
    cdef Py_ssize_t i
    if buf == NULL:
        raise MemoryError()
    for i in range(n):
        buf[i] = PyUnicode_READ_CHAR(s, i)
    return buf


cdef Py_ssize_t _run(int64_t* a, Py_ssize_t n, int64_t* b, Py_ssize_t m) except -1:
    cdef Py_ssize_t d
    try:
        with nogil:
            d = _core(a, n, b, m)
    finally:
        PyMem_Free(a)
        PyMem_Free(b)
    if d < 0:
        raise MemoryError()
    return d


def str_distance(str a, str b):
    """Edit distance between two strings, one symbol per code point."""
    cdef Py_ssize_t n = len(a), m = len(b)
    return _run(_codepoints(a, n), n, _codepoints(b, m), m)


def int_distance(a, b):
    """Edit distance between two sequences of machine-size integers."""
    cdef Py_ssize_t n = len(a), m = len(b)
    cdef int64_t* pa = _ints(a, n)
    cdef int64_t* pb
    try:
        pb = _ints(b, m)
    except BaseException:
        PyMem_Free(pa)
        raise
    return _run(pa, n, pb, m)


def int_similarity(a, b):
    """``1 - distance / max(len)``; 1.0 when both sequences are empty."""
    cdef Py_ssize_t n = len(a), m = len(b)
    if n == 0 and m == 0:
        return 1.0
    return 1.0 - <double> int_distance(a, b) / <double> (n if n > m else m)
