# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of ``levqe._dp``: same opcodes, same tie-breaking.

The DP fills run without the GIL, so thread pools get real parallelism
on corpus work.
"""

from array import array as _pyarray

from libc.stdlib cimport free, malloc

OP_MATCH = 0
OP_SUB = 1
OP_DEL = 2
OP_INS = 3

cdef unsigned char C_MATCH = 0
cdef unsigned char C_SUB = 1
cdef unsigned char C_DEL = 2
cdef unsigned char C_INS = 3


def lev_cost_ids(hyp, ref):
    """Minimum number of substitutions/deletions/insertions, cost only."""
    if not isinstance(hyp, _pyarray):
        hyp = _pyarray("i", hyp)
    if not isinstance(ref, _pyarray):
        ref = _pyarray("i", ref)
    return _lev_cost(hyp, ref)


def align_ids(hyp, ref):
    """Minimum-cost monotone alignment; returns ``(cost, opcode bytes)``."""
    if not isinstance(hyp, _pyarray):
        hyp = _pyarray("i", hyp)
    if not isinstance(ref, _pyarray):
        ref = _pyarray("i", ref)
    return _align(hyp, ref)


cdef int _lev_cost(const int[::1] hyp, const int[::1] ref) except -1:
    cdef Py_ssize_t m = hyp.shape[0]
    cdef Py_ssize_t n = ref.shape[0]
    cdef Py_ssize_t i, j
    cdef int h, best, result
    if m == 0:
        return <int> n
    if n == 0:
        return <int> m
    cdef int *prev = <int *> malloc((n + 1) * sizeof(int))
    cdef int *cur = <int *> malloc((n + 1) * sizeof(int))
    cdef int *tmp
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()
    try:
        with nogil:
            for j in range(n + 1):
                prev[j] = <int> j
            for i in range(1, m + 1):
                cur[0] = <int> i
                h = hyp[i - 1]
                for j in range(1, n + 1):
                    if h == ref[j - 1]:
                        cur[j] = prev[j - 1]
                    else:
                        best = prev[j - 1]
                        if prev[j] < best:
                            best = prev[j]
                        if cur[j - 1] < best:
                            best = cur[j - 1]
                        cur[j] = best + 1
                tmp = prev
                prev = cur
                cur = tmp
            result = prev[n]
        return result
    finally:
        free(prev)
        free(cur)


cdef _align(const int[::1] hyp, const int[::1] ref):
    cdef Py_ssize_t m = hyp.shape[0]
    cdef Py_ssize_t n = ref.shape[0]
    cdef Py_ssize_t width = n + 1
    cdef Py_ssize_t i, j, row, pos, total
    cdef int h, cost, sub, dele, ins
    cdef unsigned char code
    cdef unsigned char *bp = <unsigned char *> malloc((m + 1) * width)
    cdef int *prev = <int *> malloc(width * sizeof(int))
    cdef int *cur = <int *> malloc(width * sizeof(int))
    cdef unsigned char *ops_buf = <unsigned char *> malloc(m + n if m + n else 1)
    cdef int *tmp
    if bp == NULL or prev == NULL or cur == NULL or ops_buf == NULL:
        free(bp)
        free(prev)
        free(cur)
        free(ops_buf)
        raise MemoryError()
    try:
        with nogil:
            prev[0] = 0
            for j in range(1, n + 1):
                bp[j] = C_INS
                prev[j] = <int> j
            for i in range(1, m + 1):
                bp[i * width] = C_DEL
            for i in range(1, m + 1):
                cur[0] = <int> i
                h = hyp[i - 1]
                row = i * width
                for j in range(1, n + 1):
                    if h == ref[j - 1]:
                        cur[j] = prev[j - 1]
                        bp[row + j] = C_MATCH
                    else:
                        sub = prev[j - 1]
                        dele = prev[j]
                        ins = cur[j - 1]
                        if sub <= dele and sub <= ins:
                            cur[j] = sub + 1
                            bp[row + j] = C_SUB
                        elif dele <= ins:
                            cur[j] = dele + 1
                            bp[row + j] = C_DEL
                        else:
                            cur[j] = ins + 1
                            bp[row + j] = C_INS
                tmp = prev
                prev = cur
                cur = tmp
            cost = prev[n]

            # Backtrace into the tail of ops_buf so the result reads
            # left to right without a reverse pass.
            total = m + n
            pos = total
            i = m
            j = n
            while i > 0 or j > 0:
                code = bp[i * width + j]
                pos -= 1
                ops_buf[pos] = code
                if code == C_MATCH or code == C_SUB:
                    i -= 1
                    j -= 1
                elif code == C_DEL:
                    i -= 1
                else:
                    j -= 1
        return cost, ops_buf[pos:total]
    finally:
        free(bp)
        free(prev)
        free(cur)
        free(ops_buf)
