"""Pure-Python DP kernels for unit-cost edit alignment.

A compiled twin with identical semantics lives in ``_dp_cy.pyx``;
``levqe.alignment`` selects whichever is importable. Both operate on
integer id sequences (tokens are interned by the caller) and share the
opcode vocabulary below.
"""

from __future__ import annotations

OP_MATCH = 0
OP_SUB = 1
OP_DEL = 2
OP_INS = 3


def lev_cost_ids(hyp, ref):
    """Minimum number of substitutions/deletions/insertions, cost only."""
    m, n = len(hyp), len(ref)
    if m == 0:
        return n
    if n == 0:
        return m
    prev = list(range(n + 1))
    cur = [0] * (n + 1)
    for i in range(1, m + 1):
        cur[0] = i
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
        prev, cur = cur, prev
    return prev[n]


def align_ids(hyp, ref):
    """Minimum-cost monotone alignment with a deterministic backtrace.

    Returns ``(cost, ops)`` where ``ops`` is a ``bytes`` of opcodes in
    left-to-right order. Ties are resolved during the forward fill with
    the fixed preference match > substitute > delete > insert, so the
    script is reproducible across kernels and runs.
    """
    m, n = len(hyp), len(ref)
    width = n + 1
    bp = bytearray((m + 1) * width)
    for j in range(1, n + 1):
        bp[j] = OP_INS
    for i in range(1, m + 1):
        bp[i * width] = OP_DEL
    prev = list(range(n + 1))
    cur = [0] * (n + 1)
    for i in range(1, m + 1):
        cur[0] = i
        h = hyp[i - 1]
        row = i * width
        for j in range(1, n + 1):
            if h == ref[j - 1]:
                cur[j] = prev[j - 1]
                bp[row + j] = OP_MATCH
            else:
                sub = prev[j - 1]
                dele = prev[j]
                ins = cur[j - 1]
                if sub <= dele and sub <= ins:
                    cur[j] = sub + 1
                    bp[row + j] = OP_SUB
                elif dele <= ins:
                    cur[j] = dele + 1
                    bp[row + j] = OP_DEL
                else:
                    cur[j] = ins + 1
                    bp[row + j] = OP_INS
        prev, cur = cur, prev
    cost = prev[n]

    ops = bytearray()
    i, j = m, n
    while i > 0 or j > 0:
        code = bp[i * width + j]
        ops.append(code)
        if code == OP_MATCH or code == OP_SUB:
            i -= 1
            j -= 1
        elif code == OP_DEL:
            i -= 1
        else:
            j -= 1
    ops.reverse()
    return cost, bytes(ops)
