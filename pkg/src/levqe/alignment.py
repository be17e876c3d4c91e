"""Edit alignment between token sequences.

Provides minimum-edit (Levenshtein) alignment scripts, a greedy
block-shift search in the style of TER tools, and TER scoring. The DP
inner loop runs in a compiled kernel when available; set
``LEVQE_PURE_PYTHON=1`` to force the pure-Python kernel.

Alignment is exact string comparison; any casing or normalization is the
caller's business.
"""

from __future__ import annotations

import os
from array import array
from dataclasses import dataclass
from typing import Optional, Sequence

from ._dp import OP_DEL, OP_MATCH, OP_SUB


def _load_kernel():
    if os.environ.get("LEVQE_PURE_PYTHON") == "1":
        from . import _dp

        return _dp, "python"
    try:
        from . import _dp_cy

        return _dp_cy, "cython"
    except ImportError:
        from . import _dp

        return _dp, "python"


_kernel, _KERNEL_NAME = _load_kernel()


def kernel_name() -> str:
    """Which DP kernel is active: ``"cython"`` or ``"python"``."""
    return _KERNEL_NAME


MATCH = "match"
SUB = "sub"
DEL = "del"
INS = "ins"
SHIFT = "shift"

# Block-shift search bounds, mirroring common TER tool defaults.
MAX_SHIFT_LEN = 10
MAX_SHIFT_DIST = 50


@dataclass(frozen=True)
class EditOp:
    """One alignment step.

    Match/sub carry both indices, del only ``hyp_index``, ins only
    ``ref_index``. A shift carries ``shift_span = (start, length, dest)``:
    the block ``[start, start+length)`` of the pre-shift hypothesis is
    removed and reinserted at index ``dest`` of the remainder.
    """

    kind: str
    hyp_index: Optional[int] = None
    ref_index: Optional[int] = None
    shift_span: Optional[tuple[int, int, int]] = None


@dataclass(frozen=True)
class EditScript:
    """Ordered edit ops plus total cost (1 per non-match op).

    When shifts are present they come first, in application order, and
    the monotone ops that follow index into the fully shifted hypothesis.
    """

    ops: tuple[EditOp, ...]
    cost: int

    @property
    def has_shifts(self) -> bool:
        return any(op.kind == SHIFT for op in self.ops)


def _encode(hyp: Sequence[str], ref: Sequence[str]) -> tuple[array, array]:
    ids: dict[str, int] = {}

    def enc(tokens):
        out = array("i")
        for tok in tokens:
            out.append(ids.setdefault(tok, len(ids)))
        return out

    return enc(hyp), enc(ref)


def _script_from_codes(codes: bytes, shifts: tuple[EditOp, ...] = ()) -> EditScript:
    ops = list(shifts)
    cost = len(shifts)
    i = j = 0
    for code in codes:
        if code == OP_MATCH:
            ops.append(EditOp(MATCH, hyp_index=i, ref_index=j))
            i += 1
            j += 1
        elif code == OP_SUB:
            ops.append(EditOp(SUB, hyp_index=i, ref_index=j))
            i += 1
            j += 1
            cost += 1
        elif code == OP_DEL:
            ops.append(EditOp(DEL, hyp_index=i))
            i += 1
            cost += 1
        else:
            ops.append(EditOp(INS, ref_index=j))
            j += 1
            cost += 1
    return EditScript(tuple(ops), cost)


def levenshtein_align(hyp: Sequence[str], ref: Sequence[str]) -> EditScript:
    """Minimum-edit monotone alignment of ``hyp`` against ``ref``.

    Unit cost for substitute/delete/insert, zero for match. The backtrace
    is deterministic (match > substitute > delete > insert at ties).
    """
    hyp_ids, ref_ids = _encode(hyp, ref)
    _, codes = _kernel.align_ids(hyp_ids, ref_ids)
    return _script_from_codes(codes)


def _apply_shift(seq: list[int], start: int, length: int, dest: int) -> list[int]:
    block = seq[start : start + length]
    rest = seq[:start] + seq[start + length :]
    return rest[:dest] + block + rest[dest:]


def _best_shift(current: list[int], ref_ids: array) -> Optional[tuple[int, int, int, int]]:
    """Cheapest single block shift: ``(new_cost, start, length, dest)``.

    Candidates are scanned start asc, length asc, destination asc; the
    first minimum wins, which keeps the greedy search deterministic.
    """
    n = len(current)
    best: Optional[tuple[int, int, int, int]] = None
    for start in range(n):
        for length in range(1, min(MAX_SHIFT_LEN, n - start) + 1):
            block = current[start : start + length]
            rest = current[:start] + current[start + length :]
            for dest in range(n - length + 1):
                if dest == start or abs(dest - start) > MAX_SHIFT_DIST:
                    continue
                cand = rest[:dest] + block + rest[dest:]
                cost = _kernel.lev_cost_ids(array("i", cand), ref_ids)
                if best is None or cost < best[0]:
                    best = (cost, start, length, dest)
    return best


def ter_align(hyp: Sequence[str], ref: Sequence[str], allow_shifts: bool = False) -> EditScript:
    """Edit alignment, optionally with greedy block shifts at cost 1 each.

    With shifts disabled this is exactly :func:`levenshtein_align`. With
    shifts enabled, the shift that most reduces the remaining edit
    distance is taken repeatedly while the reduction beats the shift's
    own cost; the returned script lists the shifts followed by the
    monotone alignment of the shifted hypothesis.
    """
    if not allow_shifts:
        return levenshtein_align(hyp, ref)

    hyp_ids, ref_ids = _encode(hyp, ref)
    current = list(hyp_ids)
    cost = _kernel.lev_cost_ids(array("i", current), ref_ids)
    shifts: list[EditOp] = []
    while cost > 1:
        found = _best_shift(current, ref_ids)
        if found is None or found[0] + 1 >= cost:
            break
        cost, start, length, dest = found
        shifts.append(EditOp(SHIFT, shift_span=(start, length, dest)))
        current = _apply_shift(current, start, length, dest)
    _, codes = _kernel.align_ids(array("i", current), ref_ids)
    return _script_from_codes(codes, tuple(shifts))


def ter_score(hyp: Sequence[str], ref: Sequence[str]) -> float:
    """Translation error rate: shifted edit cost over reference length."""
    if len(ref) == 0:
        raise ValueError("undefined TER denominator")
    return ter_align(hyp, ref, allow_shifts=True).cost / len(ref)
