"""OK/BAD tags from edit alignments, and their evaluation.

A sentence with J MT words carries J word tags and J+1 gap tags (one
boundary before each word plus the final boundary). The canonical flat
layout interleaves them: gap, word, gap, ..., gap (odd length 2J+1).
Evaluation pools confusion counts over a corpus with BAD as the positive
class and reports MCC and per-class F1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .alignment import DEL, INS, MATCH, SHIFT, SUB, EditScript

OK = "OK"
BAD = "BAD"

SCOPE_ALL = "all"
SCOPE_WORDS = "words"
SCOPE_GAPS = "gaps"


@dataclass(frozen=True)
class QETags:
    """Word tags (length J) and gap tags (length J+1) for one sentence."""

    word_tags: tuple[str, ...]
    gap_tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.gap_tags) != len(self.word_tags) + 1:
            raise ValueError(
                f"need {len(self.word_tags) + 1} gap tags for "
                f"{len(self.word_tags)} word tags, got {len(self.gap_tags)}"
            )
        for tag in self.word_tags + self.gap_tags:
            if tag not in (OK, BAD):
                raise ValueError(f"unknown tag {tag!r}")


def flatten_tags(tags: QETags) -> list[str]:
    """Interleave into the flat gap/word/.../gap layout."""
    flat = []
    for gap, word in zip(tags.gap_tags, tags.word_tags):
        flat.append(gap)
        flat.append(word)
    flat.append(tags.gap_tags[-1])
    return flat


def unflatten_tags(flat: Sequence[str]) -> QETags:
    """Split a flat gap/word/.../gap sequence back into a :class:`QETags`."""
    if len(flat) % 2 == 0:
        raise ValueError(f"flat tag sequence must have odd length, got {len(flat)}")
    return QETags(tuple(flat[1::2]), tuple(flat[0::2]))


def tags_from_alignment(script: EditScript, hyp_len: int) -> QETags:
    """Reference tags from a shift-free alignment of MT against post-edit.

    A hypothesis word is OK iff it is matched; substituted or deleted
    words are BAD. A gap is BAD iff at least one insertion lands on that
    boundary (the one after the last hypothesis word already consumed).
    """
    word: list[str | None] = [None] * hyp_len
    gaps = [OK] * (hyp_len + 1)
    consumed = 0
    for op in script.ops:
        if op.kind == SHIFT:
            raise ValueError("shift-free alignment required for tagging")
        if op.kind == MATCH:
            word[op.hyp_index] = OK
            consumed += 1
        elif op.kind in (SUB, DEL):
            word[op.hyp_index] = BAD
            consumed += 1
        elif op.kind == INS:
            gaps[consumed] = BAD
        else:
            raise ValueError(f"unknown op kind {op.kind!r}")
    if consumed != hyp_len or any(t is None for t in word):
        raise ValueError(
            f"alignment covers {consumed} hypothesis positions, expected {hyp_len}"
        )
    return QETags(tuple(word), tuple(gaps))  # type: ignore[arg-type]


@dataclass(frozen=True)
class ConfusionCounts:
    """Pooled binary confusion counts with BAD as the positive class."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn + other.fn,
        )


def _count_pairs(pred: Iterable[str], gold: Iterable[str]) -> ConfusionCounts:
    tp = fp = tn = fn = 0
    for p, g in zip(pred, gold):
        if p == BAD:
            if g == BAD:
                tp += 1
            else:
                fp += 1
        else:
            if g == OK:
                tn += 1
            else:
                fn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def pool_confusion(
    pred: Sequence[QETags], gold: Sequence[QETags], scope: str = SCOPE_ALL
) -> ConfusionCounts:
    """Pool confusion counts over a corpus of aligned tag pairs.

    ``scope`` selects word tags, gap tags, or both. Pooling is a plain
    sum over sentences, so parallel reduction is legal.
    """
    if scope not in (SCOPE_ALL, SCOPE_WORDS, SCOPE_GAPS):
        raise ValueError(f"unknown scope {scope!r}")
    if len(pred) != len(gold):
        raise ValueError(f"corpus size mismatch: {len(pred)} vs {len(gold)} sentences")
    total = ConfusionCounts()
    for i, (p, g) in enumerate(zip(pred, gold)):
        if len(p.word_tags) != len(g.word_tags):
            raise ValueError(f"tag length mismatch at sentence {i}")
        if scope in (SCOPE_ALL, SCOPE_WORDS):
            total = total + _count_pairs(p.word_tags, g.word_tags)
        if scope in (SCOPE_ALL, SCOPE_GAPS):
            total = total + _count_pairs(p.gap_tags, g.gap_tags)
    return total


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient over pooled counts.

    Evaluated exactly in rational arithmetic before one float rounding,
    so perfect prediction is exactly 1.0 and total inversion exactly
    -1.0. A zero denominator returns 0 by convention.
    """
    n = c.n
    if n == 0:
        raise ValueError("empty tag set")
    s = Fraction(c.tp + c.fn, n)
    p = Fraction(c.tp + c.fp, n)
    den2 = p * s * (1 - s) * (1 - p)
    if den2 == 0:
        return 0.0
    num = Fraction(c.tp, n) - s * p
    value = math.sqrt(float(num * num / den2))
    return value if num >= 0 else -value


def f1_per_class(c: ConfusionCounts) -> tuple[float, float]:
    """``(f1_ok, f1_bad)``; a zero denominator yields 0 for that class."""
    if c.n == 0:
        raise ValueError("empty tag set")
    bad_den = 2 * c.tp + c.fp + c.fn
    ok_den = 2 * c.tn + c.fn + c.fp
    f1_bad = 2 * c.tp / bad_den if bad_den else 0.0
    f1_ok = 2 * c.tn / ok_den if ok_den else 0.0
    return f1_ok, f1_bad
