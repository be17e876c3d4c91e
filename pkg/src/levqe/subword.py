"""Bridging word-level and subword-level tag spaces.

Subword segmentations are read from continuation-marker text ("@@"
suffix by default): a marked token joins the following token into the
same word. Tag sequences here use the flat gap/word/.../gap layout of
:mod:`levqe.tags`, at either granularity.

Two conversions matter:

* subword -> word: a word is OK iff every translation and in-word gap
  tag inside its span is OK; boundary gap tags pass through.
* word -> subword ("heuristic" references): per word, keep naive
  subword tags when they agree with the word tag, otherwise overwrite
  the whole span, so that converting back reproduces the word-level
  reference exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .alignment import ter_align
from .tags import BAD, OK, flatten_tags, tags_from_alignment

DEFAULT_MARKER = "@@"


@dataclass(frozen=True)
class SubwordSeq:
    """A subword token sequence plus the spans grouping it into words."""

    subtokens: tuple[str, ...]
    word_spans: tuple[tuple[int, int], ...]
    marker: str = DEFAULT_MARKER

    def __post_init__(self):
        expect = 0
        for start, end in self.word_spans:
            if start != expect or end <= start:
                raise ValueError(f"word spans must partition the subtokens, bad span ({start}, {end})")
            expect = end
        if expect != len(self.subtokens):
            raise ValueError(
                f"word spans cover {expect} subtokens, sequence has {len(self.subtokens)}"
            )

    @property
    def word_count(self) -> int:
        return len(self.word_spans)

    def words(self) -> list[str]:
        """Reassemble the word-level tokens (markers stripped)."""
        out = []
        for start, end in self.word_spans:
            pieces = [self.subtokens[i] for i in range(start, end)]
            out.append("".join(p.removesuffix(self.marker) for p in pieces))
        return out


def parse_subwords(marked: Sequence[str], marker: str = DEFAULT_MARKER) -> SubwordSeq:
    """Group continuation-marked tokens into word spans.

    A token ending in ``marker`` continues into its successor. The final
    token must not carry a marker, and no token may be the bare marker.
    """
    spans = []
    start = 0
    for i, tok in enumerate(marked):
        if tok == marker:
            raise ValueError(f"bare continuation marker at position {i}")
        if tok.endswith(marker):
            if i == len(marked) - 1:
                raise ValueError("dangling continuation")
            continue
        spans.append((start, i + 1))
        start = i + 1
    return SubwordSeq(tuple(marked), tuple(spans), marker)


def segment_words(
    words: Sequence[str],
    segmenter: Callable[[str], Sequence[str]],
    marker: str = DEFAULT_MARKER,
) -> SubwordSeq:
    """Apply a word->pieces segmenter and mark all non-final pieces."""
    subtokens: list[str] = []
    spans = []
    for word in words:
        pieces = list(segmenter(word))
        if not pieces or any(not p for p in pieces):
            raise ValueError(f"segmenter produced an empty piece for {word!r}")
        start = len(subtokens)
        for i, piece in enumerate(pieces):
            subtokens.append(piece + marker if i < len(pieces) - 1 else piece)
        spans.append((start, len(subtokens)))
    return SubwordSeq(tuple(subtokens), tuple(spans), marker)


def _check_flat(tags: Sequence[str], token_count: int, what: str) -> None:
    if len(tags) != 2 * token_count + 1:
        raise ValueError(
            f"{what}: expected {2 * token_count + 1} tags for {token_count} tokens, got {len(tags)}"
        )


def subword_to_word_tags(sw: SubwordSeq, subword_tags: Sequence[str]) -> list[str]:
    """Project flat subword-level tags up to the word level.

    Each word keeps its left boundary gap tag and becomes OK only if
    every translation and in-word gap tag inside its span is OK; the
    trailing gap tag is copied last.
    """
    _check_flat(subword_tags, len(sw.subtokens), "subword tags")
    out = []
    for start, end in sw.word_spans:
        out.append(subword_tags[2 * start])
        inner = subword_tags[2 * start + 1 : 2 * end]
        out.append(OK if all(t == OK for t in inner) else BAD)
    out.append(subword_tags[-1])
    return out


def naive_subword_tags(mt_sw: SubwordSeq, pe_sw: SubwordSeq) -> list[str]:
    """Reference tags from a shift-free alignment of the raw subtokens.

    This is the straightforward reference construction; it does not in
    general project back to the word-level reference (see
    :func:`heuristic_subword_tags`).
    """
    script = ter_align(mt_sw.subtokens, pe_sw.subtokens, allow_shifts=False)
    return flatten_tags(tags_from_alignment(script, len(mt_sw.subtokens)))


def heuristic_subword_tags(
    sw: SubwordSeq, naive_tags: Sequence[str], word_tags: Sequence[str]
) -> list[str]:
    """Subword-level reference tags that project back losslessly.

    Per word: the word-level left gap tag is copied; an OK word span is
    all OK; a BAD word span keeps the naive tags when they contain a BAD,
    and is forced all BAD when they disagree. The trailing gap tag comes
    from the word level. Converting the result with
    :func:`subword_to_word_tags` reproduces ``word_tags`` exactly.
    """
    _check_flat(naive_tags, len(sw.subtokens), "naive subword tags")
    _check_flat(word_tags, sw.word_count, "word tags")
    out = []
    for k, (start, end) in enumerate(sw.word_spans):
        n = end - start
        out.append(word_tags[2 * k])
        inner = naive_tags[2 * start + 1 : 2 * end]
        if word_tags[2 * k + 1] == OK:
            out.extend([OK] * (2 * n - 1))
        elif BAD in inner:
            out.extend(inner)
        else:
            out.extend([BAD] * (2 * n - 1))
    out.append(word_tags[-1])
    return out


def tag_projection_error(
    items: Iterable[tuple[SubwordSeq, Sequence[str], Sequence[str]]],
) -> float:
    """Fraction of word-level positions a subword reference gets wrong.

    ``items`` are ``(sw, subword_tags, gold_word_tags)`` triples; each
    subword tag sequence is projected up and compared position-wise
    against the gold word-level tags.
    """
    mismatched = 0
    total = 0
    for sw, subword_tags, gold in items:
        _check_flat(gold, sw.word_count, "gold word tags")
        projected = subword_to_word_tags(sw, subword_tags)
        mismatched += sum(1 for a, b in zip(projected, gold) if a != b)
        total += len(gold)
    if total == 0:
        raise ValueError("empty corpus")
    return mismatched / total


def naive_roundtrip_error(pairs: Iterable[tuple[SubwordSeq, SubwordSeq]]) -> float:
    """Per-tag error of the naive subword reference after projection.

    For each ``(mt_sw, pe_sw)`` pair, the gold word-level tags come from
    aligning the reassembled words, the naive subword tags from aligning
    the subtokens; the returned fraction counts word-level positions
    where the projected naive tags disagree with gold.
    """
    return tag_projection_error(
        (mt_sw, naive_subword_tags(mt_sw, pe_sw), word_reference_tags(mt_sw, pe_sw))
        for mt_sw, pe_sw in pairs
    )


def word_reference_tags(mt_sw: SubwordSeq, pe_sw: SubwordSeq) -> list[str]:
    """Gold word-level tags from aligning the reassembled words."""
    mt_words = mt_sw.words()
    script = ter_align(mt_words, pe_sw.words(), allow_shifts=False)
    return flatten_tags(tags_from_alignment(script, len(mt_words)))
