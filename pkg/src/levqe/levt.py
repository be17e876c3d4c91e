"""Iterative edit decoding: delete, insert placeholders, fill words.

The engine is a pure state machine over token sequences. Each iteration
applies, in order, per-position deletions, per-gap placeholder
insertions, and placeholder filling, with the probabilities supplied by
a pluggable :class:`Scorer`; decoding repeats until the sequence stops
changing or an iteration cap is hit. For quality estimation a single
scorer pass is used instead: deletion probabilities tag words and
insertion-mass probabilities tag gaps, with no word filling.

``MASK`` is the reserved placeholder string; it may only appear between
the insertion and fill steps of one iteration, never in the sequences
the caller sees.
"""

from __future__ import annotations

import abc
import hashlib
import json
import random
from dataclasses import dataclass
from typing import Sequence

from ._proc import ChannelError, LineChannel
from .tags import BAD, OK, QETags

MASK = "<MASK>"
DEFAULT_K_MAX = 64

HEAD_DELETION = "deletion"
HEAD_INSERTION = "insertion"
HEAD_WORD = "word"

INSERTION_VIEW_ORIGINAL = "original"
INSERTION_VIEW_POST_DELETION = "post-deletion"


class MalformedDistributionError(ValueError):
    """A scorer head returned something that is not a distribution."""

    def __init__(self, head: str, message: str):
        super().__init__(f"{head} head: {message}")
        self.head = head


class ScorerProtocolError(RuntimeError):
    """An external scorer broke the request/response protocol."""

    def __init__(self, head: str, message: str):
        super().__init__(f"{head} head: {message}")
        self.head = head


class Scorer(abc.ABC):
    """Three probability queries, one per edit head.

    Implementations must be deterministic given their inputs (plus an
    explicit seed for stochastic scorers) and either safe for concurrent
    read-only queries or documented single-threaded.
    """

    @abc.abstractmethod
    def deletion_scores(self, src: Sequence[str], y: Sequence[str]) -> list[float]:
        """Per-position probability that the token should be deleted."""

    @abc.abstractmethod
    def insertion_scores(self, src: Sequence[str], y: Sequence[str]) -> list[list[float]]:
        """Per-gap distribution over insertion counts 0..K_max (len(y)+1 gaps)."""

    @abc.abstractmethod
    def word_scores(self, src: Sequence[str], y: Sequence[str]) -> list[dict[str, float]]:
        """Per-placeholder distribution over tokens, in placeholder order."""


def _check_probs(probs: Sequence[float], expected: int, head: str) -> list[float]:
    if len(probs) != expected:
        raise MalformedDistributionError(head, f"expected {expected} entries, got {len(probs)}")
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise MalformedDistributionError(head, f"probability {p} out of range")
    return list(probs)


def _check_dists(dists, expected: int, head: str, min_support: int = 1):
    if len(dists) != expected:
        raise MalformedDistributionError(head, f"expected {expected} distributions, got {len(dists)}")
    out = []
    for dist in dists:
        values = list(dist.values()) if isinstance(dist, dict) else list(dist)
        if len(values) < min_support:
            raise MalformedDistributionError(head, "distribution support too small")
        if any(v < 0 for v in values):
            raise MalformedDistributionError(head, "negative probability")
        if abs(sum(values) - 1.0) > 1e-9:
            raise MalformedDistributionError(head, f"mass sums to {sum(values)!r}, not 1")
        out.append(dist)
    return out


@dataclass(frozen=True)
class ActionDistributions:
    """Validated head outputs for one edit iteration.

    ``del_probs`` has one entry per pre-deletion token, ``ins_count_probs``
    one distribution per post-deletion gap (counts 0..K_max, K_max >= 1),
    ``word_probs`` one distribution per placeholder.
    """

    del_probs: tuple[float, ...]
    ins_count_probs: tuple[tuple[float, ...], ...]
    word_probs: tuple[dict[str, float], ...]

    def __post_init__(self):
        _check_probs(self.del_probs, len(self.del_probs), HEAD_DELETION)
        _check_dists(self.ins_count_probs, len(self.ins_count_probs), HEAD_INSERTION, min_support=2)
        _check_dists(self.word_probs, len(self.word_probs), HEAD_WORD)

    @property
    def k_max(self) -> int:
        return max(len(d) - 1 for d in self.ins_count_probs) if self.ins_count_probs else 1


@dataclass(frozen=True)
class LevTState:
    """One externally visible decoding state (placeholder-free).

    ``j0``/``j1``/``j2`` are the sequence lengths before deletion, after
    deletion, and after insertion within the iteration that produced it.
    """

    y: tuple[str, ...]
    iteration: int
    j0: int
    j1: int
    j2: int


def apply_deletion(y: Sequence[str], decisions: Sequence[bool]) -> list[str]:
    """Drop the flagged positions."""
    if len(decisions) != len(y):
        raise ValueError(f"{len(decisions)} deletion decisions for {len(y)} tokens")
    return [tok for tok, drop in zip(y, decisions) if not drop]


def apply_insertion(
    y: Sequence[str], counts: Sequence[int], k_max: int = DEFAULT_K_MAX
) -> list[str]:
    """Insert ``counts[g]`` placeholders at each gap g (0..len(y))."""
    if len(counts) != len(y) + 1:
        raise ValueError(f"{len(counts)} gap counts for {len(y)} tokens")
    out: list[str] = []
    for g, count in enumerate(counts):
        if not 0 <= count <= k_max:
            raise ValueError(f"insertion count {count} at gap {g} outside 0..{k_max}")
        out.extend([MASK] * count)
        if g < len(y):
            out.append(y[g])
    return out


def fill_words(y: Sequence[str], words: Sequence[str]) -> list[str]:
    """Replace placeholders left to right; every placeholder must be filled."""
    n_masks = sum(1 for tok in y if tok == MASK)
    if len(words) != n_masks:
        raise ValueError(f"{len(words)} fill words for {n_masks} placeholders")
    it = iter(words)
    return [next(it) if tok == MASK else tok for tok in y]


def _argmax_count(dist: Sequence[float]) -> int:
    best = 0
    for i, p in enumerate(dist):
        if p > dist[best]:
            best = i
    return best


def _argmax_token(dist: dict[str, float]) -> str:
    # Ties go to the lexicographically smallest token for determinism.
    return min(dist, key=lambda tok: (-dist[tok], tok))


def score_iteration(
    scorer: Scorer, x: Sequence[str], y: Sequence[str]
) -> tuple[ActionDistributions, list[str], list[str]]:
    """Run the three staged head queries for one edit iteration.

    Deletion scores are taken on ``y``, insertion scores on the argmax
    post-deletion sequence, word scores on the placeholder-expanded
    sequence. Returns the validated distributions plus the two
    intermediate sequences.
    """
    del_probs = _check_probs(scorer.deletion_scores(x, y), len(y), HEAD_DELETION)
    y1 = apply_deletion(y, [p > 0.5 for p in del_probs])
    ins_dists = _check_dists(
        scorer.insertion_scores(x, y1), len(y1) + 1, HEAD_INSERTION, min_support=2
    )
    counts = [_argmax_count(d) for d in ins_dists]
    k_max = max(len(d) - 1 for d in ins_dists)
    y2 = apply_insertion(y1, counts, k_max=k_max)
    n_masks = len(y2) - len(y1)
    word_dists = _check_dists(scorer.word_scores(x, y2), n_masks, HEAD_WORD) if n_masks else []
    dists = ActionDistributions(
        tuple(del_probs),
        tuple(tuple(d) for d in ins_dists),
        tuple(word_dists),
    )
    return dists, y1, y2


def decode(
    x: Sequence[str],
    y0: Sequence[str],
    scorer: Scorer,
    max_iters: int = 10,
) -> tuple[list[str], list[LevTState]]:
    """Iterate delete/insert/fill until a fixpoint or ``max_iters``.

    Decisions are argmax per head (a token is deleted when its deletion
    probability exceeds 0.5). Returns the final sequence and the trace of
    per-iteration states; the trace is shorter than ``max_iters`` only if
    an iteration reproduced its input exactly.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    y = list(y0)
    trace: list[LevTState] = []
    for iteration in range(1, max_iters + 1):
        dists, y1, y2 = score_iteration(scorer, x, y)
        words = [_argmax_token(d) for d in dists.word_probs]
        y_new = fill_words(y2, words)
        trace.append(LevTState(tuple(y_new), iteration, len(y), len(y1), len(y2)))
        if y_new == y:
            return y_new, trace
        y = y_new
    return y, trace


def qe_predict(
    x: Sequence[str],
    y_mt: Sequence[str],
    scorer: Scorer,
    tau: float = 0.5,
    insertion_view: str = INSERTION_VIEW_ORIGINAL,
) -> QETags:
    """Single-pass word/gap tagging from the deletion and insertion heads.

    A word is BAD when its deletion probability reaches ``tau``; a gap is
    BAD when the insertion-count distribution at that gap puts at least
    ``tau`` mass on counts >= 1. By default the insertion head sees the
    unmodified MT sequence so gaps index the original boundaries; with
    ``insertion_view="post-deletion"`` it sees the sequence after
    thresholded deletions and each gap maps back to the boundary after
    its nearest surviving predecessor.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"threshold must lie strictly between 0 and 1, got {tau}")
    del_probs = _check_probs(scorer.deletion_scores(x, y_mt), len(y_mt), HEAD_DELETION)
    word_tags = tuple(BAD if p >= tau else OK for p in del_probs)

    gap_bad = [False] * (len(y_mt) + 1)
    if insertion_view == INSERTION_VIEW_ORIGINAL:
        dists = _check_dists(
            scorer.insertion_scores(x, y_mt), len(y_mt) + 1, HEAD_INSERTION, min_support=2
        )
        for g, dist in enumerate(dists):
            gap_bad[g] = sum(dist[1:]) >= tau
    elif insertion_view == INSERTION_VIEW_POST_DELETION:
        keep = [p < tau for p in del_probs]
        survivors = [i for i, kept in enumerate(keep) if kept]
        y1 = [tok for tok, kept in zip(y_mt, keep) if kept]
        dists = _check_dists(
            scorer.insertion_scores(x, y1), len(y1) + 1, HEAD_INSERTION, min_support=2
        )
        for g, dist in enumerate(dists):
            if sum(dist[1:]) >= tau:
                original_gap = survivors[g - 1] + 1 if g > 0 else 0
                gap_bad[original_gap] = True
    else:
        raise ValueError(f"unknown insertion view {insertion_view!r}")
    gap_tags = tuple(BAD if bad else OK for bad in gap_bad)
    return QETags(word_tags, gap_tags)


def _lcs_pairs(a: Sequence[str], b: Sequence[str]) -> list[tuple[int, int]]:
    """One fixed longest-common-subsequence alignment as index pairs."""
    m, n = len(a), len(b)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        ai = a[i - 1]
        row, prev = dp[i], dp[i - 1]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
    pairs = []
    i, j = m, n
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1] and dp[i][j] == dp[i - 1][j - 1] + 1:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif dp[i - 1][j] >= dp[i][j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


class OracleScorer(Scorer):
    """Perfect-information scorer that steers decoding toward ``target``.

    The deletion head flags every token outside a fixed LCS alignment
    with the target, the insertion head requests exactly the missing
    target tokens at the gap after the nearest aligned predecessor, and
    the word head fills placeholders with the corresponding target
    tokens, all with probability 1. From any start, decoding therefore
    reaches the target in a single edit iteration.
    """

    def __init__(self, target: Sequence[str]):
        self.target = list(target)
        self.k_max = max(DEFAULT_K_MAX, len(self.target))

    def deletion_scores(self, src, y):
        matched = {i for i, _ in _lcs_pairs(y, self.target)}
        return [0.0 if i in matched else 1.0 for i in range(len(y))]

    def insertion_scores(self, src, y):
        counts = [0] * (len(y) + 1)
        prev_i = -1
        prev_j = -1
        for i, j in _lcs_pairs(y, self.target):
            counts[prev_i + 1] += j - prev_j - 1
            prev_i, prev_j = i, j
        counts[prev_i + 1] += len(self.target) - prev_j - 1
        dists = []
        for count in counts:
            one_hot = [0.0] * (self.k_max + 1)
            one_hot[count] = 1.0
            dists.append(one_hot)
        return dists

    def word_scores(self, src, y):
        visible = [tok for tok in y if tok != MASK]
        matched_j = {j for _, j in _lcs_pairs(visible, self.target)}
        missing = [tok for j, tok in enumerate(self.target) if j not in matched_j]
        n_masks = sum(1 for tok in y if tok == MASK)
        dists = []
        for k in range(n_masks):
            token = missing[k] if k < len(missing) else "<unk>"
            dists.append({token: 1.0})
        return dists


class RandomScorer(Scorer):
    """Seeded random distributions, reproducible per (seed, head, x, y)."""

    def __init__(self, seed: int, vocab: Sequence[str] = ("a", "b", "c", "d", "e"), k_max: int = 3):
        self.seed = seed
        self.vocab = list(vocab)
        self.k_max = k_max

    def _rng(self, head: str, x, y) -> random.Random:
        key = json.dumps([self.seed, head, list(x), list(y)], ensure_ascii=False)
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    @staticmethod
    def _normalized(weights: list[float]) -> list[float]:
        total = sum(weights)
        return [w / total for w in weights]

    def deletion_scores(self, src, y):
        rng = self._rng(HEAD_DELETION, src, y)
        return [rng.random() for _ in y]

    def insertion_scores(self, src, y):
        rng = self._rng(HEAD_INSERTION, src, y)
        return [
            self._normalized([rng.random() for _ in range(self.k_max + 1)])
            for _ in range(len(y) + 1)
        ]

    def word_scores(self, src, y):
        rng = self._rng(HEAD_WORD, src, y)
        dists = []
        for tok in y:
            if tok != MASK:
                continue
            probs = self._normalized([rng.random() for _ in self.vocab])
            dists.append(dict(zip(self.vocab, probs)))
        return dists


class CommandScorer(Scorer):
    """Adapter for an external scorer speaking line-delimited JSON.

    Each query writes one request line
    ``{"head": ..., "x": [...], "y": [...]}`` to the child's stdin and
    reads one response line: ``{"probs": [...]}`` for the deletion head
    or ``{"dists": [...]}`` for the insertion and word heads. Any I/O or
    schema failure (including a response timeout from a non-flushing
    child) raises :class:`ScorerProtocolError` naming the head.
    """

    def __init__(self, command: str, timeout: float = 60.0):
        self.command = command
        self._channel = LineChannel(command, timeout=timeout)

    def close(self):
        self._channel.close()

    def _query(self, head: str, x, y, field: str):
        request = json.dumps({"head": head, "x": list(x), "y": list(y)}, ensure_ascii=False)
        try:
            line = self._channel.request(request)
        except ChannelError as exc:
            raise ScorerProtocolError(head, str(exc)) from exc
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerProtocolError(head, f"invalid JSON response: {line!r}") from exc
        if not isinstance(response, dict) or field not in response:
            raise ScorerProtocolError(head, f"response missing {field!r}: {line!r}")
        return response[field]

    def deletion_scores(self, src, y):
        return self._query(HEAD_DELETION, src, y, "probs")

    def insertion_scores(self, src, y):
        return self._query(HEAD_INSERTION, src, y, "dists")

    def word_scores(self, src, y):
        return self._query(HEAD_WORD, src, y, "dists")
