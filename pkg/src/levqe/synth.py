"""Synthetic translation-triplet construction.

Four ways to fabricate (source, MT output, post-edit) triplets from
cheap corpora: translate a parallel corpus and keep the reference as the
post-edit; round-trip translate target monolingual text; pair a weaker
and a stronger system over the same source; or decode a pseudo post-edit
from a two-view ensemble that interpolates a translation distribution
(conditioned on the source) with a paraphrase distribution (conditioned
on the target). Triplets then turn into tagged training records via the
edit alignment and subword bridging machinery.

Translators and sequence models are adapters: in-memory tables for tests
and desk work, external line-based processes for real systems.
"""

from __future__ import annotations

import abc
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from ._proc import ChannelError, LineChannel
from .alignment import ter_align, ter_score
from .subword import SubwordSeq, heuristic_subword_tags, naive_subword_tags, segment_words
from .tags import flatten_tags, tags_from_alignment

logger = logging.getLogger("levqe.synth")

EOS = "</s>"

ORIGIN_SRC_MT_REF = "src-mt-ref"
ORIGIN_BT_RT_TGT = "bt-rt-tgt"
ORIGIN_SRC_MT1_MT2 = "src-mt1-mt2"
ORIGIN_MVPPE = "mvppe"
ORIGIN_HUMAN = "human"


@dataclass(frozen=True)
class TripletRecord:
    src: tuple[str, ...]
    mt: tuple[str, ...]
    pe: tuple[str, ...]
    origin: str


@dataclass
class SynthResult:
    """Surviving triplets plus bookkeeping for the run summary."""

    records: list[TripletRecord] = field(default_factory=list)
    skipped: int = 0
    removed_identical: int = 0


class TranslationError(RuntimeError):
    """A translator could not produce output for one input line."""


class Translator(abc.ABC):
    """A named sentence-to-sentence mapping, deterministic per input."""

    name: str = "translator"

    @abc.abstractmethod
    def translate(self, tokens: Sequence[str]) -> list[str]:
        """Translate one tokenized sentence; raise TranslationError on failure."""


class IdentityTranslator(Translator):
    name = "identity"

    def translate(self, tokens):
        return list(tokens)


class TableTranslator(Translator):
    """Lookup-table stub; unknown inputs fail like a crashed system."""

    def __init__(self, table: dict[str, str], name: str = "table"):
        self.table = dict(table)
        self.name = name

    def translate(self, tokens):
        key = " ".join(tokens)
        if key not in self.table:
            raise TranslationError(f"{self.name}: no entry for {key!r}")
        return self.table[key].split()


class CommandTranslator(Translator):
    """External system speaking one flushed output line per input line."""

    def __init__(self, command: str, name: Optional[str] = None, timeout: float = 60.0):
        self.command = command
        self.name = name or f"command({command})"
        self._channel = LineChannel(command, timeout=timeout)

    def close(self):
        self._channel.close()

    def translate(self, tokens):
        try:
            return self._channel.request(" ".join(tokens)).split()
        except ChannelError as exc:
            raise TranslationError(f"{self.name}: {exc}") from exc


class SequenceModel(abc.ABC):
    """Next-token distribution given a conditioning input and a prefix."""

    name: str = "model"

    @abc.abstractmethod
    def step(self, conditioning: Sequence[str], prefix: Sequence[str]) -> dict[str, float]:
        """Distribution over next token plus ``EOS``; must sum to 1."""


class TableSequenceModel(SequenceModel):
    """Conditional table keyed by (conditioning, prefix) strings.

    Missing entries fall back to ``default`` (EOS with probability 1
    unless overridden), which keeps toy models total.
    """

    def __init__(
        self,
        entries: dict[tuple[str, str], dict[str, float]],
        default: Optional[dict[str, float]] = None,
        name: str = "table",
    ):
        self.entries = dict(entries)
        self.default = dict(default) if default else {EOS: 1.0}
        self.name = name

    def step(self, conditioning, prefix):
        key = (" ".join(conditioning), " ".join(prefix))
        return self.entries.get(key, self.default)


@dataclass(frozen=True)
class EnsembleWeights:
    """Interpolation weights for the translation and paraphrase views."""

    lambda_t: float = 2.0
    lambda_p: float = 1.0

    def __post_init__(self):
        if self.lambda_t < 0 or self.lambda_p < 0 or self.lambda_t + self.lambda_p <= 0:
            raise ValueError("ensemble weights must be non-negative with a positive sum")


def _checked_step(model: SequenceModel, conditioning, prefix, view: str) -> dict[str, float]:
    dist = model.step(conditioning, prefix)
    total = sum(dist.values())
    if any(p < 0 for p in dist.values()) or abs(total - 1.0) > 1e-9:
        raise ValueError(f"{view} view ({model.name}) emitted a non-normalized distribution (sum {total!r})")
    return dist


def mvppe_decode(
    src: Sequence[str],
    tgt: Sequence[str],
    model_t: SequenceModel,
    model_p: SequenceModel,
    weights: EnsembleWeights = EnsembleWeights(),
    beam: int = 4,
    max_len: int = 128,
    length_normalize: bool = False,
) -> list[str]:
    """Beam search over the two-view interpolated next-token distribution.

    Per step the views are mixed as ``(lt*pt + lp*pp) / (lt + lp)`` and
    log-probabilities accumulate. A hypothesis that emits ``EOS`` is
    frozen and competes by final score; the best terminated hypothesis
    wins, falling back to the best length-capped one only if nothing
    terminated. Ties break toward the lexicographically smaller token
    sequence. Raw log-probability scores by default;
    ``length_normalize`` divides by hypothesis length instead.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    total = weights.lambda_t + weights.lambda_p
    wt = weights.lambda_t / total
    wp = weights.lambda_p / total

    def rank_key(item: tuple[tuple[str, ...], float]):
        tokens, score = item
        if length_normalize:
            score = score / max(len(tokens), 1)
        return (-score, tokens)

    live: list[tuple[tuple[str, ...], float]] = [((), 0.0)]
    finished: list[tuple[tuple[str, ...], float]] = []
    for _ in range(max_len):
        candidates: list[tuple[tuple[str, ...], float]] = []
        for tokens, score in live:
            dist_t = _checked_step(model_t, src, tokens, "translation")
            dist_p = _checked_step(model_p, tgt, tokens, "paraphrase")
            for tok in sorted(set(dist_t) | set(dist_p)):
                p = wt * dist_t.get(tok, 0.0) + wp * dist_p.get(tok, 0.0)
                if p <= 0.0:
                    continue
                extended = score + math.log(p)
                if tok == EOS:
                    finished.append((tokens, extended))
                else:
                    candidates.append((tokens + (tok,), extended))
        if not candidates:
            break
        candidates.sort(key=rank_key)
        live = candidates[:beam]

    pool = finished if finished else live
    pool.sort(key=rank_key)
    return list(pool[0][0])


def synth_src_mt_ref(
    parallel: Iterable[tuple[Sequence[str], Sequence[str]]], mt_system: Translator
) -> SynthResult:
    """Translate the source side of a parallel corpus; the reference
    plays the post-edit."""
    result = SynthResult()
    for i, (src, ref) in enumerate(parallel):
        try:
            mt = mt_system.translate(src)
        except TranslationError as exc:
            logger.warning("skipping line %d: %s", i, exc)
            result.skipped += 1
            continue
        result.records.append(
            TripletRecord(tuple(src), tuple(mt), tuple(ref), ORIGIN_SRC_MT_REF)
        )
    return result


def synth_bt_rt_tgt(
    mono_tgt: Iterable[Sequence[str]], bt_system: Translator, fwd_system: Translator
) -> SynthResult:
    """Round-trip translate target monolingual text; the round trip is
    the MT output and the original target the post-edit."""
    result = SynthResult()
    for i, tgt in enumerate(mono_tgt):
        try:
            bt = bt_system.translate(tgt)
            rt = fwd_system.translate(bt)
        except TranslationError as exc:
            logger.warning("skipping line %d: %s", i, exc)
            result.skipped += 1
            continue
        result.records.append(TripletRecord(tuple(bt), tuple(rt), tuple(tgt), ORIGIN_BT_RT_TGT))
    return result


def synth_src_mt1_mt2(
    mono_src: Iterable[Sequence[str]], weak: Translator, strong: Translator
) -> SynthResult:
    """Pair a weaker system (MT output) with a stronger one (post-edit).

    Lines where the two systems agree exactly carry no edit signal and
    are removed; the count is reported in the result.
    """
    result = SynthResult()
    for i, src in enumerate(mono_src):
        try:
            mt1 = weak.translate(src)
            mt2 = strong.translate(src)
        except TranslationError as exc:
            logger.warning("skipping line %d: %s", i, exc)
            result.skipped += 1
            continue
        if mt1 == mt2:
            result.removed_identical += 1
            continue
        result.records.append(
            TripletRecord(tuple(src), tuple(mt1), tuple(mt2), ORIGIN_SRC_MT1_MT2)
        )
    return result


def synth_mvppe(
    parallel: Iterable[tuple[Sequence[str], Sequence[str]]],
    model_t: SequenceModel,
    model_p: SequenceModel,
    mt_system: Translator,
    weights: EnsembleWeights = EnsembleWeights(),
    beam: int = 4,
    max_len: int = 128,
    length_normalize: bool = False,
) -> SynthResult:
    """Pseudo post-edits from two-view ensemble decoding over a parallel
    corpus; the MT output comes from ``mt_system``.

    No-edit lines (decoded post-edit identical to the MT output) are
    removed like identical system pairs, with the count reported.
    """
    result = SynthResult()
    for i, (src, tgt) in enumerate(parallel):
        try:
            mt = mt_system.translate(src)
        except TranslationError as exc:
            logger.warning("skipping line %d: %s", i, exc)
            result.skipped += 1
            continue
        pe = mvppe_decode(
            src, tgt, model_t, model_p, weights, beam=beam, max_len=max_len,
            length_normalize=length_normalize,
        )
        if list(mt) == pe:
            result.removed_identical += 1
            continue
        result.records.append(TripletRecord(tuple(src), tuple(mt), tuple(pe), ORIGIN_MVPPE))
    return result


@dataclass(frozen=True)
class TrainingRecord:
    """One tagged finetuning example at both granularities."""

    mt_subwords: SubwordSeq
    heuristic_tags: tuple[str, ...]
    word_tags: tuple[str, ...]


def triplets_to_training(
    triplets: Iterable[TripletRecord],
    segmenter: Callable[[str], Sequence[str]],
    marker: str = "@@",
) -> list[TrainingRecord]:
    """Tag triplets for finetuning: word-level reference tags from the
    shift-free MT/post-edit alignment, naive subword tags from the
    segmented alignment, and the lossless heuristic interpolation of the
    two. Records with an empty MT or post-edit side are skipped."""
    records = []
    for i, triplet in enumerate(triplets):
        if not triplet.mt or not triplet.pe:
            logger.warning("skipping triplet %d: empty mt or pe", i)
            continue
        script = ter_align(triplet.mt, triplet.pe, allow_shifts=False)
        word_flat = flatten_tags(tags_from_alignment(script, len(triplet.mt)))
        mt_sw = segment_words(triplet.mt, segmenter, marker)
        pe_sw = segment_words(triplet.pe, segmenter, marker)
        naive = naive_subword_tags(mt_sw, pe_sw)
        heuristic = heuristic_subword_tags(mt_sw, naive, word_flat)
        records.append(TrainingRecord(mt_sw, tuple(heuristic), tuple(word_flat)))
    return records


def tune_ensemble_weights(
    parallel: Sequence[tuple[Sequence[str], Sequence[str]]],
    model_t: SequenceModel,
    model_p: SequenceModel,
    mt_system: Translator,
    candidates: Sequence[tuple[float, float]],
    target_mean_ter: float,
    beam: int = 4,
    max_len: int = 128,
) -> tuple[float, float]:
    """Grid search: pick the weight pair whose synthesized corpus has
    mean MT-vs-post-edit TER closest to ``target_mean_ter``."""
    if not candidates:
        raise ValueError("no candidate weight pairs")
    best_pair = None
    best_gap = None
    for lambda_t, lambda_p in candidates:
        weights = EnsembleWeights(lambda_t, lambda_p)
        ters = []
        for src, tgt in parallel:
            try:
                mt = mt_system.translate(src)
            except TranslationError:
                continue
            pe = mvppe_decode(src, tgt, model_t, model_p, weights, beam=beam, max_len=max_len)
            if pe:
                ters.append(ter_score(mt, pe))
        mean = sum(ters) / len(ters) if ters else 0.0
        gap = abs(mean - target_mean_ter)
        if best_gap is None or gap < best_gap:
            best_gap = gap
            best_pair = (lambda_t, lambda_p)
    return best_pair
