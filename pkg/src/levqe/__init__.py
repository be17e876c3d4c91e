"""Edit-alignment toolkit for word-level MT quality estimation.

Covers TER-style edit alignment and OK/BAD reference tagging, lossless
word/subword tag conversion, MCC and per-class F1 evaluation, an
iterative edit-decoding engine with pluggable scorers, and synthetic
post-editing triplet pipelines, all behind a batch CLI (``levqe``).
"""

from .alignment import (
    EditOp,
    EditScript,
    kernel_name,
    levenshtein_align,
    ter_align,
    ter_score,
)
from .levt import (
    MASK,
    ActionDistributions,
    CommandScorer,
    LevTState,
    MalformedDistributionError,
    OracleScorer,
    RandomScorer,
    Scorer,
    ScorerProtocolError,
    apply_deletion,
    apply_insertion,
    decode,
    fill_words,
    qe_predict,
    score_iteration,
)
from .subword import (
    SubwordSeq,
    heuristic_subword_tags,
    naive_roundtrip_error,
    naive_subword_tags,
    parse_subwords,
    segment_words,
    subword_to_word_tags,
    tag_projection_error,
    word_reference_tags,
)
from .synth import (
    EOS,
    CommandTranslator,
    EnsembleWeights,
    IdentityTranslator,
    SequenceModel,
    SynthResult,
    TableSequenceModel,
    TableTranslator,
    TrainingRecord,
    TranslationError,
    Translator,
    TripletRecord,
    mvppe_decode,
    synth_bt_rt_tgt,
    synth_mvppe,
    synth_src_mt1_mt2,
    synth_src_mt_ref,
    triplets_to_training,
    tune_ensemble_weights,
)
from .tags import (
    BAD,
    OK,
    ConfusionCounts,
    QETags,
    f1_per_class,
    flatten_tags,
    mcc,
    pool_confusion,
    tags_from_alignment,
    unflatten_tags,
)

__version__ = "0.1.0"
