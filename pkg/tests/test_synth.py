import itertools
import math
import random
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levqe.subword import subword_to_word_tags
from levqe.synth import (
    EOS,
    CommandTranslator,
    EnsembleWeights,
    IdentityTranslator,
    TableSequenceModel,
    TableTranslator,
    TranslationError,
    mvppe_decode,
    synth_bt_rt_tgt,
    synth_mvppe,
    synth_src_mt1_mt2,
    synth_src_mt_ref,
    triplets_to_training,
    tune_ensemble_weights,
)
from levqe.tags import OK


def random_table_model(rng, conditioning, vocab, max_len, name):
    """Total toy model: a grid-probability distribution for every prefix."""
    entries = {}
    cond_key = " ".join(conditioning)
    support = list(vocab) + [EOS]
    for length in range(max_len + 1):
        for prefix in itertools.product(vocab, repeat=length):
            weights = [rng.randint(1, 9) for _ in support]
            total = sum(weights)
            entries[(cond_key, " ".join(prefix))] = {
                tok: w / total for tok, w in zip(support, weights)
            }
    return TableSequenceModel(entries, name=name)


def enumerate_best(src, tgt, model_t, model_p, lambda_t, lambda_p, vocab, max_len):
    """Exhaustive argmax over all sequences up to max_len under the
    interpolated per-step score; mirrors the decode tie-breaking."""
    total = lambda_t + lambda_p
    wt, wp = lambda_t / total, lambda_p / total

    def step_prob(prefix, tok):
        dist_t = model_t.step(src, prefix)
        dist_p = model_p.step(tgt, prefix)
        return wt * dist_t.get(tok, 0.0) + wp * dist_p.get(tok, 0.0)

    finished = []
    capped = []
    for length in range(max_len + 1):
        for seq in itertools.product(vocab, repeat=length):
            score = 0.0
            dead = False
            for i in range(length):
                p = step_prob(seq[:i], seq[i])
                if p <= 0.0:
                    dead = True
                    break
                score += math.log(p)
            if dead:
                continue
            p_eos = step_prob(seq, EOS)
            if p_eos > 0.0:
                finished.append((seq, score + math.log(p_eos)))
            if length == max_len:
                capped.append((seq, score))
    pool = finished if finished else capped
    pool.sort(key=lambda item: (-item[1], item[0]))
    return list(pool[0][0])


def single_model_beam(conditioning, model, beam, max_len):
    """Reference beam search over one model, written independently."""
    live = [((), 0.0)]
    finished = []
    for _ in range(max_len):
        candidates = []
        for tokens, score in live:
            dist = model.step(conditioning, tokens)
            for tok in sorted(dist):
                p = dist[tok]
                if p <= 0.0:
                    continue
                extended = score + math.log(p)
                if tok == EOS:
                    finished.append((tokens, extended))
                else:
                    candidates.append((tokens + (tok,), extended))
        if not candidates:
            break
        candidates.sort(key=lambda item: (-item[1], item[0]))
        live = candidates[:beam]
    pool = finished if finished else live
    pool.sort(key=lambda item: (-item[1], item[0]))
    return list(pool[0][0])


class TestTranslators:
    def test_identity(self):
        assert IdentityTranslator().translate(["a", "b"]) == ["a", "b"]

    def test_table_lookup(self):
        table = TableTranslator({"a b": "x y z"})
        assert table.translate(["a", "b"]) == ["x", "y", "z"]

    def test_table_missing_entry_fails(self):
        with pytest.raises(TranslationError):
            TableTranslator({}).translate(["a"])

    def test_command_translator_roundtrip(self):
        command = f'{sys.executable} -c "import sys\nfor line in sys.stdin: print(line.strip().upper(), flush=True)"'
        translator = CommandTranslator(command)
        try:
            assert translator.translate(["ab", "cd"]) == ["AB", "CD"]
            assert translator.translate(["x"]) == ["X"]
        finally:
            translator.close()


class TestSynthMethods:
    def test_src_mt_ref_empty(self):
        assert synth_src_mt_ref([], IdentityTranslator()).records == []

    def test_src_mt_ref_stub(self):
        mt = TableTranslator({"s": "m"})
        result = synth_src_mt_ref([(["s"], ["r"])], mt)
        assert len(result.records) == 1
        rec = result.records[0]
        assert (rec.src, rec.mt, rec.pe) == (("s",), ("m",), ("r",))
        assert rec.origin == "src-mt-ref"

    def test_src_mt_ref_failures_skipped(self):
        mt = TableTranslator({"a": "x", "c": "y"})
        result = synth_src_mt_ref([(["a"], ["r1"]), (["b"], ["r2"]), (["c"], ["r3"])], mt)
        assert len(result.records) == 1 + 1
        assert result.skipped == 1
        assert [rec.src for rec in result.records] == [("a",), ("c",)]

    def test_bt_rt_tgt_identity(self):
        result = synth_bt_rt_tgt([["t"]], IdentityTranslator(), IdentityTranslator())
        rec = result.records[0]
        assert (rec.src, rec.mt, rec.pe) == (("t",), ("t",), ("t",))

    def test_bt_rt_tgt_composition(self):
        bt = TableTranslator({"t": "b"})
        fwd = TableTranslator({"b": "r"})
        rec = synth_bt_rt_tgt([["t"]], bt, fwd).records[0]
        assert (rec.src, rec.mt, rec.pe) == (("b",), ("r",), ("t",))

    def test_src_mt1_mt2_identity_filter(self):
        same = TableTranslator({"a": "x", "b": "y"})
        result = synth_src_mt1_mt2([["a"], ["b"]], same, same)
        assert result.records == []
        assert result.removed_identical == 2

    def test_src_mt1_mt2_partial_filter(self):
        weak = TableTranslator({"a": "w", "b": "same", "c": "w2"})
        strong = TableTranslator({"a": "s", "b": "same", "c": "s2"})
        result = synth_src_mt1_mt2([["a"], ["b"], ["c"]], weak, strong)
        assert len(result.records) == 2
        assert result.removed_identical == 1
        assert [rec.src for rec in result.records] == [("a",), ("c",)]

    def test_order_preserved(self):
        mt = IdentityTranslator()
        pairs = [([f"s{i}"], [f"r{i}"]) for i in range(20)]
        result = synth_src_mt_ref(pairs, mt)
        assert [rec.src[0] for rec in result.records] == [f"s{i}" for i in range(20)]


class TestMvppeDecode:
    def test_matches_exhaustive_enumeration(self):
        rng = random.Random(2024)
        for case in range(20):
            vocab = ["a", "b", "c", "d"][: rng.randint(2, 4)]
            max_len = rng.randint(2, 4)
            src, tgt = ["s"], ["t"]
            model_t = random_table_model(rng, src, vocab, max_len, "t")
            model_p = random_table_model(rng, tgt, vocab, max_len, "p")
            lambda_t = float(rng.randint(1, 3))
            lambda_p = float(rng.randint(1, 3))
            got = mvppe_decode(
                src, tgt, model_t, model_p, EnsembleWeights(lambda_t, lambda_p),
                beam=256, max_len=max_len,
            )
            want = enumerate_best(src, tgt, model_t, model_p, lambda_t, lambda_p, vocab, max_len)
            assert got == want, f"case {case}"

    def test_lambda_p_zero_reduces_to_translation_model(self):
        rng = random.Random(7)
        for _ in range(10):
            vocab = ["a", "b", "c"]
            model_t = random_table_model(rng, ["s"], vocab, 3, "t")
            model_p = random_table_model(rng, ["t"], vocab, 3, "p")
            only_t = mvppe_decode(
                ["s"], ["t"], model_t, model_p, EnsembleWeights(3.0, 0.0), beam=64, max_len=3
            )
            alone = single_model_beam(["s"], model_t, beam=64, max_len=3)
            assert only_t == alone

    def test_equal_models_equal_single_model(self):
        rng = random.Random(8)
        model = random_table_model(rng, ["s"], ["a", "b"], 3, "m")
        mixed = mvppe_decode(["s"], ["s"], model, model, EnsembleWeights(2.0, 1.0), beam=64, max_len=3)
        single = mvppe_decode(["s"], ["s"], model, model, EnsembleWeights(1.0, 0.0), beam=64, max_len=3)
        assert mixed == single

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 10**6),
        lambda_t=st.integers(1, 5),
        lambda_p=st.integers(0, 5),
        scale=st.sampled_from([2, 3, 5, 10]),
    )
    def test_rescaling_invariance(self, seed, lambda_t, lambda_p, scale):
        rng = random.Random(seed)
        vocab = ["a", "b"]
        model_t = random_table_model(rng, ["s"], vocab, 3, "t")
        model_p = random_table_model(rng, ["t"], vocab, 3, "p")
        base = mvppe_decode(
            ["s"], ["t"], model_t, model_p,
            EnsembleWeights(float(lambda_t), float(lambda_p)), beam=16, max_len=3,
        )
        scaled = mvppe_decode(
            ["s"], ["t"], model_t, model_p,
            EnsembleWeights(float(lambda_t * scale), float(lambda_p * scale)), beam=16, max_len=3,
        )
        assert base == scaled

    def test_unnormalized_model_rejected(self):
        bad = TableSequenceModel({("s", ""): {"a": 0.5, EOS: 0.4}}, name="bad")
        good = TableSequenceModel({}, name="good")
        with pytest.raises(ValueError, match="translation view"):
            mvppe_decode(["s"], ["t"], bad, good, EnsembleWeights(1.0, 1.0), beam=2, max_len=2)

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            EnsembleWeights(0.0, 0.0)
        with pytest.raises(ValueError):
            EnsembleWeights(-1.0, 2.0)

    def test_empty_output_possible(self):
        model = TableSequenceModel({}, default={EOS: 1.0}, name="eos")
        assert mvppe_decode(["s"], ["t"], model, model, beam=4, max_len=4) == []


class TestSynthMvppe:
    def test_no_edit_lines_filtered(self):
        # With lambda_p = 0 and the MT system realized by greedy decoding of
        # the same translation model, mt == pe everywhere.
        rng = random.Random(3)
        model_t = random_table_model(rng, ["s"], ["a", "b"], 3, "t")
        model_p = random_table_model(rng, ["t"], ["a", "b"], 3, "p")

        class BeamTranslator(IdentityTranslator):
            name = "beam-over-t"

            def translate(self, tokens):
                return mvppe_decode(
                    tokens, tokens, model_t, model_t, EnsembleWeights(1.0, 1.0),
                    beam=64, max_len=3,
                )

        result = synth_mvppe(
            [(["s"], ["t"])], model_t, model_p, BeamTranslator(),
            EnsembleWeights(1.0, 0.0), beam=64, max_len=3,
        )
        assert result.records == []
        assert result.removed_identical == 1

    def test_toy_tables_match_decode(self):
        rng = random.Random(4)
        model_t = random_table_model(rng, ["s"], ["a", "b"], 2, "t")
        model_p = random_table_model(rng, ["t"], ["a", "b"], 2, "p")
        mt_system = TableTranslator({"s": "b b"})
        result = synth_mvppe(
            [(["s"], ["t"])], model_t, model_p, mt_system, EnsembleWeights(2.0, 1.0),
            beam=16, max_len=2,
        )
        expected_pe = mvppe_decode(
            ["s"], ["t"], model_t, model_p, EnsembleWeights(2.0, 1.0), beam=16, max_len=2
        )
        assert [list(rec.pe) for rec in result.records] == [expected_pe]
        assert result.records[0].mt == ("b", "b")

    def test_empty_corpus(self):
        model = TableSequenceModel({}, name="m")
        assert synth_mvppe([], model, model, IdentityTranslator()).records == []


class TestTripletsToTraining:
    @staticmethod
    def char_segmenter(word):
        return list(word)

    def test_identity_triplet_all_ok(self):
        from levqe.synth import TripletRecord

        records = triplets_to_training(
            [TripletRecord(("s",), ("ab", "c"), ("ab", "c"), "human")], self.char_segmenter
        )
        assert len(records) == 1
        rec = records[0]
        assert set(rec.heuristic_tags) == {OK}
        assert set(rec.word_tags) == {OK}

    def test_single_piece_segmenter_degenerates_to_word_tags(self):
        from levqe.synth import TripletRecord

        records = triplets_to_training(
            [TripletRecord(("s",), ("a", "b"), ("a", "x"), "human")], lambda w: [w]
        )
        assert records[0].heuristic_tags == records[0].word_tags

    def test_empty_sides_skipped(self):
        from levqe.synth import TripletRecord

        records = triplets_to_training(
            [
                TripletRecord(("s",), (), ("a",), "human"),
                TripletRecord(("s",), ("a",), (), "human"),
                TripletRecord(("s",), ("a",), ("a",), "human"),
            ],
            lambda w: [w],
        )
        assert len(records) == 1

    def test_roundtrip_against_own_word_tags(self):
        from levqe.synth import TripletRecord

        rng = random.Random(11)
        vocab = ["ab", "cde", "f", "gh"]
        triplets = []
        for _ in range(50):
            mt = [rng.choice(vocab) for _ in range(rng.randint(1, 6))]
            pe = [rng.choice(vocab) for _ in range(rng.randint(1, 6))]
            triplets.append(TripletRecord(("s",), tuple(mt), tuple(pe), "human"))
        for rec in triplets_to_training(triplets, self.char_segmenter):
            projected = subword_to_word_tags(rec.mt_subwords, list(rec.heuristic_tags))
            assert projected == list(rec.word_tags)


class TestTuneEnsembleWeights:
    def test_picks_closest_mean_ter(self):
        rng = random.Random(5)
        model_t = random_table_model(rng, ["s"], ["a", "b"], 3, "t")
        model_p = random_table_model(rng, ["t"], ["a", "b"], 3, "p")
        mt_system = TableTranslator({"s": "a b"})
        candidates = [(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]
        best = tune_ensemble_weights(
            [(["s"], ["t"])], model_t, model_p, mt_system, candidates,
            target_mean_ter=0.0, beam=8, max_len=3,
        )
        assert best in candidates
        # The winner's corpus TER gap must be minimal among candidates.
        from levqe.alignment import ter_score

        def mean_ter(pair):
            pe = mvppe_decode(["s"], ["t"], model_t, model_p, EnsembleWeights(*pair), beam=8, max_len=3)
            return ter_score(["a", "b"], pe) if pe else 0.0

        gaps = {pair: abs(mean_ter(pair)) for pair in candidates}
        assert gaps[best] == min(gaps.values())

    def test_empty_candidates_rejected(self):
        model = TableSequenceModel({}, name="m")
        with pytest.raises(ValueError):
            tune_ensemble_weights([], model, model, IdentityTranslator(), [], 0.1)
