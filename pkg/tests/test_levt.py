import random
import sys
import textwrap

import pytest

from levqe.levt import (
    MASK,
    ActionDistributions,
    CommandScorer,
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
from levqe.tags import BAD, OK

VOCAB = ["a", "b", "c", "d", "e"]


class NoEditScorer(Scorer):
    def deletion_scores(self, src, y):
        return [0.0] * len(y)

    def insertion_scores(self, src, y):
        return [[1.0, 0.0]] * (len(y) + 1)

    def word_scores(self, src, y):
        return []


class ConstantDeletionScorer(NoEditScorer):
    def __init__(self, prob):
        self.prob = prob

    def deletion_scores(self, src, y):
        return [self.prob] * len(y)


def rand_tokens(rng, max_len=10):
    return [rng.choice(VOCAB) for _ in range(rng.randint(0, max_len))]


class TestPrimitives:
    def test_apply_deletion(self):
        assert apply_deletion(["a", "b", "c"], [False, True, False]) == ["a", "c"]

    def test_apply_deletion_identity(self):
        assert apply_deletion(["a", "b"], [False, False]) == ["a", "b"]

    def test_apply_deletion_all(self):
        assert apply_deletion(["a", "b"], [True, True]) == []

    def test_apply_deletion_length_mismatch(self):
        with pytest.raises(ValueError):
            apply_deletion(["a"], [True, False])

    def test_apply_insertion_zero(self):
        assert apply_insertion(["a", "b"], [0, 0, 0]) == ["a", "b"]

    def test_apply_insertion_middle(self):
        assert apply_insertion(["a", "c"], [0, 2, 0]) == ["a", MASK, MASK, "c"]

    def test_apply_insertion_empty_start(self):
        assert apply_insertion([], [3]) == [MASK, MASK, MASK]

    def test_apply_insertion_bad_count(self):
        with pytest.raises(ValueError):
            apply_insertion(["a"], [0, 99], k_max=3)
        with pytest.raises(ValueError):
            apply_insertion(["a"], [0])

    def test_fill_words(self):
        assert fill_words(["a", MASK, "c"], ["b"]) == ["a", "b", "c"]
        assert fill_words([MASK, MASK], ["x", "y"]) == ["x", "y"]
        assert fill_words(["a"], []) == ["a"]

    def test_fill_words_count_mismatch(self):
        with pytest.raises(ValueError):
            fill_words([MASK], [])


class TestActionDistributions:
    def test_valid(self):
        dists = ActionDistributions((0.2,), ((0.5, 0.5), (1.0, 0.0)), ({"a": 1.0},))
        assert dists.k_max == 1

    def test_insertion_needs_two_entries(self):
        with pytest.raises(MalformedDistributionError, match="insertion"):
            ActionDistributions((), ((1.0,),), ())

    def test_unnormalized_rejected(self):
        with pytest.raises(MalformedDistributionError, match="word"):
            ActionDistributions((), ((1.0, 0.0),), ({"a": 0.5},))

    def test_probability_range(self):
        with pytest.raises(MalformedDistributionError, match="deletion"):
            ActionDistributions((1.5,), ((1.0, 0.0), (1.0, 0.0)), ())


class TestDecode:
    def test_no_edit_scorer_fixpoint_first_iteration(self):
        final, trace = decode(["x"], ["a", "b"], NoEditScorer(), max_iters=5)
        assert final == ["a", "b"]
        assert len(trace) == 1
        assert (trace[0].j0, trace[0].j1, trace[0].j2) == (2, 2, 2)

    def test_oracle_from_empty(self):
        target = ["a", "b", "c"]
        final, trace = decode(["x"], [], OracleScorer(target), max_iters=10)
        assert final == target
        assert len(trace) == 2
        assert trace[0].y == tuple(target)
        assert (trace[0].j0, trace[0].j1, trace[0].j2) == (0, 0, 3)

    def test_cap_returns_first_iteration_state(self):
        scorer = RandomScorer(123)
        final, trace = decode(["s"], ["a", "b", "c"], scorer, max_iters=1)
        assert len(trace) == 1
        assert final == list(trace[0].y)

    def test_max_iters_validated(self):
        with pytest.raises(ValueError):
            decode([], [], NoEditScorer(), max_iters=0)

    def test_oracle_convergence_random_pairs(self):
        rng = random.Random(77)
        for _ in range(200):
            y0, target = rand_tokens(rng), rand_tokens(rng)
            final, trace = decode(["src"], y0, OracleScorer(target), max_iters=10)
            assert final == target
            if y0 == target:
                assert len(trace) == 1
            else:
                assert len(trace) == 2

    def test_length_bookkeeping_chain(self):
        rng = random.Random(88)
        for _ in range(100):
            y0 = rand_tokens(rng)
            scorer = RandomScorer(rng.randint(0, 10**6))
            final, trace = decode(["s"], y0, scorer, max_iters=4)
            prev_len = len(y0)
            for state in trace:
                assert state.j0 == prev_len
                assert state.j1 <= state.j0
                assert state.j2 >= state.j1
                assert len(state.y) == state.j2
                assert MASK not in state.y
                prev_len = len(state.y)
            assert final == list(trace[-1].y)

    def test_fixpoint_soundness(self):
        rng = random.Random(99)
        converged = 0
        for _ in range(60):
            y0 = rand_tokens(rng, 6)
            scorer = RandomScorer(rng.randint(0, 10**6))
            final, trace = decode(["s"], y0, scorer, max_iters=8)
            if len(trace) < 8:
                converged += 1
                again, _ = decode(["s"], final, scorer, max_iters=1)
                assert again == final
        assert converged > 0

    def test_malformed_deletion_reported(self):
        class Broken(NoEditScorer):
            def deletion_scores(self, src, y):
                return [2.0] * len(y)

        with pytest.raises(MalformedDistributionError, match="deletion"):
            decode([], ["a"], Broken(), max_iters=1)

    def test_malformed_insertion_reported(self):
        class Broken(NoEditScorer):
            def insertion_scores(self, src, y):
                return [[0.7, 0.7]] * (len(y) + 1)

        with pytest.raises(MalformedDistributionError, match="insertion"):
            decode([], ["a"], Broken(), max_iters=1)

    def test_malformed_word_reported(self):
        class Broken(NoEditScorer):
            def insertion_scores(self, src, y):
                dists = [[1.0, 0.0]] * (len(y) + 1)
                dists[0] = [0.0, 1.0]
                return dists

            def word_scores(self, src, y):
                return [{"a": 0.2}]

        with pytest.raises(MalformedDistributionError, match="word"):
            decode([], ["a"], Broken(), max_iters=1)


class TestOracleScorer:
    def test_no_op_on_target(self):
        scorer = OracleScorer(["a", "b"])
        assert scorer.deletion_scores([], ["a", "b"]) == [0.0, 0.0]
        dists = scorer.insertion_scores([], ["a", "b"])
        assert [d.index(1.0) for d in dists] == [0, 0, 0]

    def test_flags_non_lcs_token(self):
        scorer = OracleScorer(["a", "c"])
        assert scorer.deletion_scores([], ["a", "b"]) == [0.0, 1.0]
        dists = scorer.insertion_scores([], ["a"])
        assert [d.index(1.0) for d in dists] == [0, 1]
        words = scorer.word_scores([], ["a", MASK])
        assert words == [{"c": 1.0}]

    def test_empty_current_requests_whole_target(self):
        scorer = OracleScorer(["a", "b", "c"])
        dists = scorer.insertion_scores([], [])
        assert len(dists) == 1
        assert dists[0].index(1.0) == 3


class TestQePredict:
    def test_oracle_on_its_own_target_all_ok(self):
        tags = qe_predict(["x"], ["a", "b"], OracleScorer(["a", "b"]))
        assert tags.word_tags == (OK, OK)
        assert tags.gap_tags == (OK, OK, OK)

    def test_oracle_flags_edit_positions(self):
        tags = qe_predict(["x"], ["a", "b"], OracleScorer(["a", "c"]), tau=0.5)
        assert tags.word_tags == (OK, BAD)
        assert tags.gap_tags == (OK, BAD, OK)

    def test_high_threshold_dominates(self):
        tags = qe_predict(["x"], ["a", "b"], ConstantDeletionScorer(0.6), tau=0.999)
        assert tags.word_tags == (OK, OK)
        assert tags.gap_tags == (OK, OK, OK)

    def test_threshold_is_inclusive(self):
        tags = qe_predict(["x"], ["a"], ConstantDeletionScorer(0.5), tau=0.5)
        assert tags.word_tags == (BAD,)

    def test_post_deletion_view_maps_gaps_back(self):
        tags = qe_predict(
            ["x"],
            ["a", "b"],
            OracleScorer(["a", "c"]),
            tau=0.5,
            insertion_view="post-deletion",
        )
        # "b" is deleted; the oracle then asks for "c" after the surviving
        # "a", which maps to original gap 1.
        assert tags.word_tags == (OK, BAD)
        assert tags.gap_tags == (OK, BAD, OK)

    def test_tau_validated(self):
        with pytest.raises(ValueError):
            qe_predict([], [], NoEditScorer(), tau=0.0)
        with pytest.raises(ValueError):
            qe_predict([], [], NoEditScorer(), tau=1.0)

    def test_length_invariant_any_scorer(self):
        rng = random.Random(101)
        for _ in range(100):
            mt = rand_tokens(rng)
            scorer = RandomScorer(rng.randint(0, 10**6))
            tags = qe_predict(["s"], mt, scorer, tau=0.5)
            assert len(tags.word_tags) == len(mt)
            assert len(tags.gap_tags) == len(mt) + 1


class TestScoreIteration:
    def test_bookkeeping(self):
        dists, y1, y2 = score_iteration(OracleScorer(["a", "c"]), ["x"], ["a", "b"])
        assert y1 == ["a"]
        assert y2 == ["a", MASK]
        assert len(dists.del_probs) == 2
        assert len(dists.ins_count_probs) == len(y1) + 1
        assert len(dists.word_probs) == 1


NO_EDIT_CHILD = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        y = req["y"]
        if req["head"] == "deletion":
            resp = {"probs": [0.0] * len(y)}
        elif req["head"] == "insertion":
            resp = {"dists": [[1.0, 0.0]] * (len(y) + 1)}
        else:
            resp = {"dists": [{"tok": 1.0} for t in y if t == "<MASK>"]}
        print(json.dumps(resp), flush=True)
    """
)

GARBAGE_CHILD = textwrap.dedent(
    """
    import sys
    for line in sys.stdin:
        print("not json", flush=True)
    """
)


class TestCommandScorer:
    def test_external_no_edit_scorer(self, tmp_path):
        script = tmp_path / "scorer.py"
        script.write_text(NO_EDIT_CHILD, encoding="utf-8")
        scorer = CommandScorer(f"{sys.executable} {script}")
        try:
            final, trace = decode(["s"], ["a", "b"], scorer, max_iters=3)
            assert final == ["a", "b"]
            assert len(trace) == 1
            tags = qe_predict(["s"], ["a", "b"], scorer)
            assert tags.word_tags == (OK, OK)
        finally:
            scorer.close()

    def test_protocol_violation_names_head(self, tmp_path):
        script = tmp_path / "garbage.py"
        script.write_text(GARBAGE_CHILD, encoding="utf-8")
        scorer = CommandScorer(f"{sys.executable} {script}")
        try:
            with pytest.raises(ScorerProtocolError, match="deletion"):
                decode(["s"], ["a"], scorer, max_iters=1)
        finally:
            scorer.close()

    def test_dead_process_reported(self, tmp_path):
        script = tmp_path / "dead.py"
        script.write_text("import sys; sys.exit(0)\n", encoding="utf-8")
        scorer = CommandScorer(f"{sys.executable} {script}")
        try:
            with pytest.raises(ScorerProtocolError, match="deletion"):
                decode(["s"], ["a"], scorer, max_iters=1)
        finally:
            scorer.close()
