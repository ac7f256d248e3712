import math
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlgkit import decoding as dec
from dlgkit.decoding import (
    BeamHypothesis,
    SubprocessScorer,
    beam_search,
    has_repeated_trigram,
    length_penalty,
    select_final,
)
from dlgkit.encoding import EncodedSample
from dlgkit.errors import ScorerError
from dlgkit.stub_scorer import StubScorer


def _prefix(tokens=(7, 8)):
    n = len(tokens)
    return EncodedSample(token_ids=list(tokens), content_ids=[1] * n,
                         position_ids=list(range(n)), lm_mask=[False] * n,
                         clf_index=0)


class TestLengthPenalty:
    def test_known_value(self):
        assert length_penalty(13, 0.6) == pytest.approx(3 ** 0.6, abs=1e-12)

    def test_unit_length(self):
        assert length_penalty(1, 0.6) == pytest.approx(1.0)

    def test_alpha_zero_is_flat(self):
        for n in (1, 5, 50):
            assert length_penalty(n, 0.0) == 1.0

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            length_penalty(0, 0.6)
        with pytest.raises(ValueError):
            length_penalty(3, -0.1)


def _trigram_oracle(tokens):
    grams = [tuple(tokens[i:i + 3]) for i in range(len(tokens) - 2)]
    return len(grams) != len(set(grams))


class TestTrigramFilter:
    def test_examples(self):
        assert not has_repeated_trigram([1, 2, 3, 4, 5])
        assert has_repeated_trigram([1, 2, 3, 1, 2, 3])
        assert has_repeated_trigram([0, 0, 0, 0])
        assert not has_repeated_trigram([0, 0, 0])
        assert not has_repeated_trigram([])

    @given(st.lists(st.integers(min_value=0, max_value=3), max_size=14))
    def test_against_enumeration_oracle(self, tokens):
        assert has_repeated_trigram(tokens) == _trigram_oracle(tokens)


def _exhaustive_top(prefix, scorer, alpha, max_len):
    """Enumerate every unfiltered full-length continuation; rank like the
    beam does (score descending, token sequence ascending)."""
    gen_content = dec._generation_content_id(prefix)
    vocab = len(scorer.logprobs(prefix))
    results = []

    def rec(sample, tokens, lp_sum):
        if len(tokens) == max_len:
            score = lp_sum / length_penalty(len(tokens), alpha)
            results.append((score, tokens))
            return
        logprobs = scorer.logprobs(sample)
        for t in range(vocab):
            if dec._creates_repeated_trigram(sample.token_ids, t):
                continue
            rec(dec._extend(sample, t, gen_content), tokens + [t],
                lp_sum + logprobs[t])

    rec(prefix, [], 0.0)
    if not results:
        return None
    return max(results, key=lambda st_: (st_[0], [-t for t in st_[1]]))


class TestBeamSearchOracle:
    @pytest.mark.parametrize("seed", range(8))
    def test_full_width_beam_equals_exhaustive(self, seed):
        vocab, max_len = 4, 4
        scorer = StubScorer(vocab, seed=seed)
        prefix = _prefix()
        hyps = beam_search(prefix, scorer, beam=vocab ** max_len,
                           alpha=0.6, max_len=max_len)
        expected = _exhaustive_top(prefix, scorer, 0.6, max_len)
        assert expected is not None
        got = hyps[0]
        assert got.normalized_score == pytest.approx(expected[0], abs=1e-9)
        assert got.tokens == expected[1]

    def test_beam_one_is_greedy(self):
        scorer = StubScorer(5, seed=3)
        prefix = _prefix()
        hyps = beam_search(prefix, scorer, beam=1, alpha=0.0, max_len=3)
        # manual greedy rollout
        sample, tokens, total = prefix, [], 0.0
        gen = dec._generation_content_id(prefix)
        for _ in range(3):
            lps = scorer.logprobs(sample)
            ranked = sorted(range(5), key=lambda t: (-lps[t], t))
            t = next(t for t in ranked
                     if not dec._creates_repeated_trigram(sample.token_ids, t))
            total += lps[t]
            tokens.append(t)
            sample = dec._extend(sample, t, gen)
        assert hyps[0].tokens == tokens
        assert hyps[0].logprob_sum == pytest.approx(total)

    def test_eos_freezes_hypotheses(self):
        scorer = StubScorer(3, seed=1)
        hyps = beam_search(_prefix(), scorer, beam=9, alpha=0.6,
                           max_len=4, eos_id=0)
        finished = [h for h in hyps if h.finished]
        assert finished
        for h in finished:
            assert h.tokens[-1] == 0

    def test_all_filtered_returns_flagged_fallback(self):
        # single-token vocabulary: after [0, 0, 0] every extension repeats
        scorer = StubScorer(1, seed=0)
        prefix = _prefix(tokens=(0, 0))
        hyps = beam_search(prefix, scorer, beam=2, alpha=0.6, max_len=6)
        assert len(hyps) >= 1
        # the flagged filtered continuation is present alongside any shorter
        # live hypotheses
        assert any(h.filtered_fallback for h in hyps)

    def test_ranking_is_descending(self):
        scorer = StubScorer(4, seed=9)
        hyps = beam_search(_prefix(), scorer, beam=4, alpha=0.6, max_len=4)
        scores = [h.normalized_score for h in hyps]
        assert scores == sorted(scores, reverse=True)


class _FixedScorer:
    """Classifier stub with scripted logits; logprobs uniform."""

    def __init__(self, logits, fail=False):
        self.logits = logits
        self.fail = fail

    def logprobs(self, sample):
        return [math.log(0.25)] * 4

    def classify(self, samples):
        if self.fail:
            raise ScorerError("classifier down")
        return self.logits[:len(samples)]


class TestSelectFinal:
    def _hyps(self):
        return [BeamHypothesis(tokens=[1], logprob_sum=-1.0, alpha=0.6),
                BeamHypothesis(tokens=[2], logprob_sum=-2.0, alpha=0.6)]

    def test_fusion_can_override_beam_ranking(self):
        hyps = self._hyps()
        choice = select_final(hyps, _FixedScorer([0.0, 5.0]), _prefix(),
                              clf_id=99, fusion_weight=1.0)
        assert choice.hypothesis.tokens == [2]
        assert choice.classifier_used
        assert choice.fused_score == pytest.approx(
            hyps[1].normalized_score + 5.0)

    def test_zero_weight_ignores_classifier(self):
        choice = select_final(self._hyps(), _FixedScorer([0.0, 100.0]),
                              _prefix(), clf_id=99, fusion_weight=0.0)
        assert choice.hypothesis.tokens == [1]
        assert not choice.classifier_used

    def test_classifier_failure_falls_back(self):
        choice = select_final(self._hyps(), _FixedScorer([], fail=True),
                              _prefix(), clf_id=99, fusion_weight=1.0)
        assert choice.hypothesis.tokens == [1]
        assert not choice.classifier_used

    def test_empty_hypotheses_error(self):
        with pytest.raises(ScorerError):
            select_final([], _FixedScorer([]), _prefix(), clf_id=99)


class TestSubprocessScorer:
    CMD = f"{sys.executable} -m dlgkit.stub_scorer --vocab 8 --seed 0"

    def test_logprobs_form_a_distribution(self):
        with SubprocessScorer(self.CMD) as scorer:
            lps = scorer.logprobs(_prefix())
            assert len(lps) == 8
            assert abs(sum(math.exp(v) for v in lps) - 1.0) < 1e-4

    def test_classify_returns_one_logit_per_sample(self):
        with SubprocessScorer(self.CMD) as scorer:
            logits = scorer.classify([_prefix(), _prefix(tokens=(1, 2))])
            assert len(logits) == 2

    def test_deterministic_across_processes(self):
        with SubprocessScorer(self.CMD) as a, SubprocessScorer(self.CMD) as b:
            assert a.logprobs(_prefix()) == b.logprobs(_prefix())

    def test_matches_in_process_stub(self):
        with SubprocessScorer(self.CMD) as scorer:
            wire = scorer.logprobs(_prefix())
        local = StubScorer(8, seed=0).logprobs(_prefix())
        assert wire == pytest.approx(local)

    def test_beam_search_over_the_wire(self):
        with SubprocessScorer(self.CMD) as scorer:
            hyps = beam_search(_prefix(), scorer, beam=4, alpha=0.6, max_len=3)
        local = beam_search(_prefix(), StubScorer(8, seed=0), beam=4,
                            alpha=0.6, max_len=3)
        assert [h.tokens for h in hyps] == [h.tokens for h in local]
