"""Beam search over a pluggable sequence scorer.

Scores are summed token log-probabilities normalized by the length penalty
lp(Y) = (5+|Y|)^alpha / (5+1)^alpha.  Hypotheses that would repeat a
trigram are dropped at every expansion step.  The final choice can fuse the
normalized beam score with a classifier logit from the same scorer.

Scorers are external: anything implementing :class:`ScorerClient` works,
including :class:`SubprocessScorer`, which talks line-delimited JSON over a
child process's stdin/stdout (protocol version 1).
"""

from __future__ import annotations

import json
import logging
import math
import subprocess
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Protocol

from .encoding import CONTENT_PAD, EncodedSample
from .errors import ScorerError

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


class ScorerClient(Protocol):
    def logprobs(self, sample: EncodedSample) -> list[float]:
        """Log-probabilities of the next token given the sample prefix."""
        ...

    def classify(self, samples: list[EncodedSample]) -> list[float]:
        """One classifier logit per candidate sample."""
        ...


def length_penalty(length: int, alpha: float) -> float:
    """lp(Y) = (5+|Y|)^alpha / (5+1)^alpha."""
    if length < 1:
        raise ValueError("length must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return ((5.0 + length) / 6.0) ** alpha


def has_repeated_trigram(tokens: list[int]) -> bool:
    """True iff any 3-gram occurs at least twice in ``tokens``."""
    counts = Counter(zip(tokens, tokens[1:], tokens[2:]))
    return any(c >= 2 for c in counts.values())


def _creates_repeated_trigram(tokens: list[int], token_id: int) -> bool:
    """Would appending ``token_id`` duplicate the trigram it completes?

    Only the trigram ending at the new token is checked, so a prefix that
    already contains repetitions (facts restated in the dialogue, say) does
    not block generation outright.
    """
    if len(tokens) < 2:
        return False
    new = (tokens[-2], tokens[-1], token_id)
    extended = tokens + [token_id]
    count = sum(1 for tri in zip(extended, extended[1:], extended[2:])
                if tri == new)
    return count >= 2


@dataclass
class BeamHypothesis:
    tokens: list[int]                  # generated tokens only, prefix excluded
    logprob_sum: float
    alpha: float
    finished: bool = False
    filtered_fallback: bool = False

    @property
    def normalized_score(self) -> float:
        return self.logprob_sum / length_penalty(max(len(self.tokens), 1), self.alpha)


def _extend(sample: EncodedSample, token_id: int, content_id: int) -> EncodedSample:
    next_pos = sample.position_ids[-1] + 1 if sample.position_ids else 0
    return EncodedSample(
        token_ids=sample.token_ids + [token_id],
        content_ids=sample.content_ids + [content_id],
        position_ids=sample.position_ids + [next_pos],
        lm_mask=sample.lm_mask + [True],
        clf_index=sample.clf_index)


def _generation_content_id(prefix: EncodedSample) -> int:
    for cid in reversed(prefix.content_ids):
        if cid != CONTENT_PAD:
            return cid
    return CONTENT_PAD


def beam_search(
    prefix: EncodedSample,
    scorer: ScorerClient,
    beam: int = 4,
    alpha: float = 0.6,
    max_len: int = 32,
    eos_id: int | None = None,
) -> list[BeamHypothesis]:
    """Ranked hypotheses continuing ``prefix`` by up to ``max_len`` tokens.

    ``prefix`` must be unpadded.  Expansion is standard: every live beam is
    expanded over the vocabulary, expansions that create a repeated trigram
    are discarded, and the ``beam`` best by normalized score survive.
    Finished hypotheses (on ``eos_id``) are frozen and compete with live
    beams on normalized score in the returned ranking.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    gen_content = _generation_content_id(prefix)
    live: list[tuple[BeamHypothesis, EncodedSample]] = [
        (BeamHypothesis(tokens=[], logprob_sum=0.0, alpha=alpha), prefix)]
    finished: list[BeamHypothesis] = []

    for _ in range(max_len):
        if not live:
            break
        expansions: list[tuple[BeamHypothesis, EncodedSample]] = []
        any_unfiltered = False
        best_filtered: tuple[BeamHypothesis, EncodedSample] | None = None
        for hyp, sample in live:
            logprobs = scorer.logprobs(sample)
            for token_id, lp in enumerate(logprobs):
                new_tokens = hyp.tokens + [token_id]
                cand = BeamHypothesis(tokens=new_tokens,
                                      logprob_sum=hyp.logprob_sum + lp,
                                      alpha=alpha)
                if _creates_repeated_trigram(sample.token_ids, token_id):
                    if best_filtered is None or \
                            cand.normalized_score > best_filtered[0].normalized_score:
                        best_filtered = (cand, sample)
                    continue
                any_unfiltered = True
                expansions.append((cand, _extend(sample, token_id, gen_content)))
        if not any_unfiltered:
            logger.warning("all beam expansions filtered by the trigram rule; "
                           "returning best filtered continuation")
            if best_filtered is not None:
                hyp = replace(best_filtered[0], filtered_fallback=True)
                finished.append(hyp)
            break
        expansions.sort(key=lambda he: (-he[0].normalized_score, he[0].tokens))
        live = []
        for hyp, sample in expansions:
            if eos_id is not None and hyp.tokens[-1] == eos_id:
                finished.append(replace(hyp, finished=True))
            else:
                live.append((hyp, sample))
            if len(live) >= beam:
                break

    result = finished + [h for h, _ in live]
    result.sort(key=lambda h: (-h.normalized_score, h.tokens))
    return result


def hypothesis_sample(prefix: EncodedSample, hyp: BeamHypothesis,
                      clf_id: int) -> EncodedSample:
    """The candidate sample for classification: prefix + tokens + clf token."""
    sample = prefix
    gen_content = _generation_content_id(prefix)
    for t in hyp.tokens:
        sample = _extend(sample, t, gen_content)
    next_pos = sample.position_ids[-1] + 1 if sample.position_ids else 0
    return EncodedSample(
        token_ids=sample.token_ids + [clf_id],
        content_ids=sample.content_ids + [gen_content],
        position_ids=sample.position_ids + [next_pos],
        lm_mask=sample.lm_mask + [False],
        clf_index=len(sample.token_ids))


@dataclass
class FinalChoice:
    hypothesis: BeamHypothesis
    fused_score: float
    classifier_used: bool


def select_final(
    hypotheses: list[BeamHypothesis],
    scorer: ScorerClient,
    prefix: EncodedSample,
    clf_id: int,
    fusion_weight: float = 1.0,
) -> FinalChoice:
    """Pick the hypothesis maximizing normalized_score + weight * clf logit.

    Falls back to pure beam ranking (flagged) when classification fails.
    """
    if not hypotheses:
        raise ScorerError("select_final requires at least one hypothesis")
    if len(hypotheses) == 1 or fusion_weight == 0.0:
        best = max(hypotheses, key=lambda h: h.normalized_score)
        fused = best.normalized_score
        used = False
        if fusion_weight != 0.0 and len(hypotheses) == 1:
            try:
                fused += fusion_weight * scorer.classify(
                    [hypothesis_sample(prefix, best, clf_id)])[0]
                used = True
            except ScorerError:
                pass
        return FinalChoice(hypothesis=best, fused_score=fused, classifier_used=used)
    try:
        logits = scorer.classify(
            [hypothesis_sample(prefix, h, clf_id) for h in hypotheses])
    except ScorerError as exc:
        logger.warning("classifier failed (%s); falling back to beam ranking", exc)
        best = max(hypotheses, key=lambda h: h.normalized_score)
        return FinalChoice(hypothesis=best, fused_score=best.normalized_score,
                           classifier_used=False)
    if len(logits) != len(hypotheses):
        raise ScorerError(f"classifier returned {len(logits)} logits "
                          f"for {len(hypotheses)} hypotheses")
    scored = [(h.normalized_score + fusion_weight * l, h)
              for h, l in zip(hypotheses, logits)]
    fused, best = max(scored, key=lambda sh: sh[0])
    return FinalChoice(hypothesis=best, fused_score=fused, classifier_used=True)


# ---------------------------------------------------------------------------
# subprocess scorer client
# ---------------------------------------------------------------------------


class SubprocessScorer:
    """JSON-lines scorer over a child process's stdin/stdout.

    Requests::

        {"version": 1, "op": "logprobs", "sample": {...}}
        {"version": 1, "op": "classify", "samples": [{...}, ...]}

    Responses::

        {"version": 1, "ok": true, "logprobs": [...]}
        {"version": 1, "ok": true, "logits": [...]}
        {"version": 1, "ok": false, "error": "..."}
    """

    def __init__(self, command: str | list[str]):
        if isinstance(command, str):
            import shlex
            command = shlex.split(command)
        self.proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
            bufsize=1)

    def _request(self, payload: dict) -> dict:
        payload["version"] = PROTOCOL_VERSION
        assert self.proc.stdin and self.proc.stdout
        try:
            self.proc.stdin.write(json.dumps(payload) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerError(f"scorer process I/O failed: {exc}") from exc
        if not line:
            raise ScorerError("scorer process closed its output")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerError(f"malformed scorer response: {line!r}") from exc
        if response.get("version") != PROTOCOL_VERSION:
            raise ScorerError(f"scorer protocol version "
                              f"{response.get('version')!r} != {PROTOCOL_VERSION}")
        if not response.get("ok"):
            raise ScorerError(f"scorer error: {response.get('error')}")
        return response

    def logprobs(self, sample: EncodedSample) -> list[float]:
        response = self._request({"op": "logprobs", "sample": sample.to_dict()})
        logprobs = response["logprobs"]
        total = sum(math.exp(v) for v in logprobs)
        if abs(total - 1.0) >= 1e-4:
            raise ScorerError(f"logprobs do not exponentiate to a distribution "
                              f"(sum {total})")
        return logprobs

    def classify(self, samples: list[EncodedSample]) -> list[float]:
        response = self._request(
            {"op": "classify", "samples": [s.to_dict() for s in samples]})
        return response["logits"]

    def close(self):
        if self.proc.stdin:
            self.proc.stdin.close()
        self.proc.terminate()
        self.proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
