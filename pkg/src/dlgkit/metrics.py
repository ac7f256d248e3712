"""Automated evaluation: perplexity and hits@n against a scorer client."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .corpus import Utterance
from .bpe import BPETokenizer
from .decoding import ScorerClient
from .distractors import DistractorPool, random_distractors
from .encoding import CONTENT_PAD, EncodedSample, build_sample
from .errors import DlgkitError, PoolExhaustedError, ScorerError
from .profiles import Profile


@dataclass
class EvalReport:
    perplexity: float
    hits_at: dict[int, float]
    n_samples: int
    skipped: int = 0
    partial: bool = False

    def __post_init__(self):
        ns = sorted(self.hits_at)
        for a, b in zip(ns, ns[1:]):
            if self.hits_at[a] > self.hits_at[b] + 1e-12:
                raise DlgkitError(f"hits@{a} > hits@{b}")

    def to_dict(self) -> dict:
        return {"perplexity": self.perplexity,
                "hits_at": {str(n): v for n, v in sorted(self.hits_at.items())},
                "n_samples": self.n_samples, "skipped": self.skipped,
                "partial": self.partial}


def _unpadded(sample: EncodedSample) -> EncodedSample:
    n = len(sample.token_ids)
    while n > 0 and sample.content_ids[n - 1] == CONTENT_PAD:
        n -= 1
    return EncodedSample(
        token_ids=sample.token_ids[:n], content_ids=sample.content_ids[:n],
        position_ids=sample.position_ids[:n], lm_mask=sample.lm_mask[:n],
        clf_index=sample.clf_index, label=sample.label)


def _prefix(sample: EncodedSample, length: int) -> EncodedSample:
    return EncodedSample(
        token_ids=sample.token_ids[:length], content_ids=sample.content_ids[:length],
        position_ids=sample.position_ids[:length], lm_mask=sample.lm_mask[:length],
        clf_index=sample.clf_index)


def sample_nll(sample: EncodedSample, scorer: ScorerClient) -> tuple[float, int]:
    """(summed NLL, token count) over the lm-masked positions of one sample."""
    s = _unpadded(sample)
    total = 0.0
    count = 0
    for i, masked in enumerate(s.lm_mask):
        if not masked:
            continue
        logprobs = scorer.logprobs(_prefix(s, i))
        gold = s.token_ids[i]
        if gold >= len(logprobs):
            raise ScorerError(f"gold token {gold} outside scorer vocab "
                              f"({len(logprobs)})")
        total += -logprobs[gold]
        count += 1
    return total, count


def perplexity(samples: list[EncodedSample], scorer: ScorerClient) -> float:
    """exp of the mean negative log-likelihood over lm-masked tokens only."""
    total = 0.0
    count = 0
    for sample in samples:
        if not any(sample.lm_mask):
            raise DlgkitError("perplexity requires >= 1 lm-masked token per sample")
        nll, n = sample_nll(sample, scorer)
        total += nll
        count += n
    if count == 0:
        raise DlgkitError("no lm-masked tokens found")
    return math.exp(total / count)


def hits_at_n(
    gold_sample: EncodedSample,
    distractor_samples: list[EncodedSample],
    scorer: ScorerClient,
    n: int,
) -> bool:
    """True iff the gold logit ranks within the top ``n`` of the candidates.

    Ties are broken pessimistically: a distractor with the same logit
    outranks gold.
    """
    logits = scorer.classify([gold_sample] + distractor_samples)
    gold_logit = logits[0]
    rank = 1 + sum(1 for l in logits[1:] if l >= gold_logit)
    return rank <= n


@dataclass
class EvalItem:
    """One evaluation unit: grounding profile, history and the gold reply."""

    profile: Profile
    history: list[Utterance]
    gold: Utterance
    movie_id: str
    dialogue_id: str


def evaluate(
    items: list[EvalItem],
    pool: DistractorPool,
    scorer: ScorerClient,
    tok: BPETokenizer,
    ns: tuple[int, ...] = (1, 3),
    distractor_count: int = 19,
    seed: int = 0,
    max_len: int = 512,
) -> EvalReport:
    """Perplexity plus hits@n with randomly drawn evaluation distractors."""
    rng = random.Random(seed)
    nll_total = 0.0
    nll_count = 0
    hits = {n: 0 for n in ns}
    used = 0
    skipped = 0
    partial = False
    for item in items:
        gold_sample = build_sample(item.profile, item.history, item.gold, tok,
                                   max_len=max_len, pad=False)
        try:
            draw = random_distractors(pool, item.movie_id, item.dialogue_id,
                                      distractor_count, rng,
                                      exclude_text=item.gold.text)
        except PoolExhaustedError:
            skipped += 1
            continue
        distractor_samples = [
            build_sample(item.profile, item.history,
                         Utterance(speaker=item.gold.speaker, text=text,
                                   index=item.gold.index),
                         tok, max_len=max_len, pad=False)
            for text in draw.texts]
        try:
            nll, count = sample_nll(gold_sample, scorer)
            logits = scorer.classify([gold_sample] + distractor_samples)
        except ScorerError:
            partial = True
            break
        nll_total += nll
        nll_count += count
        gold_logit = logits[0]
        rank = 1 + sum(1 for l in logits[1:] if l >= gold_logit)
        for n in ns:
            if rank <= n:
                hits[n] += 1
        used += 1
    if nll_count == 0 or used == 0:
        raise DlgkitError("evaluation produced no scored samples")
    return EvalReport(
        perplexity=math.exp(nll_total / nll_count),
        hits_at={n: hits[n] / used for n in ns},
        n_samples=used, skipped=skipped, partial=partial)
