"""Distractor sampling for the next-utterance classification objective.

Random distractors come from other dialogues about the same movie.
Rule-based distractors prefer utterances that mention the gold utterance's
entity with a *different* sentiment (tier 1), then the same entity with any
sentiment (tier 2), then fall back to random sampling (tier 3).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .corpus import Corpus, SentimentClass
from .errors import PoolExhaustedError
from .textutils import normalize, word_tokens

MIN_POOL_TOKENS = 3  # shorter utterances make trivially detectable distractors


@dataclass(frozen=True)
class PoolEntry:
    dialogue_id: str
    utterance_index: int
    text: str
    entity_ids: frozenset[str]
    sentiments: tuple[tuple[str, SentimentClass], ...]

    def sentiment_for(self, entity_id: str) -> SentimentClass | None:
        for eid, s in self.sentiments:
            if eid == entity_id:
                return s
        return None


@dataclass
class DistractorPool:
    by_movie: dict[str, list[PoolEntry]] = field(default_factory=dict)

    @classmethod
    def build(cls, corpus: Corpus) -> "DistractorPool":
        """Index a (sentiment-labeled) corpus by movie."""
        pool = cls()
        for dlg in corpus.dialogues:
            entries = pool.by_movie.setdefault(dlg.movie_id, [])
            for utt in dlg.utterances:
                if len(word_tokens(utt.text)) < MIN_POOL_TOKENS:
                    continue
                entries.append(PoolEntry(
                    dialogue_id=dlg.id,
                    utterance_index=utt.index,
                    text=utt.text,
                    entity_ids=frozenset(eid for eid, _ in utt.sentiment_labels),
                    sentiments=utt.sentiment_labels))
        return pool

    def eligible(self, movie_id: str, exclude_dialogue: str) -> list[PoolEntry]:
        return [e for e in self.by_movie.get(movie_id, ())
                if e.dialogue_id != exclude_dialogue]


@dataclass
class DistractorDraw:
    texts: list[str]
    tiers: list[int]               # 1 = entity+different sentiment, 2 = entity, 3 = random
    cross_movie_fallback: bool = False


def random_distractors(
    pool: DistractorPool,
    movie_id: str,
    exclude_dialogue: str,
    k: int,
    rng: random.Random,
    exclude_text: str | None = None,
) -> DistractorDraw:
    """k distinct utterances about ``movie_id`` from other dialogues.

    When the movie's pool is too small, the draw is backfilled from other
    movies and flagged.
    """
    def usable(entries):
        seen: set[str] = set()
        out = []
        for e in entries:
            key = normalize(e.text)
            if exclude_text is not None and key == normalize(exclude_text):
                continue
            if key in seen:
                continue
            seen.add(key)
            out.append(e)
        return out

    candidates = usable(pool.eligible(movie_id, exclude_dialogue))
    fallback = False
    if len(candidates) < k:
        fallback = True
        extra = []
        for other_movie in sorted(pool.by_movie):
            if other_movie == movie_id:
                continue
            extra.extend(pool.eligible(other_movie, exclude_dialogue))
        have = {normalize(e.text) for e in candidates}
        for e in usable(extra):
            if normalize(e.text) not in have:
                candidates.append(e)
                have.add(normalize(e.text))
    if len(candidates) < k:
        raise PoolExhaustedError(
            f"only {len(candidates)} distractor candidates available, need {k}")
    picked = rng.sample(candidates, k)
    return DistractorDraw(texts=[e.text for e in picked],
                          tiers=[3] * k, cross_movie_fallback=fallback)


def rule_based_distractors(
    pool: DistractorPool,
    movie_id: str,
    exclude_dialogue: str,
    target_entities: tuple[tuple[str, SentimentClass], ...],
    k: int,
    rng: random.Random,
    exclude_text: str | None = None,
) -> DistractorDraw:
    """Entity/sentiment-matched distractors with tiered fallback.

    ``target_entities`` are the gold utterance's (entity, sentiment) labels.
    Without labels the draw degenerates to :func:`random_distractors`.
    """
    if not target_entities:
        return random_distractors(pool, movie_id, exclude_dialogue, k, rng,
                                  exclude_text)
    eligible = pool.eligible(movie_id, exclude_dialogue)
    gold_norm = normalize(exclude_text) if exclude_text is not None else None

    tier1: list[PoolEntry] = []
    tier2: list[PoolEntry] = []
    seen: set[str] = set()
    for e in eligible:
        key = normalize(e.text)
        if key in seen or key == gold_norm:
            continue
        for eid, sentiment in target_entities:
            got = e.sentiment_for(eid)
            if got is None:
                continue
            seen.add(key)
            if got != sentiment:
                tier1.append(e)
            else:
                tier2.append(e)
            break

    texts: list[str] = []
    tiers: list[int] = []
    for tier_no, entries in ((1, tier1), (2, tier2)):
        take = min(k - len(texts), len(entries))
        if take > 0:
            for e in rng.sample(entries, take):
                texts.append(e.text)
                tiers.append(tier_no)
        if len(texts) == k:
            return DistractorDraw(texts=texts, tiers=tiers)

    filler = random_distractors(pool, movie_id, exclude_dialogue, k, rng,
                                exclude_text)
    used = {normalize(t) for t in texts}
    for t in filler.texts:
        if len(texts) == k:
            break
        if normalize(t) in used:
            continue
        texts.append(t)
        tiers.append(3)
        used.add(normalize(t))
    if len(texts) < k:
        raise PoolExhaustedError(
            f"could not assemble {k} rule-based distractors for {movie_id!r}")
    return DistractorDraw(texts=texts, tiers=tiers,
                          cross_movie_fallback=filler.cross_movie_fallback)
