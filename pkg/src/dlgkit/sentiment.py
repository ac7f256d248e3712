"""Sentiment adherence validation and per-utterance sentiment labels.

The pipeline mirrors how a human checker would proceed: detected entity
mentions are first replaced by short, well-behaved placeholder names, the
sentence is chopped into the smallest clauses that can carry a sentiment
(merged until a unit holds at most two distinct entity nouns), each unit is
labeled on the five-point scale, and the label is compared against the
speaker's scripted opinion.

Both the clause provider and the sentiment annotator are pluggable; the
shipped defaults are a punctuation/conjunction splitter and a small
lexicon-based polarity scorer with negation flipping.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol

from .corpus import SentimentClass, Speaker
from .entities import EntityKind, EntityMatch
from .errors import DlgkitError, InvariantError
from .profiles import OpinionScale
from .textutils import word_tokens, word_tokens_with_spans

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import Corpus, Dialogue


# ---------------------------------------------------------------------------
# placeholder substitution
# ---------------------------------------------------------------------------

# Short names confirmed to be easy for downstream annotators; one list per
# entity kind, cycled when a dialogue mentions several entities of a kind.
_PLACEHOLDER_NAMES: dict[EntityKind, list[str]] = {
    EntityKind.MOVIE: ["Pulp Fiction", "Titanic", "Avatar"],
    EntityKind.PERSON: ["Peter Pan", "Mary Poppins", "James Bond"],
    EntityKind.GENRE: ["Comedy", "Drama", "Thriller"],
    EntityKind.COUNTRY: ["France", "Japan", "Canada"],
    EntityKind.OTHER: ["Gizmo", "Widget", "Gadget"],
}


@dataclass
class PlaceholderMap:
    """Invertible placeholder -> entity assignment for one utterance."""

    by_placeholder: dict[str, str] = field(default_factory=dict)  # name -> entity id
    canonical_surface: dict[str, str] = field(default_factory=dict)  # entity id -> surface

    def invert(self, text: str) -> str:
        """Replace placeholders with the canonical entity surfaces."""
        for name, eid in sorted(self.by_placeholder.items(),
                                key=lambda kv: -len(kv[0])):
            text = text.replace(name, self.canonical_surface[eid])
        return text


def substitute_placeholders(
    text: str, matches: list[EntityMatch],
) -> tuple[str, PlaceholderMap]:
    """Replace each matched span with a canonical placeholder name.

    Matches must be non-overlapping (guaranteed by the resolver).  The
    returned map inverts back to the canonical entity surfaces.
    """
    if not matches:
        return text, PlaceholderMap()
    spans = word_tokens_with_spans(text)
    pmap = PlaceholderMap()
    counters: dict[EntityKind, int] = {}
    assigned: dict[str, str] = {}  # entity id -> placeholder

    pieces: list[tuple[int, int, str]] = []
    for m in sorted(matches, key=lambda m: m.span):
        start_tok, end_tok = m.span
        if end_tok > len(spans):
            raise DlgkitError(f"match span {m.span} outside utterance bounds")
        eid = m.entity.id
        if eid not in assigned:
            kind = m.entity.kind
            names = _PLACEHOLDER_NAMES[kind]
            i = counters.get(kind, 0)
            counters[kind] = i + 1
            assigned[eid] = names[i % len(names)] if i < len(names) \
                else f"{names[0]} {i}"
            pmap.by_placeholder[assigned[eid]] = eid
            pmap.canonical_surface[eid] = m.entity.surface
        char_start = spans[start_tok][1]
        char_end = spans[end_tok - 1][2]
        pieces.append((char_start, char_end, assigned[eid]))

    out = []
    cursor = 0
    for char_start, char_end, name in pieces:
        if char_start < cursor:
            raise DlgkitError("overlapping matches passed to substitute_placeholders")
        out.append(text[cursor:char_start])
        out.append(name)
        cursor = char_end
    out.append(text[cursor:])
    return "".join(out), pmap


# ---------------------------------------------------------------------------
# clause segmentation
# ---------------------------------------------------------------------------


@dataclass
class ClauseUnit:
    utterance_index: int
    span: tuple[int, int]                      # word-token range
    contained_entities: tuple[str, ...]        # entity ids, at most 2 distinct
    sentiment: SentimentClass = SentimentClass.NEUTRAL
    text: str = ""

    def __post_init__(self):
        if len(set(self.contained_entities)) > 2:
            raise InvariantError("clause unit holds more than two distinct entities")


class ClauseProvider(Protocol):
    def clause_spans(self, tokens: list[str]) -> list[tuple[int, int]]: ...


_BOUNDARY_TOKENS = {"but", "and", "because", "although", "though", "while",
                    "however", "yet", "whereas", "so"}


class DefaultClauseProvider:
    """Splits on sentence punctuation and coordinating conjunctions."""

    def clause_spans(self, tokens: list[str]) -> list[tuple[int, int]]:
        spans = []
        start = 0
        for i, tok in enumerate(tokens):
            if tok in _BOUNDARY_TOKENS and i > start:
                spans.append((start, i))
                start = i + 1
        if start < len(tokens):
            spans.append((start, len(tokens)))
        return spans


def segment_clauses(
    text: str,
    utterance_index: int,
    entity_tokens: dict[int, str],
    provider: ClauseProvider | None = None,
) -> list[ClauseUnit]:
    """Smallest clause units, greedily merged while they keep <= 2 nouns.

    ``entity_tokens`` maps word-token positions to entity ids (the output of
    placeholder-aware mention lookup).  Sentences the provider cannot handle
    are skipped by the caller.
    """
    provider = provider or DefaultClauseProvider()
    # Split into sentences on terminal punctuation first.
    sentences = [s for s in re.split(r"[.!?;]+", text) if s.strip()]
    units: list[ClauseUnit] = []
    offset = 0
    for sent in sentences:
        toks = word_tokens(sent)
        if not toks:
            continue
        raw_spans = provider.clause_spans(toks)
        merged: list[tuple[int, int, set[str]]] = []
        for s, e in raw_spans:
            ents = {entity_tokens[offset + i] for i in range(s, e)
                    if offset + i in entity_tokens}
            if merged:
                ps, _, pents = merged[-1]
                if len(pents | ents) <= 2:
                    merged[-1] = (ps, e, pents | ents)
                    continue
            merged.append((s, e, ents))
        for s, e, ents in merged:
            units.append(ClauseUnit(
                utterance_index=utterance_index,
                span=(offset + s, offset + e),
                contained_entities=tuple(sorted(ents)),
                text=" ".join(toks[s:e])))
        offset += len(toks)
    return units


# ---------------------------------------------------------------------------
# sentiment annotation
# ---------------------------------------------------------------------------


class SentimentAnnotator(Protocol):
    def annotate(self, clause_text: str) -> SentimentClass: ...


_POSITIVE = {
    "love", "loved", "like", "liked", "great", "good", "amazing", "awesome",
    "fantastic", "brilliant", "wonderful", "enjoy", "enjoyed", "favorite",
    "best", "cool", "fun", "excellent", "perfect", "masterpiece", "adore",
    "impressive", "superb", "beautiful", "interesting",
}
_NEGATIVE = {
    "hate", "hated", "dislike", "disliked", "bad", "terrible", "awful",
    "boring", "worst", "horrible", "annoying", "dull", "stupid", "poor",
    "disappointing", "mediocre", "overrated", "mess", "weak", "lame",
}
_INTENSIFIERS = {"really", "very", "absolutely", "totally", "so", "truly"}
_NEGATORS = {"not", "never", "no", "dont", "don't", "didnt", "didn't",
             "doesnt", "doesn't", "isnt", "isn't", "wasnt", "wasn't", "cant",
             "can't", "wont", "won't", "hardly", "barely"}


class LexiconAnnotator:
    """Polarity lexicon with negation flip and intensity boosting.

    A negator within the three tokens before a polar word flips its sign;
    an intensifier in the same window bumps the label to the "very" class.
    Stateless, safe to share across threads.
    """

    def annotate(self, clause_text: str) -> SentimentClass:
        toks = word_tokens(clause_text)
        score = 0
        for i, tok in enumerate(toks):
            pol = 1 if tok in _POSITIVE else (-1 if tok in _NEGATIVE else 0)
            if pol == 0:
                continue
            window = toks[max(0, i - 3):i]
            if any(w in _NEGATORS for w in window):
                pol = -pol
            if any(w in _INTENSIFIERS for w in window):
                pol *= 2
            score += pol
        if score >= 2:
            return SentimentClass.VERY_POSITIVE
        if score == 1:
            return SentimentClass.POSITIVE
        if score == -1:
            return SentimentClass.NEGATIVE
        if score <= -2:
            return SentimentClass.VERY_NEGATIVE
        return SentimentClass.NEUTRAL


# ---------------------------------------------------------------------------
# adherence checking
# ---------------------------------------------------------------------------


@dataclass
class AdherenceTally:
    matches: int = 0
    errors: int = 0
    neutral: int = 0

    @property
    def accuracy(self) -> float | None:
        denom = self.matches + self.errors
        return self.matches / denom if denom else None

    @property
    def accuracy_with_neutral(self) -> float | None:
        denom = self.matches + self.errors + self.neutral
        return self.matches / denom if denom else None

    def to_dict(self) -> dict:
        return {"matches": self.matches, "errors": self.errors,
                "neutral": self.neutral, "accuracy": self.accuracy,
                "accuracy_with_neutral": self.accuracy_with_neutral}


@dataclass
class AdherenceReport:
    """Per-entity-kind adherence tallies.

    Both accuracy conventions are reported: ``accuracy`` excludes neutral
    units from the denominator, ``accuracy_with_neutral`` includes them.
    """

    by_kind: dict[str, AdherenceTally] = field(default_factory=dict)
    skipped_utterances: int = 0
    units_considered: int = 0

    @property
    def total(self) -> AdherenceTally:
        t = AdherenceTally()
        for tally in self.by_kind.values():
            t.matches += tally.matches
            t.errors += tally.errors
            t.neutral += tally.neutral
        return t

    def to_dict(self) -> dict:
        return {
            "by_kind": {k: t.to_dict() for k, t in sorted(self.by_kind.items())},
            "total": self.total.to_dict(),
            "skipped_utterances": self.skipped_utterances,
            "units_considered": self.units_considered,
        }


def _entity_token_positions(
    matches: list[EntityMatch], utterance_index: int,
) -> dict[int, str]:
    positions: dict[int, str] = {}
    for m in matches:
        if m.utterance_index != utterance_index:
            continue
        for pos in range(*m.span):
            positions[pos] = m.entity.id
    return positions


def annotate_units(
    dialogue: "Dialogue",
    matches: list[EntityMatch],
    annotator: SentimentAnnotator | None = None,
    provider: ClauseProvider | None = None,
) -> tuple[list[ClauseUnit], int]:
    """Clause units with sentiments for one dialogue; also counts skips."""
    annotator = annotator or LexiconAnnotator()
    units: list[ClauseUnit] = []
    skipped = 0
    by_utt: dict[int, list[EntityMatch]] = {}
    for m in matches:
        by_utt.setdefault(m.utterance_index, []).append(m)
    for utt in dialogue.utterances:
        utt_matches = by_utt.get(utt.index, [])
        try:
            subst_text, _ = substitute_placeholders(utt.text, utt_matches)
        except DlgkitError:
            skipped += 1
            continue
        # Placeholder substitution changes token positions; recompute entity
        # positions on the substituted text by locating the placeholders.
        entity_positions = _placeholder_positions(subst_text, utt_matches)
        try:
            for unit in segment_clauses(subst_text, utt.index,
                                        entity_positions, provider):
                unit.sentiment = annotator.annotate(unit.text)
                units.append(unit)
        except Exception:
            skipped += 1
    return units, skipped


def _placeholder_positions(
    subst_text: str, matches: list[EntityMatch],
) -> dict[int, str]:
    if not matches:
        return {}
    # Rebuild the placeholder assignment the same way substitution did.
    _, pmap = substitute_placeholders_dry(matches)
    toks = word_tokens(subst_text)
    positions: dict[int, str] = {}
    for name, eid in pmap.items():
        name_toks = word_tokens(name)
        n = len(name_toks)
        for i in range(len(toks) - n + 1):
            if toks[i:i + n] == name_toks:
                for j in range(i, i + n):
                    positions[j] = eid
    return positions


def substitute_placeholders_dry(
    matches: list[EntityMatch],
) -> tuple[dict[str, str], dict[str, str]]:
    """The placeholder assignment substitution would make, without text."""
    counters: dict[EntityKind, int] = {}
    assigned: dict[str, str] = {}
    for m in sorted(matches, key=lambda m: m.span):
        eid = m.entity.id
        if eid in assigned:
            continue
        names = _PLACEHOLDER_NAMES[m.entity.kind]
        i = counters.get(m.entity.kind, 0)
        counters[m.entity.kind] = i + 1
        assigned[eid] = names[i % len(names)] if i < len(names) else f"{names[0]} {i}"
    return assigned, {v: k for k, v in assigned.items()}


def check_adherence(
    corpus: "Corpus",
    matches: dict[str, list[EntityMatch]],
    annotator: SentimentAnnotator | None = None,
    provider: ClauseProvider | None = None,
) -> AdherenceReport:
    """Compare expressed clause sentiments against scripted profile opinions.

    Conformance is sign agreement only; intensity is not compared.
    ``dont_know`` opinions (and entities without an opinion) are excluded.
    """
    report = AdherenceReport()
    for dlg in corpus.dialogues:
        dlg_matches = matches.get(dlg.id, [])
        entity_kind = {m.entity.id: m.entity.kind.value for m in dlg_matches}
        units, skipped = annotate_units(dlg, dlg_matches, annotator, provider)
        report.skipped_utterances += skipped
        for unit in units:
            speaker = dlg.utterances[unit.utterance_index].speaker
            opinions = dlg.profile_for(speaker).opinion_map()
            for eid in unit.contained_entities:
                opinion = opinions.get(eid)
                if opinion is None or opinion is OpinionScale.DONT_KNOW:
                    continue
                kind = entity_kind.get(eid, "other")
                kind_key = kind if kind in ("movie", "person") else "other"
                tally = report.by_kind.setdefault(kind_key, AdherenceTally())
                report.units_considered += 1
                if unit.sentiment.sign == 0:
                    tally.neutral += 1
                elif unit.sentiment.sign == opinion.sign:
                    tally.matches += 1
                else:
                    tally.errors += 1
    return report


def emit_sentiment_labels(
    corpus: "Corpus",
    matches: dict[str, list[EntityMatch]],
    annotator: SentimentAnnotator | None = None,
    provider: ClauseProvider | None = None,
) -> "Corpus":
    """Return a corpus whose utterances carry (entity, sentiment) labels."""
    from .corpus import Corpus as CorpusCls, Dialogue, Utterance

    new_dialogues = []
    for dlg in corpus.dialogues:
        units, _ = annotate_units(dlg, matches.get(dlg.id, []),
                                  annotator, provider)
        labels: dict[int, list[tuple[str, SentimentClass]]] = {}
        for unit in units:
            for eid in unit.contained_entities:
                pairs = labels.setdefault(unit.utterance_index, [])
                if (eid, unit.sentiment) not in pairs:
                    pairs.append((eid, unit.sentiment))
        new_utts = tuple(
            Utterance(speaker=u.speaker, text=u.text, index=u.index,
                      sentiment_labels=tuple(sorted(labels.get(u.index, ()),
                                                    key=lambda p: (p[0], p[1].value))))
            for u in dlg.utterances)
        new_dialogues.append(Dialogue(
            id=dlg.id, movie_id=dlg.movie_id, utterances=new_utts,
            profile_a=dlg.profile_a, profile_b=dlg.profile_b,
            partner_ratings=dlg.partner_ratings, extra=dlg.extra))
    return CorpusCls(dialogues=tuple(new_dialogues), entities=corpus.entities)
