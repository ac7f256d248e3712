"""Fuzzy entity resolution against a known set of profile targets.

For every dialogue we already know which movie (and which people, genres,
etc.) the speakers were given, so resolution is a matching problem, not
open-world NER.  A three-tier cascade runs over candidate n-gram spans:

1. lowercase exact string match,
2. cosine similarity of character-trigram count vectors (threshold 0.9),
3. Levenshtein distance <= 3 combined with Jaccard distance <= 0.3.

Persons can additionally be proposed by an external NER callable; proposed
spans go through the same cascade.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Iterable, Protocol

from .errors import DlgkitError, InvariantError
from .textutils import word_tokens

if TYPE_CHECKING:  # pragma: no cover - import cycle guard
    from .corpus import Corpus, Dialogue


class EntityKind(str, Enum):
    MOVIE = "movie"
    PERSON = "person"
    GENRE = "genre"
    COUNTRY = "country"
    OTHER = "other"


@dataclass(frozen=True)
class EntityRef:
    """A resolvable entity with a canonical surface form."""

    id: str
    surface: str
    kind: EntityKind

    def __post_init__(self):
        if not self.surface.strip():
            raise InvariantError(f"entity {self.id!r} has empty surface")

    def to_dict(self) -> dict:
        return {"id": self.id, "surface": self.surface, "kind": self.kind.value}

    @classmethod
    def from_dict(cls, d: dict) -> "EntityRef":
        return cls(id=d["id"], surface=d["surface"], kind=EntityKind(d["kind"]))


class MatchMethod(str, Enum):
    EXACT = "exact"
    COSINE = "cosine"
    JACCARD_LEVENSHTEIN = "jaccard_levenshtein"
    EXTERNAL_NER = "external_ner"


@dataclass(frozen=True)
class EntityMatch:
    """A detected mention of ``entity`` in one utterance.

    ``span`` is a half-open (start, end) range over the utterance's word
    tokens (see :func:`dlgkit.textutils.word_tokens`).
    """

    entity: EntityRef
    utterance_index: int
    span: tuple[int, int]
    method: MatchMethod
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvariantError(f"score {self.score} outside [0, 1]")
        if self.method is MatchMethod.EXACT and self.score != 1.0:
            raise InvariantError("exact matches must have score 1.0")

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity.id,
            "utterance_index": self.utterance_index,
            "span": list(self.span),
            "method": self.method.value,
            "score": self.score,
        }


# ---------------------------------------------------------------------------
# string metrics
# ---------------------------------------------------------------------------


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert / delete / substitute)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,            # delete from a
                cur[j - 1] + 1,         # insert into a
                prev[j - 1] + (ca != cb),
            ))
        prev = cur
    return prev[-1]


def _levenshtein_within(a: str, b: str, limit: int) -> int | None:
    """Edit distance if it is <= limit, else None.

    Banded variant of the DP above: only cells within ``limit`` of the
    diagonal can contribute, and a row whose minimum already exceeds the
    limit aborts early.
    """
    if abs(len(a) - len(b)) > limit:
        return None
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    la, lb = len(a), len(b)
    big = limit + 1
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        lo = max(1, i - limit)
        hi = min(lb, i + limit)
        cur = [big] * (lb + 1)
        cur[lo - 1] = i if lo == 1 else big
        ca = a[i - 1]
        best = cur[lo - 1]
        for j in range(lo, hi + 1):
            val = min(prev[j] + 1, cur[j - 1] + 1,
                      prev[j - 1] + (ca != b[j - 1]))
            cur[j] = val
            if val < best:
                best = val
        if best > limit:
            return None
        prev = cur
    return prev[lb] if prev[lb] <= limit else None


def jaccard_distance(a: set, b: set) -> float:
    """1 - |a ∩ b| / |a ∪ b|; raises when both sets are empty."""
    if not a and not b:
        raise DlgkitError("jaccard_distance undefined for two empty sets")
    union = a | b
    return 1.0 - len(a & b) / len(union)


def ngram_candidates(tokens: list, title_token_count: int) -> list[tuple[int, int]]:
    """All contiguous spans with length n, min(t, 3) <= n <= t.

    ``t`` is the token count of the entity surface being searched for.
    """
    if title_token_count < 1:
        raise ValueError("title_token_count must be >= 1")
    lo = min(title_token_count, 3)
    spans = []
    for n in range(lo, title_token_count + 1):
        for start in range(0, len(tokens) - n + 1):
            spans.append((start, start + n))
    return spans


# ---------------------------------------------------------------------------
# embedder
# ---------------------------------------------------------------------------


class Embedder(Protocol):
    def embed(self, text: str) -> dict[str, float]: ...


class CharTrigramEmbedder:
    """Deterministic default embedder: character-trigram count vectors.

    Stands in for pretrained word vectors; anything implementing
    :class:`Embedder` can be plugged into :func:`resolve` instead.
    """

    @staticmethod
    @lru_cache(maxsize=65536)
    def _vector(text: str) -> tuple[tuple[str, int], ...]:
        padded = f" {text.lower()} "
        counts = Counter(padded[i:i + 3] for i in range(len(padded) - 2))
        return tuple(sorted(counts.items()))

    def embed(self, text: str) -> dict[str, float]:
        return dict(self._vector(text))


def cosine_similarity(u: dict[str, float], v: dict[str, float]) -> float:
    if not u or not v:
        return 0.0
    if len(u) > len(v):
        u, v = v, u
    dot = sum(w * v[g] for g, w in u.items() if g in v)
    nu = math.sqrt(sum(w * w for w in u.values()))
    nv = math.sqrt(sum(w * w for w in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


# ---------------------------------------------------------------------------
# resolution cascade
# ---------------------------------------------------------------------------

ExternalNER = Callable[[str], list[tuple[int, int]]]
"""Maps an utterance text to candidate person spans (word-token ranges)."""


@dataclass
class ResolverConfig:
    cosine_threshold: float = 0.9
    levenshtein_max: int = 3
    jaccard_max: float = 0.3

    def validate(self):
        if not 0.0 < self.cosine_threshold <= 1.0:
            raise DlgkitError(f"cosine threshold {self.cosine_threshold} outside (0, 1]")
        if self.levenshtein_max < 0:
            raise DlgkitError("levenshtein threshold must be >= 0")
        if not 0.0 <= self.jaccard_max <= 1.0:
            raise DlgkitError(f"jaccard threshold {self.jaccard_max} outside [0, 1]")


def _match_span(
    span_text: str,
    span_tokens: list[str],
    target: EntityRef,
    surface_norm: str,
    surface_tokens_: list[str],
    embedder: Embedder,
    cfg: ResolverConfig,
) -> tuple[MatchMethod, float] | None:
    """Run the cascade for a single (span, target) pair."""
    if span_text == surface_norm:
        return MatchMethod.EXACT, 1.0

    # Cheap length-ratio reject before the trigram cosine: a 0.9 cosine on
    # character trigrams is unreachable for wildly different lengths.
    if 0.5 <= len(span_text) / max(len(surface_norm), 1) <= 2.0:
        sim = cosine_similarity(embedder.embed(span_text), embedder.embed(surface_norm))
        if sim >= cfg.cosine_threshold:
            return MatchMethod.COSINE, sim

    if abs(len(span_text) - len(surface_norm)) <= cfg.levenshtein_max:
        # Character sets, not word sets: a single typo'd word must not blow
        # the distance past the threshold.  The set test is far cheaper than
        # the edit-distance DP, so it goes first.
        jac = jaccard_distance(set(span_text), set(surface_norm))
        if jac <= cfg.jaccard_max:
            dist = _levenshtein_within(span_text, surface_norm,
                                       cfg.levenshtein_max)
            if dist is not None:
                score = 1.0 - dist / max(len(span_text), len(surface_norm), 1)
                return MatchMethod.JACCARD_LEVENSHTEIN, score
    return None


def resolve_utterance(
    text: str,
    utterance_index: int,
    targets: Iterable[EntityRef],
    embedder: Embedder | None = None,
    ner: ExternalNER | None = None,
    config: ResolverConfig | None = None,
) -> list[EntityMatch]:
    """Resolve one utterance; see :func:`resolve` for the corpus-level view."""
    cfg = config or ResolverConfig()
    cfg.validate()
    emb = embedder if embedder is not None else CharTrigramEmbedder()
    tokens = word_tokens(text)
    if not tokens:
        return []

    candidates: list[EntityMatch] = []
    ner_spans = set(ner(text)) if ner is not None else set()
    for target in targets:
        stoks = word_tokens(target.surface)
        if not stoks:
            continue
        snorm = " ".join(stoks)
        spans = ngram_candidates(tokens, len(stoks))
        if target.kind is EntityKind.PERSON and ner_spans:
            spans = list(dict.fromkeys(list(spans) + sorted(ner_spans)))
        for start, end in spans:
            if end > len(tokens):
                continue
            span_tokens = tokens[start:end]
            hit = _match_span(" ".join(span_tokens), span_tokens, target,
                              snorm, stoks, emb, cfg)
            if hit is not None:
                method, score = hit
                if (start, end) in ner_spans and target.kind is EntityKind.PERSON \
                        and method is not MatchMethod.EXACT:
                    method = MatchMethod.EXTERNAL_NER
                candidates.append(EntityMatch(
                    entity=target, utterance_index=utterance_index,
                    span=(start, end), method=method, score=score))

    # Overlap resolution: highest score first, earlier span breaks ties.
    candidates.sort(key=lambda m: (-m.score, m.span[0], m.span[1], m.entity.id))
    kept: list[EntityMatch] = []
    taken: set[int] = set()
    for m in candidates:
        positions = set(range(*m.span))
        if positions & taken:
            continue
        taken |= positions
        kept.append(m)
    kept.sort(key=lambda m: (m.span[0], m.span[1]))
    return kept


def resolve(
    dialogue: "Dialogue",
    targets: Iterable[EntityRef],
    embedder: Embedder | None = None,
    ner: ExternalNER | None = None,
    config: ResolverConfig | None = None,
) -> list[EntityMatch]:
    """Detect mentions of ``targets`` in every utterance of ``dialogue``."""
    targets = list(targets)
    if not targets:
        raise DlgkitError("resolve requires a non-empty target set")
    matches: list[EntityMatch] = []
    for utt in dialogue.utterances:
        matches.extend(resolve_utterance(
            utt.text, utt.index, targets, embedder, ner, config))
    return matches


# ---------------------------------------------------------------------------
# coverage and evaluation
# ---------------------------------------------------------------------------


@dataclass
class CoverageReport:
    mean_coverage: float
    per_dialogue: dict[str, float] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mean_coverage": self.mean_coverage,
            "per_dialogue": self.per_dialogue,
            "skipped": self.skipped,
        }


def coverage(corpus: "Corpus", matches: dict[str, list[EntityMatch]]) -> CoverageReport:
    """Mean per-dialogue fraction of profile entities mentioned at least once.

    Dialogues whose profiles reference no entities are skipped and reported.
    """
    per_dialogue: dict[str, float] = {}
    skipped: list[str] = []
    for dlg in corpus.dialogues:
        profile_entities = dlg.profile_entity_ids()
        if not profile_entities:
            skipped.append(dlg.id)
            continue
        if dlg.id not in matches:
            raise DlgkitError(f"no match list supplied for dialogue {dlg.id!r}")
        mentioned = {m.entity.id for m in matches[dlg.id]}
        per_dialogue[dlg.id] = len(profile_entities & mentioned) / len(profile_entities)
    if not per_dialogue:
        raise DlgkitError("coverage undefined: every dialogue was skipped")
    mean = sum(per_dialogue.values()) / len(per_dialogue)
    return CoverageReport(mean_coverage=mean, per_dialogue=per_dialogue, skipped=skipped)


def _spans_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def _hit_count(predicted: list[EntityMatch], gold: list[EntityMatch]) -> int:
    """Predicted matches credited against gold, each gold used at most once."""
    used: set[int] = set()
    hits = 0
    for p in predicted:
        for gi, g in enumerate(gold):
            if gi in used:
                continue
            if (g.entity.id == p.entity.id
                    and g.utterance_index == p.utterance_index
                    and _spans_overlap(g.span, p.span)):
                used.add(gi)
                hits += 1
                break
    return hits


def _prf(hits: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    precision = hits / n_pred if n_pred else 0.0
    recall = hits / n_gold if n_gold else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) else 0.0
    return precision, recall, f1


def evaluate_ner(
    predicted: list[EntityMatch],
    gold: list[EntityMatch],
) -> tuple[float, float, float]:
    """(precision, recall, f1); a hit needs equal entity id plus span overlap.

    Each gold match is credited at most once. Undefined ratios are reported
    as 0 by convention.
    """
    return _prf(_hit_count(predicted, gold), len(predicted), len(gold))


def matches_to_doc(matches: dict[str, list[EntityMatch]]) -> dict:
    return {did: [m.to_dict() for m in ms] for did, ms in sorted(matches.items())}


def matches_from_doc(
    doc: dict, entities: dict[str, EntityRef],
) -> dict[str, list[EntityMatch]]:
    out: dict[str, list[EntityMatch]] = {}
    for did, ms in doc.items():
        out[did] = []
        for m in ms:
            eid = m["entity_id"]
            entity = entities.get(eid) or EntityRef(id=eid, surface=eid,
                                                    kind=EntityKind.OTHER)
            out[did].append(EntityMatch(
                entity=entity, utterance_index=m["utterance_index"],
                span=tuple(m["span"]), method=MatchMethod(m.get("method", "exact")),
                score=m.get("score", 1.0)))
    return out


def evaluate_ner_corpus(
    predicted: dict[str, list[EntityMatch]],
    gold: dict[str, list[EntityMatch]],
) -> tuple[float, float, float]:
    """Micro-averaged precision/recall/f1 over per-dialogue match lists."""
    hits = n_pred = n_gold = 0
    for did in sorted(set(predicted) | set(gold)):
        p = predicted.get(did, [])
        g = gold.get(did, [])
        hits += _hit_count(p, g)
        n_pred += len(p)
        n_gold += len(g)
    return _prf(hits, n_pred, n_gold)
