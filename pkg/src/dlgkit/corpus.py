"""Canonical corpus data model, ingestion, statistics and splitting.

The canonical on-disk form is a single JSON document::

    {
      "schema_version": 1,
      "entities": {"<id>": {"id": ..., "surface": ..., "kind": ...}, ...},
      "dialogues": [
        {
          "id": "...", "movie_id": "...",
          "utterances": [{"speaker": "A"|"B", "text": "...",
                          "sentiment_labels": [["<entity_id>", "<class>"], ...]}],
          "profile_a": {...}, "profile_b": {...},
          "partner_ratings": [int, int, int] | null,
          "extra": {...}
        }, ...
      ]
    }

Unknown dialogue fields are preserved in ``extra`` so upstream format drift
does not break round-tripping.  Corpora are immutable after ingestion.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
import random

from .entities import EntityRef
from .errors import InvariantError, ParseError, SchemaError, DlgkitError
from .profiles import Profile
from .textutils import surface_tokens

SCHEMA_VERSION = 1

_KNOWN_DIALOGUE_FIELDS = {
    "id", "movie_id", "utterances", "profile_a", "profile_b",
    "partner_ratings", "extra",
}


class Speaker(str, Enum):
    A = "A"
    B = "B"

    @property
    def other(self) -> "Speaker":
        return Speaker.B if self is Speaker.A else Speaker.A


class SentimentClass(str, Enum):
    """Five-point sentiment scale, totally ordered by polarity."""

    VERY_NEGATIVE = "very_negative"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"
    VERY_POSITIVE = "very_positive"

    @property
    def polarity(self) -> int:
        return {
            SentimentClass.VERY_NEGATIVE: -2,
            SentimentClass.NEGATIVE: -1,
            SentimentClass.NEUTRAL: 0,
            SentimentClass.POSITIVE: 1,
            SentimentClass.VERY_POSITIVE: 2,
        }[self]

    @property
    def sign(self) -> int:
        p = self.polarity
        return 0 if p == 0 else (-1 if p < 0 else 1)


@dataclass(frozen=True)
class Utterance:
    speaker: Speaker
    text: str
    index: int
    sentiment_labels: tuple[tuple[str, SentimentClass], ...] = ()

    def __post_init__(self):
        if not self.text.strip():
            raise InvariantError("utterance text empty after trimming")
        if self.index < 0:
            raise InvariantError("utterance index must be >= 0")

    def to_dict(self) -> dict:
        return {
            "speaker": self.speaker.value,
            "text": self.text,
            "sentiment_labels": [[eid, s.value] for eid, s in self.sentiment_labels],
        }


@dataclass(frozen=True)
class Dialogue:
    id: str
    movie_id: str
    utterances: tuple[Utterance, ...]
    profile_a: Profile
    profile_b: Profile
    partner_ratings: tuple[int, int, int] | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.utterances) < 2:
            raise InvariantError(f"dialogue {self.id!r} has fewer than 2 utterances")
        for pos, utt in enumerate(self.utterances):
            if utt.index != pos:
                raise InvariantError(
                    f"dialogue {self.id!r}: utterance index {utt.index} at position {pos}")
        for name, prof in (("profile_a", self.profile_a), ("profile_b", self.profile_b)):
            if prof.movie.id != self.movie_id:
                raise InvariantError(
                    f"dialogue {self.id!r}: {name} is about {prof.movie.id!r}, "
                    f"dialogue about {self.movie_id!r}")

    def profile_for(self, speaker: Speaker) -> Profile:
        return self.profile_a if speaker is Speaker.A else self.profile_b

    def profile_entity_ids(self) -> set[str]:
        return self.profile_a.entity_ids() | self.profile_b.entity_ids()

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "movie_id": self.movie_id,
            "utterances": [u.to_dict() for u in self.utterances],
            "profile_a": self.profile_a.to_dict(),
            "profile_b": self.profile_b.to_dict(),
            "partner_ratings": list(self.partner_ratings) if self.partner_ratings else None,
        }
        if self.extra:
            d["extra"] = self.extra
        return d


@dataclass(frozen=True)
class Corpus:
    dialogues: tuple[Dialogue, ...]
    entities: dict[str, EntityRef] = field(default_factory=dict, compare=False)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.dialogues == other.dialogues

    def movie_ids(self) -> list[str]:
        return sorted({d.movie_id for d in self.dialogues})

    def by_movie(self) -> dict[str, list[Dialogue]]:
        out: dict[str, list[Dialogue]] = {}
        for d in self.dialogues:
            out.setdefault(d.movie_id, []).append(d)
        return out

    def get(self, dialogue_id: str) -> Dialogue:
        for d in self.dialogues:
            if d.id == dialogue_id:
                return d
        raise KeyError(dialogue_id)

    def with_dialogues(self, dialogues: tuple[Dialogue, ...]) -> "Corpus":
        return Corpus(dialogues=dialogues, entities=self.entities)


# ---------------------------------------------------------------------------
# ingestion / serialization
# ---------------------------------------------------------------------------


def _parse_utterance(u: dict, pos: int, dialogue_id: str) -> Utterance:
    for key in ("speaker", "text"):
        if key not in u:
            raise SchemaError(f"utterance {pos} missing {key!r}", dialogue_id)
    labels = tuple(
        (eid, SentimentClass(s)) for eid, s in u.get("sentiment_labels", ()))
    return Utterance(speaker=Speaker(u["speaker"]), text=u["text"],
                     index=u.get("index", pos), sentiment_labels=labels)


def _parse_dialogue(d: dict, entities: dict[str, EntityRef]) -> Dialogue:
    did = d.get("id")
    if not did:
        raise SchemaError("dialogue missing 'id'")
    for key in ("movie_id", "utterances", "profile_a", "profile_b"):
        if key not in d:
            raise SchemaError(f"dialogue missing {key!r}", did)
    utts = tuple(_parse_utterance(u, pos, did)
                 for pos, u in enumerate(d["utterances"]))
    ratings = d.get("partner_ratings")
    extra = dict(d.get("extra", {}))
    extra.update({k: v for k, v in d.items() if k not in _KNOWN_DIALOGUE_FIELDS})
    try:
        return Dialogue(
            id=did, movie_id=d["movie_id"], utterances=utts,
            profile_a=Profile.from_dict(d["profile_a"], entities),
            profile_b=Profile.from_dict(d["profile_b"], entities),
            partner_ratings=tuple(ratings) if ratings else None,
            extra=extra)
    except (ValueError, DlgkitError) as exc:
        offenders = getattr(exc, "offenders", None) or [(did, str(exc))]
        raise InvariantError(str(exc), offenders=offenders) from exc


def ingest(path: str | Path, format: str = "canonical_json") -> Corpus:
    """Load and validate a corpus file; collects per-dialogue diagnostics."""
    if format != "canonical_json":
        raise DlgkitError(f"unknown corpus format {format!r}")
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict) or "dialogues" not in doc:
        raise SchemaError(f"{path}: top-level object with 'dialogues' expected")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema_version {doc.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}")

    entities = {eid: EntityRef.from_dict(e)
                for eid, e in doc.get("entities", {}).items()}
    dialogues: list[Dialogue] = []
    offenders: list[tuple[str, str]] = []
    for raw in doc["dialogues"]:
        try:
            dialogues.append(_parse_dialogue(raw, entities))
        except InvariantError as exc:
            offenders.extend(exc.offenders)
    if offenders:
        raise InvariantError(
            f"{len(offenders)} dialogue(s) violate invariants", offenders=offenders)
    return Corpus(dialogues=tuple(dialogues), entities=entities)


def serialize(corpus: Corpus, path: str | Path):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "entities": {eid: e.to_dict() for eid, e in sorted(corpus.entities.items())},
        "dialogues": [d.to_dict() for d in corpus.dialogues],
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=False))


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    dialogues: int
    utterances: int
    tokens: int
    avg_utt_per_dialogue: float
    avg_tokens_per_utt: float
    vocab_size: int
    vocab_size_99: int
    movies: int
    unique_trivia: int
    token_frequencies: tuple[tuple[str, int], ...] = field(
        default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "dialogues": self.dialogues,
            "utterances": self.utterances,
            "tokens": self.tokens,
            "avg_utt_per_dialogue": self.avg_utt_per_dialogue,
            "avg_tokens_per_utt": self.avg_tokens_per_utt,
            "vocab_size": self.vocab_size,
            "vocab_size_99": self.vocab_size_99,
            "movies": self.movies,
            "unique_trivia": self.unique_trivia,
        }


def covering_vocab_size(counts: Counter, fraction: float = 0.99) -> int:
    """Smallest most-frequent-first vocabulary covering ``fraction`` of tokens.

    Ties in frequency are broken lexicographically so the result is stable.
    """
    total = sum(counts.values())
    if total == 0:
        return 0
    needed = fraction * total
    covered = 0
    for i, (_, c) in enumerate(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])), 1):
        covered += c
        if covered >= needed:
            return i
    return len(counts)


def compute_stats(corpus: Corpus, tokenizer=surface_tokens) -> CorpusStats:
    """Aggregate counts over the whole corpus.

    The vocabulary is computed on lowercased surface tokens of the original
    utterance text, independently of any model tokenizer.
    """
    if not corpus.dialogues:
        raise DlgkitError("compute_stats requires a non-empty corpus")
    n_dialogues = len(corpus.dialogues)
    n_utterances = 0
    counts: Counter = Counter()
    trivia_ids: set[str] = set()
    for d in corpus.dialogues:
        n_utterances += len(d.utterances)
        for u in d.utterances:
            counts.update(tokenizer(u.text))
        for prof in (d.profile_a, d.profile_b):
            trivia_ids.update(f.source_id for f in prof.facts
                              if f.kind.value == "trivia")
    n_tokens = sum(counts.values())
    return CorpusStats(
        dialogues=n_dialogues,
        utterances=n_utterances,
        tokens=n_tokens,
        avg_utt_per_dialogue=n_utterances / n_dialogues,
        avg_tokens_per_utt=n_tokens / n_utterances,
        vocab_size=len(counts),
        vocab_size_99=covering_vocab_size(counts, 0.99),
        movies=len(corpus.movie_ids()),
        unique_trivia=len(trivia_ids),
        token_frequencies=tuple(counts.most_common()),
    )


# ---------------------------------------------------------------------------
# movie-disjoint splitting
# ---------------------------------------------------------------------------


class Split(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


@dataclass(frozen=True)
class SplitAssignment:
    assignment: dict[str, Split]

    def movies(self, split: Split) -> list[str]:
        return sorted(m for m, s in self.assignment.items() if s is split)

    def to_dict(self) -> dict:
        return {m: s.value for m, s in sorted(self.assignment.items())}


def split_by_movie(
    corpus: Corpus,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SplitAssignment:
    """Assign whole movies to train/valid/test.

    Greedy bin packing, largest movie first: each movie goes to the split
    with the largest remaining dialogue deficit.  The seed shuffles movies
    before the (stable) sort so equal-sized movies land differently across
    seeds while staying deterministic for a fixed seed.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DlgkitError(f"fractions {fractions} do not sum to 1")
    by_movie = corpus.by_movie()
    if len(by_movie) < 3:
        raise DlgkitError(f"need at least 3 movies to split, got {len(by_movie)}")
    total = len(corpus.dialogues)
    movies = sorted(by_movie)
    random.Random(seed).shuffle(movies)
    movies.sort(key=lambda m: -len(by_movie[m]))  # stable: seed breaks ties

    splits = list(Split)
    targets = [f * total for f in fractions]
    assigned = [0.0, 0.0, 0.0]
    out: dict[str, Split] = {}
    for m in movies:
        deficits = [targets[i] - assigned[i] for i in range(3)]
        best = max(range(3), key=lambda i: (deficits[i], -i))
        out[m] = splits[best]
        assigned[best] += len(by_movie[m])
    # Guarantee non-empty valid/test when enough movies exist.
    for i, s in enumerate(splits):
        if not any(v is s for v in out.values()):
            donor = max(out, key=lambda m: (out[m] is Split.TRAIN, -len(by_movie[m])))
            out[donor] = s
    return SplitAssignment(assignment=out)


def apply_split(corpus: Corpus, assignment: SplitAssignment) -> dict[Split, Corpus]:
    parts: dict[Split, list[Dialogue]] = {s: [] for s in Split}
    for d in corpus.dialogues:
        parts[assignment.assignment[d.movie_id]].append(d)
    return {s: corpus.with_dialogues(tuple(ds)) for s, ds in parts.items()}
