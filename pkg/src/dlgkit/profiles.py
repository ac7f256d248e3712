"""Speaker profiles as feature structures, and their generation.

A profile bundles the facts one speaker was given about a movie with their
scripted opinions about the entities in those facts.  Two profiles over the
same movie stand in exactly one of three relations: equal, compatible
(unifiable: one may know something the other does not, opinions never
clash) or conflicting (some shared opinion target carries opposite signs).
Factual conflicts cannot occur by construction, so unification fails only
along opinions.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .entities import EntityKind, EntityRef
from .errors import DlgkitError, InvariantError, PoolExhaustedError, SchemaError


class OpinionScale(Enum):
    """Discrete opinion strengths. ``dont_know`` carries no sign."""

    REALLY_DONT_LIKE = -2
    DONT_LIKE = -1
    LIKE = 1
    REALLY_LIKE = 2
    FAVORITE = 3
    DONT_KNOW = None

    @property
    def strength(self) -> int | None:
        return self.value

    @property
    def sign(self) -> int:
        """-1, 0 (dont_know) or +1."""
        if self.value is None:
            return 0
        return -1 if self.value < 0 else 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "OpinionScale":
        try:
            return cls[label.upper()]
        except KeyError:
            raise SchemaError(f"unknown opinion strength {label!r}") from None


SIGNED_SCALES = tuple(s for s in OpinionScale if s.strength is not None)


class FactKind(str, Enum):
    TRIVIA = "trivia"
    PLOT = "plot"
    KB_TRIPLE = "kb_triple"


@dataclass(frozen=True)
class Fact:
    kind: FactKind
    target: EntityRef
    text: str
    source_id: str

    def __post_init__(self):
        if not self.text.strip():
            raise InvariantError("fact text must be non-empty")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "target": self.target.id,
                "text": self.text, "source_id": self.source_id}


@dataclass(frozen=True)
class Opinion:
    target: EntityRef
    strength: OpinionScale

    def to_dict(self) -> dict:
        return {"target": self.target.id, "strength": self.strength.label}


@dataclass(frozen=True)
class Profile:
    """Facts + opinions + scripted questions given to one speaker."""

    movie: EntityRef
    facts: frozenset[Fact]
    opinions: frozenset[Opinion]
    questions: frozenset[str] = frozenset()
    pretend_unknown: bool = False

    def __post_init__(self):
        targets = [o.target.id for o in self.opinions]
        if len(targets) != len(set(targets)):
            raise InvariantError("at most one opinion per target")
        if self.pretend_unknown:
            if any(f.target.id == self.movie.id for f in self.facts):
                raise InvariantError("pretend_unknown profile must not hold movie facts")
            if not self.questions:
                raise InvariantError("pretend_unknown profile needs at least one question")
        else:
            if not 2 <= len(self.facts) <= 4:
                raise InvariantError(f"profile needs 2-4 facts, got {len(self.facts)}")

    def opinion_map(self) -> dict[str, OpinionScale]:
        return {o.target.id: o.strength for o in self.opinions}

    def entity_ids(self) -> set[str]:
        ids = {self.movie.id}
        ids.update(f.target.id for f in self.facts)
        ids.update(o.target.id for o in self.opinions)
        return ids

    def to_dict(self) -> dict:
        return {
            "movie": self.movie.id,
            "facts": sorted((f.to_dict() for f in self.facts),
                            key=lambda d: (d["source_id"], d["text"])),
            "opinions": sorted((o.to_dict() for o in self.opinions),
                               key=lambda d: d["target"]),
            "questions": sorted(self.questions),
            "pretend_unknown": self.pretend_unknown,
        }

    @classmethod
    def from_dict(cls, d: dict, entities: dict[str, EntityRef]) -> "Profile":
        def ref(eid: str) -> EntityRef:
            if eid not in entities:
                raise SchemaError(f"profile references unknown entity {eid!r}")
            return entities[eid]

        facts = frozenset(
            Fact(kind=FactKind(f["kind"]), target=ref(f["target"]),
                 text=f["text"], source_id=f["source_id"])
            for f in d.get("facts", ()))
        opinions = frozenset(
            Opinion(target=ref(o["target"]),
                    strength=OpinionScale.from_label(o["strength"]))
            for o in d.get("opinions", ()))
        return cls(movie=ref(d["movie"]), facts=facts, opinions=opinions,
                   questions=frozenset(d.get("questions", ())),
                   pretend_unknown=bool(d.get("pretend_unknown", False)))


class ProfileRelation(str, Enum):
    EQUAL = "equal"
    COMPATIBLE = "compatible"
    CONFLICTING = "conflicting"


def unify(a: Profile, b: Profile) -> ProfileRelation:
    """Classify the relation between two profiles over the same movie."""
    if a.movie.id != b.movie.id:
        raise DlgkitError(
            f"cannot unify profiles for different movies "
            f"({a.movie.id!r} vs {b.movie.id!r})")
    if a.facts == b.facts and a.opinions == b.opinions:
        return ProfileRelation.EQUAL
    oa, ob = a.opinion_map(), b.opinion_map()
    for target in oa.keys() & ob.keys():
        if oa[target].sign * ob[target].sign < 0:
            return ProfileRelation.CONFLICTING
    return ProfileRelation.COMPATIBLE


# ---------------------------------------------------------------------------
# knowledge base
# ---------------------------------------------------------------------------


@dataclass
class TriviaItem:
    id: str
    text: str
    mentions: list[str] = field(default_factory=list)  # entity ids


@dataclass
class Triple:
    relation: str
    value: str


_TRIPLE_PATTERNS = {
    "budget": "The budget of {movie} was {value}.",
    "release_year": "{movie} was released in {value}.",
    "genre": "{movie} is a {value} movie.",
    "certificate": "{movie} is rated {value}.",
    "country": "{movie} was produced in {value}.",
}

_TRIPLE_QUESTIONS = {
    "budget": "Do you know the budget of {movie}?",
    "release_year": "Do you know when {movie} was released?",
    "genre": "Do you know what genre {movie} is?",
    "certificate": "Do you know the age rating of {movie}?",
    "country": "Do you know where {movie} was produced?",
}


@dataclass
class MovieEntry:
    movie: EntityRef
    plot: str
    trivia: list[TriviaItem]          # pre-sorted, most interesting first
    triples: list[Triple]
    people: list[EntityRef] = field(default_factory=list)
    other_entities: list[EntityRef] = field(default_factory=list)

    def entity_index(self) -> dict[str, EntityRef]:
        idx = {self.movie.id: self.movie}
        for e in self.people + self.other_entities:
            idx[e.id] = e
        return idx


class KnowledgeBase:
    """Flat per-movie store of trivia, plots and knowledge triples."""

    def __init__(self, movies: dict[str, MovieEntry]):
        self.movies = movies

    def entry(self, movie_id: str) -> MovieEntry:
        if movie_id not in self.movies:
            raise DlgkitError(f"movie {movie_id!r} not in knowledge base")
        return self.movies[movie_id]

    def all_entities(self) -> dict[str, EntityRef]:
        idx: dict[str, EntityRef] = {}
        for entry in self.movies.values():
            idx.update(entry.entity_index())
        return idx

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeBase":
        doc = json.loads(Path(path).read_text())
        movies: dict[str, MovieEntry] = {}
        for mid, m in doc["movies"].items():
            movie_ref = EntityRef(id=mid, surface=m["title"], kind=EntityKind.MOVIE)
            people = [EntityRef(id=p["id"], surface=p["name"], kind=EntityKind.PERSON)
                      for p in m.get("people", ())]
            others = [EntityRef(id=o["id"], surface=o["surface"],
                                kind=EntityKind(o.get("kind", "other")))
                      for o in m.get("other_entities", ())]
            trivia = [TriviaItem(id=t["id"], text=t["text"],
                                 mentions=list(t.get("mentions", ())))
                      for t in m.get("trivia", ())]
            triples = [Triple(relation=t["relation"], value=str(t["value"]))
                       for t in m.get("triples", ())]
            movies[mid] = MovieEntry(movie=movie_ref, plot=m.get("plot", ""),
                                     trivia=trivia, triples=triples,
                                     people=people, other_entities=others)
        return cls(movies)

    def dump(self, path: str | Path):
        doc = {"movies": {}}
        for mid, m in self.movies.items():
            doc["movies"][mid] = {
                "title": m.movie.surface,
                "plot": m.plot,
                "trivia": [{"id": t.id, "text": t.text, "mentions": t.mentions}
                           for t in m.trivia],
                "triples": [{"relation": t.relation, "value": t.value}
                            for t in m.triples],
                "people": [{"id": p.id, "name": p.surface} for p in m.people],
                "other_entities": [{"id": o.id, "surface": o.surface,
                                    "kind": o.kind.value} for o in m.other_entities],
            }
        Path(path).write_text(json.dumps(doc, indent=1))


def render_triple_fact(movie: EntityRef, triple: Triple) -> str:
    pattern = _TRIPLE_PATTERNS.get(triple.relation, "The {relation} of {movie} is {value}.")
    return pattern.format(movie=movie.surface, value=triple.value,
                          relation=triple.relation.replace("_", " "))


def render_triple_question(movie: EntityRef, triple: Triple) -> str:
    pattern = _TRIPLE_QUESTIONS.get(triple.relation, "Do you know the {relation} of {movie}?")
    return pattern.format(movie=movie.surface, relation=triple.relation.replace("_", " "))


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def assign_opinions(
    facts: frozenset[Fact] | set[Fact],
    relation: ProfileRelation | None,
    rng: random.Random,
    extra_targets: list[EntityRef] | None = None,
) -> tuple[frozenset[Opinion], frozenset[Opinion]]:
    """Draw an opinion pair for every entity mentioned by ``facts``.

    ``relation`` constrains only the opinion component: equal pairs are
    identical, conflicting pairs contain at least one opposite-sign target,
    compatible pairs contain none.  ``relation=None`` draws unconstrained.
    """
    if not facts and not extra_targets:
        raise DlgkitError("assign_opinions requires at least one fact")
    targets: dict[str, EntityRef] = {}
    for f in facts:
        targets[f.target.id] = f.target
    for e in extra_targets or ():
        targets[e.id] = e

    ordered = [targets[k] for k in sorted(targets)]
    ops_a, ops_b = [], []
    if relation is ProfileRelation.EQUAL:
        for e in ordered:
            s = rng.choice(list(OpinionScale))
            ops_a.append(Opinion(e, s))
            ops_b.append(Opinion(e, s))
    elif relation is ProfileRelation.CONFLICTING:
        clash = rng.choice(ordered)
        for e in ordered:
            if e.id == clash.id:
                sa = rng.choice([s for s in SIGNED_SCALES if s.sign > 0])
                sb = rng.choice([s for s in SIGNED_SCALES if s.sign < 0])
                if rng.random() < 0.5:
                    sa, sb = sb, sa
            else:
                sa = rng.choice(list(OpinionScale))
                sb = rng.choice([s for s in OpinionScale
                                 if s.sign * sa.sign >= 0])
            ops_a.append(Opinion(e, sa))
            ops_b.append(Opinion(e, sb))
    elif relation is ProfileRelation.COMPATIBLE:
        for e in ordered:
            sa = rng.choice(list(OpinionScale))
            sb = rng.choice([s for s in OpinionScale if s.sign * sa.sign >= 0])
            ops_a.append(Opinion(e, sa))
            ops_b.append(Opinion(e, sb))
    else:
        for e in ordered:
            ops_a.append(Opinion(e, rng.choice(list(OpinionScale))))
            ops_b.append(Opinion(e, rng.choice(list(OpinionScale))))
    return frozenset(ops_a), frozenset(ops_b)


@dataclass
class ProfilePair:
    profile_a: Profile
    profile_b: Profile
    relation: ProfileRelation


class ProfileGenerator:
    """Stateful generator enforcing the corpus-wide trivia-uniqueness rule."""

    def __init__(self, kb: KnowledgeBase, seed: int = 0):
        self.kb = kb
        self.rng = random.Random(seed)
        self.used_trivia: set[str] = set()

    # -- fact sampling ------------------------------------------------------

    def sample_fact_set(
        self, movie_id: str,
    ) -> tuple[list[Fact], list[Fact], list[str]]:
        """Fact sets for both speakers plus scripted questions for speaker A.

        Constraints honored: 2-4 facts each; a trivia mentioning an actor
        pulls an actor-related fact next; a question handed to one speaker
        puts the answering fact into the other speaker's set; trivia ids are
        never reused across the generator's lifetime.
        """
        entry = self.kb.entry(movie_id)
        available = [t for t in entry.trivia if t.id not in self.used_trivia]
        if len(available) < 2:
            raise PoolExhaustedError(
                f"movie {movie_id!r} has {len(available)} unused trivia, need >= 2")
        rng = self.rng
        idx = entry.entity_index()

        def trivia_fact(item: TriviaItem) -> Fact:
            self.used_trivia.add(item.id)
            available.remove(item)
            target = idx.get(item.mentions[0]) if item.mentions else entry.movie
            return Fact(FactKind.TRIVIA, target or entry.movie, item.text, item.id)

        facts_a: list[Fact] = []
        facts_b: list[Fact] = []
        questions: list[str] = []

        for facts in (facts_a, facts_b):
            n_target = rng.randint(2, 4)
            # Prefer actor-mentioning trivia for the opening fact.
            actor_first = [t for t in available if t.mentions]
            first = rng.choice(actor_first or available)
            facts.append(trivia_fact(first))
            if first.mentions and len(facts) < n_target:
                # Follow-up about the mentioned actor, when one exists.
                followups = [t for t in available if set(t.mentions) & set(first.mentions)]
                if followups:
                    facts.append(trivia_fact(rng.choice(followups)))
            while len(facts) < n_target and available:
                facts.append(trivia_fact(rng.choice(available)))
            if len(facts) < 2 and entry.plot:
                facts.append(Fact(FactKind.PLOT, entry.movie, entry.plot,
                                  f"{movie_id}:plot"))
            if len(facts) < n_target and entry.triples and rng.random() < 0.5:
                triple = rng.choice(entry.triples)
                facts.append(Fact(FactKind.KB_TRIPLE, entry.movie,
                                  render_triple_fact(entry.movie, triple),
                                  f"{movie_id}:{triple.relation}"))
            if len(facts) < 2:
                raise PoolExhaustedError(
                    f"could not assemble 2 facts for movie {movie_id!r}")

        # Scripted question for A; B receives the answering fact.
        if entry.triples and rng.random() < 0.5:
            triple = rng.choice(entry.triples)
            questions.append(render_triple_question(entry.movie, triple))
            answer = Fact(FactKind.KB_TRIPLE, entry.movie,
                          render_triple_fact(entry.movie, triple),
                          f"{movie_id}:{triple.relation}")
            if answer not in facts_b:
                facts_b = (facts_b + [answer])[-4:] if len(facts_b) >= 4 \
                    else facts_b + [answer]
        return facts_a, facts_b, questions

    # -- pair generation ----------------------------------------------------

    def generate_pair(
        self, movie_id: str, relation: ProfileRelation,
    ) -> ProfilePair:
        entry = self.kb.entry(movie_id)
        facts_a, facts_b, questions = self.sample_fact_set(movie_id)
        if relation is ProfileRelation.EQUAL:
            # Identical profiles: mirrored facts, and no scripted question
            # (its answer would live only on the other side).
            facts_b = facts_a
            questions = []

        if relation is ProfileRelation.EQUAL:
            ops_a, ops_b = assign_opinions(
                frozenset(facts_a), relation, self.rng, [entry.movie])
        else:
            union = frozenset(facts_a) | frozenset(facts_b)
            ops_a, ops_b = assign_opinions(union, relation, self.rng, [entry.movie])

        a = Profile(movie=entry.movie, facts=frozenset(facts_a),
                    opinions=ops_a, questions=frozenset(questions))
        b = Profile(movie=entry.movie, facts=frozenset(facts_b), opinions=ops_b)
        got = unify(a, b)
        if got is not relation:
            # Equal fact sets with sampled-equal opinions can only differ via
            # the requested relation; compatible draws may accidentally be
            # equal, fix by re-rolling one opinion to dont_know asymmetry.
            if relation is ProfileRelation.COMPATIBLE and got is ProfileRelation.EQUAL:
                target = sorted(ops_b, key=lambda o: o.target.id)[0]
                new = OpinionScale.DONT_KNOW if target.strength is not OpinionScale.DONT_KNOW \
                    else OpinionScale.LIKE
                ops_b = frozenset(o for o in ops_b if o != target) | {Opinion(target.target, new)}
                b = Profile(movie=entry.movie, facts=frozenset(facts_b), opinions=ops_b)
            if unify(a, b) is not relation:
                raise DlgkitError(
                    f"generated pair has relation {unify(a, b).value}, "
                    f"requested {relation.value}")
        return ProfilePair(profile_a=a, profile_b=b, relation=relation)
