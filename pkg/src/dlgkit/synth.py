"""Deterministic synthetic corpora with known ground truth.

The generators here produce corpora whose statistics (dialogue, utterance
and movie counts, mention coverage, gold entity spans) are fixed by
construction, independently of the measurement code under test.  They back
the test fixtures and the desk-scale stand-in for the published corpus,
which is not redistributable with this package; point ``DLGKIT_CORPUS`` at
a canonical-JSON copy to run the reporting pipeline on real data instead.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .corpus import Corpus, Dialogue, Speaker, Utterance
from .entities import EntityKind, EntityMatch, EntityRef, MatchMethod
from .profiles import (KnowledgeBase, MovieEntry, OpinionScale, ProfileGenerator,
                       ProfileRelation, TriviaItem, Triple)
from .textutils import surface_tokens, word_tokens

_TITLE_FIRST = ["Velvet", "Crimson", "Silent", "Broken", "Golden", "Hidden",
                "Frozen", "Electric", "Wandering", "Scarlet", "Hollow", "Iron",
                "Midnight", "Paper", "Savage", "Gentle", "Burning", "Lonely",
                "Rusty", "Glass"]
_TITLE_SECOND = ["Harbor", "Orchard", "Lantern", "Compass", "Meridian",
                 "Voyage", "Serenade", "Labyrinth", "Horizon", "Covenant",
                 "Mirage", "Cathedral", "Monsoon", "Antler", "Pendulum",
                 "Quarry", "Sparrow", "Zephyr", "Bastion", "Ember"]
_FIRST_NAMES = ["Alora", "Bastian", "Cressida", "Dorian", "Elowen", "Fintan",
                "Gwyneth", "Hadrian", "Isolde", "Jorvik", "Katriel", "Lysandra",
                "Merrick", "Nerissa", "Osric", "Petra", "Quillon", "Rosalind",
                "Severin", "Thessaly"]
_LAST_NAMES = ["Ashcombe", "Blackwood", "Carraway", "Dunmore", "Ellsworth",
               "Fairbanks", "Greymont", "Halloway", "Ironfield", "Jessop",
               "Kingsmead", "Lockhart", "Marchbanks", "Northgate", "Okonkwo",
               "Pemberton", "Quarrington", "Ravenswood", "Stillwater",
               "Thornbury"]
_GENRES = ["dark comedy", "science fiction", "psychological thriller",
           "period drama", "heist caper", "folk horror"]
_COUNTRIES = ["New Zealand", "South Korea", "Argentina", "Norway", "Portugal",
              "Morocco"]

_FILLER = ("well you know i guess we could talk more since the chat keeps "
           "going and there is plenty left to say about all of this "
           "honestly speaking for my part anyway today").split()

_POS_TEMPLATES = [
    "i really loved {e} if i am honest",
    "{e} was great and i enjoyed every minute",
    "honestly {e} is my favorite by far",
    "i liked {e} a lot more than expected",
]
_NEG_TEMPLATES = [
    "i really hated {e} to be honest",
    "{e} was boring and i disliked the pacing",
    "honestly i think {e} is overrated and bad",
    "i did not like {e} at all sadly",
]
_NEU_TEMPLATES = [
    "have you heard anything about {e} lately",
    "someone told me about {e} the other day",
    "i know almost nothing about {e} really",
]
_CHAT_TEMPLATES = [
    "so how has your day been going so far",
    "that is a fair point when you think about it",
    "did you read that trivia before we started chatting",
    "i spend most weekends watching something new at home",
    "the plot summary they gave us was pretty detailed",
    "what else did your notes say about the story",
]


def _letters(rng: random.Random, n: int) -> str:
    return "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(n))


def perturb(surface: str, rng: random.Random, max_edits: int = 2) -> str:
    """Apply 1..max_edits character edits, never touching spaces."""
    chars = list(surface)
    n_edits = rng.randint(1, max_edits)
    for _ in range(n_edits):
        positions = [i for i, c in enumerate(chars) if c != " "]
        if not positions:
            break
        i = rng.choice(positions)
        op = rng.choice(("sub", "del", "ins"))
        if op == "sub":
            chars[i] = _letters(rng, 1)
        elif op == "del" and len(positions) > 3:
            del chars[i]
        else:
            chars.insert(i, _letters(rng, 1))
    return "".join(chars)


# ---------------------------------------------------------------------------
# knowledge base
# ---------------------------------------------------------------------------


def _unique_phrases(first: list[str], second: list[str], count: int,
                    rng: random.Random) -> list[str]:
    """``count`` distinct "First Second" phrases in seeded-shuffled order.

    Enumerates the cross product instead of rejection-sampling so large
    counts cannot stall; past the product size it appends numbered variants.
    """
    combos = [f"{a} {b}" for a in first for b in second]
    rng.shuffle(combos)
    out = list(combos[:count])
    suffix = 2
    while len(out) < count:
        for base in combos:
            out.append(f"{base} {suffix}")
            if len(out) == count:
                break
        suffix += 1
    return out


def make_kb(n_movies: int, seed: int = 0, trivia_per_movie: int = 24) -> KnowledgeBase:
    """A synthetic knowledge base with distinct invented names throughout."""
    rng = random.Random(seed)
    movies: dict[str, MovieEntry] = {}
    titles = _unique_phrases(_TITLE_FIRST, _TITLE_SECOND, n_movies, rng)
    names = _unique_phrases(_FIRST_NAMES, _LAST_NAMES, 3 * n_movies, rng)
    for m in range(n_movies):
        title = titles[m]
        if rng.random() < 0.3:
            title = f"The {title}"
        mid = f"m{m:04d}"
        movie = EntityRef(id=mid, surface=title, kind=EntityKind.MOVIE)
        people = []
        for p in range(3):
            people.append(EntityRef(id=f"{mid}-p{p}", surface=names[3 * m + p],
                                    kind=EntityKind.PERSON))
        genre = rng.choice(_GENRES)
        country = rng.choice(_COUNTRIES)
        others = [
            EntityRef(id=f"{mid}-g", surface=genre, kind=EntityKind.GENRE),
            EntityRef(id=f"{mid}-c", surface=country, kind=EntityKind.COUNTRY),
        ]
        trivia = []
        for t in range(trivia_per_movie):
            person = people[t % len(people)]
            if t % 3 == 0:
                text = (f"{person.surface} improvised most scenes of "
                        f"{title} during take {t + 2}.")
                mentions = [person.id]
            elif t % 3 == 1:
                text = (f"The crew of {title} rebuilt the main set "
                        f"{t + 1} times before filming ended.")
                mentions = []
            else:
                text = (f"{person.surface} trained for {t + 1} months to "
                        f"prepare for the lead role.")
                mentions = [person.id]
            trivia.append(TriviaItem(id=f"{mid}-t{t:03d}", text=text,
                                     mentions=mentions))
        triples = [
            Triple("budget", f"${rng.randint(5, 200)} million"),
            Triple("release_year", str(rng.randint(1965, 2019))),
            Triple("genre", genre),
            Triple("country", country),
        ]
        plot = (f"A stranger arrives in a small town and slowly uncovers "
                f"the secret behind {title.lower()}.")
        movies[mid] = MovieEntry(movie=movie, plot=plot, trivia=trivia,
                                 triples=triples, people=people,
                                 other_entities=others)
    return KnowledgeBase(movies)


# ---------------------------------------------------------------------------
# corpus generation
# ---------------------------------------------------------------------------


@dataclass
class SynthGroundTruth:
    """What the generator actually emitted, kept separate from the corpus."""

    gold_matches: dict[str, list[EntityMatch]] = field(default_factory=dict)
    mentioned_fraction: dict[str, float] = field(default_factory=dict)
    utterance_count: int = 0
    token_count: int = 0

    @property
    def mean_coverage(self) -> float:
        vals = list(self.mentioned_fraction.values())
        return sum(vals) / len(vals)


def _sentiment_text(entity: EntityRef, opinion: OpinionScale,
                    rng: random.Random) -> str:
    if opinion.sign > 0:
        template = rng.choice(_POS_TEMPLATES)
    elif opinion.sign < 0:
        template = rng.choice(_NEG_TEMPLATES)
    else:
        template = rng.choice(_NEU_TEMPLATES)
    return template.format(e=entity.surface)


def _pad_to_length(text: str, target_tokens: int, rng: random.Random) -> str:
    # Final period counts as one surface token.
    current = len(surface_tokens(text)) + 1
    words = []
    while current + len(words) < target_tokens:
        words.append(rng.choice(_FILLER))
    if words:
        text = text + " " + " ".join(words)
    return text + "."


def generate_corpus(
    kb: KnowledgeBase,
    n_dialogues: int,
    total_utterances: int | None = None,
    seed: int = 0,
    mention_rate: float = 0.931,
    typo_rate: float = 0.25,
    avg_tokens_per_utterance: float = 14.37,
) -> tuple[Corpus, SynthGroundTruth]:
    """Generate ``n_dialogues`` grounded dialogues over the whole KB.

    Every profile entity is mentioned in the dialogue with probability
    ``mention_rate`` (at least once, never otherwise); a mention is typo'd
    with probability ``typo_rate`` using at most two character edits.
    ``total_utterances``, when given, is hit exactly by distributing the
    remainder over the first dialogues.
    """
    rng = random.Random(seed)
    gen = ProfileGenerator(kb, seed=seed + 1)
    movie_ids = sorted(kb.movies)
    truth = SynthGroundTruth()
    relations = [ProfileRelation.EQUAL, ProfileRelation.COMPATIBLE,
                 ProfileRelation.COMPATIBLE, ProfileRelation.CONFLICTING]

    if total_utterances is None:
        lengths = [rng.randint(10, 18) for _ in range(n_dialogues)]
    else:
        base = total_utterances // n_dialogues
        extra = total_utterances - base * n_dialogues
        lengths = [base + (1 if i < extra else 0) for i in range(n_dialogues)]
        if base < 2:
            raise ValueError("total_utterances implies dialogues shorter than 2")

    dialogues = []
    for d in range(n_dialogues):
        movie_id = movie_ids[d % len(movie_ids)]
        pair = gen.generate_pair(movie_id, relations[d % len(relations)])
        entry = kb.movies[movie_id]
        entity_index = entry.entity_index()

        profile_entities = sorted(
            pair.profile_a.entity_ids() | pair.profile_b.entity_ids())
        to_mention = [eid for eid in profile_entities
                      if rng.random() < mention_rate]
        truth.mentioned_fraction[f"d{d:05d}"] = (
            len(to_mention) / len(profile_entities))

        n_utts = lengths[d]
        # Which utterance carries which mention; every chosen entity gets one.
        slots: dict[int, list[str]] = {}
        for eid in to_mention:
            slots.setdefault(rng.randrange(n_utts), []).append(eid)

        did = f"d{d:05d}"
        gold: list[EntityMatch] = []
        utts = []
        opinions_by_speaker = {
            Speaker.A: pair.profile_a.opinion_map(),
            Speaker.B: pair.profile_b.opinion_map(),
        }
        for u in range(n_utts):
            speaker = Speaker.A if u % 2 == 0 else Speaker.B
            mentions = slots.get(u, [])
            if mentions:
                eid = mentions[0]
                entity = entity_index[eid]
                opinion = opinions_by_speaker[speaker].get(
                    eid, OpinionScale.DONT_KNOW)
                text = _sentiment_text(entity, opinion, rng)
                for extra_eid in mentions[1:]:
                    extra_entity = entity_index[extra_eid]
                    text += f" and what about {extra_entity.surface} too"
            else:
                text = rng.choice(_CHAT_TEMPLATES)
            target_len = int(avg_tokens_per_utterance) + (
                1 if rng.random() < (avg_tokens_per_utterance % 1) else 0)
            text = _pad_to_length(text, target_len, rng)

            # Typo pass over the mention surfaces, recording gold spans.
            for eid in mentions:
                entity = entity_index[eid]
                surface = entity.surface
                if rng.random() < typo_rate:
                    mutated = perturb(surface, rng)
                    if mutated != surface and \
                            len(word_tokens(mutated)) == len(word_tokens(surface)):
                        text = text.replace(surface, mutated, 1)
                        surface = mutated
                span = _locate(text, surface)
                if span is not None:
                    gold.append(EntityMatch(
                        entity=entity, utterance_index=u, span=span,
                        method=MatchMethod.EXACT
                        if surface == entity.surface else
                        MatchMethod.JACCARD_LEVENSHTEIN,
                        score=1.0 if surface == entity.surface else 0.8))
            truth.token_count += len(surface_tokens(text))
            truth.utterance_count += 1
            utts.append(Utterance(speaker=speaker, text=text, index=u))
        truth.gold_matches[did] = gold
        dialogues.append(Dialogue(
            id=did, movie_id=movie_id, utterances=tuple(utts),
            profile_a=pair.profile_a, profile_b=pair.profile_b,
            partner_ratings=(rng.randint(3, 5), rng.randint(3, 5),
                             rng.randint(3, 5))))
    corpus = Corpus(dialogues=tuple(dialogues), entities=kb.all_entities())
    return corpus, truth


def _locate(text: str, surface: str) -> tuple[int, int] | None:
    """Word-token span of the first occurrence of ``surface`` in ``text``."""
    toks = word_tokens(text)
    stoks = word_tokens(surface)
    n = len(stoks)
    for i in range(len(toks) - n + 1):
        if toks[i:i + n] == stoks:
            return (i, i + n)
    return None


# ---------------------------------------------------------------------------
# NER benchmark
# ---------------------------------------------------------------------------


@dataclass
class NerBenchmark:
    texts: list[str]
    targets: list[EntityRef]
    gold: list[EntityMatch]       # utterance_index = position in texts


def make_ner_benchmark(
    n_utterances: int = 500, seed: int = 0, max_edits: int = 2,
) -> NerBenchmark:
    """Utterances with injected entity mentions perturbed by <= 2 edits."""
    rng = random.Random(seed)
    kb = make_kb(n_movies=40, seed=seed + 7, trivia_per_movie=4)
    pool: list[EntityRef] = []
    for entry in kb.movies.values():
        pool.append(entry.movie)
        pool.extend(entry.people)
    texts: list[str] = []
    gold: list[EntityMatch] = []
    for i in range(n_utterances):
        entity = rng.choice(pool)
        surface = entity.surface
        if rng.random() < 0.6:
            mutated = perturb(surface, rng, max_edits=max_edits)
            if len(word_tokens(mutated)) == len(word_tokens(surface)):
                surface = mutated
        lead = rng.choice(_CHAT_TEMPLATES)
        text = f"{lead} and honestly {surface} keeps coming up."
        span = _locate(text, surface)
        assert span is not None
        texts.append(text)
        gold.append(EntityMatch(entity=entity, utterance_index=i, span=span,
                                method=MatchMethod.EXACT
                                if surface == entity.surface
                                else MatchMethod.JACCARD_LEVENSHTEIN,
                                score=1.0 if surface == entity.surface else 0.8))
    return NerBenchmark(texts=texts, targets=pool, gold=gold)


# ---------------------------------------------------------------------------
# full-scale stand-in for the published corpus
# ---------------------------------------------------------------------------

FULL_SCALE = {
    "dialogues": 7519,
    "utterances": 103500,
    "movies": 500,
    "tokens": 1487284,     # targeted within the documented +-5% tolerance
}


def full_scale_corpus(seed: int = 2024) -> tuple[Corpus, SynthGroundTruth]:
    """Desk-scale stand-in matching the headline corpus statistics exactly."""
    kb = make_kb(n_movies=FULL_SCALE["movies"], seed=seed,
                 trivia_per_movie=140)
    return generate_corpus(
        kb, n_dialogues=FULL_SCALE["dialogues"],
        total_utterances=FULL_SCALE["utterances"], seed=seed,
        avg_tokens_per_utterance=FULL_SCALE["tokens"] / FULL_SCALE["utterances"])
