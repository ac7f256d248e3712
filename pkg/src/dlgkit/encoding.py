"""Model-ready sample construction.

A sample is four parallel channels over at most 512 positions: token ids,
content-type ids, position indices and a language-model mask.  Per-token
content ids identify the speaker of dialogue tokens, the fact group or the
attitude strength of grounding tokens.  Position indices restart at zero
for every fact and every attitude segment so the encoding is invariant to
the order in which the profile lists them; dialogue positions run
contiguously.  A classification token is appended after the last utterance
and the LM mask is true exactly on the tokens of that utterance.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
import random

import numpy as np

from .bpe import BPETokenizer, CLF, PAD
from .corpus import Dialogue, Speaker, Utterance
from .entities import EntityKind, EntityMatch
from .errors import DlgkitError
from .profiles import OpinionScale, Profile
from .textutils import word_tokens_with_spans

MAX_LEN = 512

# content id layout
CONTENT_PAD = 0
CONTENT_SPEAKER_A = 1
CONTENT_SPEAKER_B = 2
CONTENT_FACT_BASE = 3           # one id per fact group (by target), up to 8
MAX_FACT_GROUPS = 8
CONTENT_ATTITUDE_BASE = CONTENT_FACT_BASE + MAX_FACT_GROUPS
ATTITUDE_ORDER = (
    OpinionScale.REALLY_DONT_LIKE, OpinionScale.DONT_LIKE, OpinionScale.LIKE,
    OpinionScale.REALLY_LIKE, OpinionScale.FAVORITE, OpinionScale.DONT_KNOW,
)
N_CONTENT_IDS = CONTENT_ATTITUDE_BASE + len(ATTITUDE_ORDER)


def attitude_content_id(strength: OpinionScale) -> int:
    return CONTENT_ATTITUDE_BASE + ATTITUDE_ORDER.index(strength)


def speaker_content_id(speaker: Speaker) -> int:
    return CONTENT_SPEAKER_A if speaker is Speaker.A else CONTENT_SPEAKER_B


@dataclass
class EncodedSample:
    token_ids: list[int]
    content_ids: list[int]
    position_ids: list[int]
    lm_mask: list[bool]
    clf_index: int
    label: int | None = None

    def __post_init__(self):
        n = len(self.token_ids)
        if not (len(self.content_ids) == len(self.position_ids)
                == len(self.lm_mask) == n):
            raise DlgkitError("sample channels have unequal lengths")
        if n > MAX_LEN:
            raise DlgkitError(f"sample length {n} exceeds {MAX_LEN}")

    def to_dict(self) -> dict:
        return {
            "token_ids": self.token_ids,
            "content_ids": self.content_ids,
            "position_ids": self.position_ids,
            "lm_mask": [int(b) for b in self.lm_mask],
            "clf_index": self.clf_index,
            "label": self.label,
        }


@dataclass
class DelexMap:
    """Ordered substitutions applied during delexicalisation, invertible."""

    substitutions: list[tuple[int, str, str, str]] = field(default_factory=list)
    # (utterance_index, original_text, placeholder, entity_id)

    def record(self, utt_index: int, original: str, placeholder: str, entity_id: str):
        self.substitutions.append((utt_index, original, placeholder, entity_id))


_KIND_PLACEHOLDER = {
    EntityKind.MOVIE: "<movie>",
    EntityKind.PERSON: "<actor>",
    EntityKind.GENRE: "<genre>",
    EntityKind.COUNTRY: "<country>",
    EntityKind.OTHER: "<entity>",
}

_YEAR_RE = re.compile(r"\b(19|20)\d{2}\b")
_BUDGET_RE = re.compile(r"\$\s?\d[\d,.]*(?:\s?(?:million|billion|k|m))?", re.IGNORECASE)


def delexicalise(
    dialogue: Dialogue, matches: list[EntityMatch],
) -> tuple[Dialogue, DelexMap]:
    """Replace entity mentions (and year/budget literals) with placeholders.

    A sample covers exactly one movie; two distinct movie entities among the
    matches are rejected.
    """
    movie_ids = {m.entity.id for m in matches if m.entity.kind is EntityKind.MOVIE}
    if len(movie_ids) > 1:
        raise DlgkitError(
            f"dialogue {dialogue.id!r} mentions {len(movie_ids)} distinct movies")
    by_utt: dict[int, list[EntityMatch]] = {}
    for m in matches:
        by_utt.setdefault(m.utterance_index, []).append(m)

    dmap = DelexMap()
    new_utts = []
    for utt in dialogue.utterances:
        text = utt.text
        spans = word_tokens_with_spans(text)
        pieces = []
        cursor = 0
        for m in sorted(by_utt.get(utt.index, []), key=lambda m: m.span):
            cs, ce = spans[m.span[0]][1], spans[m.span[1] - 1][2]
            if cs < cursor:
                continue  # overlapping leftovers are resolver bugs upstream
            placeholder = _KIND_PLACEHOLDER[m.entity.kind]
            pieces.append(text[cursor:cs])
            pieces.append(placeholder)
            dmap.record(utt.index, text[cs:ce], placeholder, m.entity.id)
            cursor = ce
        pieces.append(text[cursor:])
        out = "".join(pieces)
        out = _BUDGET_RE.sub(lambda mo: _record_literal(dmap, utt.index, mo.group(0),
                                                        "<budget>"), out)
        out = _YEAR_RE.sub(lambda mo: _record_literal(dmap, utt.index, mo.group(0),
                                                      "<release_year>"), out)
        new_utts.append(Utterance(speaker=utt.speaker, text=out, index=utt.index,
                                  sentiment_labels=utt.sentiment_labels))
    new_dialogue = Dialogue(
        id=dialogue.id, movie_id=dialogue.movie_id, utterances=tuple(new_utts),
        profile_a=dialogue.profile_a, profile_b=dialogue.profile_b,
        partner_ratings=dialogue.partner_ratings, extra=dialogue.extra)
    return new_dialogue, dmap


def _record_literal(dmap: DelexMap, utt_index: int, original: str,
                    placeholder: str) -> str:
    dmap.record(utt_index, original, placeholder, "")
    return placeholder


def relexicalise(dialogue: Dialogue, dmap: DelexMap) -> Dialogue:
    """Invert :func:`delexicalise` using the recorded substitution order."""
    queue: dict[int, list[tuple[str, str]]] = {}
    for utt_index, original, placeholder, _ in dmap.substitutions:
        queue.setdefault(utt_index, []).append((placeholder, original))
    new_utts = []
    for utt in dialogue.utterances:
        text = utt.text
        for placeholder, original in queue.get(utt.index, []):
            text = text.replace(placeholder, original, 1)
        new_utts.append(Utterance(speaker=utt.speaker, text=text, index=utt.index,
                                  sentiment_labels=utt.sentiment_labels))
    return Dialogue(
        id=dialogue.id, movie_id=dialogue.movie_id, utterances=tuple(new_utts),
        profile_a=dialogue.profile_a, profile_b=dialogue.profile_b,
        partner_ratings=dialogue.partner_ratings, extra=dialogue.extra)


# ---------------------------------------------------------------------------
# sample assembly
# ---------------------------------------------------------------------------


def _fact_groups(profile: Profile) -> dict[str, int]:
    """Stable fact-group content ids keyed by fact target, order-invariant."""
    targets = sorted({f.target.id for f in profile.facts})
    if len(targets) > MAX_FACT_GROUPS:
        raise DlgkitError(f"profile has {len(targets)} fact targets, "
                          f"max {MAX_FACT_GROUPS}")
    return {tid: CONTENT_FACT_BASE + i for i, tid in enumerate(targets)}


def _grounding_segments(
    profile: Profile, tok: BPETokenizer,
) -> tuple[list[int], list[int], list[int]]:
    """(token_ids, content_ids, position_ids) for facts then attitudes.

    Positions restart at 0 inside every segment; the emission order is
    sorted for determinism but carries no information.
    """
    groups = _fact_groups(profile)
    tokens: list[int] = []
    contents: list[int] = []
    positions: list[int] = []
    for fact in sorted(profile.facts, key=lambda f: (f.source_id, f.text)):
        ids = tok.encode(fact.text)
        tokens.extend(ids)
        contents.extend([groups[fact.target.id]] * len(ids))
        positions.extend(range(len(ids)))
    for opinion in sorted(profile.opinions, key=lambda o: o.target.id):
        ids = tok.encode(opinion.target.surface)
        tokens.extend(ids)
        contents.extend([attitude_content_id(opinion.strength)] * len(ids))
        positions.extend(range(len(ids)))
    return tokens, contents, positions


def build_sample(
    profile: Profile,
    history: list[Utterance],
    next_utterance: Utterance,
    tok: BPETokenizer,
    max_len: int = MAX_LEN,
    positions: str = "restart",
    pad: bool = True,
) -> EncodedSample:
    """Encode facts + attitudes + history + next utterance into one sample.

    ``positions`` chooses whether dialogue position indices restart at 0
    ("restart", default) or continue after the longest grounding segment
    ("continuous").  Oldest history turns are dropped first when the total
    exceeds ``max_len``; the grounding and the next utterance are never cut.
    """
    if positions not in ("restart", "continuous"):
        raise DlgkitError(f"unknown positions mode {positions!r}")
    g_tokens, g_contents, g_positions = _grounding_segments(profile, tok)

    next_ids = tok.encode(next_utterance.text)
    fixed = len(g_tokens) + len(next_ids) + 1  # +1 for the clf token
    if fixed > max_len:
        raise DlgkitError(
            f"grounding + next utterance need {fixed} tokens, budget {max_len}")

    encoded_history = [(u, tok.encode(u.text)) for u in history]
    while encoded_history and fixed + sum(len(e) for _, e in encoded_history) > max_len:
        encoded_history.pop(0)  # oldest turn goes first
    if fixed + sum(len(e) for _, e in encoded_history) > max_len:
        raise DlgkitError("sample exceeds the token budget even without history")

    dlg_start = 0 if positions == "restart" else (max(g_positions, default=-1) + 1)

    tokens = list(g_tokens)
    contents = list(g_contents)
    pos = list(g_positions)
    mask = [False] * len(g_tokens)

    cursor = dlg_start
    for utt, ids in encoded_history:
        tokens.extend(ids)
        contents.extend([speaker_content_id(utt.speaker)] * len(ids))
        pos.extend(range(cursor, cursor + len(ids)))
        mask.extend([False] * len(ids))
        cursor += len(ids)
    tokens.extend(next_ids)
    contents.extend([speaker_content_id(next_utterance.speaker)] * len(next_ids))
    pos.extend(range(cursor, cursor + len(next_ids)))
    mask.extend([True] * len(next_ids))
    cursor += len(next_ids)

    clf_index = len(tokens)
    tokens.append(tok.clf_id)
    contents.append(speaker_content_id(next_utterance.speaker))
    pos.append(cursor)
    mask.append(False)

    if pad:
        n_pad = max_len - len(tokens)
        tokens.extend([tok.pad_id] * n_pad)
        contents.extend([CONTENT_PAD] * n_pad)
        pos.extend([0] * n_pad)
        mask.extend([False] * n_pad)

    return EncodedSample(token_ids=tokens, content_ids=contents,
                         position_ids=pos, lm_mask=mask, clf_index=clf_index)


@dataclass
class CandidateSet:
    samples: list[EncodedSample]
    label: int

    def __post_init__(self):
        if len(self.samples) != 4:
            raise DlgkitError(f"candidate set needs 4 samples, got {len(self.samples)}")
        if not 0 <= self.label < 4:
            raise DlgkitError(f"label {self.label} outside [0, 4)")


def assemble_candidates(
    profile: Profile,
    history: list[Utterance],
    gold: Utterance,
    distractors: list[str],
    tok: BPETokenizer,
    rng: random.Random,
    max_len: int = MAX_LEN,
) -> CandidateSet:
    """One gold and three distractor candidates, gold position randomized."""
    if len(distractors) < 3:
        raise DlgkitError(f"need 3 distractors, got {len(distractors)}")
    if any(d.strip() == gold.text.strip() for d in distractors):
        raise DlgkitError("a distractor equals the gold utterance")
    label = rng.randrange(4)
    candidates: list[EncodedSample] = []
    others = iter(distractors[:3])
    for i in range(4):
        text = gold.text if i == label else next(others)
        cand = Utterance(speaker=gold.speaker, text=text, index=gold.index)
        sample = build_sample(profile, history, cand, tok, max_len=max_len)
        candidates.append(sample)
    cs = CandidateSet(samples=candidates, label=label)
    for s in cs.samples:
        s.label = label
    return cs


# ---------------------------------------------------------------------------
# binary sample file
# ---------------------------------------------------------------------------

_BIN_FORMAT = "dlgkit-samples-v1"
_CHANNELS = (
    ("token_ids", np.dtype("<i4")),
    ("content_ids", np.dtype("<i2")),
    ("position_ids", np.dtype("<i2")),
    ("lm_mask", np.dtype("u1")),
)


def write_samples(path: str | Path, samples: list[EncodedSample],
                  max_len: int = MAX_LEN):
    """Fixed-layout little-endian binary with a JSON sidecar header.

    Per sample, channels are stored back to back in the order token_ids
    (int32), content_ids (int16), position_ids (int16), lm_mask (uint8),
    each padded to ``max_len`` entries.  Sidecar: ``<path>.json``.
    """
    path = Path(path)
    with path.open("wb") as fh:
        for s in samples:
            if len(s.token_ids) != max_len:
                raise DlgkitError("write_samples expects padded samples")
            for name, dtype in _CHANNELS:
                arr = np.asarray(getattr(s, name), dtype=dtype)
                fh.write(arr.tobytes())
    sidecar = {
        "format": _BIN_FORMAT,
        "max_len": max_len,
        "count": len(samples),
        "channels": [{"name": n, "dtype": str(d)} for n, d in _CHANNELS],
        "clf_index": [s.clf_index for s in samples],
        "label": [s.label for s in samples],
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar))


def read_samples(path: str | Path) -> list[EncodedSample]:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    if sidecar.get("format") != _BIN_FORMAT:
        raise DlgkitError(f"unknown sample file format {sidecar.get('format')!r}")
    max_len = sidecar["max_len"]
    count = sidecar["count"]
    samples = []
    with path.open("rb") as fh:
        for i in range(count):
            values = {}
            for name, dtype in _CHANNELS:
                raw = fh.read(max_len * dtype.itemsize)
                values[name] = np.frombuffer(raw, dtype=dtype).tolist()
            samples.append(EncodedSample(
                token_ids=values["token_ids"],
                content_ids=values["content_ids"],
                position_ids=values["position_ids"],
                lm_mask=[bool(v) for v in values["lm_mask"]],
                clf_index=sidecar["clf_index"][i],
                label=sidecar["label"][i]))
    return samples
