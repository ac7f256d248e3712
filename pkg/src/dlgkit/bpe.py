"""Byte-level byte pair encoding with reserved special tokens.

Token id layout: special tokens first (pad, clf, delexicalisation
placeholders), then the 256 byte tokens, then learned merges.  Special
tokens are recognized in text by their literal surface (e.g. ``<movie>``)
and never participate in merges, so ``decode(encode(s)) == s`` holds for
any text.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from pathlib import Path

PAD = "<pad>"
CLF = "<clf>"

DELEX_PLACEHOLDERS = (
    "<movie>", "<actor>", "<director>", "<writer>", "<budget>",
    "<certificate>", "<genre>", "<country>", "<release_year>", "<person>",
    "<entity>",
)

SPECIAL_TOKENS = (PAD, CLF) + DELEX_PLACEHOLDERS

_SPECIAL_RE = re.compile("(" + "|".join(re.escape(t) for t in SPECIAL_TOKENS) + ")")


class BPETokenizer:
    """Trainable byte-level BPE tokenizer."""

    def __init__(self, merges: list[tuple[int, int]] | None = None):
        self.n_special = len(SPECIAL_TOKENS)
        self.byte_offset = self.n_special
        self.merges: dict[tuple[int, int], int] = {}
        for pair in merges or []:
            self.merges[tuple(pair)] = self.byte_offset + 256 + len(self.merges)

    # -- vocabulary ---------------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return self.byte_offset + 256 + len(self.merges)

    @property
    def pad_id(self) -> int:
        return SPECIAL_TOKENS.index(PAD)

    @property
    def clf_id(self) -> int:
        return SPECIAL_TOKENS.index(CLF)

    def special_id(self, token: str) -> int:
        return SPECIAL_TOKENS.index(token)

    @property
    def placeholder_ids(self) -> dict[str, int]:
        return {t: SPECIAL_TOKENS.index(t) for t in DELEX_PLACEHOLDERS}

    # -- training -----------------------------------------------------------

    @staticmethod
    def _pair_counts(ids: list[int]) -> Counter:
        return Counter(zip(ids, ids[1:]))

    @staticmethod
    def _merge(ids: list[int], pair: tuple[int, int], new_id: int) -> list[int]:
        out = []
        i = 0
        while i < len(ids):
            if i + 1 < len(ids) and (ids[i], ids[i + 1]) == pair:
                out.append(new_id)
                i += 2
            else:
                out.append(ids[i])
                i += 1
        return out

    def train(self, text: str, num_merges: int):
        ids = [b + self.byte_offset for b in text.encode("utf-8")]
        self.merges = {}
        for _ in range(num_merges):
            counts = self._pair_counts(ids)
            if not counts:
                break
            top = max(counts.items(), key=lambda kv: (kv[1], -kv[0][0], -kv[0][1]))[0]
            if counts[top] < 2:
                break
            new_id = self.byte_offset + 256 + len(self.merges)
            self.merges[top] = new_id
            ids = self._merge(ids, top, new_id)

    # -- encoding -----------------------------------------------------------

    def _encode_plain(self, text: str) -> list[int]:
        ids = [b + self.byte_offset for b in text.encode("utf-8")]
        while len(ids) >= 2:
            counts = self._pair_counts(ids)
            pair = min(counts, key=lambda p: self.merges.get(p, float("inf")))
            if pair not in self.merges:
                break
            ids = self._merge(ids, pair, self.merges[pair])
        return ids

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for part in _SPECIAL_RE.split(text):
            if not part:
                continue
            if part in SPECIAL_TOKENS:
                ids.append(SPECIAL_TOKENS.index(part))
            else:
                ids.extend(self._encode_plain(part))
        return ids

    def decode(self, ids: list[int]) -> str:
        vocab: dict[int, bytes] = {b + self.byte_offset: bytes([b]) for b in range(256)}
        for pair, new_id in self.merges.items():
            vocab[new_id] = _expand(pair[0], vocab, self.merges, self.byte_offset) + \
                _expand(pair[1], vocab, self.merges, self.byte_offset)
        out: list[str] = []
        buf = b""
        for i in ids:
            if i < self.n_special:
                if buf:
                    out.append(buf.decode("utf-8", errors="replace"))
                    buf = b""
                out.append(SPECIAL_TOKENS[i])
            else:
                buf += vocab[i]
        if buf:
            out.append(buf.decode("utf-8", errors="replace"))
        return "".join(out)

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path):
        doc = {
            "format": "dlgkit-bpe-v1",
            "special_tokens": list(SPECIAL_TOKENS),
            "merges": [list(pair) for pair in self.merges],
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path: str | Path) -> "BPETokenizer":
        doc = json.loads(Path(path).read_text())
        tok = cls()
        for pair in doc["merges"]:
            tok.merges[tuple(pair)] = tok.byte_offset + 256 + len(tok.merges)
        return tok


def _expand(token_id: int, vocab: dict[int, bytes],
            merges: dict[tuple[int, int], int], byte_offset: int) -> bytes:
    if token_id in vocab:
        return vocab[token_id]
    for pair, nid in merges.items():
        if nid == token_id:
            return (_expand(pair[0], vocab, merges, byte_offset)
                    + _expand(pair[1], vocab, merges, byte_offset))
    raise KeyError(token_id)
