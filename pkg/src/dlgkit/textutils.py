"""Shared tokenization helpers.

Two tokenizers live here on purpose:

* ``surface_tokens`` is the counting tokenizer used for corpus statistics.
  It keeps punctuation marks as tokens so that token totals are comparable
  across corpora.
* ``word_tokens`` is the matching tokenizer used by entity resolution and
  sentiment clause handling: lowercased, punctuation stripped, Unicode word
  boundaries.
"""

import re

_SURFACE_RE = re.compile(r"[\w']+|[^\w\s]", re.UNICODE)
_WORD_RE = re.compile(r"[\w']+", re.UNICODE)


def surface_tokens(text: str) -> list[str]:
    """Lowercased whitespace+punctuation tokens; punctuation marks count."""
    return _SURFACE_RE.findall(text.lower())


def word_tokens(text: str) -> list[str]:
    """Lowercased word tokens, punctuation dropped."""
    return [t.lower() for t in _WORD_RE.findall(text)]


def word_tokens_with_spans(text: str) -> list[tuple[str, int, int]]:
    """Like :func:`word_tokens` but with (token, char_start, char_end)."""
    return [(m.group(0).lower(), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def normalize(text: str) -> str:
    """Canonical form used for string-equality checks: lowercased word tokens."""
    return " ".join(word_tokens(text))
