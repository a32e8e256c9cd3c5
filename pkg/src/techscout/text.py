"""Shared tokenization for embedding and topic extraction."""

from __future__ import annotations

import re
from typing import FrozenSet, Iterable

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Small general-purpose English stopword list; callers may substitute their own.
DEFAULT_STOPWORDS: FrozenSet[str] = frozenset(
    """
    a about above after again all also an and any are as at be because been
    before being below between both but by can did do does down during each
    few for from further had has have having here how if in into is it its
    just more most no nor not of off on once only or other our out over own
    same so some such than that the their them then there these they this
    those through to too under until up very was we were what when where
    which while who why will with you your
    """.split()
)


def tokenize(text: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop short tokens and stopwords."""
    stop = DEFAULT_STOPWORDS if stopwords is None else frozenset(stopwords)
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2 and t not in stop]
