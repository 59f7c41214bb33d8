"""Tokenization, n-gram counting, and subgraph linearization.

The default tokenizer NFC-normalizes, lowercases, and maps every character
that is not a letter, digit, or apostrophe to a space before splitting.
Both normalization steps can be switched off for a strict mode.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .core import Subgraph
from .errors import InvalidN

TokenSeq = list[str]
TokenSet = set[str]

DEFAULT_SEPARATOR = "</s>"


@dataclass(frozen=True)
class TokenizeConfig:
    fold_case: bool = True
    strip_punct: bool = True


DEFAULT_CONFIG = TokenizeConfig()


def tokenize(text: str, config: TokenizeConfig = DEFAULT_CONFIG) -> TokenSeq:
    """Split a string into tokens; empty input yields an empty sequence."""
    text = unicodedata.normalize("NFC", text)
    if config.fold_case:
        text = text.lower()
    if config.strip_punct:
        text = "".join(
            ch if ch.isalnum() or ch == "'" else " " for ch in text
        )
    return text.split()


def token_set(seq: TokenSeq) -> TokenSet:
    return set(seq)


@dataclass(frozen=True)
class NGramBag:
    """Multiset of the contiguous n-token windows of one sequence."""

    n: int
    counts: Mapping[tuple[str, ...], int]
    total: int

    @property
    def unique(self) -> int:
        return len(self.counts)


def ngrams(seq: TokenSeq, n: int) -> NGramBag:
    """All length-n windows with multiplicities; total = max(0, len - n + 1)."""
    if n < 1:
        raise InvalidN(f"n must be >= 1, got {n}")
    counts = Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))
    return NGramBag(n=n, counts=counts, total=max(0, len(seq) - n + 1))


def linearize(subgraph: Subgraph, separator: str = DEFAULT_SEPARATOR) -> str:
    """Render triplets as "head relation tail" joined by the separator token."""
    joiner = f" {separator} "
    return joiner.join(f"{t.head} {t.relation} {t.tail}" for t in subgraph.triplets)
