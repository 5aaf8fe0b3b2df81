"""Utterance normalization, tokenization and keyword extraction."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

# Same character class as str.isalnum(): letters and numerics of any script.
_TOKEN_RE = re.compile(r"[^\W_]+")


def normalize_text(text: str) -> str:
    """Lowercase, NFC-compose and collapse whitespace runs to single spaces."""
    out = " ".join(unicodedata.normalize("NFC", text.lower()).split())
    # lower() can yield decomposed sequences that recompose into characters
    # with their own lowercase mapping; iterate to a fixpoint.
    while True:
        again = " ".join(unicodedata.normalize("NFC", out.lower()).split())
        if again == out:
            return out
        out = again


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def is_canonical_token(word: str) -> bool:
    """True when ``word`` is exactly one token that normalization leaves alone."""
    return bool(word) and normalize_text(word) == word and tokenize(word) == [word]


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        bad = sorted(w for w in self.words if not is_canonical_token(w))
        if bad:
            raise ValueError(f"stopwords not in canonical form: {bad[:5]}")

    def __contains__(self, word: object) -> bool:
        return word in self.words

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "StopwordList":
        words = set()
        for line in lines:
            line = line.split("#", 1)[0].strip()
            if line:
                words.add(line)
        return cls(frozenset(words))

    @classmethod
    def from_file(cls, path: str | Path) -> "StopwordList":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    @classmethod
    def default(cls) -> "StopwordList":
        text = resources.files("cbs.data").joinpath("stopwords_en.txt").read_text("utf-8")
        return cls.from_lines(text.splitlines())


@dataclass(frozen=True)
class KeywordSet:
    """Sorted, de-duplicated canonical keywords of one utterance.

    Equality looks at the keywords only; ``source_text`` is kept for logging.
    """

    keywords: tuple[str, ...]
    source_text: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.keywords)

    def __iter__(self):
        return iter(self.keywords)

    def __bool__(self) -> bool:
        return bool(self.keywords)


def extract_keywords(tokens: Iterable[str], stops: StopwordList, source_text: str = "") -> KeywordSet:
    kept = {t for t in tokens if len(t) > 1 and t not in stops}
    return KeywordSet(tuple(sorted(kept)), source_text)


def keywords_from_utterance(utterance: str, stops: StopwordList) -> KeywordSet:
    return extract_keywords(tokenize(normalize_text(utterance)), stops, source_text=utterance)
