"""Keyword coverage scoring and ranked search over the knowledge base."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Collection

from cbs.kb_store import InvertedIndex, KnowledgeBase, lookup_keyword
from cbs.text_pipeline import KeywordSet

DEFAULT_MIN_SCORE = 0.34
DEFAULT_MAX_RESULTS = 3


@dataclass(frozen=True)
class MatchConfig:
    min_score: float = DEFAULT_MIN_SCORE
    max_results: int = DEFAULT_MAX_RESULTS

    def __post_init__(self) -> None:
        if not 0.0 < self.min_score <= 1.0:
            raise ValueError(f"min_score must be in (0, 1], got {self.min_score}")
        if self.max_results < 1:
            raise ValueError(f"max_results must be >= 1, got {self.max_results}")


@dataclass(frozen=True)
class MatchResult:
    entry_id: str
    topic_name: str
    score: float


@dataclass
class SearchStats:
    """Work counter filled in by :func:`search`."""

    entries_scored: int = 0


def score_entry(entry_keywords: Collection[str], query: Collection[str]) -> float:
    """Fraction of the entry's trigger keywords present in the query."""
    if not entry_keywords:
        return 0.0
    query_set = query if isinstance(query, (set, frozenset)) else set(query)
    hits = sum(1 for word in entry_keywords if word in query_set)
    return hits / len(entry_keywords)


Scorer = Callable[[Collection[str], Collection[str]], float]


def search(
    index: InvertedIndex,
    kb: KnowledgeBase,
    query: KeywordSet,
    cfg: MatchConfig,
    *,
    scorer: Scorer = score_entry,
    stats: SearchStats | None = None,
) -> list[MatchResult]:
    """Entries scoring at least ``cfg.min_score``, best first.

    Ordered by score descending then entry id ascending, truncated to
    ``cfg.max_results``. Only entries sharing a keyword with the query are
    scored; any ``scorer`` must therefore return 0.0 for disjoint sets.
    """
    hits: Counter[str] = Counter()
    for word in query.keywords:
        hits.update(lookup_keyword(index, word))
    if stats is not None:
        stats.entries_scored += len(hits)

    query_set = frozenset(query.keywords)
    results = []
    for entry_id in hits:
        topic_name, entry = kb.entry_map[entry_id]
        score = scorer(entry.keywords, query_set)
        if score >= cfg.min_score:
            results.append(MatchResult(entry_id, topic_name, score))
    results.sort(key=lambda m: (-m.score, m.entry_id))
    return results[: cfg.max_results]
