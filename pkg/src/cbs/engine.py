"""Request handling: keywords -> cache -> search -> formatted reply -> cache."""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

from cbs.kb_store import InvertedIndex, KnowledgeBase, build_index
from cbs.matcher import MatchConfig, MatchResult, SearchStats, search
from cbs.reply_cache import DEFAULT_CAPACITY, DEFAULT_TTL, CacheStats, ReplyCache, make_cache_key
from cbs.text_pipeline import KeywordSet, StopwordList, keywords_from_utterance

DEFAULT_FALLBACK_TEXT = (
    "Sorry, I don't have advice on that yet. "
    "Please try rephrasing your question, for example: how do I choose a strong password?"
)

# Trace event names, in the order a request can emit them.
EV_EXTRACT = "extract"
EV_CACHE_HIT = "cache_get:hit"
EV_CACHE_MISS = "cache_get:miss"
EV_SEARCH = "search"
EV_FORMULATE = "formulate"
EV_FALLBACK = "fallback"
EV_CACHE_PUT = "cache_put"


class ReplyKind(str, enum.Enum):
    ADVICE = "advice"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class Reply:
    text: str
    kind: ReplyKind
    entry_id: str | None = None
    topic_name: str | None = None
    score: float | None = None
    related: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("reply text must be non-empty")
        present = (self.entry_id, self.topic_name, self.score)
        if self.kind is ReplyKind.ADVICE and None in present:
            raise ValueError("advice reply needs entry_id, topic_name and score")
        if self.kind is ReplyKind.FALLBACK and (present != (None, None, None) or self.related):
            raise ValueError("fallback reply carries no provenance")


@dataclass(frozen=True)
class EngineConfig:
    match: MatchConfig = field(default_factory=MatchConfig)
    cache_capacity: int = DEFAULT_CAPACITY
    cache_ttl: float = DEFAULT_TTL
    fallback_text: str = DEFAULT_FALLBACK_TEXT
    cache_enabled: bool = True

    def __post_init__(self) -> None:
        if not self.fallback_text:
            raise ValueError("fallback_text must be non-empty")


@dataclass(frozen=True)
class EngineMetrics:
    requests: int = 0
    cache_hits: int = 0
    searches: int = 0
    entries_scored: int = 0
    fallbacks: int = 0


@dataclass(frozen=True)
class Outcome:
    """Everything one request produced, for logging and tests."""

    reply: Reply
    keywords: KeywordSet
    cache_hit: bool
    events: tuple[str, ...]


def formulate_reply(matches: list[MatchResult], kb: KnowledgeBase) -> Reply:
    """Render ranked matches with the fixed reply template.

    ``== topic ==``, a blank line, the top entry's advice, then, if there is
    anything to point at, a blank line and ``Related: topic (id); ...`` made
    of up to two further matches followed by the top entry's ``see_also``.
    """
    if not matches:
        raise ValueError("formulate_reply needs at least one match; use fallback_reply")
    top = matches[0]
    entry = kb.entry(top.entry_id)

    related: list[tuple[str, str]] = []
    seen = {top.entry_id}
    refs = [(m.entry_id, m.topic_name) for m in matches[1:3]]
    refs += [(ref, kb.topic_of(ref)) for ref in entry.see_also or ()]
    for entry_id, topic_name in refs:
        if entry_id not in seen:
            seen.add(entry_id)
            related.append((entry_id, topic_name))

    text = f"== {top.topic_name} ==\n\n{entry.advice}"
    if related:
        text += "\n\nRelated: " + "; ".join(f"{topic} ({eid})" for eid, topic in related)
    return Reply(text, ReplyKind.ADVICE, top.entry_id, top.topic_name, top.score, tuple(related))


def fallback_reply(cfg: EngineConfig) -> Reply:
    return Reply(cfg.fallback_text, ReplyKind.FALLBACK)


class Engine:
    """The adviser: safe to call from many threads at once."""

    def __init__(
        self,
        kb: KnowledgeBase,
        stopwords: StopwordList | None = None,
        config: EngineConfig | None = None,
        *,
        index: InvertedIndex | None = None,
        tracer: Callable[[str], None] | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.kb = kb
        self.index = index if index is not None else build_index(kb)
        self.stopwords = stopwords if stopwords is not None else StopwordList.default()
        self.config = config or EngineConfig()
        self.cache: ReplyCache[Reply] | None = None
        if self.config.cache_enabled:
            self.cache = ReplyCache(self.config.cache_capacity, self.config.cache_ttl)
        self.tracer = tracer
        self.clock = clock
        self._lock = threading.Lock()
        self._metrics = EngineMetrics()

    def _bump(self, **deltas: int) -> None:
        with self._lock:
            current = asdict(self._metrics)
            for name, delta in deltas.items():
                current[name] += delta
            self._metrics = EngineMetrics(**current)

    def metrics(self) -> EngineMetrics:
        with self._lock:
            return self._metrics

    def cache_stats(self) -> CacheStats | None:
        return self.cache.stats() if self.cache is not None else None

    def process(self, utterance: str, now: float | None = None) -> Outcome:
        if now is None:
            now = self.clock()
        events: list[str] = []

        def emit(event: str) -> None:
            events.append(event)
            if self.tracer is not None:
                self.tracer(event)

        query = keywords_from_utterance(utterance, self.stopwords)
        emit(EV_EXTRACT)
        key = make_cache_key(query)

        if self.cache is not None:
            cached = self.cache.get(key, now)
            if cached is not None:
                emit(EV_CACHE_HIT)
                self._bump(requests=1, cache_hits=1)
                return Outcome(cached, query, True, tuple(events))
            emit(EV_CACHE_MISS)

        stats = SearchStats()
        matches = search(self.index, self.kb, query, self.config.match, stats=stats)
        emit(EV_SEARCH)
        if matches:
            reply = formulate_reply(matches, self.kb)
            emit(EV_FORMULATE)
        else:
            reply = fallback_reply(self.config)
            emit(EV_FALLBACK)

        if self.cache is not None and reply.kind is ReplyKind.ADVICE and key:
            self.cache.put(key, reply, now)
            emit(EV_CACHE_PUT)

        self._bump(
            requests=1,
            searches=1,
            entries_scored=stats.entries_scored,
            fallbacks=int(reply.kind is ReplyKind.FALLBACK),
        )
        return Outcome(reply, query, False, tuple(events))

    def handle_request(self, utterance: str, now: float | None = None) -> Reply:
        return self.process(utterance, now).reply

    def topic_names(self) -> list[str]:
        return [t.name for t in self.kb.topics]
