"""In-process LRU reply cache with a time-to-live.

Keys are the canonical keyword string of a query, so two requests that
reduce to the same keyword set share one cached reply.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Generic, TypeVar

from cbs.text_pipeline import KeywordSet

DEFAULT_CAPACITY = 1024
DEFAULT_TTL = 24 * 60 * 60.0

V = TypeVar("V")


@dataclass(frozen=True)
class CacheKey:
    canonical: str

    def __bool__(self) -> bool:
        return bool(self.canonical)


def make_cache_key(query: KeywordSet) -> CacheKey:
    # Keywords are single tokens and never contain spaces, so the join is injective.
    return CacheKey(" ".join(query.keywords))


@dataclass
class CacheEntry(Generic[V]):
    key: CacheKey
    reply: V
    inserted_at: float
    last_hit_at: float
    hit_count: int = 0


@dataclass(frozen=True)
class CacheStats:
    hits: int
    misses: int
    evictions: int
    size: int
    capacity: int


class ReplyCache(Generic[V]):
    """Thread-safe LRU mapping ``CacheKey -> reply``.

    ``now`` is a timestamp in seconds supplied by the caller. An entry is
    live while ``now - inserted_at <= ttl``; expired entries are dropped
    when touched by :meth:`get` and are not counted as evictions.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY, ttl: float = DEFAULT_TTL) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if ttl < 0:
            raise ValueError("ttl must be >= 0")
        self.capacity = capacity
        self.ttl = ttl
        self._entries: OrderedDict[CacheKey, CacheEntry[V]] = OrderedDict()
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0
        self._evictions = 0

    def get(self, key: CacheKey, now: float) -> V | None:
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None and now - entry.inserted_at > self.ttl:
                del self._entries[key]
                entry = None
            if entry is None:
                self._misses += 1
                return None
            entry.hit_count += 1
            entry.last_hit_at = max(now, entry.inserted_at)
            self._entries.move_to_end(key)
            self._hits += 1
            return entry.reply

    def put(self, key: CacheKey, reply: V, now: float) -> None:
        if not key:
            raise ValueError("refusing to cache under an empty key")
        with self._lock:
            if key in self._entries:
                del self._entries[key]
            elif len(self._entries) >= self.capacity:
                self._entries.popitem(last=False)
                self._evictions += 1
            self._entries[key] = CacheEntry(key, reply, now, now)

    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(self._hits, self._misses, self._evictions, len(self._entries), self.capacity)

    def peek(self, key: CacheKey) -> CacheEntry[V] | None:
        """Entry for ``key`` without touching recency or counters."""
        with self._lock:
            return self._entries.get(key)

    def keys(self) -> list[CacheKey]:
        """Keys from least to most recently used."""
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)
