"""Random knowledge bases, utterances and brute-force oracles for the tests."""

from __future__ import annotations

import random
import string

from cbs.kb_store import AdviceEntry, KnowledgeBase, Topic
from cbs.text_pipeline import StopwordList

STOPS = StopwordList.default()
EXTRA_WORDS = ["café", "пароль", "kennwort", "2fa", "wifi", "ñandú", "密码"]


def vocabulary(rng: random.Random, size: int) -> list[str]:
    words: set[str] = set(rng.sample(EXTRA_WORDS, k=min(len(EXTRA_WORDS), max(1, size // 10))))
    while len(words) < size:
        w = "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(2, 7)))
        if w not in STOPS:
            words.add(w)
    return sorted(words)


def random_kb(
    rng: random.Random,
    n_entries: int,
    *,
    n_topics: int | None = None,
    vocab_size: int | None = None,
    see_also_prob: float = 0.2,
    max_keywords: int = 4,
) -> KnowledgeBase:
    n_topics = n_topics or max(1, min(n_entries, rng.randint(1, 8)))
    vocab = vocabulary(rng, vocab_size or max(8, n_entries // 2))
    ids = [f"e{i}" for i in range(n_entries)]
    rng.shuffle(ids)
    sizes = [1] * n_topics
    for _ in range(n_entries - n_topics):
        sizes[rng.randrange(n_topics)] += 1
    topics, cursor = [], 0
    for t, size in enumerate(sizes):
        entries = []
        for entry_id in ids[cursor : cursor + size]:
            keywords = tuple(rng.sample(vocab, k=rng.randint(1, min(max_keywords, len(vocab)))))
            see_also = None
            if rng.random() < see_also_prob:
                see_also = tuple(rng.sample(ids, k=rng.randint(0, min(2, len(ids)))))
            entries.append(AdviceEntry(entry_id, keywords, f"Advice text for {entry_id}.", see_also))
        cursor += size
        topics.append(Topic(f"topic {t}", tuple(entries)))
    return KnowledgeBase("test", tuple(topics))


def kb_vocab(kb: KnowledgeBase) -> list[str]:
    return sorted({w for _, e in kb.iter_entries() for w in e.keywords})


def random_utterance(rng: random.Random, vocab: list[str]) -> str:
    """Keywords mixed with stopwords, noise, punctuation and random casing."""
    parts = []
    for _ in range(rng.randint(0, 6)):
        roll = rng.random()
        if roll < 0.5 and vocab:
            parts.append(rng.choice(vocab))
        elif roll < 0.8:
            parts.append(rng.choice(sorted(STOPS.words)))
        else:
            parts.append("".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(1, 8))))
    words = [w.upper() if rng.random() < 0.2 else w for w in parts]
    seps = [" ", "  ", ", ", "? ", "-", "\t", " ... "]
    text = ""
    for w in words:
        text += w + rng.choice(seps)
    return rng.choice(["", " ", "\n"]) + text


def brute_force_search(kb: KnowledgeBase, query_words, min_score: float, max_results: int):
    """Score every entry; (entry_id, topic_name, score) best first."""
    q = set(query_words)
    scored = []
    for topic in kb.topics:
        for entry in topic.entries:
            hits = len([w for w in entry.keywords if w in q])
            score = hits / len(entry.keywords)
            if score >= min_score:
                scored.append((entry.id, topic.name, score))
    scored.sort(key=lambda r: (-r[2], r[0]))
    return scored[:max_results]


class ReferenceLRU:
    """Deliberately naive list-based LRU used as an oracle."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.order: list[str] = []
        self.values: dict[str, object] = {}
        self.hits = self.misses = self.evictions = 0

    def get(self, key: str):
        if key not in self.values:
            self.misses += 1
            return None
        self.hits += 1
        self.order.remove(key)
        self.order.append(key)
        return self.values[key]

    def put(self, key: str, value: object) -> None:
        if key in self.values:
            self.order.remove(key)
        elif len(self.order) == self.capacity:
            victim = self.order.pop(0)
            del self.values[victim]
            self.evictions += 1
        self.order.append(key)
        self.values[key] = value


# -- single-invariant mutations: name -> (mutated kb, expected error path) ---

from dataclasses import replace  # noqa: E402


def strip_see_also(kb: KnowledgeBase) -> KnowledgeBase:
    return replace(
        kb,
        topics=tuple(
            replace(t, entries=tuple(replace(e, see_also=None) for e in t.entries)) for t in kb.topics
        ),
    )


def _with_entry(kb: KnowledgeBase, ti: int, ei: int, **changes) -> KnowledgeBase:
    topics = list(kb.topics)
    entries = list(topics[ti].entries)
    entries[ei] = replace(entries[ei], **changes)
    topics[ti] = replace(topics[ti], entries=tuple(entries))
    return replace(kb, topics=tuple(topics))


def _with_topic(kb: KnowledgeBase, ti: int, **changes) -> KnowledgeBase:
    topics = list(kb.topics)
    topics[ti] = replace(topics[ti], **changes)
    return replace(kb, topics=tuple(topics))


def mutations(kb: KnowledgeBase, rng: random.Random) -> dict[str, tuple[KnowledgeBase, str]]:
    """Each value violates exactly one error-level invariant of ``kb``."""
    plain = strip_see_also(kb)
    n = len(kb.topics)
    ti = rng.randrange(n)
    ei = rng.randrange(len(kb.topics[ti].entries))
    epath = f"$.topics[{ti}].entries[{ei}]"
    entry = kb.topics[ti].entries[ei]
    last_t = n - 1
    last_e = len(kb.topics[last_t].entries) - 1
    first_id = kb.topics[0].entries[0].id

    out = {
        "no topics": (replace(kb, topics=()), "$.topics"),
        "blank topic name": (_with_topic(kb, ti, name="  \t"), f"$.topics[{ti}].name"),
        "topic without entries": (_with_topic(plain, ti, entries=()), f"$.topics[{ti}].entries"),
        "invalid entry id": (_with_entry(plain, ti, ei, id="bad id"), f"{epath}.id"),
        "empty keywords": (_with_entry(kb, ti, ei, keywords=()), f"{epath}.keywords"),
        "duplicate keyword": (
            _with_entry(kb, ti, ei, keywords=entry.keywords + entry.keywords[:1]),
            f"{epath}.keywords[{len(entry.keywords)}]",
        ),
        "empty advice": (_with_entry(kb, ti, ei, advice="   "), f"{epath}.advice"),
        "dangling see_also": (
            _with_entry(kb, ti, ei, see_also=(entry.see_also or ()) + ("no-such-entry",)),
            f"{epath}.see_also[{len(entry.see_also or ())}]",
        ),
    }
    if kb.entry_count > 1:
        out["duplicate entry id"] = (
            _with_entry(plain, last_t, last_e, id=first_id),
            f"$.topics[{last_t}].entries[{last_e}].id",
        )
    if n > 1:
        out["duplicate topic name"] = (
            _with_topic(kb, last_t, name=kb.topics[0].name.upper()),
            f"$.topics[{last_t}].name",
        )
    return out
