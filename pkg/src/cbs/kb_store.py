"""Knowledge-base document: parsing, validation, serialization and indexing.

The document is a two-level JSON tree::

    {"version": "1",
     "topics": [{"name": "malware",
                 "entries": [{"id": "m1", "keywords": ["virus"],
                              "advice": "...", "see_also": ["m2"]}]}]}

Parsing is strict: unknown fields, duplicate object keys, a byte-order mark
and non-UTF-8 input are all rejected.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Any, Iterator, Mapping

from cbs.text_pipeline import is_canonical_token, normalize_text, tokenize

ERROR = "error"
WARNING = "warning"

_ID_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.:-]*\Z")
_PATH_PART_RE = re.compile(r"\.([^.\[]+)|\[(\d+)\]")


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.severity}: {self.message}"


def _path_key(path: str) -> tuple:
    # "$.topics[10]" must sort after "$.topics[9]".
    key = []
    for name, index in _PATH_PART_RE.findall(path):
        key.append((1, int(index), "") if index else (0, 0, name))
    return tuple(key)


def sort_diagnostics(diags: list[Diagnostic]) -> list[Diagnostic]:
    return sorted(diags, key=lambda d: _path_key(d.path))


class KBError(Exception):
    """The document or knowledge base is invalid; see ``diagnostics``."""

    def __init__(self, diagnostics: list[Diagnostic], message: str | None = None) -> None:
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.severity == ERROR]
        if message is None:
            message = "; ".join(str(d) for d in errors[:3]) or "invalid knowledge base"
            if len(errors) > 3:
                message += f" (+{len(errors) - 3} more)"
        super().__init__(message)


class KBSyntaxError(KBError):
    """Malformed document; ``line`` and ``column`` are 1-based."""

    def __init__(self, message: str, line: int, column: int) -> None:
        self.line = line
        self.column = column
        diag = Diagnostic(ERROR, "$", f"line {line} column {column}: {message}")
        super().__init__([diag], f"syntax error at line {line} column {column}: {message}")


# -- strict JSON reading (shared with the application config loader) --------


class _Object(dict):
    """dict that remembers keys repeated in the source object."""

    duplicates: tuple[str, ...] = ()


def _object_pairs(pairs: list[tuple[str, Any]]) -> _Object:
    obj = _Object()
    dups = []
    for key, value in pairs:
        if key in obj:
            dups.append(key)
        obj[key] = value
    obj.duplicates = tuple(dups)
    return obj


class NonFinite(float):
    """Placeholder for NaN/Infinity, which RFC 8259 does not allow."""


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def load_json_document(document: bytes) -> Any:
    """Decode UTF-8 JSON bytes, raising :class:`KBSyntaxError` on any defect."""
    if document.startswith(b"\xef\xbb\xbf"):
        raise KBSyntaxError("byte-order mark not allowed", 1, 1)
    try:
        text = document.decode("utf-8")
    except UnicodeDecodeError as exc:
        prefix = document[: exc.start].decode("utf-8")
        line, col = _line_col(prefix, len(prefix))
        raise KBSyntaxError("invalid UTF-8", line, col) from None
    try:
        return json.loads(
            text,
            object_pairs_hook=_object_pairs,
            parse_constant=lambda _name: NonFinite("nan"),
        )
    except json.JSONDecodeError as exc:
        raise KBSyntaxError(exc.msg, exc.lineno, exc.colno) from None


class SchemaReader:
    """Collects schema diagnostics while walking a decoded JSON document."""

    def __init__(self) -> None:
        self.diagnostics: list[Diagnostic] = []

    def error(self, path: str, message: str) -> None:
        self.diagnostics.append(Diagnostic(ERROR, path, message))

    def obj(self, value: Any, path: str, required: set[str], optional: set[str] = frozenset()) -> dict | None:
        if not isinstance(value, dict):
            self.error(path, f"expected object, got {_kind(value)}")
            return None
        for key in getattr(value, "duplicates", ()):
            self.error(path, f"duplicate key {key!r}")
        for key in value:
            if key not in required and key not in optional:
                self.error(f"{path}.{key}", f"unknown field {key!r}")
        ok = True
        for key in sorted(required):
            if key not in value:
                self.error(path, f"missing field {key!r}")
                ok = False
        return value if ok else None

    def typed(self, value: Any, path: str, expected: type | tuple[type, ...], what: str) -> Any:
        if isinstance(value, NonFinite) or not isinstance(value, expected) or (
            isinstance(value, bool) and bool not in _as_tuple(expected)
        ):
            self.error(path, f"expected {what}, got {_kind(value)}")
            return None
        return value

    def string_list(self, value: Any, path: str) -> tuple[str, ...] | None:
        items = self.typed(value, path, list, "array")
        if items is None:
            return None
        out = []
        for k, item in enumerate(items):
            s = self.typed(item, f"{path}[{k}]", str, "string")
            if s is None:
                return None
            out.append(s)
        return tuple(out)


def _as_tuple(t: type | tuple[type, ...]) -> tuple[type, ...]:
    return t if isinstance(t, tuple) else (t,)


def _kind(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, NonFinite):
        return "non-finite number"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    return "object"


# -- domain types ------------------------------------------------------------


@dataclass(frozen=True)
class AdviceEntry:
    id: str
    keywords: tuple[str, ...]
    advice: str
    see_also: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Topic:
    name: str
    entries: tuple[AdviceEntry, ...]


@dataclass(frozen=True)
class KnowledgeBase:
    version: str
    topics: tuple[Topic, ...]

    def iter_entries(self) -> Iterator[tuple[Topic, AdviceEntry]]:
        for topic in self.topics:
            for entry in topic.entries:
                yield topic, entry

    @property
    def entry_count(self) -> int:
        return sum(len(t.entries) for t in self.topics)

    @cached_property
    def entry_map(self) -> Mapping[str, tuple[str, AdviceEntry]]:
        """entry id -> (topic name, entry); the first occurrence wins."""
        out: dict[str, tuple[str, AdviceEntry]] = {}
        for topic, entry in self.iter_entries():
            out.setdefault(entry.id, (topic.name, entry))
        return MappingProxyType(out)

    def entry(self, entry_id: str) -> AdviceEntry:
        return self.entry_map[entry_id][1]

    def topic_of(self, entry_id: str) -> str:
        return self.entry_map[entry_id][0]


# -- parsing -----------------------------------------------------------------


def read_kb(document: bytes) -> KnowledgeBase:
    """Decode and type-check a document without checking KB invariants."""
    data = load_json_document(document)
    reader = SchemaReader()
    kb = _read_root(reader, data)
    if reader.diagnostics:
        raise KBError(sort_diagnostics(reader.diagnostics))
    assert kb is not None
    return kb


def _read_root(reader: SchemaReader, data: Any) -> KnowledgeBase | None:
    root = reader.obj(data, "$", {"version", "topics"})
    if root is None:
        return None
    version = reader.typed(root["version"], "$.version", str, "string")
    raw_topics = reader.typed(root["topics"], "$.topics", list, "array")
    topics = []
    for i, raw in enumerate(raw_topics or ()):
        topics.append(_read_topic(reader, raw, f"$.topics[{i}]"))
    if version is None or raw_topics is None or None in topics:
        return None
    return KnowledgeBase(version, tuple(topics))


def _read_topic(reader: SchemaReader, raw: Any, path: str) -> Topic | None:
    if isinstance(raw, dict) and "topics" in raw:
        reader.error(f"{path}.topics", "nested topics are not supported")
        raw = {k: v for k, v in raw.items() if k != "topics"}
    obj = reader.obj(raw, path, {"name", "entries"})
    if obj is None:
        return None
    name = reader.typed(obj["name"], f"{path}.name", str, "string")
    raw_entries = reader.typed(obj["entries"], f"{path}.entries", list, "array")
    entries = [
        _read_entry(reader, e, f"{path}.entries[{j}]") for j, e in enumerate(raw_entries or ())
    ]
    if name is None or raw_entries is None or None in entries:
        return None
    return Topic(name, tuple(entries))


def _read_entry(reader: SchemaReader, raw: Any, path: str) -> AdviceEntry | None:
    obj = reader.obj(raw, path, {"id", "keywords", "advice"}, {"see_also"})
    if obj is None:
        return None
    entry_id = reader.typed(obj["id"], f"{path}.id", str, "string")
    keywords = reader.string_list(obj["keywords"], f"{path}.keywords")
    advice = reader.typed(obj["advice"], f"{path}.advice", str, "string")
    see_also = None
    if "see_also" in obj:
        see_also = reader.string_list(obj["see_also"], f"{path}.see_also")
        if see_also is None:
            return None
    if entry_id is None or keywords is None or advice is None:
        return None
    return AdviceEntry(entry_id, keywords, advice, see_also)


def parse_kb(document: bytes) -> KnowledgeBase:
    """Parse and fully validate a KB document.

    Raises :class:`KBSyntaxError` for malformed JSON and :class:`KBError`
    (carrying every diagnostic, warnings included) for schema or invariant
    errors. Warnings alone do not fail parsing.
    """
    kb = read_kb(document)
    diags = validate_kb(kb)
    if any(d.severity == ERROR for d in diags):
        raise KBError(diags)
    return kb


def kb_to_dict(kb: KnowledgeBase) -> dict:
    topics = []
    for topic in kb.topics:
        entries = []
        for e in topic.entries:
            item: dict[str, Any] = {"id": e.id, "keywords": list(e.keywords), "advice": e.advice}
            if e.see_also is not None:
                item["see_also"] = list(e.see_also)
            entries.append(item)
        topics.append({"name": topic.name, "entries": entries})
    return {"version": kb.version, "topics": topics}


def serialize_kb(kb: KnowledgeBase) -> bytes:
    return (json.dumps(kb_to_dict(kb), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


# -- validation --------------------------------------------------------------


def validate_kb(kb: KnowledgeBase) -> list[Diagnostic]:
    """Every invariant violation as a diagnostic, ordered by document path."""
    out: list[Diagnostic] = []

    def err(path: str, msg: str) -> None:
        out.append(Diagnostic(ERROR, path, msg))

    def warn(path: str, msg: str) -> None:
        out.append(Diagnostic(WARNING, path, msg))

    if not kb.topics:
        err("$.topics", "knowledge base has no topics")

    all_ids = {e.id for _, e in kb.iter_entries()}
    topic_names: dict[str, str] = {}
    entry_ids: dict[str, str] = {}
    for i, topic in enumerate(kb.topics):
        tpath = f"$.topics[{i}]"
        folded = normalize_text(topic.name)
        if not folded:
            err(f"{tpath}.name", "topic name is empty")
        elif folded in topic_names:
            err(f"{tpath}.name", f"duplicate topic name {topic.name!r} (first at {topic_names[folded]})")
        else:
            topic_names[folded] = f"{tpath}.name"
        if not topic.entries:
            err(f"{tpath}.entries", "topic has no entries")

        for j, entry in enumerate(topic.entries):
            epath = f"{tpath}.entries[{j}]"
            if not _ID_RE.match(entry.id):
                err(f"{epath}.id", f"invalid entry id {entry.id!r}")
            elif entry.id in entry_ids:
                err(f"{epath}.id", f"duplicate entry id {entry.id!r} (first at {entry_ids[entry.id]})")
            else:
                entry_ids[entry.id] = f"{epath}.id"

            if not entry.keywords:
                err(f"{epath}.keywords", "entry has no keywords")
            seen: set[str] = set()
            for k, word in enumerate(entry.keywords):
                kpath = f"{epath}.keywords[{k}]"
                if word in seen:
                    err(kpath, f"duplicate keyword {word!r}")
                    continue
                seen.add(word)
                if not is_canonical_token(word):
                    hint = " ".join(tokenize(normalize_text(word)))
                    warn(kpath, f"keyword not in canonical form: {word!r} (canonical: {hint!r})")
                elif len(word) == 1:
                    warn(kpath, f"single-character keyword {word!r} can never match")

            if not entry.advice.strip():
                err(f"{epath}.advice", "advice is empty")

            for k, ref in enumerate(entry.see_also or ()):
                if ref not in all_ids:
                    err(f"{epath}.see_also[{k}]", f"see_also {ref!r} does not resolve to an entry")
    return sort_diagnostics(out)


# -- inverted index ----------------------------------------------------------


@dataclass(frozen=True)
class InvertedIndex:
    postings: Mapping[str, frozenset[str]]
    entry_count: int


def build_index(kb: KnowledgeBase) -> InvertedIndex:
    diags = validate_kb(kb)
    if any(d.severity == ERROR for d in diags):
        raise KBError(diags)
    postings: dict[str, set[str]] = defaultdict(set)
    for _, entry in kb.iter_entries():
        for word in entry.keywords:
            postings[word].add(entry.id)
    frozen = {word: frozenset(ids) for word, ids in postings.items()}
    return InvertedIndex(MappingProxyType(frozen), kb.entry_count)


def lookup_keyword(index: InvertedIndex, keyword: str) -> frozenset[str]:
    return index.postings.get(keyword, frozenset())
