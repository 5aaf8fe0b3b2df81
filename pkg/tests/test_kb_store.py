import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbs.kb_store import (
    ERROR,
    WARNING,
    AdviceEntry,
    KBError,
    KBSyntaxError,
    KnowledgeBase,
    Topic,
    build_index,
    lookup_keyword,
    parse_kb,
    read_kb,
    serialize_kb,
    validate_kb,
)
from kbgen import mutations, random_kb

MINIMAL = {
    "version": "1",
    "topics": [
        {
            "name": "malware",
            "entries": [{"id": "m1", "keywords": ["virus"], "advice": "Install and update antivirus software."}],
        }
    ],
}


def doc(obj) -> bytes:
    return json.dumps(obj).encode("utf-8")


def test_parse_minimal():
    kb = parse_kb(doc(MINIMAL))
    assert kb == KnowledgeBase(
        "1", (Topic("malware", (AdviceEntry("m1", ("virus",), "Install and update antivirus software."),)),)
    )
    assert kb.entry_count == 1


def test_duplicate_id_across_topics():
    data = json.loads(json.dumps(MINIMAL))
    data["topics"].append(
        {"name": "passwords", "entries": [{"id": "m1", "keywords": ["password"], "advice": "x"}]}
    )
    with pytest.raises(KBError) as info:
        parse_kb(doc(data))
    errors = [d for d in info.value.diagnostics if d.severity == ERROR]
    assert len(errors) == 1
    assert errors[0].path == "$.topics[1].entries[0].id"
    assert "duplicate entry id" in errors[0].message


def test_fixture_roundtrip(fixture_bytes):
    kb = parse_kb(fixture_bytes)
    assert [t.name for t in kb.topics] == ["malware", "recommended practice", "strong passwords"]
    assert kb.entry_count == 12
    out = serialize_kb(kb)
    assert parse_kb(out) == kb
    assert serialize_kb(parse_kb(out)) == out


@pytest.mark.parametrize(
    "raw, line, column",
    [
        (b'{"version": "1",\n  "topics": [}', 2, 14),
        (b"", 1, 1),
        (b'{"version": "1", "topics": []', 1, 30),
    ],
)
def test_syntax_errors_carry_position(raw, line, column):
    with pytest.raises(KBSyntaxError) as info:
        parse_kb(raw)
    assert (info.value.line, info.value.column) == (line, column)


def test_bom_rejected():
    with pytest.raises(KBSyntaxError, match="byte-order mark"):
        parse_kb(b"\xef\xbb\xbf" + doc(MINIMAL))


def test_invalid_utf8_position():
    with pytest.raises(KBSyntaxError) as info:
        parse_kb(b'{\n  "version": "\xff"}')
    assert (info.value.line, info.value.column) == (2, 15)


def _schema_error(obj_or_bytes):
    raw = obj_or_bytes if isinstance(obj_or_bytes, bytes) else doc(obj_or_bytes)
    with pytest.raises(KBError) as info:
        read_kb(raw)
    return [(d.path, d.message) for d in info.value.diagnostics]


def test_unknown_field_rejected():
    data = json.loads(json.dumps(MINIMAL))
    data["topics"][0]["entries"][0]["advise"] = "typo"
    assert _schema_error(data) == [("$.topics[0].entries[0].advise", "unknown field 'advise'")]


def test_missing_field():
    data = json.loads(json.dumps(MINIMAL))
    del data["topics"][0]["entries"][0]["advice"]
    assert _schema_error(data) == [("$.topics[0].entries[0]", "missing field 'advice'")]


def test_mistyped_field():
    data = json.loads(json.dumps(MINIMAL))
    data["topics"][0]["entries"][0]["keywords"] = "virus"
    assert _schema_error(data) == [("$.topics[0].entries[0].keywords", "expected array, got string")]


def test_nested_topics_rejected():
    data = json.loads(json.dumps(MINIMAL))
    data["topics"][0]["topics"] = []
    assert _schema_error(data) == [("$.topics[0].topics", "nested topics are not supported")]


def test_duplicate_json_key_rejected():
    raw = b'{"version": "1", "version": "2", "topics": []}'
    assert _schema_error(raw) == [("$", "duplicate key 'version'")]


def test_nan_rejected():
    raw = b'{"version": NaN, "topics": []}'
    assert _schema_error(raw) == [("$.version", "expected string, got non-finite number")]


def test_see_also_roundtrip_distinguishes_absent_and_empty():
    data = json.loads(json.dumps(MINIMAL))
    data["topics"][0]["entries"][0]["see_also"] = []
    kb = parse_kb(doc(data))
    assert kb.topics[0].entries[0].see_also == ()
    assert parse_kb(serialize_kb(kb)) == kb


def test_validate_fixture_clean(fixture_kb):
    assert validate_kb(fixture_kb) == []


def test_empty_keywords_one_error():
    kb = KnowledgeBase("1", (Topic("malware", (AdviceEntry("m1", (), "x"),)),))
    diags = validate_kb(kb)
    assert [(d.severity, d.path) for d in diags] == [(ERROR, "$.topics[0].entries[0].keywords")]


def test_non_canonical_keyword_warns():
    kb = KnowledgeBase("1", (Topic("malware", (AdviceEntry("m1", ("Virus",), "x"),)),))
    diags = validate_kb(kb)
    assert len(diags) == 1
    assert diags[0].severity == WARNING
    assert diags[0].path == "$.topics[0].entries[0].keywords[0]"
    assert "keyword not in canonical form" in diags[0].message
    parse_kb(serialize_kb(kb))  # warnings do not fail parsing


def test_diagnostics_ordered_by_path():
    entries = tuple(AdviceEntry(f"e{i}", (), "") for i in range(12))
    diags = validate_kb(KnowledgeBase("1", (Topic("t", entries),)))
    paths = [d.path for d in diags]
    assert paths[:3] == [
        "$.topics[0].entries[0].advice",
        "$.topics[0].entries[0].keywords",
        "$.topics[0].entries[1].advice",
    ]
    assert paths[-1] == "$.topics[0].entries[11].keywords"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 60))
def test_mutations_yield_exactly_one_error(seed, n):
    rng = random.Random(seed)
    kb = random_kb(rng, n)
    assert [d for d in validate_kb(kb) if d.severity == ERROR] == []
    for name, (bad, path) in mutations(kb, rng).items():
        errors = [d for d in validate_kb(bad) if d.severity == ERROR]
        assert [d.path for d in errors] == [path], name


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 120))
def test_roundtrip_generated(seed, n):
    kb = random_kb(random.Random(seed), n)
    assert parse_kb(serialize_kb(kb)) == kb


def test_parse_is_deterministic(fixture_bytes):
    assert parse_kb(fixture_bytes) == parse_kb(bytes(fixture_bytes))
    assert validate_kb(parse_kb(fixture_bytes)) == validate_kb(parse_kb(fixture_bytes))


# -- index --


def _kb(*entries):
    return KnowledgeBase("1", (Topic("t", tuple(entries)),))


def test_index_single_entry():
    idx = build_index(_kb(AdviceEntry("m1", ("virus", "malware"), "x")))
    assert dict(idx.postings) == {"virus": {"m1"}, "malware": {"m1"}}
    assert idx.entry_count == 1
    assert lookup_keyword(idx, "virus") == {"m1"}
    assert lookup_keyword(idx, "phishing") == frozenset()


def test_index_shared_keyword():
    idx = build_index(_kb(AdviceEntry("p1", ("password",), "x"), AdviceEntry("p2", ("password", "manager"), "y")))
    assert lookup_keyword(idx, "password") == {"p1", "p2"}


def test_index_rejects_invalid_kb():
    with pytest.raises(KBError):
        build_index(_kb(AdviceEntry("p1", (), "x")))


def test_index_fixture_exhaustive(fixture_kb):
    idx = build_index(fixture_kb)
    for _, entry in fixture_kb.iter_entries():
        for word in entry.keywords:
            assert entry.id in lookup_keyword(idx, word)


def _brute_lookup(kb, word):
    return {e.id for _, e in kb.iter_entries() if word in e.keywords}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 500))
def test_index_matches_brute_force(seed, n):
    kb = random_kb(random.Random(seed), n)
    idx = build_index(kb)
    words = {w for _, e in kb.iter_entries() for w in e.keywords} | {"absent", "zzzz"}
    for word in words:
        assert lookup_keyword(idx, word) == _brute_lookup(kb, word)
    assert sum(len(v) for v in idx.postings.values()) == sum(len(e.keywords) for _, e in kb.iter_entries())
