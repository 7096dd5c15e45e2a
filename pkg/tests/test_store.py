from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentmem.errors import NotFoundError, ValidationError
from agentmem.store import MemoryStore, SemanticFact
from conftest import make_entry, make_fact


def test_round_trip_preserves_all_fields(store):
    entry = make_entry(entry_id="abc", content="the cat sat", session_id="s9",
                       agent_id="ag", project="p")
    store.append_entry(entry)
    loaded = store.load_entries("p").entries
    assert len(loaded) == 1
    got = loaded[0]
    assert (got.id, got.session_id, got.agent_id, got.project) == ("abc", "s9", "ag", "p")
    assert got.content == "the cat sat"
    assert got.timestamp == entry.timestamp
    assert got.tokens == 3
    assert got.promoted is False
    assert got.cognitive_weight == 0.0


def test_default_cognitive_weight_is_zero(store):
    store.append_entry(make_entry())
    assert store.load_entries("proj").entries[0].cognitive_weight == 0.0


def test_same_day_appends_share_one_file(store):
    store.append_entry(make_entry(entry_id="e1"))
    store.append_entry(make_entry(entry_id="e2"))
    files = list(store.episodic_dir.glob("*.jsonl"))
    assert len(files) == 1
    ids = [json.loads(line)["id"] for line in files[0].read_text().splitlines()]
    assert ids == ["e1", "e2"]


def test_day_files_split_by_utc_date(store):
    store.append_entry(make_entry(entry_id="e1", days_ago=0))
    store.append_entry(make_entry(entry_id="e2", days_ago=2))
    assert len(list(store.episodic_dir.glob("*.jsonl"))) == 2


def test_line_fields_are_exactly_the_contract(store):
    store.append_entry(make_entry())
    (path,) = store.episodic_dir.glob("*.jsonl")
    record = json.loads(path.read_text().splitlines()[0])
    assert list(record) == [
        "id", "timestamp", "session_id", "agent_id", "project",
        "content", "tokens", "promoted", "cognitive_weight",
    ]


def test_system_entries_flagged_on_load(store):
    store.append_entry(make_entry(entry_id="sys", content="[system] compaction marker"))
    got = store.load_entries("proj").entries[0]
    assert got.system is True
    assert got.content == "[system] compaction marker"


def test_empty_project_returns_empty(store):
    assert store.load_entries("missing").entries == []


def test_project_must_be_nonempty(store):
    with pytest.raises(ValidationError):
        store.append_entry(make_entry(project=""))


def test_new_entries_must_start_neutral(store):
    entry = make_entry()
    entry.cognitive_weight = 0.25
    with pytest.raises(ValidationError):
        store.append_entry(entry)


def test_agent_privacy(store):
    store.append_entry(make_entry(entry_id="a1", agent_id="alice"))
    store.append_entry(make_entry(entry_id="b1", agent_id="bob"))
    alice_view = store.load_entries("proj", agent_view="alice").entries
    assert [e.id for e in alice_view] == ["a1"]


def test_orchestrator_view_sees_everyone(store):
    store.append_entry(make_entry(entry_id="a1", agent_id="alice"))
    store.append_entry(make_entry(entry_id="b1", agent_id="bob"))
    assert {e.id for e in store.load_entries("proj").entries} == {"a1", "b1"}


def test_session_scope_filter(store):
    store.append_entry(make_entry(entry_id="e1", session_id="s1"))
    store.append_entry(make_entry(entry_id="e2", session_id="s2"))
    got = store.load_entries("proj", sessions=["s2"]).entries
    assert [e.id for e in got] == ["e2"]


def test_corrupt_lines_skipped_and_counted(store):
    store.append_entry(make_entry(entry_id="good"))
    (path,) = store.episodic_dir.glob("*.jsonl")
    with path.open("a") as handle:
        handle.write("{not json\n")
        handle.write('{"id": "missing-fields"}\n')
    result = store.load_entries("proj")
    assert [e.id for e in result.entries] == ["good"]
    assert result.skipped == 2


def test_loads_never_mutate_files(store):
    store.append_entry(make_entry(entry_id="e1"))
    store.apply_cw_delta("e1", 0.2, 1.0)
    paths = sorted(store.root.rglob("*.jsonl"))
    before = [p.read_bytes() for p in paths]
    fresh = MemoryStore(store.root)
    fresh.load_entries("proj")
    fresh.load_facts()
    assert [p.read_bytes() for p in paths] == before


# -- cognitive weight ledger ---------------------------------------------------

def test_cw_delta_applied(store):
    store.append_entry(make_entry(entry_id="e1"))
    assert store.apply_cw_delta("e1", 0.1, 1.0) == pytest.approx(0.1)


def test_cw_delta_clips_high(store):
    store.append_entry(make_entry(entry_id="e1"))
    store.apply_cw_delta("e1", 0.98, 1.0)
    assert store.apply_cw_delta("e1", 0.1, 1.0) == 1.0


def test_cw_delta_clips_low(store):
    store.append_entry(make_entry(entry_id="e1"))
    store.apply_cw_delta("e1", -0.95, -0.5)
    assert store.apply_cw_delta("e1", -0.2, -0.5) == -1.0


def test_cw_delta_unknown_entry(store):
    with pytest.raises(NotFoundError):
        store.apply_cw_delta("ghost", 0.1, 1.0)


def test_ledger_replay_reproduces_cw(store):
    store.append_entry(make_entry(entry_id="e1"))
    store.append_entry(make_entry(entry_id="e2"))
    deltas = [("e1", 0.3), ("e2", -0.7), ("e1", 0.85), ("e1", -0.05), ("e2", -0.9)]
    for entry_id, delta in deltas:
        store.apply_cw_delta(entry_id, delta, 1.0)
    live = {e.id: e.cognitive_weight for e in store.load_entries("proj").entries}
    replayed = {
        e.id: e.cognitive_weight
        for e in MemoryStore(store.root).load_entries("proj").entries
    }
    assert live == replayed


@settings(max_examples=30, deadline=None)
@given(deltas=st.lists(st.floats(min_value=-0.5, max_value=0.5), min_size=1, max_size=20))
def test_ledger_replay_property(tmp_path_factory, deltas):
    ws = tmp_path_factory.mktemp("replay")
    store = MemoryStore(ws)
    store.append_entry(make_entry(entry_id="e1"))
    final = 0.0
    for delta in deltas:
        final = store.apply_cw_delta("e1", delta, 0.0)
    assert -1.0 <= final <= 1.0
    reloaded = MemoryStore(ws).load_entries("proj").entries[0]
    assert reloaded.cognitive_weight == final


# -- semantic facts -------------------------------------------------------------

def test_fact_round_trip(store):
    fact = make_fact(fact_id="f1", session_ids=("s1", "s2"))
    store.append_fact(fact)
    got = store.load_facts().facts[0]
    assert got.id == "f1"
    assert got.session_ids == frozenset({"s1", "s2"})


def test_fact_requires_sessions():
    with pytest.raises(ValidationError):
        SemanticFact(id="f", subject="a", relation="kv", value="b", session_ids=frozenset())


def test_fact_append_order_preserved(store):
    for i in range(3):
        store.append_fact(make_fact(fact_id=f"f{i}"))
    assert [f.id for f in store.load_facts().facts] == ["f0", "f1", "f2"]


def test_duplicate_fact_is_noop(store):
    store.append_fact(make_fact(fact_id="f1"))
    store.append_fact(make_fact(fact_id="f1"))
    assert len(store.load_facts().facts) == 1


# -- promotions ------------------------------------------------------------------

def test_promotion_is_ledger_derived(store):
    store.append_entry(make_entry(entry_id="e1"))
    store.promote("e1", "f1")
    assert store.load_entries("proj").entries[0].promoted is True
    assert MemoryStore(store.root).load_entries("proj").entries[0].promoted is True


def test_timestamp_parsing_rejects_garbage():
    from agentmem.store import parse_timestamp

    with pytest.raises(ValidationError):
        parse_timestamp("not-a-date")
