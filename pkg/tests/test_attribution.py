from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentmem.attribution import (
    AttributionConfig,
    apply_attribution,
    compute_attribution,
    jaccard_attribution,
)
from agentmem.errors import ValidationError
from conftest import make_entry

CFG = AttributionConfig()


def test_jaccard_identical_texts():
    assert jaccard_attribution("paris is lovely", "paris is lovely") == 1.0


def test_jaccard_disjoint():
    assert jaccard_attribution("alpha beta", "gamma delta") == 0.0


def test_jaccard_partial_overlap():
    assert jaccard_attribution("paris", "paris france trip") == pytest.approx(1 / 3)


def test_jaccard_both_empty():
    assert jaccard_attribution("", "") == 0.0


def test_jaccard_deduplicates_tokens():
    assert jaccard_attribution("paris paris paris", "paris") == 1.0


def test_single_entry_gets_full_credit():
    outcome = compute_attribution("paris trip", [("e1", "the paris notes")], 1.0, CFG)
    assert outcome.normalised == (1.0,)
    assert outcome.deltas[0] == pytest.approx(0.1)


def test_proportional_negative_credit():
    # Raw scores engineered to 0.3 and 0.1 via token-set arithmetic:
    # answer {a,b,c,d,e,f,g,h,i,j} vs {a,b,c} -> 3/10; vs {a} -> 1/10.
    answer = "a b c d e f g h i j"
    outcome = compute_attribution(answer, [("e1", "a b c"), ("e2", "a")], -0.5, CFG)
    assert outcome.raw == pytest.approx((0.3, 0.1))
    assert outcome.deltas == pytest.approx((-0.0375, -0.0125))


def test_zero_reward_changes_nothing(store):
    store.append_entry(make_entry(entry_id="e1", content="paris notes"))
    updates = apply_attribution(
        store, store.load_entries("proj").entries, "paris", 0.0, CFG
    )
    assert updates == [("e1", 0.0)]


def test_reward_must_be_known():
    with pytest.raises(ValidationError):
        compute_attribution("x", [("e1", "x")], 0.7, CFG)


def test_empty_entry_list_is_noop(store):
    assert apply_attribution(store, [], "answer", 1.0, CFG) == []


def test_no_overlap_distributes_uniformly():
    outcome = compute_attribution("zzz", [("e1", "aaa"), ("e2", "bbb")], 1.0, CFG)
    assert outcome.normalised == pytest.approx((0.5, 0.5))
    assert sum(outcome.deltas) == pytest.approx(0.1)


def test_applies_through_store_and_clips(store):
    store.append_entry(make_entry(entry_id="e1", content="paris"))
    for _ in range(15):
        apply_attribution(store, store.load_entries("proj").entries, "paris", 1.0, CFG)
    assert store.load_entries("proj").entries[0].cognitive_weight == 1.0


TEXTS = st.lists(
    st.lists(st.sampled_from("abcdefgh"), min_size=0, max_size=6).map(" ".join),
    min_size=1,
    max_size=8,
)


@settings(max_examples=150, deadline=None)
@given(texts=TEXTS, answer=st.lists(st.sampled_from("abcdefgh"), max_size=6).map(" ".join),
       reward=st.sampled_from([-0.5, 0.0, 1.0]))
def test_conservation_and_sign_law(texts, answer, reward):
    entries = [(f"e{i}", text) for i, text in enumerate(texts)]
    outcome = compute_attribution(answer, entries, reward, CFG)
    assert sum(outcome.deltas) == pytest.approx(CFG.alpha * reward, abs=1e-9)
    if reward > 0:
        assert all(d >= 0 for d in outcome.deltas)
    if reward < 0:
        assert all(d <= 0 for d in outcome.deltas)
