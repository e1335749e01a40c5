from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from wbslr import seqmine
from wbslr.seqmine import MinerConfig, SequentialPattern


def mined(seqs, **kw):
    return {p.elements: p.support for p in seqmine.mine_frequent(seqs, MinerConfig(**kw))}


def test_universal_item():
    assert mined([[{"A"}], [{"A"}]], min_support=1.0) == {(("A",),): 2}


def test_order_matters_at_full_support():
    seqs = [[{"A"}, {"B"}], [{"B"}, {"A"}]]
    assert mined(seqs, min_support=1.0) == {(("A",),): 2, (("B",),): 2}
    half = mined(seqs, min_support=0.5)
    assert half[(("A",), ("B",))] == 1 and half[(("B",), ("A",))] == 1
    assert (("A", "B"),) not in half


def test_output_sorted_and_deterministic():
    seqs = [[{"B", "A"}, {"C"}], [{"A"}, {"C", "B"}], [{"C"}]]
    a = seqmine.mine_frequent(seqs, MinerConfig(0.3, 3))
    assert a == seqmine.mine_frequent(seqs, MinerConfig(0.3, 3))
    assert [p.sort_key() for p in a] == sorted(p.sort_key() for p in a)


def test_contains_examples():
    assert not seqmine.contains([{"A"}], ((("A",), ("A",))))
    assert seqmine.contains([{"A", "B"}], SequentialPattern((("A",),)))
    assert seqmine.contains([{"A"}, {"B"}, {"C"}], (("A",), ("C",)))
    assert not seqmine.contains([{"A"}, {"B"}], (("A", "B"),))


def test_count_disjoint():
    assert seqmine.count_disjoint([{"A"}, {"B"}, {"A"}, {"B"}], (("A",), ("B",))) == 2
    assert seqmine.count_disjoint([{"A"}, {"A"}, {"B"}], (("A",), ("B",))) == 1


def test_config_and_input_errors():
    with pytest.raises(ValueError):
        seqmine.mine_frequent([], MinerConfig())
    for bad in ({"min_support": 0}, {"min_support": 1.5}, {"max_length": 0}):
        with pytest.raises(ValueError):
            MinerConfig(**bad)
    with pytest.raises(ValueError):
        SequentialPattern(((),))
    assert MinerConfig(0.3).min_count(10) == 3


def test_pattern_file_round_trip(tmp_path):
    pats = seqmine.mine_frequent([[{"B", "A"}, {"C"}], [{"A", "B"}]], MinerConfig(0.5, 3))
    text = seqmine.format_patterns(pats)
    assert "A&B->C\t1\n" in text
    (tmp_path / "p.txt").write_text(text)
    assert seqmine.read_patterns(tmp_path / "p.txt") == pats


CODES = "ABCD"
visit = st.frozensets(st.sampled_from(CODES), min_size=1, max_size=3)
database = st.lists(st.lists(visit, max_size=4), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(database, st.sampled_from([0.2, 0.34, 0.5, 0.75, 1.0]), st.integers(1, 3))
def test_matches_exhaustive_enumeration(seqs, support, max_length):
    cfg = MinerConfig(support, max_length)
    got = mined(seqs, min_support=support, max_length=max_length)
    assert got == oracles.frequent_brute(seqs, cfg.min_count(len(seqs)), max_length)


def _subpatterns(elements):
    for k in range(1, len(elements) + 1):
        for idx in itertools.combinations(range(len(elements)), k):
            for parts in itertools.product(*[
                    [c for r in range(1, len(elements[i]) + 1)
                     for c in itertools.combinations(elements[i], r)] for i in idx]):
                yield tuple(parts)


@settings(max_examples=60, deadline=None)
@given(database)
def test_support_is_containment_count_and_anti_monotone(seqs):
    cfg = MinerConfig(0.25, 3)
    found = mined(seqs, min_support=0.25, max_length=3)
    threshold = cfg.min_count(len(seqs))
    for elems, sup in found.items():
        assert sup == sum(seqmine.contains(s, elems) for s in seqs) >= threshold
        for sub in _subpatterns(elems):
            assert sub in found


@settings(max_examples=200, deadline=None)
@given(st.lists(visit, max_size=5), st.lists(visit, min_size=1, max_size=3))
def test_greedy_containment_matches_brute_force(sequence, elements):
    pat = tuple(tuple(sorted(e)) for e in elements)
    assert seqmine.contains(sequence, pat) == oracles.contains_brute(sequence, pat)
