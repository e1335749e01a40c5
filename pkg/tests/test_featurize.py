from __future__ import annotations

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wbslr import featurize, seqmine
from wbslr.cohort import LabeledSequence, Visit
from wbslr.featurize import EventVocabulary, WindowGrid

D0 = dt.date(2015, 1, 1)


def seq(visits, span=360, pid="s"):
    return LabeledSequence(pid, tuple(Visit(D0 + dt.timedelta(days=d), frozenset(c))
                                      for d, c in visits), 0, D0, D0 + dt.timedelta(days=span))


def test_vocabulary_sorted_and_deduplicated():
    v = featurize.build_vocabulary([seq([(0, {"B"}), (5, {"A", "B"})])])
    assert v.codes == ("A", "B") and len(v) == 2
    assert featurize.build_vocabulary([seq([(0, {"A"})]), seq([(0, {"C"})])]).codes == ("A", "C")
    assert len(featurize.build_vocabulary([seq([(0, {"Z"})])])) == 1


def test_vocabulary_errors():
    with pytest.raises(ValueError):
        featurize.build_vocabulary([])
    with pytest.raises(ValueError):
        EventVocabulary(["A", "A"])


def test_twelve_months_of_four_month_windows():
    assert WindowGrid.covering(360, 120) == WindowGrid(3, 120)
    assert WindowGrid.covering(365, 120).T == 4  # tail window clipped
    assert WindowGrid(3, 120).window_range(2) == (240, 360)


def test_empty_sequence_gives_zero_row():
    row = featurize.preliminary_representation(seq([]), WindowGrid(3, 120), EventVocabulary("AB"))
    assert np.array_equal(row, np.zeros(6))


def test_hand_counted_row():
    row = featurize.preliminary_representation(seq([(250, {"A", "B"})]), WindowGrid(3, 120),
                                               EventVocabulary("AB"))
    assert row.tolist() == [0, 0, 0, 0, 1, 1]


def test_window_boundaries_are_half_open():
    s = seq([(0, {"A"}), (119, {"A"}), (120, {"B"}), (359, {"B"})])
    row = featurize.preliminary_representation(s, WindowGrid(3, 120), EventVocabulary("AB"))
    assert row.tolist() == [2, 0, 0, 1, 0, 1]


def test_grid_too_short_rejected():
    with pytest.raises(ValueError):
        featurize.preliminary_representation(seq([]), WindowGrid(2, 120), EventVocabulary("A"))


def test_unknown_codes_dropped_and_counted(caplog):
    m = featurize.preliminary_matrix([seq([(0, {"A", "Q"})])], WindowGrid(1, 360),
                                     EventVocabulary("A"))
    assert m.values.tolist() == [[1]] and m.dropped_codes == 1
    assert "dropped 1" in caplog.text


def test_afv_and_atv_hand_counts():
    v = EventVocabulary("AB")
    assert featurize.afv(seq([(0, {"A"}), (9, {"A", "B"})]), v).values.tolist() == [2, 1]
    assert featurize.afv(seq([]), v).values.tolist() == [0, 0]
    t = featurize.atv(seq([(0, {"A"}), (9, {"B"})]), v)
    assert dict(zip(t.names, t.values)) == {"A>A": 0, "A>B": 1, "B>A": 0, "B>B": 0}
    t = featurize.atv(seq([(0, {"A", "B"}), (9, {"A"})]), v)
    assert dict(zip(t.names, t.values)) == {"A>A": 1, "A>B": 0, "B>A": 1, "B>B": 0}
    assert not featurize.atv(seq([(0, {"A", "B"})]), v).values.any()


def test_bps_presence():
    pats = [seqmine.SequentialPattern(e) for e in ((("A",),), (("A",), ("B",)), (("A", "B"),))]
    assert featurize.bps_features(seq([(0, {"A"}), (5, {"B"})]), pats).values.tolist() == [1, 1, 0]
    assert featurize.bps_features(seq([(0, {"B"}), (5, {"A"})]), pats).values.tolist() == [1, 0, 0]
    counted = featurize.bps_features(seq([(0, {"A"}), (5, {"A"})]), pats[:1], binary=False)
    assert counted.values.tolist() == [2]


CODES = list("ABCDE")


@st.composite
def sequences(draw):
    days = sorted(draw(st.sets(st.integers(0, 359), max_size=10)))
    visits = [(d, draw(st.sets(st.sampled_from(CODES), min_size=1, max_size=4))) for d in days]
    return seq(visits)


@settings(max_examples=150, deadline=None)
@given(sequences(), st.sampled_from([30, 60, 90, 120, 360, 500]))
def test_representation_identities(s, wd):
    vocab = EventVocabulary(CODES[:4])  # E is out of vocabulary
    grid = WindowGrid.covering(360, wd)
    row = featurize.preliminary_representation(s, grid, vocab)
    assert row.shape == (grid.T * 4,) and np.all(row >= 0)
    assert row.sum() == sum(len(v.codes & set(vocab.codes)) for v in s.visits)
    assert np.array_equal(row.reshape(grid.T, 4).sum(axis=0), featurize.afv(s, vocab).values)
    assert featurize.atv(s, vocab).values.size == 16


def test_matrix_csv_header():
    m = featurize.preliminary_matrix([seq([(0, {"A"})], pid="p1")], WindowGrid(2, 180),
                                     EventVocabulary("AB"))
    text = featurize.matrix_to_csv(m.row_ids, m.labels, m.values, m.column_names())
    assert text.splitlines() == ["patient_id,label,t0|A,t0|B,t1|A,t1|B", "p1,0,1,0,0,0"]
    assert m.blocks().shape == (1, 2, 2)
