"""Windowed count representation and the AFV / ATV / BPS baseline vectors.

The windowed matrix is laid out window-major: column ``j * P + p`` holds the
number of visits in window ``j`` that carry event ``p``.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cohort import LabeledSequence
from . import seqmine

log = logging.getLogger(__name__)


class EventVocabulary:
    """Frozen, ordered code -> column index mapping."""

    def __init__(self, codes: Sequence[str]):
        codes = tuple(codes)
        if len(set(codes)) != len(codes):
            raise ValueError("vocabulary codes must be distinct")
        self._codes = codes
        self._index = {c: i for i, c in enumerate(codes)}

    @property
    def codes(self) -> tuple:
        return self._codes

    @property
    def index(self) -> dict:
        return dict(self._index)

    def get(self, code):
        return self._index.get(code)

    def __contains__(self, code):
        return code in self._index

    def __len__(self):
        return len(self._codes)

    def __eq__(self, other):
        return isinstance(other, EventVocabulary) and self._codes == other._codes

    def __repr__(self):
        return f"EventVocabulary(P={len(self)})"


@dataclass(frozen=True)
class WindowGrid:
    T: int
    window_days: int

    def __post_init__(self):
        if self.T < 1 or self.window_days < 1:
            raise ValueError(f"invalid grid T={self.T} window_days={self.window_days}")

    @classmethod
    def covering(cls, span_days: int, window_days: int) -> "WindowGrid":
        """Smallest grid of ``window_days`` windows covering ``span_days``."""
        return cls(max(1, math.ceil(span_days / window_days)), window_days)

    @property
    def span_days(self) -> int:
        return self.T * self.window_days

    def window_of(self, offset_days: int) -> int:
        return offset_days // self.window_days

    def window_range(self, j: int) -> tuple:
        """Day offsets ``[start, end)`` of window ``j`` from the observation start."""
        return j * self.window_days, (j + 1) * self.window_days


@dataclass
class WindowedCountMatrix:
    values: np.ndarray
    row_ids: list
    labels: np.ndarray
    grid: WindowGrid
    vocab: EventVocabulary
    dropped_codes: int = 0

    def __post_init__(self):
        n, d = self.values.shape
        if d != self.grid.T * len(self.vocab):
            raise ValueError(f"expected {self.grid.T * len(self.vocab)} columns, got {d}")
        if len(self.row_ids) != n or len(self.labels) != n:
            raise ValueError("row_ids / labels length mismatch")

    def column_names(self) -> list:
        return [f"t{j}|{c}" for j in range(self.grid.T) for c in self.vocab.codes]

    def blocks(self) -> np.ndarray:
        """View as ``(N, T, P)``."""
        return self.values.reshape(len(self.row_ids), self.grid.T, len(self.vocab))


@dataclass
class FeatureVector:
    values: np.ndarray
    names: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.values) != len(self.names):
            raise ValueError("values / names length mismatch")


def build_vocabulary(train: Sequence[LabeledSequence]) -> EventVocabulary:
    if not train:
        raise ValueError("cannot build a vocabulary from an empty training set")
    return EventVocabulary(sorted({c for s in train for v in s.visits for c in v.codes}))


def _check_grid(seq: LabeledSequence, grid: WindowGrid):
    span = (seq.observation_end - seq.observation_start).days
    if grid.span_days < span:
        raise ValueError(f"grid spans {grid.span_days} days, observation window "
                         f"of {seq.patient_id!r} spans {span}")


def preliminary_representation(seq: LabeledSequence, grid: WindowGrid,
                               vocab: EventVocabulary, _dropped: list | None = None
                               ) -> np.ndarray:
    """Window-major count row of length ``T * P`` for one sequence."""
    _check_grid(seq, grid)
    P = len(vocab)
    row = np.zeros(grid.T * P)
    for v in seq.visits:
        off = (v.date - seq.observation_start).days
        if not (seq.observation_start <= v.date < seq.observation_end):
            raise RuntimeError(f"visit {v.date} of {seq.patient_id!r} lies outside "
                               "its observation window")
        base = grid.window_of(off) * P
        for code in v.codes:
            p = vocab.get(code)
            if p is None:
                if _dropped is not None:
                    _dropped[0] += 1
                continue
            row[base + p] += 1
    return row


def preliminary_matrix(seqs: Sequence[LabeledSequence], grid: WindowGrid,
                       vocab: EventVocabulary) -> WindowedCountMatrix:
    dropped = [0]
    values = np.zeros((len(seqs), grid.T * len(vocab)))
    for i, s in enumerate(seqs):
        values[i] = preliminary_representation(s, grid, vocab, dropped)
    if dropped[0]:
        log.warning("dropped %d occurrences of codes outside the vocabulary", dropped[0])
    return WindowedCountMatrix(values, [s.patient_id for s in seqs],
                               np.array([s.label for s in seqs], dtype=int),
                               grid, vocab, dropped[0])


def afv(seq: LabeledSequence, vocab: EventVocabulary) -> FeatureVector:
    """Aggregated frequency vector: per-event counts over the whole window."""
    out = np.zeros(len(vocab))
    for v in seq.visits:
        for code in v.codes:
            p = vocab.get(code)
            if p is not None:
                out[p] += 1
    return FeatureVector(out, list(vocab.codes))


def atv(seq: LabeledSequence, vocab: EventVocabulary) -> FeatureVector:
    """Aggregated transition vector over consecutive visit pairs, ``P * P`` long.

    Entry ``a * P + b`` counts pairs ``(v_k, v_{k+1})`` with ``a`` in ``v_k``
    and ``b`` in ``v_{k+1}``.
    """
    P = len(vocab)
    out = np.zeros(P * P)
    idx = [[vocab.get(c) for c in v.codes if c in vocab] for v in seq.visits]
    for prev, nxt in zip(idx, idx[1:]):
        for a in prev:
            for b in nxt:
                out[a * P + b] += 1
    names = [f"{a}>{b}" for a in vocab.codes for b in vocab.codes]
    return FeatureVector(out, names)


def bps_features(seq: LabeledSequence, patterns: Sequence["seqmine.SequentialPattern"],
                 binary: bool = True) -> FeatureVector:
    """Bag-of-patterns vector: presence of each mined pattern in ``seq``.

    With ``binary=False`` the value is the number of disjoint left-to-right
    occurrences found by repeated greedy matching.
    """
    items = seq.itemsets
    if binary:
        vals = [1.0 if seqmine.contains(items, pat) else 0.0 for pat in patterns]
    else:
        vals = [float(seqmine.count_disjoint(items, pat)) for pat in patterns]
    return FeatureVector(np.array(vals), [f"pat{k}" for k in range(len(patterns))])


def feature_matrix(seqs, fn, *args, **kw):
    """Stack per-sequence :class:`FeatureVector` rows into ``(X, names)``."""
    rows = [fn(s, *args, **kw) for s in seqs]
    if not rows:
        raise ValueError("no sequences to featurize")
    return np.vstack([r.values for r in rows]), rows[0].names


def matrix_to_csv(row_ids, labels, values, names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["patient_id", "label", *names])
    for pid, y, row in zip(row_ids, labels, values):
        w.writerow([pid, int(y), *(_fmt(x) for x in row)])
    return buf.getvalue()


def _fmt(x):
    return str(int(x)) if float(x).is_integer() else repr(float(x))
