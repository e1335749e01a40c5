"""Frequent sequential pattern mining by prefix growth.

A pattern is a sequence of itemsets.  A sequence of visits contains a
pattern when the pattern's elements can be mapped, in order, onto distinct
visits with each element a subset of its visit.  Support is the number of
training sequences that contain the pattern.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence


@dataclass(frozen=True)
class SequentialPattern:
    elements: tuple  # tuple of sorted tuples of codes
    support: int = 0

    def __post_init__(self):
        elems = tuple(tuple(sorted(set(e))) for e in self.elements)
        if not elems or any(not e for e in elems):
            raise ValueError("patterns need at least one element and no empty itemsets")
        object.__setattr__(self, "elements", elems)

    @property
    def length(self) -> int:
        return sum(len(e) for e in self.elements)

    def sort_key(self):
        return (self.length, self.elements)

    def __str__(self):
        return "->".join("&".join(e) for e in self.elements)


@dataclass(frozen=True)
class MinerConfig:
    min_support: float = 0.2
    max_length: int = 3

    def __post_init__(self):
        if not 0 < self.min_support <= 1:
            raise ValueError(f"min_support must lie in (0, 1], got {self.min_support}")
        if self.max_length < 1:
            raise ValueError(f"max_length must be >= 1, got {self.max_length}")

    def min_count(self, n: int) -> int:
        # guard against 0.3 * 10 == 3.0000000000000004
        return max(1, math.ceil(self.min_support * n - 1e-9))


def _match_end(sequence, elements, start=0):
    """Index of the visit matched to the last element under greedy leftmost
    matching from ``start``, or -1."""
    k = start
    for elem in elements:
        need = set(elem)
        while k < len(sequence) and not need <= sequence[k]:
            k += 1
        if k == len(sequence):
            return -1
        k += 1
    return k - 1


def contains(sequence: Sequence, pattern) -> bool:
    """True iff ``pattern`` embeds into ``sequence`` (list of code sets)."""
    elements = pattern.elements if isinstance(pattern, SequentialPattern) else pattern
    seq = [set(v) for v in sequence]
    return _match_end(seq, elements) >= 0


def count_disjoint(sequence: Sequence, pattern) -> int:
    """Number of non-overlapping occurrences found by repeated leftmost matching."""
    elements = pattern.elements if isinstance(pattern, SequentialPattern) else pattern
    seq = [set(v) for v in sequence]
    n, start = 0, 0
    while True:
        end = _match_end(seq, elements, start)
        if end < 0:
            return n
        n += 1
        start = end + 1


def mine_frequent(sequences: Sequence[Sequence], config: MinerConfig = MinerConfig()) -> list:
    """All patterns with at most ``config.max_length`` items and support of at
    least ``ceil(min_support * N)``, sorted by (length, elements)."""
    if not sequences:
        raise ValueError("cannot mine an empty sequence database")
    db = [[frozenset(v) for v in s] for s in sequences]
    min_count = config.min_count(len(db))
    found = []

    def grow(elements, projected):
        # projected: list of (sequence index, leftmost end of the current prefix)
        found.append(SequentialPattern(elements, len(projected)))
        if sum(len(e) for e in elements) >= config.max_length:
            return
        # sequence-extensions: new element {x} after the leftmost prefix match
        s_counts = {}
        for si, end in projected:
            seen = set()
            for visit in db[si][end + 1:]:
                seen |= visit
            for x in seen:
                s_counts[x] = s_counts.get(x, 0) + 1
        # itemset-extensions: add x > max(last element) to the last element;
        # leftmost matching does not decide these, so re-match per sequence
        last = elements[-1]
        i_cands = set()
        for si, _ in projected:
            for visit in db[si]:
                if set(last) <= visit:
                    i_cands.update(x for x in visit if x > last[-1])
        for x in sorted(i_cands):
            ext = elements[:-1] + (last + (x,),)
            proj = []
            for si, _ in projected:
                end = _match_end(db[si], ext)
                if end >= 0:
                    proj.append((si, end))
            if len(proj) >= min_count:
                grow(ext, proj)
        for x in sorted(s_counts):
            if s_counts[x] < min_count:
                continue
            ext = elements + ((x,),)
            proj = []
            for si, end in projected:
                e2 = _match_end(db[si], ((x,),), end + 1)
                if e2 >= 0:
                    proj.append((si, e2))
            grow(ext, proj)

    singles = {}
    for s in db:
        for x in set().union(*s) if s else ():
            singles[x] = singles.get(x, 0) + 1
    for x in sorted(singles):
        if singles[x] >= min_count:
            proj = [(si, _match_end(s, ((x,),))) for si, s in enumerate(db)]
            grow(((x,),), [(si, e) for si, e in proj if e >= 0])
    return sorted(found, key=SequentialPattern.sort_key)


def format_patterns(patterns: Sequence[SequentialPattern]) -> str:
    return "".join(f"{p}\t{p.support}\n" for p in patterns)


def parse_patterns(text: str) -> list:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        body, support = line.rsplit("\t", 1)
        elems = tuple(tuple(e.split("&")) for e in body.split("->"))
        out.append(SequentialPattern(elems, int(support)))
    return out


def read_patterns(path) -> list:
    return parse_patterns(Path(path).read_text(encoding="utf-8"))
