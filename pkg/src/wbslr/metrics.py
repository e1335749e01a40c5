"""Classification metrics and repeated-run aggregation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import rankdata

METRICS = ("sensitivity", "specificity", "auc", "f2")


class UndefinedMetric(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(labels, scores, threshold: float = 0.5) -> ConfusionCounts:
    """Counts with ``score >= threshold`` predicted positive."""
    labels = np.asarray(labels).astype(int)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape or labels.size == 0:
        raise ValueError(f"need equal, non-zero lengths (got {labels.size} and {scores.size})")
    pred = scores >= threshold
    pos = labels == 1
    return ConfusionCounts(int(np.sum(pred & pos)), int(np.sum(pred & ~pos)),
                           int(np.sum(~pred & ~pos)), int(np.sum(~pred & pos)))


def sensitivity_specificity(c: ConfusionCounts):
    if c.tp + c.fn == 0 or c.tn + c.fp == 0:
        raise UndefinedMetric("undefined metric: a class has no members")
    return c.tp / (c.tp + c.fn), c.tn / (c.tn + c.fp)


def auc(labels, scores) -> float:
    """Mann-Whitney AUC; tied scores get average ranks (count 1/2 per pair)."""
    labels = np.asarray(labels).astype(int)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValueError("labels and scores differ in length")
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def f2(c: ConfusionCounts) -> float:
    """F-beta with beta = 2; 0 when there are no true positives."""
    if c.tp + c.fn == 0:
        raise UndefinedMetric("F2 needs at least one positive")
    if c.tp == 0:
        return 0.0
    ppv = c.tp / (c.tp + c.fp)
    sens = c.tp / (c.tp + c.fn)
    return 5 * ppv * sens / (4 * ppv + sens)


def evaluate(labels, scores, threshold: float = 0.5) -> dict:
    c = confusion(labels, scores, threshold)
    sens, spec = sensitivity_specificity(c)
    return {"sensitivity": sens, "specificity": spec,
            "auc": auc(labels, scores), "f2": f2(c)}


@dataclass
class EvalReport:
    metrics: dict  # name -> {"mean", "std"}
    repeats: int
    threshold: float
    runs: list

    def to_dict(self) -> dict:
        return {"repeats": self.repeats, "threshold": self.threshold,
                "metrics": {k: dict(v) for k, v in self.metrics.items()}}

    def to_text(self) -> str:
        lines = [f"{'metric':<12} {'mean':>8} {'std':>8}"]
        for name in METRICS:
            m = self.metrics[name]
            lines.append(f"{name:<12} {m['mean']:>8.4f} {m['std']:>8.4f}")
        lines.append(f"repeats={self.repeats} threshold={self.threshold}")
        return "\n".join(lines) + "\n"


class RunFailed(RuntimeError):
    def __init__(self, seed, cause):
        super().__init__(f"run with seed {seed} failed: {cause}")
        self.seed = seed


def summarize(runs, repeats: int, threshold: float) -> EvalReport:
    out = {}
    for name in METRICS:
        vals = np.array([r[name] for r in runs], dtype=float)
        out[name] = {"mean": float(vals.mean()),
                     "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0}
    return EvalReport(out, repeats, threshold, list(runs))


def repeated_eval(run: Callable[[int], dict], repeats: int = 50, base_seed: int = 0,
                  threshold: float = 0.5) -> EvalReport:
    """Call ``run(seed)`` for ``base_seed .. base_seed + repeats - 1`` and
    report mean and sample standard deviation of each metric."""
    if repeats < 2:
        raise ValueError("repeats must be >= 2")
    runs = []
    for seed in range(base_seed, base_seed + repeats):
        try:
            runs.append(run(seed))
        except Exception as exc:
            raise RunFailed(seed, exc) from exc
    return summarize(runs, repeats, threshold)
