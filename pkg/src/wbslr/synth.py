"""Synthetic longitudinal cohorts with planted, time-localised risk factors.

Per patient and window ``j``: the visit count is Poisson(``visit_rate``) on
distinct days inside the window, and each visit carries event ``p``
independently with probability ``rate_p``.  The windowed count ``c_jp`` is
therefore Binomial(visits, rate_p), which is Poisson(``rate_p * visit_rate``)
marginally, and featurizing the emitted visits returns ``c_jp`` exactly.
Labels are Bernoulli(sigmoid(bias + sum of beta_jp * c_jp over planted (j, p))).
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .cohort import LabeledSequence, Visit
from .featurize import WindowGrid

EPOCH = dt.date(2000, 1, 1)


def event_code(p: int) -> str:
    return f"E{p:04d}"


@dataclass(frozen=True)
class GeneratorConfig:
    n_patients: int
    t_windows: int
    p_events: int
    window_days: int = 60
    planted: tuple = ()  # ((j, p, beta), ...)
    base_rate: float = 0.05
    visit_rate: float = 2.0
    bias: float = 0.0
    seed: int = 0
    event_rates: dict = field(default_factory=dict)  # p -> per-visit rate override

    def __post_init__(self):
        object.__setattr__(self, "planted", tuple((int(j), int(p), float(b))
                                                 for j, p, b in self.planted))
        object.__setattr__(self, "event_rates", {int(k): float(v)
                                                 for k, v in dict(self.event_rates).items()})
        if min(self.n_patients, self.t_windows, self.p_events, self.window_days) < 1:
            raise ValueError("n_patients, t_windows, p_events, window_days must be positive")
        if self.base_rate <= 0 or self.visit_rate <= 0:
            raise ValueError("base_rate and visit_rate must be positive")
        for j, p, _ in self.planted:
            if not (0 <= j < self.t_windows and 0 <= p < self.p_events):
                raise ValueError(f"planted coordinate ({j}, {p}) outside the grid")
        if len({(j, p) for j, p, _ in self.planted}) != len(self.planted):
            raise ValueError("duplicate planted coordinates")
        for p, r in self.event_rates.items():
            if not (0 <= p < self.p_events) or not 0 < r <= 1:
                raise ValueError(f"bad event rate override {p}: {r}")
        if self.base_rate > 1:
            raise ValueError("base_rate is a per-visit probability and must be <= 1")

    @property
    def grid(self) -> WindowGrid:
        return WindowGrid(self.t_windows, self.window_days)

    def rates(self) -> np.ndarray:
        r = np.full(self.p_events, self.base_rate)
        for p, v in self.event_rates.items():
            r[p] = v
        return r

    def to_dict(self) -> dict:
        return {"n_patients": self.n_patients, "t_windows": self.t_windows,
                "p_events": self.p_events, "window_days": self.window_days,
                "planted": [list(t) for t in self.planted], "base_rate": self.base_rate,
                "visit_rate": self.visit_rate, "bias": self.bias, "seed": self.seed,
                "event_rates": {str(k): v for k, v in sorted(self.event_rates.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        d["planted"] = tuple(tuple(t) for t in d.get("planted", ()))
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class GroundTruth:
    support: set
    betas: dict
    bias: float
    grid: WindowGrid
    counts: np.ndarray  # (N, T * P) window-major, the generator's c_jp
    logits: np.ndarray

    def to_dict(self) -> dict:
        return {"support": sorted([list(s) for s in self.support]),
                "betas": [[j, p, b] for (j, p), b in sorted(self.betas.items())],
                "bias": self.bias,
                "grid": {"T": self.grid.T, "window_days": self.grid.window_days}}


def _patient(rng, cfg: GeneratorConfig, rates, codes, pid):
    T, P, W = cfg.t_windows, cfg.p_events, cfg.window_days
    start = EPOCH + dt.timedelta(days=int(rng.integers(0, 365)))
    counts = np.zeros((T, P))
    visits = []
    for j in range(T):
        n_vis = min(int(rng.poisson(cfg.visit_rate)), W)
        if n_vis == 0:
            continue
        days = np.sort(rng.choice(W, size=n_vis, replace=False))
        has = rng.random((n_vis, P)) < rates
        counts[j] = has.sum(axis=0)
        for day, row in zip(days, has):
            if row.any():
                visits.append(Visit(start + dt.timedelta(days=int(j * W + day)),
                                    frozenset(codes[p] for p in np.flatnonzero(row))))
    return start, counts.ravel(), visits


def generate(config: GeneratorConfig):
    """Return ``(sequences, ground_truth)``; deterministic in ``config.seed``.

    Each patient draws from its own stream ``default_rng([seed, i])``.
    """
    T, P = config.t_windows, config.p_events
    rates = config.rates()
    codes = [event_code(p) for p in range(P)]
    beta = np.zeros(T * P)
    for j, p, b in config.planted:
        beta[j * P + p] = b
    span = dt.timedelta(days=T * config.window_days)
    seqs, all_counts, logits = [], [], []
    for i in range(config.n_patients):
        rng = np.random.default_rng([config.seed, i])
        start, counts, visits = _patient(rng, config, rates, codes, i)
        logit = config.bias + counts @ beta
        label = int(rng.random() < expit(logit))
        seqs.append(LabeledSequence(f"S{i:06d}", tuple(visits), label, start, start + span))
        all_counts.append(counts)
        logits.append(logit)
    truth = GroundTruth({(j, p) for j, p, _ in config.planted},
                        {(j, p): b for j, p, b in config.planted}, config.bias,
                        config.grid, np.array(all_counts).reshape(-1, T * P),
                        np.array(logits))
    return seqs, truth


def truth_json(truth: GroundTruth, config: GeneratorConfig) -> str:
    return json.dumps({"config": config.to_dict(), **truth.to_dict()}, indent=1) + "\n"
