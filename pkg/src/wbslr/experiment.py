"""Train / validate / test protocol shared by the CLI and the synthetic checks.

A representation turns labeled sequences into a design matrix plus the group
structure the downstream logistic model is fitted with.  The windowed SLR
representation has ``T`` groups of ``P`` events; the AFV, ATV and BPS
baselines are single-group and get the l1-penalised logistic model
(``alpha = 1``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import ensemble, featurize, metrics, seqmine, sgl
from .featurize import EventVocabulary, WindowGrid

log = logging.getLogger(__name__)

REPRESENTATIONS = ("slr", "wbslr", "bagged-slr", "afv", "atv", "bps")


class DataError(ValueError):
    """Input data cannot support the requested experiment."""


def stratified_split(labels, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Per-class shuffled split into ``len(fractions)`` sorted index arrays."""
    labels = np.asarray(labels).astype(int)
    fr = np.asarray(fractions, dtype=float)
    if np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be nonnegative and sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    parts = [[] for _ in fr]
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        cuts = np.round(np.cumsum(fr)[:-1] * idx.size).astype(int)
        for k, chunk in enumerate(np.split(idx, cuts)):
            parts[k].extend(chunk.tolist())
    return [np.array(sorted(p), dtype=int) for p in parts]


@dataclass
class Representation:
    """Featurizer fitted on training sequences."""
    name: str
    grid: WindowGrid
    window_days: int
    vocab: EventVocabulary = None  # feature names per group
    codes: EventVocabulary = None  # event vocabulary
    patterns: list = field(default_factory=list)
    miner: seqmine.MinerConfig = seqmine.MinerConfig()

    def fit(self, train):
        self.codes = featurize.build_vocabulary(train)
        if self.name in ("slr", "wbslr", "bagged-slr", "afv"):
            self.vocab = self.codes
        elif self.name == "atv":
            self.vocab = EventVocabulary(featurize.atv(train[0], self.codes).names)
        elif self.name == "bps":
            self.patterns = seqmine.mine_frequent([s.itemsets for s in train], self.miner)
            if not self.patterns:
                raise DataError("no frequent patterns at this support threshold")
            self.vocab = EventVocabulary([f"pat{k}" for k in range(len(self.patterns))])
        return self

    def to_dict(self) -> dict:
        return {"name": self.name, "window_days": self.window_days,
                "grid": {"T": self.grid.T, "window_days": self.grid.window_days},
                "codes": list(self.codes.codes), "features": list(self.vocab.codes),
                "patterns": seqmine.format_patterns(self.patterns).splitlines(),
                "miner": {"min_support": self.miner.min_support,
                          "max_length": self.miner.max_length}}

    @classmethod
    def from_dict(cls, d: dict) -> "Representation":
        return cls(d["name"], WindowGrid(d["grid"]["T"], d["grid"]["window_days"]),
                   int(d["window_days"]), EventVocabulary(d["features"]),
                   EventVocabulary(d["codes"]),
                   seqmine.parse_patterns("\n".join(d.get("patterns", []))),
                   seqmine.MinerConfig(**d.get("miner", {})))

    def transform(self, seqs) -> np.ndarray:
        if self.name in ("slr", "wbslr", "bagged-slr", "afv"):
            return featurize.preliminary_matrix(seqs, self.grid, self.codes).values
        if self.name == "atv":
            return featurize.feature_matrix(seqs, featurize.atv, self.codes)[0]
        return featurize.feature_matrix(seqs, featurize.bps_features, self.patterns)[0]


def make_representation(name: str, span_days: int, window_days: int,
                        miner: seqmine.MinerConfig | None = None) -> Representation:
    if name not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {name!r}; choose from {REPRESENTATIONS}")
    if name in ("slr", "wbslr", "bagged-slr"):
        grid = WindowGrid.covering(span_days, window_days)
    else:
        grid = WindowGrid(1, max(span_days, 1))
    return Representation(name, grid, window_days, miner=miner or seqmine.MinerConfig())


def lambda_grid(X, y, alpha, grid, n: int = 12, ratio: float = 1e-2,
                fit_intercept: bool = False):
    """Geometric grid from ``lambda_max`` down to ``ratio * lambda_max``."""
    lmax = sgl.lambda_max(X, y, alpha, grid,
                          fit_intercept=fit_intercept)
    if lmax == 0:
        return np.array([0.0])
    return lmax * np.geomspace(1.0, ratio, n)


def _val_scores(p, y, criterion):
    """Per-candidate score (higher is better) and its standard error."""
    y = np.asarray(y)
    if criterion == "auc":
        return metrics.auc(y, p), 0.0
    p = np.clip(p, 1e-12, 1 - 1e-12)
    ll = y * np.log(p) + (1 - y) * np.log(1 - p)
    return float(ll.mean()), float(ll.std(ddof=1) / np.sqrt(ll.size))


def tune_sgl(Xtr, ytr, Xva, yva, grid, base: sgl.SglConfig, alphas=(0.7,),
             n_lambdas: int = 12, ratio: float = 1e-2, criterion: str = "nll",
             vocab: EventVocabulary | None = None, rule: str = "1se",
             patience: int = 3):
    """Choose ``(alpha, lambda)`` on validation data.

    Every alpha gets a descending lambda grid, fitted from scratch per
    point; a path is abandoned once ``patience`` consecutive points fail to
    beat its best score.  ``criterion`` is ``"nll"`` (mean validation
    log-likelihood) or ``"auc"``.  ``rule="best"`` takes the top score;
    ``rule="1se"`` takes the sparsest candidate within one standard error
    of the top score (larger lambda on ties).

    Returns ``(config, table, model)``.
    """
    if rule not in ("best", "1se"):
        raise ValueError(f"unknown selection rule {rule!r}")
    cands = []
    for a in alphas:
        best_here, stale = -np.inf, 0
        for lam in lambda_grid(Xtr, ytr, a, grid, n_lambdas, ratio, base.fit_intercept):
            cfg = replace(base, alpha=float(a), lam=float(lam))
            model = sgl.fit(Xtr, ytr, grid, cfg, vocab)
            score, se = _val_scores(model.predict_proba(Xva), yva, criterion)
            cands.append((score, se, cfg, model))
            if score > best_here + 1e-12:
                best_here, stale = score, 0
            else:
                stale += 1
                if stale >= patience:
                    break
    top = max(cands, key=lambda c: c[0])
    if rule == "best":
        chosen = top
    else:
        ok = [c for c in cands if c[0] >= top[0] - top[1]]
        chosen = min(ok, key=lambda c: (len(c[3].selected), -c[2].lam))
    table = [{"alpha": c[2].alpha, "lambda": c[2].lam, "score": c[0], "se": c[1],
              "n_selected": len(c[3].selected), "chosen": c is chosen} for c in cands]
    return chosen[2], table, chosen[3]


@dataclass
class RunConfig:
    representation: str = "wbslr"
    window_days: int = 120
    sgl: sgl.SglConfig = sgl.SglConfig()
    B: int = 20
    member_mode: str = "sgl"
    miner: seqmine.MinerConfig = seqmine.MinerConfig()
    split: tuple = (0.6, 0.2, 0.2)
    threshold: float = 0.5
    tune: bool = False
    tune_alphas: tuple = (0.7,)
    tune_lambdas: int = 10
    tune_ratio: float = 1e-2
    tune_criterion: str = "nll"
    tune_rule: str = "1se"
    threads: int = 1


@dataclass
class FittedPipeline:
    representation: Representation
    kind: str
    model: object  # SglModel or WbSlrModel
    config: sgl.SglConfig
    tuning: list = field(default_factory=list)

    def scores(self, seqs):
        X = self.representation.transform(seqs)
        if self.kind == "bagged-slr":
            return ensemble.vote_fraction(self.model.members, X)
        return self.model.predict_proba(X)


def _span(seqs):
    return max((s.observation_end - s.observation_start).days for s in seqs)


def fit_pipeline(train, val, rc: RunConfig, seed: int = 0) -> FittedPipeline:
    """Fit representation and classifier on ``train``; tune on ``val`` if asked."""
    ytr = np.array([s.label for s in train])
    if len(np.unique(ytr)) < 2:
        raise DataError("degenerate split: training data holds a single class")
    rep = make_representation(rc.representation, _span(train + val), rc.window_days,
                              rc.miner).fit(train)
    Xtr = rep.transform(train)
    cfg = rc.sgl
    if rc.representation in ("afv", "atv", "bps"):
        cfg = replace(cfg, alpha=1.0)
    tuning = []
    if rc.tune:
        yva = np.array([s.label for s in val])
        if len(np.unique(yva)) < 2:
            raise DataError("degenerate split: validation data holds a single class")
        alphas = (1.0,) if rc.representation in ("afv", "atv", "bps") else rc.tune_alphas
        cfg, tuning, _ = tune_sgl(Xtr, ytr, rep.transform(val), yva, rep.grid, cfg,
                                  alphas, rc.tune_lambdas, rc.tune_ratio,
                                  rc.tune_criterion, rep.vocab, rc.tune_rule)
    if rc.representation in ("wbslr", "bagged-slr"):
        model = ensemble.fit_wbslr(Xtr, ytr, rep.grid, cfg, rc.B, seed, rep.vocab,
                                   rc.threads, rc.member_mode)
    else:
        model = sgl.fit(Xtr, ytr, rep.grid, cfg, rep.vocab)
    return FittedPipeline(rep, rc.representation, model, cfg, tuning)


def run_once(seqs, rc: RunConfig, seed: int):
    """One repeat: split by ``seed``, fit, score the test split."""
    y = np.array([s.label for s in seqs])
    tr, va, te = stratified_split(y, rc.split, seed)
    train = [seqs[i] for i in tr]
    val = [seqs[i] for i in va]
    test = [seqs[i] for i in te]
    fitted = fit_pipeline(train, val, rc, seed)
    s = fitted.scores(test)
    return metrics.evaluate(y[te], s, rc.threshold), fitted
