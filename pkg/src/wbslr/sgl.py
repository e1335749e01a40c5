r"""Sparse group lasso with logistic loss, fitted by block coordinate descent.

Minimises

.. math::

    \frac1N \sum_i \log(1 + e^{-y_i (x_i^\top \omega + b)})
    + (1-\alpha)\lambda \sum_{j=1}^T \sqrt{P}\, \|\omega_j\|_2
    + \alpha\lambda \|\omega\|_1

where :math:`\omega_j` is the block of ``P`` coefficients belonging to time
window ``j`` and ``y_i`` is in ``{-1, +1}``.  The intercept ``b`` is optional
and never penalised.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import expit

from .featurize import EventVocabulary, WindowGrid


# inner block solves stop once their step falls below this fraction of the first
INNER_REL = 0.1


class DegenerateLabels(ValueError):
    pass


@dataclass(frozen=True)
class SglConfig:
    alpha: float = 0.7
    lam: float = 0.0005
    tol: float = 1e-8
    max_outer: int = 1000
    max_inner: int = 100
    fit_intercept: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class SglModel:
    omega: np.ndarray
    intercept: float
    grid: WindowGrid
    vocab: EventVocabulary
    config: SglConfig
    objective_trace: list = field(default_factory=list)
    n_iter: int = 0

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        if self.omega.shape != (self.grid.T * len(self.vocab),):
            raise ValueError(f"omega has shape {self.omega.shape}, expected "
                             f"({self.grid.T * len(self.vocab)},)")

    @property
    def P(self) -> int:
        return len(self.vocab)

    @property
    def selected(self) -> set:
        """``{(j, p) : omega_jp != 0}``."""
        nz = np.flatnonzero(self.omega)
        return {(int(k // self.P), int(k % self.P)) for k in nz}

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.omega.size:
            raise ValueError(f"expected {self.omega.size} features, got {X.shape[-1]}")
        return X @ self.omega + self.intercept

    def predict_proba(self, X):
        return expit(self.decision_function(X))

    def to_dict(self) -> dict:
        return {
            "alpha": self.config.alpha,
            "lambda": self.config.lam,
            "fit_intercept": self.config.fit_intercept,
            "intercept": float(self.intercept),
            "grid": {"T": self.grid.T, "window_days": self.grid.window_days},
            "vocab": list(self.vocab.codes),
            "omega": [float(w) for w in self.omega],
            "selected": [[j, p, s] for j, p, s in selected_events(self)],
            "objective_trace": [float(v) for v in self.objective_trace],
            "sgl_config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SglModel":
        cfg = d.get("sgl_config") or {"alpha": d["alpha"], "lambda": d["lambda"],
                                      "fit_intercept": d["fit_intercept"]}
        return cls(np.array(d["omega"], dtype=float), float(d["intercept"]),
                   WindowGrid(d["grid"]["T"], d["grid"]["window_days"]),
                   EventVocabulary(d["vocab"]), SglConfig.from_dict(cfg),
                   list(d.get("objective_trace", [])))


def encode_labels(y) -> np.ndarray:
    """Map external ``{0, 1}`` labels to ``{-1, +1}``; ``+-1`` pass through."""
    y = np.asarray(y)
    if np.all(np.isin(y, (0, 1))):
        return np.where(y == 1, 1.0, -1.0)
    if np.all(np.isin(y, (-1, 1))):
        return y.astype(float)
    raise ValueError("labels must be in {0, 1} or {-1, +1}")


def _check(X, y, omega=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    y = encode_labels(y)
    if y.shape != (X.shape[0],):
        raise ValueError(f"y has {y.shape[0]} entries for {X.shape[0]} rows")
    if omega is not None:
        omega = np.asarray(omega, dtype=float)
        if omega.shape != (X.shape[1],):
            raise ValueError(f"omega has {omega.size} entries for {X.shape[1]} columns")
    return X, y, omega


def _loss_from_margin(m):
    # log(1 + exp(-m)), stable for either sign of m
    return np.logaddexp(0.0, -m).sum() / m.size


def logistic_loss(X, y, omega, intercept=0.0) -> float:
    X, y, omega = _check(X, y, omega)
    return float(_loss_from_margin(y * (X @ omega + intercept)))


def penalty(omega, P, alpha, lam) -> float:
    blocks = np.asarray(omega, dtype=float).reshape(-1, P)
    group = math.sqrt(P) * np.linalg.norm(blocks, axis=1).sum()
    return float((1 - alpha) * lam * group + alpha * lam * np.abs(blocks).sum())


def objective(X, y, omega, intercept, grid: WindowGrid, config: SglConfig) -> float:
    X, y, omega = _check(X, y, omega)
    P = X.shape[1] // grid.T
    if P * grid.T != X.shape[1]:
        raise ValueError(f"{X.shape[1]} columns do not split into {grid.T} windows")
    return logistic_loss(X, y, omega, intercept) + penalty(omega, P, config.alpha, config.lam)


def loss_gradient(X, y, omega, intercept=0.0):
    """Gradient of the mean logistic loss as ``(d_omega, d_intercept)``."""
    X, y, omega = _check(X, y, omega)
    r = -y * expit(-y * (X @ omega + intercept)) / X.shape[0]
    return X.T @ r, float(r.sum())


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


ZERO_SLACK = 1e-12  # relative; absorbs rounding when lambda sits exactly at lambda_max


def _zero_group_ok(g, alpha, lam, P):
    bound = (1 - alpha) * lam * math.sqrt(P)
    return np.linalg.norm(soft_threshold(g, alpha * lam)) <= bound * (1 + ZERO_SLACK)


def _null_intercept(y):
    p = (y > 0).mean()
    return math.log(p / (1 - p))


def lambda_max(X, y, alpha, grid: WindowGrid, fit_intercept=False, rtol=1e-10) -> float:
    """Smallest lambda at which ``omega = 0`` is optimal.

    With ``fit_intercept`` the gradient is taken at the optimal null intercept.
    """
    X, y, _ = _check(X, y)
    P = X.shape[1] // grid.T
    b0 = _null_intercept(y) if fit_intercept else 0.0
    g, _ = loss_gradient(X, y, np.zeros(X.shape[1]), b0)
    blocks = g.reshape(grid.T, P)
    if not np.any(g):
        return 0.0
    if alpha == 0:
        return float(np.linalg.norm(blocks, axis=1).max() / math.sqrt(P))

    def ok(lam):
        return all(_zero_group_ok(gj, alpha, lam, P) for gj in blocks)

    hi = np.abs(g).max() / alpha
    if alpha < 1:
        hi = min(hi, np.linalg.norm(blocks, axis=1).max() / ((1 - alpha) * math.sqrt(P)))
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def _spectral_norm_sq(A, n_iter=50):
    """Largest eigenvalue of ``A.T @ A`` by power iteration from a fixed start."""
    if not np.any(A):
        return 0.0
    G = A.T @ A
    v = np.ones(G.shape[0]) / math.sqrt(G.shape[0])
    est = 0.0
    for _ in range(n_iter):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        est = float(v @ w)
        v = w / nw
    return max(est, float(v @ G @ v))


def _prox_group(z, step, alpha, lam, P):
    u = soft_threshold(z, step * alpha * lam)
    nu = np.linalg.norm(u)
    thr = step * (1 - alpha) * lam * math.sqrt(P)
    if nu <= thr:
        return np.zeros_like(u)
    return (1 - thr / nu) * u


def fit(X, y, grid: WindowGrid, config: SglConfig = SglConfig(),
        vocab: EventVocabulary | None = None) -> SglModel:
    """Cyclic block coordinate descent over the ``T`` window groups.

    Each sweep visits every group: if zero satisfies the group's optimality
    condition the block is set to exactly zero, otherwise the block
    subproblem is minimised by majorised proximal-gradient steps.  The
    intercept, when enabled, gets one safeguarded Newton step per sweep.
    Stops on relative objective change below ``config.tol``.
    """
    X, y, _ = _check(X, y)
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("degenerate labels: both classes are required")
    N, D = X.shape
    T = grid.T
    P = D // T
    if P * T != D:
        raise ValueError(f"{D} columns do not split into {T} windows")
    if vocab is None:
        vocab = EventVocabulary([str(p) for p in range(P)])
    if len(vocab) != P:
        raise ValueError(f"vocabulary has {len(vocab)} codes, data has {P} per window")
    alpha, lam, tol = config.alpha, config.lam, config.tol

    omega = np.zeros(D)
    b = _null_intercept(y) if config.fit_intercept else 0.0
    eta = np.full(N, b)
    blocks = [X[:, j * P:(j + 1) * P] for j in range(T)]
    lips = [_spectral_norm_sq(Xj) / (4 * N) for Xj in blocks]

    def full_obj():
        return float(_loss_from_margin(y * eta)) + penalty(omega, P, alpha, lam)

    def resid(e):
        return -y * expit(-y * e) / N

    trace = [full_obj()]
    sweeps = 0
    for sweeps in range(1, config.max_outer + 1):
        for j, Xj in enumerate(blocks):
            sl = slice(j * P, (j + 1) * P)
            wj = omega[sl]
            if lips[j] == 0.0:
                continue  # all-zero block: coefficient stays 0
            eta_rest = eta - Xj @ wj if np.any(wj) else eta
            if _zero_group_ok(Xj.T @ resid(eta_rest), alpha, lam, P):
                omega[sl] = 0.0
                eta = eta_rest
                continue
            w, eta, lips[j] = _solve_block(Xj, y, eta_rest, wj.copy(), lips[j],
                                           alpha, lam, P, N, tol, config.max_inner)
            omega[sl] = w
        if config.fit_intercept:
            db = _intercept_step(y, eta, N)
            b += db
            eta = eta + db
        trace.append(full_obj())
        prev, cur = trace[-2], trace[-1]
        if abs(prev - cur) <= tol * max(abs(prev), 1e-300):
            break
    return SglModel(omega, b, grid, vocab, config, trace, sweeps)


def _solve_block(Xj, y, eta_rest, w, t, alpha, lam, P, N, tol, max_inner,
                 inner_rel=INNER_REL):
    """Minimise the block subproblem by monotone accelerated proximal gradient.

    The loss is majorised with curvature ``t`` (doubled whenever the bound
    fails); an extrapolated step is only accepted when it does not raise the
    block objective, so the full objective never increases.  Stops when the
    proximal step at the extrapolated point moves no coordinate by more than
    ``max(tol, inner_rel * first_step)``: early sweeps solve blocks loosely,
    and the threshold tightens to ``tol`` as the outer loop converges.
    Returns ``(w, eta, t)``.
    """
    def pen(v):
        return lam * ((1 - alpha) * math.sqrt(P) * np.linalg.norm(v) + alpha * np.abs(v).sum())

    e_w = eta_rest + Xj @ w
    F_w = _loss_from_margin(y * e_w) + pen(w)
    z, e_z = w, e_w
    w_prev, e_prev = w, e_w
    mom = 1.0
    stop = None
    for _ in range(max_inner):
        g = Xj.T @ (-y * expit(-y * e_z) / N)
        f_z = _loss_from_margin(y * e_z)
        while True:
            u = _prox_group(z - g / t, 1.0 / t, alpha, lam, P)
            d = u - z
            e_u = e_z + Xj @ d
            f_u = _loss_from_margin(y * e_u)
            if f_u <= f_z + g @ d + 0.5 * t * (d @ d) + 1e-15 * abs(f_z):
                break
            t *= 2.0
        F_u = f_u + pen(u)
        w_prev, e_prev = w, e_w
        if F_u <= F_w:
            w, e_w, F_w = u, e_u, F_u
        else:
            mom = 1.0  # restart momentum
        mom_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * mom * mom))
        step = np.max(np.abs(d), initial=0.0)
        if stop is None:
            stop = max(tol, inner_rel * step)
        if step < stop:
            break
        a, c = mom / mom_next, (mom - 1.0) / mom_next
        z = w + a * (u - w) + c * (w - w_prev)
        e_z = e_w + a * (e_u - e_w) + c * (e_w - e_prev)
        mom = mom_next
    return w, e_w, t


def _intercept_step(y, eta, N) -> float:
    """One Newton step on the intercept, halved until the loss does not rise."""
    p = expit(-y * eta)
    g = float((-y * p).sum() / N)
    h = float((p * (1 - p)).sum() / N)
    if h <= 0 or g == 0:
        return 0.0
    f0 = _loss_from_margin(y * eta)
    step = -g / h
    for _ in range(30):
        if _loss_from_margin(y * (eta + step)) <= f0:
            return step
        step *= 0.5
    return 0.0


def predict_proba(model: SglModel, x):
    return model.predict_proba(x)


def selected_events(model: SglModel) -> list:
    """``[(window, event, sign)]`` for every nonzero coefficient, in column order."""
    P = model.P
    return [(int(k // P), int(k % P), 1 if model.omega[k] > 0 else -1)
            for k in np.flatnonzero(model.omega)]


def save_model(model: SglModel) -> str:
    return json.dumps(model.to_dict(), indent=1) + "\n"


def load_model(text: str) -> SglModel:
    return SglModel.from_dict(json.loads(text))
