"""Weighted bagging of SGL members (WB-SLR) and the majority-vote baseline.

Each bootstrap gets its own SGL model.  Aggregation weights ``w >= 0`` are
learned on out-of-bag (OOB) predictions by minimising the negative
log-likelihood of

    yhat_i(w) = (1 / |K_i|) * sum_{b in K_i} w_b * p_b(x_i)

where ``K_i`` is the set of members whose bootstrap left row ``i`` out.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sgl
from .featurize import EventVocabulary, WindowGrid

log = logging.getLogger(__name__)

CLAMP = 1e-12
MAX_RESAMPLE = 20


class EnsembleError(RuntimeError):
    pass


@dataclass(frozen=True)
class Bootstrap:
    in_bag: np.ndarray
    oob: np.ndarray

    @classmethod
    def from_in_bag(cls, in_bag, n: int) -> "Bootstrap":
        in_bag = np.asarray(in_bag, dtype=int)
        if in_bag.size != n or in_bag.min(initial=0) < 0 or in_bag.max(initial=0) >= n:
            raise ValueError("in_bag must hold n indices in [0, n)")
        oob = np.setdiff1d(np.arange(n), in_bag)
        if oob.size == 0:
            log.warning("bootstrap has an empty out-of-bag set")
        return cls(in_bag, oob)

    @property
    def n(self) -> int:
        return self.in_bag.size


@dataclass
class EnsembleMember:
    bootstrap: Bootstrap
    model: sgl.SglModel

    def predict_proba(self, X):
        return self.model.predict_proba(X)


@dataclass
class AggregationWeights:
    w: np.ndarray
    n_iter: int = 0
    converged: bool = False
    nll: float = float("nan")
    nll_init: float = float("nan")
    uncovered: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if np.any(self.w < 0):
            raise ValueError("aggregation weights must be nonnegative")


@dataclass
class WbSlrModel:
    members: list
    weights: AggregationWeights
    sgl_config: sgl.SglConfig
    seed: int

    def __post_init__(self):
        if len(self.members) != self.weights.w.size:
            raise ValueError("one weight per member required")

    @property
    def B(self) -> int:
        return len(self.members)

    def predict_proba(self, X):
        return predict(self, X)

    def best_member(self) -> EnsembleMember:
        """Member with the largest weight (lowest index on ties)."""
        return self.members[int(np.argmax(self.weights.w))]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "B": self.B,
            "sgl_config": self.sgl_config.to_dict(),
            "weights": [float(v) for v in self.weights.w],
            "members": [dict(m.model.to_dict(), in_bag=[int(i) for i in m.bootstrap.in_bag])
                        for m in self.members],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WbSlrModel":
        members = []
        for md in d["members"]:
            model = sgl.SglModel.from_dict(md)
            members.append(EnsembleMember(
                Bootstrap.from_in_bag(md["in_bag"], len(md["in_bag"])), model))
        return cls(members, AggregationWeights(np.array(d["weights"], dtype=float)),
                   sgl.SglConfig.from_dict(d["sgl_config"]), int(d["seed"]))


def _bootstrap_rng(seed, b, attempt=0):
    return np.random.default_rng([int(seed), int(b), int(attempt)])


def draw_bootstraps(n: int, b_count: int, seed: int) -> list:
    """``b_count`` independent bootstraps of ``n`` rows, deterministic in ``seed``."""
    if n < 2:
        raise ValueError("need at least 2 samples to bootstrap")
    if b_count < 2:
        raise ValueError("need at least 2 bootstraps")
    return [Bootstrap.from_in_bag(_bootstrap_rng(seed, b).integers(0, n, n), n)
            for b in range(b_count)]


def _refit_on_selected(X, y, model: sgl.SglModel, config: sgl.SglConfig):
    mask = np.zeros(X.shape[1])
    mask[np.flatnonzero(model.omega)] = 1.0
    cfg = sgl.SglConfig(alpha=1.0, lam=0.0, tol=config.tol, max_outer=config.max_outer,
                        max_inner=config.max_inner, fit_intercept=config.fit_intercept)
    return sgl.fit(X * mask, y, model.grid, cfg, model.vocab)


def fit_members(X, y, bootstraps, sgl_config: sgl.SglConfig, grid: WindowGrid,
                vocab: EventVocabulary | None = None, seed: int = 0,
                threads: int = 1, mode: str = "sgl") -> list:
    """Fit one SGL model per bootstrap on its in-bag rows.

    Bootstraps whose in-bag rows hold a single class are redrawn (up to 20
    times) from a seed derived from ``(seed, b, attempt)``.  With
    ``mode="refit"`` each member is refitted without penalty on its selected
    columns only.  Results come back in bootstrap order whatever ``threads``.
    """
    if mode not in ("sgl", "refit"):
        raise ValueError(f"unknown member mode {mode!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    boots = []
    for b, boot in enumerate(bootstraps):
        attempt = 0
        while len(np.unique(y[boot.in_bag])) < 2:
            attempt += 1
            if attempt > MAX_RESAMPLE:
                raise EnsembleError(f"bootstrap {b} stays single-class after "
                                    f"{MAX_RESAMPLE} redraws")
            boot = Bootstrap.from_in_bag(_bootstrap_rng(seed, b, attempt).integers(0, n, n), n)
        boots.append(boot)

    def work(boot):
        Xb, yb = X[boot.in_bag], y[boot.in_bag]
        model = sgl.fit(Xb, yb, grid, sgl_config, vocab)
        if mode == "refit":
            model = _refit_on_selected(Xb, yb, model, sgl_config)
        return EnsembleMember(boot, model)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(work, boots))
    return [work(b) for b in boots]


def member_probabilities(members, X) -> np.ndarray:
    """``(N, B)`` matrix of member probabilities."""
    return np.column_stack([m.predict_proba(X) for m in members])


def oob_mask(members, n: int) -> np.ndarray:
    """``(N, B)`` boolean matrix, True where row ``i`` is out of bag for ``b``."""
    mask = np.zeros((n, len(members)), dtype=bool)
    for b, m in enumerate(members):
        mask[m.bootstrap.oob, b] = True
    return mask


def oob_scores(probs, mask, w):
    """OOB aggregate ``sum_b w_b p_ib / |K_i|`` over covering members.

    NaN where no member covers the row.
    """
    probs = np.asarray(probs, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    k = mask.sum(axis=1)
    out = np.full(probs.shape[0], np.nan)
    cov = k > 0
    out[cov] = (np.where(mask, probs, 0.0)[cov] @ np.asarray(w, dtype=float)) / k[cov]
    return out


def oob_predict(members, X, weights):
    """Return ``(scores, covered)`` where ``covered`` is a boolean row mask."""
    X = np.asarray(X, dtype=float)
    w = weights.w if isinstance(weights, AggregationWeights) else np.asarray(weights, float)
    mask = oob_mask(members, X.shape[0])
    covered = mask.any(axis=1)
    if not covered.any():
        raise EnsembleError("B too small: no row is out of bag for any member")
    return oob_scores(member_probabilities(members, X), mask, w), covered


# -- weight learning --------------------------------------------------------

def _design(probs, mask):
    """Rows of the linear map ``w -> yhat`` restricted to covered rows."""
    probs = np.asarray(probs, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    k = mask.sum(axis=1)
    cov = k > 0
    A = np.where(mask, probs, 0.0)[cov] / k[cov, None]
    return A, cov


def oob_nll(w, A, y) -> float:
    yh = np.clip(A @ w, CLAMP, 1 - CLAMP)
    return float(-(y * np.log(yh) + (1 - y) * np.log(1 - yh)).sum())


def _nll_parts(w, A, y):
    """NLL, gradient and per-row curvature; clamped rows contribute zero slope."""
    raw = A @ w
    yh = np.clip(raw, CLAMP, 1 - CLAMP)
    f = float(-(y * np.log(yh) + (1 - y) * np.log(1 - yh)).sum())
    live = (raw > CLAMP) & (raw < 1 - CLAMP)
    d = np.where(live, -y / yh + (1 - y) / (1 - yh), 0.0)
    h = np.where(live, y / yh**2 + (1 - y) / (1 - yh)**2, 0.0)
    return f, A.T @ d, h


def projected_gradient(w, g):
    return np.where(w > 0, g, np.minimum(g, 0.0))


def _cg(hv, g, max_iter, rtol):
    """Truncated CG for ``H d = -g``; stops early on nonpositive curvature."""
    d = np.zeros_like(g)
    r = -g.copy()
    p = r.copy()
    rr = r @ r
    stop = rtol * np.sqrt(rr)
    for _ in range(max_iter):
        Hp = hv(p)
        curv = p @ Hp
        if curv <= 1e-300:
            return d if np.any(d) else -g
        a = rr / curv
        d += a * p
        r -= a * Hp
        rr_new = r @ r
        if np.sqrt(rr_new) <= stop:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return d


def solve_weights(probs, mask, y, max_iter: int = 500, gtol: float = 1e-6,
                  w0=None) -> AggregationWeights:
    """Minimise the OOB negative log-likelihood over ``w >= 0``.

    Projected truncated Newton: a Newton-CG direction on the free variables
    (those not held at zero by a nonnegative gradient), a projected
    backtracking line search, and a projected-gradient fallback when the
    Newton direction does not descend.  The clamp only guards the logarithm:
    a step is rejected if it pushes a negative row's prediction up to the
    upper clamp (or a positive row's down to the lower one), where the flat
    clamped loss would hide the barrier.  Starts from ``w = 1``; stops when
    the projected gradient's infinity norm drops below ``gtol``, after
    ``max_iter`` iterations, or when no step reduces the objective.
    """
    y = np.asarray(y, dtype=float)
    A, cov = _design(probs, mask)
    if not cov.any():
        raise EnsembleError("B too small: no row is out of bag for any member")
    uncovered = np.flatnonzero(~cov)
    if uncovered.size:
        log.warning("%d rows are in bag for every member; dropped from weight learning",
                    uncovered.size)
    y = y[cov]
    B = A.shape[1]
    w = np.ones(B) if w0 is None else np.maximum(np.asarray(w0, dtype=float), 0.0)
    f, g, h = _nll_parts(w, A, y)
    if not np.isfinite(f):
        raise EnsembleError("non-finite OOB log-likelihood")
    f_init = f

    def trapped(w_):
        # rows whose clamp turns a log barrier into a flat cliff
        z = A @ w_
        return ((y == 0) & (z >= 1 - CLAMP)) | ((y == 1) & (z <= CLAMP))

    trapped_now = trapped(w)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pg = projected_gradient(w, g)
        if np.max(np.abs(pg)) < gtol:
            converged = True
            it -= 1
            break
        free = (w > 0) | (g < 0)
        AF = A[:, free]

        def hv(v, AF=AF, h=h):
            return AF.T @ (h * (AF @ v))

        gF = g[free]
        dF = _cg(hv, gF, max_iter=int(free.sum()),
                 rtol=min(0.5, np.sqrt(np.linalg.norm(gF))))
        step_ok = False
        for direction in (dF, -gF):
            d = np.zeros(B)
            d[free] = direction
            if g @ d >= 0:
                continue
            t = 1.0
            for _ in range(60):
                w_new = np.maximum(w + t * d, 0.0)
                if np.any(trapped(w_new) & ~trapped_now):
                    t *= 0.5
                    continue
                f_new = oob_nll(w_new, A, y)
                if f_new <= f + 1e-4 * (g @ (w_new - w)) and f_new < f:
                    step_ok = True
                    break
                t *= 0.5
            if step_ok:
                break
        if not step_ok:
            break
        w = w_new
        f, g, h = _nll_parts(w, A, y)
        if not np.isfinite(f):
            raise EnsembleError("non-finite OOB log-likelihood")
    z = A @ w
    if not converged or np.any((y == 1) & (z >= 1 - CLAMP - KINK_BAND)):
        w_p, certified = _polish(w, A, y, gtol)
        f_p = oob_nll(w_p, A, y)
        if f_p <= f + 1e-12 * max(1.0, abs(f)):
            w, f, converged = w_p, f_p, certified or converged
    return AggregationWeights(w, it, converged, f, f_init, uncovered)


KINK_BAND = 1e-7


def _polish(w, A, y, gtol, max_iter=200):
    """Active-set Newton refinement at the upper clamp of positive rows.

    A positive row whose prediction reaches ``1 - CLAMP`` sits on a kink:
    its loss is flat above and has slope ``-1/(1 - CLAMP)`` below.  Rows on
    the kink are held there by equality constraints, coordinates at zero are
    held by bounds, and a Newton step on the remaining smooth rows is taken
    up to the first blocking bound or kink.  Constraints are released when
    their multiplier has the wrong sign.  Returns ``(w, certified)``.
    """
    hi = 1 - CLAMP
    s_kink = -1.0 / hi
    pos = y == 1
    B = A.shape[1]
    w = w.copy()
    z = A @ w
    kink = pos & (np.abs(z - hi) <= KINK_BAND)
    fixed = w == 0
    f = oob_nll(w, A, y)
    for _ in range(max_iter):
        z = A @ w
        flat = pos & ~kink & (z > hi)
        smooth = ~kink & ~flat
        zs = z[smooth]
        ys = y[smooth]
        with np.errstate(divide="ignore"):  # only the branch np.where discards can blow up
            d_row = np.where(ys == 1, -1.0 / zs, 1.0 / (1 - zs))
            h_row = np.where(ys == 1, 1.0 / zs**2, 1.0 / (1 - zs)**2)
        As = A[smooth]
        g = As.T @ d_row
        F = ~fixed
        nF, K = int(F.sum()), np.flatnonzero(kink)
        H = As[:, F].T @ (h_row[:, None] * As[:, F])
        H += 1e-12 * max(1.0, np.trace(H) / max(nF, 1)) * np.eye(nF)
        AK = A[K][:, F]
        kkt = np.block([[H, AK.T], [AK, np.zeros((K.size, K.size))]])
        rhs = np.concatenate([-g[F], hi - z[K]])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        d = np.zeros(B)
        d[F] = sol[:nF]
        mu = sol[nF:]
        if np.max(np.abs(d), initial=0.0) <= 1e-13 * (1 + np.max(w)):
            # stationary for the current active sets: check multipliers
            r = g + A[K].T @ mu
            bad_fixed = fixed & (r < -gtol)
            bad_up, bad_down = mu > gtol, mu < s_kink - gtol
            if not (bad_fixed.any() or bad_up.any() or bad_down.any()):
                return w, True
            if bad_fixed.any():
                fixed[np.argmin(np.where(bad_fixed, r, np.inf))] = False
            else:
                k = int(np.argmax(np.maximum(mu - gtol, s_kink - gtol - mu)))
                kink[K[k]] = False
            continue
        Ad = A @ d
        t_max, block = 1.0, None
        for idx in np.flatnonzero(F & (d < 0)):
            t = w[idx] / -d[idx]
            if t < t_max:
                t_max, block = t, ("w", idx)
        cross = (smooth & pos & (Ad > 0)) | (flat & (Ad < 0))
        for i in np.flatnonzero(cross):
            t = (hi - z[i]) / Ad[i]
            if 0 <= t < t_max:
                t_max, block = t, ("row", i)
        neg_up = (y == 0) & (Ad > 0)
        if neg_up.any():
            t_max = min(t_max, 0.99 * np.min((hi - z[neg_up]) / Ad[neg_up]))
        slope = g @ d  # kink rows move along their constraint at no first-order cost
        t, ok = t_max, False
        for _ in range(50):
            w_new = np.maximum(w + t * d, 0.0)
            f_new = oob_nll(w_new, A, y)
            if f_new <= f + 1e-4 * t * min(slope, 0.0) + 1e-15 * abs(f):
                ok = True
                break
            t *= 0.5
            block = None
        if not ok:
            return w, False
        w, f = w_new, f_new
        if block is not None and t == t_max:
            if block[0] == "w":
                w[block[1]] = 0.0
                fixed[block[1]] = True
            else:
                kink[block[1]] = True
    return w, False


def learn_weights(members, X, y, **kw) -> AggregationWeights:
    X = np.asarray(X, dtype=float)
    return solve_weights(member_probabilities(members, X), oob_mask(members, X.shape[0]),
                         np.asarray(y), **kw)


def predict(model: WbSlrModel, X):
    """Weighted mean of member probabilities, normalised by the weight sum."""
    w = model.weights.w
    total = w.sum()
    if total <= 0:
        raise EnsembleError("all aggregation weights are zero")
    probs = member_probabilities(model.members, np.atleast_2d(X))
    out = np.clip(probs @ w / total, 0.0, 1.0)
    return out if np.ndim(X) > 1 else out[0]


def bagged_slr_predict(members, X):
    """Majority vote of members thresholded at 0.5; ties vote positive."""
    probs = member_probabilities(members, np.atleast_2d(X))
    votes = (probs >= 0.5).sum(axis=1)
    out = (2 * votes >= probs.shape[1]).astype(int)
    return out if np.ndim(X) > 1 else int(out[0])


def vote_fraction(members, X):
    """Fraction of members voting positive; a ranking score for the vote baseline."""
    probs = member_probabilities(members, np.atleast_2d(X))
    return (probs >= 0.5).mean(axis=1)


def fit_wbslr(X, y, grid: WindowGrid, sgl_config: sgl.SglConfig, B: int = 20,
              seed: int = 0, vocab: EventVocabulary | None = None, threads: int = 1,
              mode: str = "sgl") -> WbSlrModel:
    """Bootstrap, fit members, learn OOB weights."""
    X = np.asarray(X, dtype=float)
    boots = draw_bootstraps(X.shape[0], B, seed)
    members = fit_members(X, y, boots, sgl_config, grid, vocab, seed, threads, mode)
    weights = learn_weights(members, X, y)
    if not np.any(weights.w > 0):
        raise EnsembleError("weight learning returned all-zero weights")
    return WbSlrModel(members, weights, sgl_config, seed)


def save_model(model: WbSlrModel) -> str:
    return json.dumps(model.to_dict(), indent=1) + "\n"


def load_model(text: str) -> WbSlrModel:
    return WbSlrModel.from_dict(json.loads(text))
