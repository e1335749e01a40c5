"""Independent reference implementations used to check the library.

Nothing here imports solver internals: each oracle recomputes its quantity
from first principles so that agreement is evidence, not tautology.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog
from scipy.special import expit

CLAMP = 1e-12


# -- logistic loss ----------------------------------------------------------

def pm1(y):
    y = np.asarray(y)
    return np.where(y > 0, 1.0, -1.0)


def loss(X, y, w, b=0.0):
    m = pm1(y) * (X @ w + b)
    return float(np.mean(np.log1p(np.exp(-np.abs(m))) + np.maximum(-m, 0)))


def grad(X, y, w, b=0.0):
    s = pm1(y)
    r = -s * expit(-s * (X @ w + b))
    return X.T @ r / X.shape[0], float(r.mean())


def sgl_objective(X, y, w, b, T, P, alpha, lam):
    W = w.reshape(T, P)
    pen = (1 - alpha) * lam * np.sqrt(P) * np.linalg.norm(W, axis=1).sum()
    return loss(X, y, w, b) + pen + alpha * lam * np.abs(w).sum()


def sgl_kkt_violation(X, y, w, b, T, P, alpha, lam, fit_intercept=False):
    """Largest violation of the sparse-group-lasso optimality conditions.

    Zero group: ``||S(g_j, alpha*lam)||_2 <= (1-alpha)*lam*sqrt(P)``.
    Active group: stationarity on nonzero entries, ``|g| <= alpha*lam`` on
    zero entries.  With an intercept its partial derivative must vanish.
    """
    g, gb = grad(X, y, w, b)
    G, W = g.reshape(T, P), w.reshape(T, P)
    a1, a2 = alpha * lam, (1 - alpha) * lam * np.sqrt(P)
    worst = abs(gb) if fit_intercept else 0.0
    for j in range(T):
        gj, wj = G[j], W[j]
        nrm = np.linalg.norm(wj)
        if nrm == 0:
            st = np.sign(gj) * np.maximum(np.abs(gj) - a1, 0)
            worst = max(worst, np.linalg.norm(st) - a2)
            continue
        nz = wj != 0
        stat = gj[nz] + a2 * wj[nz] / nrm + a1 * np.sign(wj[nz])
        worst = max(worst, np.max(np.abs(stat)))
        if np.any(~nz):
            worst = max(worst, np.max(np.abs(gj[~nz])) - a1)
    return float(max(worst, 0.0))


def lasso_logistic(X, y, lam, tol=1e-14, max_iter=200000):
    """FISTA on ``mean logistic loss + lam * ||w||_1`` with a fixed step."""
    N, D = X.shape
    L = np.linalg.norm(X, 2) ** 2 / (4 * N)
    step = 1.0 / L
    w = np.zeros(D)
    z, t = w.copy(), 1.0
    for _ in range(max_iter):
        g, _ = grad(X, y, z)
        u = z - step * g
        w_new = np.sign(u) * np.maximum(np.abs(u) - step * lam, 0)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        z = w_new + ((t - 1) / t_new) * (w_new - w)
        if np.max(np.abs(w_new - w)) < tol:
            return w_new
        w, t = w_new, t_new
    return w


# -- metrics ------------------------------------------------------------------

def auc_pairs(labels, scores):
    """Fraction of (positive, negative) pairs ranked correctly, ties 1/2."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    pos, neg = scores[labels == 1], scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (pos.size * neg.size)


# -- sequential patterns -----------------------------------------------------

def contains_brute(sequence, elements):
    """Try every order-preserving choice of distinct visits."""
    seq = [set(v) for v in sequence]
    for idx in itertools.combinations(range(len(seq)), len(elements)):
        if all(set(e) <= seq[i] for e, i in zip(elements, idx)):
            return True
    return False


def frequent_brute(sequences, min_count, max_length):
    """Every pattern of <= max_length items with support >= min_count."""
    codes = sorted({c for s in sequences for v in s for c in v})
    itemsets = [tuple(c) for k in range(1, len(codes) + 1)
                for c in itertools.combinations(codes, k)]
    out = {}

    def extend(prefix, size):
        for iset in itemsets:
            if size + len(iset) > max_length:
                continue
            pat = prefix + (iset,)
            sup = sum(contains_brute(s, pat) for s in sequences)
            if sup >= min_count:
                out[pat] = sup
            # no anti-monotone pruning: recurse whenever there is room
            extend(pat, size + len(iset))

    extend((), 0)
    return out


# -- aggregation weights ------------------------------------------------------

def weight_design(probs, mask):
    probs = np.asarray(probs, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    k = mask.sum(axis=1)
    keep = k > 0
    return (probs * mask)[keep] / k[keep, None], keep


def nll(w, A, y):
    yh = np.clip(A @ w, CLAMP, 1 - CLAMP)
    return float(-np.sum(y * np.log(yh) + (1 - y) * np.log(1 - yh)))


def weight_kkt(w, probs, mask, y, tol=1e-5, band=1e-9):
    """Check nonnegative-weight optimality of the clamped OOB NLL.

    Away from the clamp bounds the NLL is smooth; rows whose prediction sits
    within ``band`` of a bound contribute any convex combination of their
    one-sided slopes (zero on the flat side).  The conditions hold when some
    such combination gives ``|g_b| <= tol`` where ``w_b > 0`` and
    ``g_b >= -tol`` where ``w_b = 0``; this is a linear feasibility problem.

    Returns ``(ok, smooth_residual)``.
    """
    A, keep = weight_design(probs, mask)
    y = np.asarray(y, dtype=float)[keep]
    w = np.asarray(w, dtype=float)
    z = A @ w
    lo, hi = CLAMP, 1 - CLAMP
    near = (np.abs(z - lo) <= band) | (np.abs(z - hi) <= band)
    inside = (z > lo) & (z < hi) & ~near
    zc = np.clip(z, lo, hi)
    slope = -y / zc + (1 - y) / (1 - zc)
    g0 = A[inside].T @ slope[inside]
    M = A[near].T * slope[near]  # (B, n_near)
    pos = w > 0

    def resid(g):
        return float(max(np.max(np.abs(g[pos]), initial=0.0),
                         np.max(-g[~pos], initial=0.0)))

    smooth = resid(g0 + M.sum(axis=1)) if near.any() else resid(g0)
    if not near.any():
        return smooth <= tol, smooth
    # rows: -tol <= g0 + M th <= tol for pos; -(g0 + M th) <= tol for zeros
    A_ub = np.vstack([M[pos], -M[pos], -M[~pos]])
    b_ub = np.concatenate([tol - g0[pos], tol + g0[pos], tol + g0[~pos]])
    res = linprog(np.zeros(M.shape[1]), A_ub=A_ub, b_ub=b_ub,
                  bounds=[(0, 1)] * M.shape[1], method="highs")
    return res.status == 0, smooth


# -- suite bookkeeping (filled by conftest and the acceptance tests) ---------

AUDIT = {"fits": 0, "trace_violations": 0, "weight_solves": 0, "weight_violations": 0}
ACCEPTANCE = {}


def record(n: int, ok: bool, line: str):
    ACCEPTANCE[n] = (bool(ok), line)
    print(f"{'PASS' if ok else 'FAIL'} [{n:>2}] {line}")
