"""Suite-wide audits.

Every SGL model built anywhere in the suite has its objective trace checked
for monotone descent, and every weight-learning solve is checked against the
weight optimality oracle and against the starting point ``w = 1``.
"""
from __future__ import annotations

import numpy as np
import pytest

import oracles
from wbslr import ensemble, sgl

TRACE_SLACK = 1e-12
WEIGHT_KKT_TOL = 1e-5

_orig_post_init = sgl.SglModel.__post_init__
_orig_solve = ensemble.solve_weights


def _audited_post_init(self):
    _orig_post_init(self)
    tr = np.asarray(self.objective_trace, dtype=float)
    oracles.AUDIT["fits"] += 1
    if tr.size > 1 and np.any(np.diff(tr) > TRACE_SLACK):
        oracles.AUDIT["trace_violations"] += 1
        k = int(np.argmax(np.diff(tr)))
        raise AssertionError(f"objective increased at sweep {k + 1}: "
                             f"{tr[k]!r} -> {tr[k + 1]!r}")


def _audited_solve(probs, mask, y, *args, **kw):
    res = _orig_solve(probs, mask, y, *args, **kw)
    oracles.AUDIT["weight_solves"] += 1
    ok, smooth = oracles.weight_kkt(res.w, probs, mask, y, tol=WEIGHT_KKT_TOL)
    A, keep = oracles.weight_design(probs, mask)
    yk = np.asarray(y, dtype=float)[keep]
    at_one = oracles.nll(np.ones(A.shape[1]), A, yk)
    at_w = oracles.nll(res.w, A, yk)
    if kw.get("w0") is not None:
        at_one = oracles.nll(np.maximum(np.asarray(kw["w0"], float), 0), A, yk)
    if not ok or at_w > at_one + 1e-9 * max(1.0, abs(at_one)):
        oracles.AUDIT["weight_violations"] += 1
        raise AssertionError(f"weight solve not optimal: kkt_ok={ok} smooth_residual="
                             f"{smooth:.3g} nll={at_w!r} nll(w=1)={at_one!r}")
    return res


sgl.SglModel.__post_init__ = _audited_post_init
ensemble.solve_weights = _audited_solve


def pytest_terminal_summary(terminalreporter):
    tr = terminalreporter
    if oracles.ACCEPTANCE:
        tr.section("acceptance criteria")
        for n in sorted(oracles.ACCEPTANCE):
            ok, line = oracles.ACCEPTANCE[n]
            tr.write_line(f"{'PASS' if ok else 'FAIL'} [{n:>2}] {line}")
    a = oracles.AUDIT
    tr.write_line(f"audit: {a['fits']} SGL models checked for monotone descent "
                  f"({a['trace_violations']} violations); {a['weight_solves']} weight "
                  f"solves checked ({a['weight_violations']} violations)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
