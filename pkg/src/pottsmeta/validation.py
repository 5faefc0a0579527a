"""Self-checks of the package, grouped into a fast and a full suite.

Each check returns a :class:`CheckResult`; :func:`run_suite` collects them
into a machine-readable report used by ``potts validate``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .landscape import (
    beta2,
    beta3,
    classify_regime,
    critical_points,
    f_r,
    field_thresholds,
    find_beta1,
    h_fun,
    line_profile,
    m0_of_r,
    m0_root,
    r1_closed_form,
    r2_closed_form,
    r_zero_family,
)
from .model import A_MATRIX, LatticeState, ModelParams, a_hessian_spectrum, gradient, hessian, hessian_det, potential
from .simulator import (
    RateTable,
    aggregation_residual,
    cycle_decomposition_check,
    detailed_balance_asymmetry,
    rate_table,
    scaling_study,
    stationarity_residual,
)

__all__ = ["CheckResult", "run_suite", "FAST_CHECKS", "FULL_CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "seconds": self.seconds}


def _interior_sample(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.dirichlet([2.0, 2.0, 2.0], size=n)
    return x[:, 1:]


def check_constants() -> tuple:
    m0, b3, b2, b1 = m0_root(), beta3(), beta2(), find_beta1()
    ok = abs(m0 - 0.2076) <= 1e-3 and abs(b3 - 1.8304) <= 1e-3 and abs(b2 - 1.8484) <= 1e-3 and b1 == 2.0
    return ok, f"m0={m0:.10f} beta3={b3:.10f} beta2={b2:.10f} beta1={b1!r}"


def check_census() -> tuple:
    expected = {1.5: 1, 1.9: 7, 2.0: 4, 2.4: 7}
    parts, ok = [], True
    for b, n in expected.items():
        cps = critical_points(ModelParams(b))
        ok &= len(cps) == n
        parts.append(f"beta={b}: {len(cps)}")
    cps = critical_points(ModelParams(beta3()))
    ok &= sum(c.degenerate for c in cps) == 3
    cps = critical_points(ModelParams(2.0))
    ok &= [c.label for c in cps if c.degenerate] == ["p"]
    return ok, ", ".join(parts)


def check_thresholds() -> tuple:
    ok = r1_closed_form(2.0) == 0.0 and r_zero_family(2.0) == 0.0
    ok &= abs(r2_closed_form(2.0) - float(h_fun(1.0 / 6.0))) <= 1e-12
    grid = np.linspace(2.0, 6.0, 51)[1:]
    ok &= all(r1_closed_form(float(b)) < r2_closed_form(float(b)) for b in grid)
    return ok, f"r2(2)={r2_closed_form(2.0):.15f}"


def check_stationarity() -> tuple:
    worst = 0.0
    for N in (6, 8, 12):
        for b in (1.5, 2.4):
            for r in (0.0, 0.3):
                worst = max(worst, stationarity_residual(N, ModelParams(b, r, math.pi if r else 0.0)))
    asym = detailed_balance_asymmetry(6, ModelParams(1.9))
    return worst <= 1e-10 and asym > 1e-3, f"max residual {worst:.3e}, asymmetry {asym:.3f}"


def check_mutant() -> tuple:
    params = ModelParams(1.9)
    t = rate_table(8, params)
    rates = t.rates.copy()
    rates[len(rates) // 2, 0] *= 1.01
    res = stationarity_residual(8, params, RateTable(8, t.states, rates, t.targets))
    return res > 1e-10, f"mutant residual {res:.3e} (must exceed 1e-10)"


def check_aggregation() -> tuple:
    worst = max(aggregation_residual(N, ModelParams(2.4, 0.3, math.pi)) for N in (3, 5, 7))
    return worst <= 1e-13, f"max relative difference {worst:.3e}"


def check_derivatives() -> tuple:
    X = _interior_sample(100, seed=1)
    X = X[np.all(np.column_stack([X, 1 - X.sum(axis=1)]) > 0.02, axis=1)]
    worst = 0.0
    h = 1e-6
    for k, x in enumerate(X):
        params = ModelParams(1.5 + (k % 5) * 0.5, 0.1 * (k % 3), (k % 6) * math.pi / 3)
        g, H = gradient(x, params), hessian(x, params)
        for d in range(2):
            e = np.zeros(2)
            e[d] = h
            fd = (potential(x + e, params) - potential(x - e, params)) / (2 * h)
            worst = max(worst, abs(fd - g[d]) / max(1.0, abs(g[d])))
            gd = (gradient(x + e, params) - gradient(x - e, params)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(gd - H[:, d]) / np.maximum(1.0, np.abs(H[:, d])))))
    return worst <= 1e-6, f"max relative error {worst:.3e}"


def check_identities() -> tuple:
    worst = 0.0
    for b in (1.7, 2.0, 2.4, 3.0):
        for t in np.linspace(0.01, 0.49, 97):
            for i in range(3):
                lp = line_profile(i, float(t), b)
                worst = max(worst, abs(lp.dF_dt - lp.identity))
    for r in np.linspace(0.0, 0.9, 91):
        m = m0_of_r(float(r))
        worst = max(worst, abs(float(f_r(m, float(r))) - 2.0 / (9.0 * m * (1.0 - 2.0 * m))) / f_r(m, float(r)))
    X = _interior_sample(400, seed=2)
    X = X[np.all(np.column_stack([X, 1 - X.sum(axis=1)]) > 1e-3, axis=1)]
    params = ModelParams(2.4)
    H = hessian(X, params)
    det_direct = np.linalg.det(H)
    det_closed = hessian_det(X, params)
    worst = max(worst, float(np.max(np.abs(det_direct - det_closed) / np.maximum(1.0, np.abs(det_closed)))))
    for x, Hx in zip(X, H):
        tr = float(np.trace(A_MATRIX @ Hx))
        worst = max(worst, abs(tr - a_hessian_spectrum(x, params).trace) / max(1.0, abs(tr)))
    return worst <= 1e-9, f"max deviation {worst:.3e}"


def check_cycle() -> tuple:
    params = ModelParams(2.4, 0.05, 1.0)
    Ns = np.array([50, 100, 200, 400])
    res = [cycle_decomposition_check(LatticeState(N - 7 * N // 10, 3 * N // 10, 4 * N // 10), params) for N in Ns]
    slope = float(np.polyfit(np.log(Ns), np.log(res), 1)[0])
    return slope <= -0.9, f"log-log slope {slope:.3f}"


def check_regimes() -> tuple:
    labels = {
        (2.4, 0.0, 0.0): "ZF-I",
        (1.86, 0.0, 0.0): "ZF-II",
        (2.4, 0.02, math.pi): "Field-π-I",
        (2.4, 0.08, math.pi): "Field-π-II",
        (2.4, 0.2, math.pi): "Field-π-III",
    }
    got = {k: classify_regime(ModelParams(*k)).regime for k in labels}
    ok = got == labels
    return ok, ", ".join(f"{k[0]},{k[1]}: {v}" for k, v in got.items())


def check_scaling_exact() -> tuple:
    res = scaling_study(ModelParams(6.0), [10, 14, 18], method="exact")
    return res.relative_slope_error <= 0.1, f"slope {res.slope:.4f} vs depth {res.depth:.4f}"


def check_scaling_simulation() -> tuple:
    res = scaling_study(ModelParams(2.4), [30, 40, 50], replicas=200, seed=7, budget_factor=40.0)
    return res.relative_slope_error <= 0.15, f"slope {res.slope:.4f} vs depth {res.depth:.4f}"


FAST_CHECKS = {
    "constants": check_constants,
    "census": check_census,
    "thresholds": check_thresholds,
    "stationarity": check_stationarity,
    "mutant-detected": check_mutant,
    "aggregation": check_aggregation,
    "derivatives": check_derivatives,
    "identities": check_identities,
    "cycle-decomposition": check_cycle,
    "regimes": check_regimes,
}

FULL_CHECKS = {
    **FAST_CHECKS,
    "scaling-exact": check_scaling_exact,
    "scaling-simulation": check_scaling_simulation,
}


def run_suite(level: str = "fast") -> list:
    """Run the ``fast`` or ``full`` suite and return the results."""
    checks = {"fast": FAST_CHECKS, "full": FULL_CHECKS}.get(level)
    if checks is None:
        raise ValueError("level must be 'fast' or 'full'")
    out = []
    for name, fn in checks.items():
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
