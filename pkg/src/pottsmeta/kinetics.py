"""Eyring-Kramers quantities, limit chains and transition-time predictions.

For a valley ``i`` of depth ``d_i`` the reduced chain leaves the valley on the
time scale ``2 pi N exp(d_i N)``.  On that scale the valley label converges to
a Markov chain whose rate from ``i`` through a gate saddle ``s`` is
``omega(s) / nu(m_i)``, where

* ``nu(m) = (x0 x1 x2)^(-1/2) / sqrt(beta^2 det hess F(m))`` is the mass of a
  minimum, and
* ``omega(s) = (x0 x1 x2)^(-1/2) w(s) mu / sqrt(-det hess F(s))`` is the
  conductance of a saddle, with ``w(x) = (x0 x1 x2)^(1/3)`` and ``-mu`` the
  negative eigenvalue of ``A hess F(s)``.

Valleys deeper than the scale are absorbing on it.  Shallower valleys are
visited only briefly and are traced out through their absorption
probabilities.  Several gates out of one valley add their conductances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, DegenerateRegime, NotASaddle, NoValleys
from .landscape.critical import DEGENERACY_TOL, SADDLE, CriticalPoint
from .landscape.regime import RegimeReport
from .model import ModelParams, a_hessian_spectrum, hessian_det

__all__ = [
    "EKQuantities",
    "LimitChain",
    "TransitionPrediction",
    "weight",
    "nu_mass",
    "omega_saddle",
    "ek_quantities",
    "limit_chain",
    "predict_transition",
]

#: Relative tolerance for grouping valley depths into one time scale.
DEPTH_TOL = 1e-9


def weight(x) -> float:
    """The weight ``w(x) = (x0 x1 x2)^(1/3)`` of the reduced jump rates."""
    c = x.coords if isinstance(x, CriticalPoint) else np.asarray(x, dtype=float)
    if c.shape[-1] == 2:
        c = np.array([1.0 - c[0] - c[1], c[0], c[1]])
    return float(np.prod(c) ** (1.0 / 3.0))


def _xy(c: CriticalPoint) -> tuple:
    return (c.location.x1, c.location.x2)


def nu_mass(m: CriticalPoint, params: ModelParams) -> float:
    """Mass ``(x0 x1 x2)^(-1/2) / sqrt(beta^2 det hess F)`` of a local minimum.

    Raises
    ------
    DegenerateInput
        If the Hessian determinant is at or below the degeneracy tolerance.
    """
    det = float(hessian_det(_xy(m), params))
    if det <= DEGENERACY_TOL:
        raise DegenerateInput(f"minimum {m.label} has det hess = {det:.3g}")
    prod = float(np.prod(m.coords))
    return prod**-0.5 / math.sqrt(params.beta**2 * det)


def omega_saddle(sigma: CriticalPoint, params: ModelParams) -> float:
    """Eyring-Kramers conductance of a saddle.

    Raises
    ------
    NotASaddle
        If the Hessian determinant is nonnegative.
    """
    det = float(hessian_det(_xy(sigma), params))
    if det >= 0.0:
        raise NotASaddle(f"{sigma.label} has det hess = {det:.3g} >= 0")
    mu = _mu(sigma, params)
    prod = float(np.prod(sigma.coords))
    return prod**-0.5 * weight(sigma) * mu / math.sqrt(-det)


def _mu(sigma: CriticalPoint, params: ModelParams) -> float:
    spec = a_hessian_spectrum(_xy(sigma), params)
    neg = float(np.min(np.real(spec.eigenvalues)))
    if neg >= 0.0:
        raise NotASaddle(f"{sigma.label}: A hess F has no negative eigenvalue")
    return -neg


@dataclass(frozen=True)
class EKQuantities:
    """Masses of the minima and conductances of the saddles.

    Attributes
    ----------
    nu : dict
        Valley index to the mass of its minimum.
    omega : dict
        Saddle label to its conductance.
    mu : dict
        Saddle label to ``mu``.
    weights : dict
        Saddle label to ``w(saddle)``.
    """

    nu: dict
    omega: dict
    mu: dict
    weights: dict

    @property
    def mu_beta(self) -> float | None:
        """Common value of ``mu`` when all saddles share it (zero field)."""
        vals = list(self.mu.values())
        if vals and max(vals) - min(vals) <= 1e-12 * max(vals):
            return vals[0]
        return None

    def as_dict(self) -> dict:
        return {
            "nu": {str(k): v for k, v in self.nu.items()},
            "omega": dict(self.omega),
            "mu": dict(self.mu),
            "mu_beta": self.mu_beta,
            "weights": dict(self.weights),
        }


def ek_quantities(report: RegimeReport, params: ModelParams | None = None) -> EKQuantities:
    """Masses and conductances for every valley and saddle of a report."""
    params = params or report.params
    nu = {v.index: nu_mass(v.minimum, params) for v in report.valleys}
    saddles = {c.saddle.label: c.saddle for c in report.connections if c.saddle.kind == SADDLE}
    omega = {k: omega_saddle(s, params) for k, s in saddles.items()}
    mu = {k: _mu(s, params) for k, s in saddles.items()}
    w = {k: weight(s) for k, s in saddles.items()}
    return EKQuantities(nu, omega, mu, w)


@dataclass(frozen=True)
class LimitChain:
    """Limit of the valley-label process on one time scale.

    Attributes
    ----------
    states : tuple of int
        Valley indices; merged shallow classes appear as extra negative labels.
    rates : ndarray
        ``rates[a, b]`` is the rate from ``states[a]`` to ``states[b]``.
    absorbing : tuple of int
        States without outgoing rate on this scale.
    depth : float
        Scale exponent ``d``; time is measured in units of ``2 pi N exp(d N)``.
    """

    states: tuple
    rates: np.ndarray
    absorbing: tuple
    depth: float
    notes: list = field(default_factory=list)

    def _pos(self, i: int) -> int:
        return self.states.index(i)

    def rate(self, i: int, j: int) -> float:
        return float(self.rates[self._pos(i), self._pos(j)])

    def total_rate(self, i: int) -> float:
        return float(self.rates[self._pos(i)].sum())

    def jump_distribution(self, i: int) -> dict:
        row = self.rates[self._pos(i)]
        tot = row.sum()
        if tot <= 0.0:
            return {}
        return {s: float(r / tot) for s, r in zip(self.states, row) if r > 0.0}

    def generator(self) -> np.ndarray:
        Q = self.rates.copy()
        np.fill_diagonal(Q, -Q.sum(axis=1))
        return Q

    def as_dict(self) -> dict:
        return {
            "states": list(self.states),
            "rates": self.rates.tolist(),
            "absorbing": list(self.absorbing),
            "depth": self.depth,
            "notes": list(self.notes),
        }


def _same(a: float, b: float) -> bool:
    return abs(a - b) <= DEPTH_TOL * max(1.0, abs(a), abs(b))


def _scale_levels(report: RegimeReport) -> list:
    levels: list = []
    for v in sorted(report.valleys, key=lambda v: v.depth):
        if not levels or not _same(levels[-1], v.depth):
            levels.append(v.depth)
    return levels


def _exit_rates(report: RegimeReport, ek: EKQuantities, i: int) -> dict:
    """First landing rates out of valley ``i`` through its gates."""
    v = report.valley(i)
    gates = {s.label for s in v.gate_saddles}
    out: dict = {}
    for c in report.connections:
        if c.saddle.label not in gates or i not in c.valleys:
            continue
        base = ek.omega[c.saddle.label] / ek.nu[i]
        for j, w in c.weights(i).items():
            out[j] = out.get(j, 0.0) + base * w
    return out


def _chain_at(report: RegimeReport, ek: EKQuantities, d: float, trace: bool = True) -> LimitChain:
    depth = {v.index: v.depth for v in report.valleys}
    active = [i for i in depth if _same(depth[i], d)]
    shallow = [i for i in depth if depth[i] < d and not _same(depth[i], d)] if trace else []
    notes: list = []
    # Embedded jump chain of the shallow valleys.
    absorb: dict = {}
    if shallow:
        idx = {s: k for k, s in enumerate(shallow)}
        P = np.zeros((len(shallow), len(shallow)))
        exits: dict = {}
        for s in shallow:
            rates = _exit_rates(report, ek, s)
            tot = sum(r for j, r in rates.items() if j != s)
            for j, r in rates.items():
                if j == s:
                    continue
                if j in idx:
                    P[idx[s], idx[j]] += r / tot
                else:
                    exits.setdefault(s, {})
                    exits[s][j] = exits[s].get(j, 0.0) + r / tot
        others = sorted({j for e in exits.values() for j in e})
        B = np.zeros((len(shallow), len(others)))
        for s, e in exits.items():
            for j, p in e.items():
                B[idx[s], others.index(j)] = p
        M = np.eye(len(shallow)) - P
        try:
            absorption = np.linalg.solve(M, B) if others else np.zeros((len(shallow), 0))
        except np.linalg.LinAlgError:
            absorption = np.linalg.lstsq(M, B, rcond=None)[0]
        for s in shallow:
            row = absorption[idx[s]] if others else np.zeros(0)
            absorb[s] = {j: float(p) for j, p in zip(others, row) if p > 1e-15}
            trapped = 1.0 - sum(absorb[s].values())
            if trapped > 1e-9:
                # A closed class of shallow valleys: it acts as one absorbing state.
                absorb[s][-1] = absorb[s].get(-1, 0.0) + trapped
                notes.append(f"shallow valley {s} belongs to a closed class, merged as state -1")
    states = sorted(depth)
    if any(-1 in a for a in absorb.values()):
        states = states + [-1]
    pos = {s: k for k, s in enumerate(states)}
    R = np.zeros((len(states), len(states)))
    for i in active:
        for j, r in _exit_rates(report, ek, i).items():
            targets = absorb[j] if j in absorb else {j: 1.0}
            for k, p in targets.items():
                if k != i:
                    R[pos[i], pos[k]] += r * p
    absorbing = tuple(s for s in states if R[pos[s]].sum() == 0.0)
    return LimitChain(tuple(states), R, absorbing, d, notes)


def limit_chain(
    report: RegimeReport,
    params: ModelParams | None = None,
    scale: str | float | None = "slow",
    trace: bool = True,
) -> LimitChain:
    """Limit chain of the valley labels on one time scale.

    Parameters
    ----------
    report : RegimeReport
    params : ModelParams, optional
        Must agree with ``report.params`` when given.
    scale : {"slow", "fast"} or float
        ``"slow"``: the largest depth at which some valley moves; ``"fast"``:
        the smallest depth; a number selects that depth.
    trace : bool, default True
        Trace out shallower valleys.  With ``False`` they are kept as
        absorbing states, which gives the first valley entered.

    Raises
    ------
    DegenerateRegime
        On degenerate parameters.
    NoValleys
        If there are fewer than two valleys.
    """
    _check(report, params)
    ek = ek_quantities(report)
    levels = _scale_levels(report)
    if scale == "fast":
        return _chain_at(report, ek, levels[0], trace)
    if scale == "slow":
        for d in reversed(levels):
            ch = _chain_at(report, ek, d, trace)
            if ch.rates.sum() > 0.0:
                return ch
        return ch
    d = float(scale)
    if not any(_same(d, lv) for lv in levels):
        raise ValueError(f"scale {d} is not a valley depth; depths are {levels}")
    return _chain_at(report, ek, next(lv for lv in levels if _same(d, lv)), trace)


def _check(report: RegimeReport, params: ModelParams | None) -> None:
    if params is not None and params != report.params:
        raise ValueError("params differ from the parameters of the report")
    if report.degenerate:
        raise DegenerateRegime(
            f"{report.regime}: degenerate critical point at these parameters "
            "(beta = 2 at zero field or r = r1); Eyring-Kramers asymptotics do not apply"
        )
    if len(report.valleys) < 2:
        raise NoValleys(f"regime {report.regime} has no metastable transitions")


@dataclass(frozen=True)
class TransitionPrediction:
    """Predicted exit time and landing distribution from one valley.

    Attributes
    ----------
    start : int
    N : int
    depth : float
        Exponent rate ``d``; the time scale is ``2 pi N exp(d N)``.
    time_scale_log : float
        ``log(2 pi N) + d N``.
    total_rate : float
        Rate out of ``start`` in the limit chain.
    mean_time_log : float
    mean_time : float
        ``inf`` when it overflows a double.
    jump_distribution : dict
        Target valley to probability.
    """

    start: int
    N: int
    depth: float
    time_scale_log: float
    total_rate: float
    mean_time_log: float
    mean_time: float
    jump_distribution: dict
    notes: list = field(default_factory=list)

    @property
    def time_scale(self) -> tuple:
        """Symbolic pair ``(prefactor, exponent rate)`` of ``2 pi N exp(d N)``."""
        return (2.0 * math.pi * self.N, self.depth)

    def as_dict(self) -> dict:
        return {
            "start": self.start,
            "N": self.N,
            "depth": self.depth,
            "time_scale": {"prefactor": 2.0 * math.pi * self.N, "exponent_rate": self.depth},
            "time_scale_log": self.time_scale_log,
            "total_rate": self.total_rate,
            "mean_time_log": self.mean_time_log,
            "mean_time": self.mean_time,
            "jump_distribution": {str(k): v for k, v in self.jump_distribution.items()},
            "notes": list(self.notes),
        }


def predict_transition(
    report: RegimeReport,
    params: ModelParams | None,
    N: int,
    start: int,
) -> TransitionPrediction:
    """Mean exit time from valley ``start`` and where the exit leads.

    The chain is taken on the scale of the depth of ``start``.  The mean time
    is ``2 pi N exp(d N) / (total rate out of start)``, composed in log space.
    When every exit returns to ``start`` through shallower valleys (a global
    minimum surrounded by shallow valleys) the first valley entered is
    predicted instead.
    """
    if N < 1:
        raise ValueError("N must be positive")
    _check(report, params)
    v = report.valley(start)
    notes: list = []
    ch = limit_chain(report, None, scale=v.depth)
    total = ch.total_rate(start)
    if total <= 0.0:
        ch = limit_chain(report, None, scale=v.depth, trace=False)
        total = ch.total_rate(start)
        notes.append("all exits return through shallower valleys; first valley entered is reported")
    if total <= 0.0:
        raise NoValleys(f"valley {start} has no exit on its own time scale")
    log_scale = math.log(2.0 * math.pi * N) + v.depth * N
    log_mean = log_scale - math.log(total)
    mean = math.exp(log_mean) if log_mean < 709.0 else math.inf
    return TransitionPrediction(start, N, v.depth, log_scale, total, log_mean, mean, ch.jump_distribution(start), notes)
