"""Exact kinetic Monte Carlo of the reduced chain and its oracles.

The reduced chain lives on the count triples ``(n0, n1, n2)`` with
``n0 + n1 + n2 = N``.  A spin ``v_a`` rotates to ``v_{a+1}`` at rate

    (n_a / N) * exp(-N beta (Hbar - H(n))),

where ``Hbar`` is the average of ``H`` over ``n``, ``n - e_a + e_{a+1}`` and
``n - e_a + e_{a+2}`` (the three states of the rotation cycle of one site).
These are the rates obtained by lumping the spin dynamics by counts, so the
multinomial Gibbs measure is exactly stationary.

Two kernels are provided.  :func:`run_trajectory` is a plain Gillespie
simulation that records the sequence of metastable sets visited.
:func:`hitting_experiment` only needs hitting times and occupation times.
It runs the embedded jump chain, counts visits per state and draws the time
spent in a state visited ``k`` times as ``Gamma(k, 1/R)``, the sum of ``k``
independent exponential holding times.  This has the same law as the
Gillespie clock and saves one random draw per event.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import DegenerateRegime, EventBudgetExceeded, SizeLimit
from .landscape.regime import MetastableSets, RegimeReport, classify_regime, metastable_sets
from .model import (
    SPIN_VECTORS,
    LatticeState,
    ModelParams,
    _log_weights,
    finite_size_potential,
    lattice_index,
    lattice_points,
)

__all__ = [
    "RateTable",
    "SimulationConfig",
    "TrajectorySummary",
    "HittingStats",
    "ScalingResult",
    "reduced_rates",
    "rate_table",
    "generator_matrix",
    "stationarity_residual",
    "detailed_balance_asymmetry",
    "spin_generator_lumped",
    "aggregation_residual",
    "cycle_decomposition_check",
    "cycle_weight",
    "run_trajectory",
    "hitting_experiment",
    "scaling_study",
    "exact_mean_hitting_time",
    "exact_occupation_fraction",
    "expected_events",
    "choose_feasible_N",
    "replica_generator",
    "long_run_occupation",
]

#: Largest ``N`` for the dense stationarity oracle.
MAX_ORACLE_N = 60

#: Largest ``N`` for the spin-level aggregation oracle (``3^N`` configurations).
MAX_SPIN_N = 8


# ---------------------------------------------------------------------------
# rates


def _energy(counts: np.ndarray, N: int, field: np.ndarray) -> np.ndarray:
    """``H`` at the count triples ``counts`` (last axis of size 3)."""
    m = (counts @ SPIN_VECTORS) / N
    return -0.5 * np.sum(m * m, axis=-1) - m @ field


def reduced_rates(state: LatticeState, params: ModelParams) -> list:
    """The three moves of the reduced chain from ``state`` with their rates.

    Returns
    -------
    list of (LatticeState or None, float)
        For ``a = 0, 1, 2`` the rotation ``v_a -> v_{a+1}``: target state and
        rate.  Moves from an empty spin class have target ``None`` and rate 0.
    """
    N = state.N
    n = np.array(state.counts, dtype=float)
    H0 = float(_energy(n, N, params.field))
    out = []
    for a in range(3):
        if state.counts[a] == 0:
            out.append((None, 0.0))
            continue
        s1 = n.copy()
        s1[a] -= 1
        s1[(a + 1) % 3] += 1
        s2 = n.copy()
        s2[a] -= 1
        s2[(a + 2) % 3] += 1
        Hbar = (H0 + float(_energy(s1, N, params.field)) + float(_energy(s2, N, params.field))) / 3.0
        rate = n[a] / N * math.exp(-N * params.beta * (Hbar - H0))
        out.append((LatticeState(*(int(v) for v in s1)), rate))
    return out


@dataclass(frozen=True)
class RateTable:
    """All transition rates of the reduced chain of size ``N``.

    Attributes
    ----------
    N : int
    states : ndarray of shape (M, 3)
        Lattice order of :func:`pottsmeta.model.lattice_points`.
    rates : ndarray of shape (M, 3)
        ``rates[x, a]`` is the rate of ``v_a -> v_{a+1}`` from state ``x``.
    targets : ndarray of shape (M, 3)
        Target rows (``-1`` where the rate is zero).
    """

    N: int
    states: np.ndarray
    rates: np.ndarray
    targets: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.rates.sum(axis=1)


def rate_table(N: int, params: ModelParams) -> RateTable:
    """Vectorized rate table of the reduced chain."""
    if N < 1:
        raise ValueError("N must be positive")
    S = lattice_points(N)
    Sf = S.astype(float)
    H0 = _energy(Sf, N, params.field)
    M = len(S)
    rates = np.zeros((M, 3))
    targets = np.full((M, 3), -1, dtype=np.int64)
    for a in range(3):
        ok = S[:, a] > 0
        s1 = S[ok].copy()
        s1[:, a] -= 1
        s1[:, (a + 1) % 3] += 1
        s2 = S[ok].copy()
        s2[:, a] -= 1
        s2[:, (a + 2) % 3] += 1
        Hbar = (H0[ok] + _energy(s1.astype(float), N, params.field) + _energy(s2.astype(float), N, params.field)) / 3.0
        rates[ok, a] = S[ok, a] / N * np.exp(-N * params.beta * (Hbar - H0[ok]))
        targets[ok, a] = lattice_index(N, s1[:, 1], s1[:, 2])
    return RateTable(N, S, rates, targets)


def generator_matrix(N: int, params: ModelParams, table: RateTable | None = None) -> sp.csr_matrix:
    """Sparse generator ``L`` with ``L[x, y]`` the rate from ``x`` to ``y``."""
    t = table if table is not None else rate_table(N, params)
    ok = t.targets >= 0
    rows = np.repeat(np.arange(len(t.states)), 3).reshape(-1, 3)[ok]
    L = sp.csr_matrix((t.rates[ok], (rows, t.targets[ok])), shape=(len(t.states),) * 2)
    return (L - sp.diags(np.asarray(L.sum(axis=1)).ravel())).tocsr()


def stationarity_residual(N: int, params: ModelParams, table: RateTable | None = None) -> float:
    """Largest relative violation of ``nu^T L = 0`` for the multinomial Gibbs law.

    For each state ``x`` the inflow ``sum_y nu(y) L(y, x) / nu(x)`` is compared
    with the outflow rate of ``x``; the ratio of weights is taken in the log
    domain.

    Parameters
    ----------
    table : RateTable, optional
        Rates to test (used to check that a perturbed table is detected).

    Raises
    ------
    SizeLimit
        If ``N > 60``.
    """
    if N > MAX_ORACLE_N:
        raise SizeLimit(f"stationarity oracle is limited to N <= {MAX_ORACLE_N}")
    t = table if table is not None else rate_table(N, params)
    logw = _log_weights(N, params, t.states)
    inflow = np.zeros(len(t.states))
    for a in range(3):
        ok = t.targets[:, a] >= 0
        src = np.flatnonzero(ok)
        dst = t.targets[ok, a]
        np.add.at(inflow, dst, t.rates[ok, a] * np.exp(logw[src] - logw[dst]))
    out = t.total
    return float(np.max(np.abs(inflow - out) / out))


def detailed_balance_asymmetry(N: int, params: ModelParams) -> float:
    """Largest relative asymmetry ``|nu(x)r(x,y) - nu(y)r(y,x)| / max(...)`` over edges.

    A value above zero witnesses that the chain is not reversible.
    """
    t = rate_table(N, params)
    logw = _log_weights(N, params, t.states)
    rate = {}
    for x in range(len(t.states)):
        for a in range(3):
            y = t.targets[x, a]
            if y >= 0:
                rate[(x, int(y))] = rate.get((x, int(y)), 0.0) + t.rates[x, a]
    worst = 0.0
    for (x, y), rxy in rate.items():
        fxy = math.exp(logw[x]) * rxy
        fyx = math.exp(logw[y]) * rate.get((y, x), 0.0)
        worst = max(worst, abs(fxy - fyx) / max(fxy, fyx))
    return worst


def spin_generator_lumped(N: int, params: ModelParams) -> tuple:
    """Spin-level generator lumped by counts, from the single-site rates.

    Every spin configuration is enumerated.  The rate of site ``i`` is
    ``(1/N) exp(-(beta/3) sum_{k=0..2} [E(tau_i^k s) - E(s)])`` with ``E`` the
    pairwise energy ``-(1/2N) sum_{i,j} s_i . s_j - h . sum_i s_i``.  Rates
    into each count class are summed.

    Returns
    -------
    (lumped, spread)
        ``lumped[x, y]``: the lumped rate from class ``x`` to class ``y``
        computed from one representative, as a dense array over lattice rows.
        ``spread``: the largest relative difference between representatives
        of the same class (zero for an exact lumping).

    Raises
    ------
    SizeLimit
        If ``N > 8``.
    """
    if N > MAX_SPIN_N:
        raise SizeLimit(f"spin-level enumeration is limited to N <= {MAX_SPIN_N}")
    n_conf = 3**N
    digits = (np.arange(n_conf)[:, None] // 3 ** np.arange(N)[None, :]) % 3
    vecs = SPIN_VECTORS[digits]  # (n_conf, N, 2)

    def energy(v: np.ndarray) -> np.ndarray:
        gram = np.einsum("cid,cjd->c", v, v)
        return -gram / (2.0 * N) - np.einsum("cid,d->c", v, params.field)

    E0 = energy(vecs)
    counts = np.stack([(digits == k).sum(axis=1) for k in range(3)], axis=1)
    row_of = lattice_index(N, counts[:, 1], counts[:, 2])
    M = (N + 1) * (N + 2) // 2
    lumped = np.full((M, M), np.nan)
    acc = {}
    for i in range(N):
        d1 = digits.copy()
        d1[:, i] = (d1[:, i] + 1) % 3
        d2 = digits.copy()
        d2[:, i] = (d2[:, i] + 2) % 3
        E1 = energy(SPIN_VECTORS[d1])
        E2 = energy(SPIN_VECTORS[d2])
        c = np.exp(-(params.beta / 3.0) * ((E1 - E0) + (E2 - E0))) / N
        c1 = np.stack([(d1 == k).sum(axis=1) for k in range(3)], axis=1)
        to = lattice_index(N, c1[:, 1], c1[:, 2])
        for conf in range(n_conf):
            key = (conf, int(to[conf]))
            acc[key] = acc.get(key, 0.0) + c[conf]
    # Collect class-to-class rates for every representative.
    per_class: dict = {}
    for (conf, y), rate in acc.items():
        per_class.setdefault((int(row_of[conf]), y), []).append(rate)
    spread = 0.0
    for (x, y), vals in per_class.items():
        vals = np.array(vals)
        lumped[x, y] = vals[0]
        spread = max(spread, float((vals.max() - vals.min()) / vals.max()))
    return np.nan_to_num(lumped, nan=0.0), spread


def aggregation_residual(N: int, params: ModelParams) -> float:
    """Largest relative difference between the lumped spin rates and the reduced rates.

    Also accounts for the spread between representatives of a count class.
    """
    lumped, spread = spin_generator_lumped(N, params)
    t = rate_table(N, params)
    reduced = np.zeros_like(lumped)
    for a in range(3):
        ok = t.targets[:, a] >= 0
        reduced[np.flatnonzero(ok), t.targets[ok, a]] += t.rates[ok, a]
    mask = (reduced > 0) | (lumped > 0)
    diff = np.abs(reduced[mask] - lumped[mask]) / np.maximum(reduced[mask], lumped[mask])
    return float(max(diff.max(), spread))


# ---------------------------------------------------------------------------
# cycle decomposition


def cycle_weight(x: LatticeState) -> float:
    """Weight ``[x0 (x1 + 1/N) (x2 + 1/N)]^(1/3)`` of the rotation cycle based at ``x``."""
    N = x.N
    return (x.n0 * (x.n1 + 1) * (x.n2 + 1)) ** (1.0 / 3.0) / N


def cycle_decomposition_check(x: LatticeState, params: ModelParams, mode: str = "asymptotic") -> float:
    """Residual of the factorization of the rates along the cycle based at ``x``.

    The cycle visits ``x``, ``x + e1``, ``x + e2`` (one ``v0`` spin moved to
    ``v1``, respectively ``v2``).  Each edge rate of the reduced chain is
    compared with ``w_N(x) exp(-beta N [Fbar - F(start of edge)])`` where
    ``Fbar`` averages the finite-size potential over the three cycle states.

    Parameters
    ----------
    x : LatticeState
        Base point, with ``n0 >= 1``.
    mode : {"asymptotic", "exact"}
        Finite-size potential used: ``F + log(x0 x1 x2) / (2 beta N)`` or the
        exact one (``exp(-beta N F)`` proportional to the stationary weight),
        for which the factorization holds identically.

    Returns
    -------
    float
        ``max_i |R_i / (w_N R~_i) - 1|``.
    """
    if x.n0 < 1:
        raise ValueError("the cycle based at x must fit in the simplex (n0 >= 1)")
    N = x.N
    cycle = [x, LatticeState(x.n0 - 1, x.n1 + 1, x.n2), LatticeState(x.n0 - 1, x.n1, x.n2 + 1)]
    if mode == "asymptotic" and any(min(s.counts) == 0 for s in cycle):
        raise ValueError("asymptotic mode needs the cycle in the interior")
    Fs = [float(finite_size_potential(s, N, params, mode=mode)) for s in cycle]
    Fbar = sum(Fs) / 3.0
    w = cycle_weight(x)
    res = 0.0
    for i in range(3):
        moves = reduced_rates(cycle[i], params)
        # Edge i of the cycle: x -> x+e1 is a v0->v1 move, x+e1 -> x+e2 is
        # v1->v2, x+e2 -> x is v2->v0.
        target, rate = moves[i]
        assert target == cycle[(i + 1) % 3]
        tilde = math.exp(-params.beta * N * (Fbar - Fs[i]))
        res = max(res, abs(rate / (w * tilde) - 1.0))
    return res


# ---------------------------------------------------------------------------
# random streams and kernels


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    """Independent counter-based stream for ``(seed, replica)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), int(replica)])))


@numba.njit(cache=True, nogil=True)
def _hit_kernel(start, cum0, cum1, targets, stop_mask, max_events, gen, visits, touched):
    """Embedded jump chain until ``stop_mask`` is hit; counts visits per state."""
    x = start
    events = 0
    n_touched = 0
    censored = False
    while not stop_mask[x]:
        if visits[x] == 0:
            touched[n_touched] = x
            n_touched += 1
        visits[x] += 1
        u = gen.random()
        if u < cum0[x]:
            x = targets[x, 0]
        elif u < cum1[x]:
            x = targets[x, 1]
        else:
            x = targets[x, 2]
        events += 1
        if events >= max_events:
            censored = not stop_mask[x]
            break
    return x, events, n_touched, censored


@numba.njit(cache=True, nogil=True)
def _holding_times(visits, touched, n_touched, total, labels, n_labels, gen):
    """Total holding time, split by label (last entry: unlabelled states)."""
    occ = np.zeros(n_labels + 1)
    for k in range(n_touched):
        x = touched[k]
        t = gen.gamma(visits[x], 1.0 / total[x])
        lab = labels[x]
        if lab >= 0:
            occ[lab] += t
        else:
            occ[n_labels] += t
        visits[x] = 0
    return occ


@numba.njit(cache=True, nogil=True)
def _gillespie_kernel(start, cum0, cum1, total, targets, labels, stop_mask, max_events, horizon, gen, max_visits):
    """Gillespie simulation recording entries into labelled sets."""
    x = start
    t = 0.0
    comp = 0.0
    events = 0
    seq_lab = np.empty(max_visits, dtype=np.int64)
    seq_t = np.empty(max_visits)
    n_seq = 0
    last = -1
    outside = 0.0
    if labels[x] >= 0:
        seq_lab[0] = labels[x]
        seq_t[0] = 0.0
        n_seq = 1
        last = labels[x]
    reason = 0  # 0: target, 1: horizon, 2: event budget, 3: visit buffer
    while True:
        if stop_mask[x] and events > 0:
            reason = 0
            break
        R = total[x]
        dt = -math.log1p(-gen.random()) / R
        if t + dt > horizon:
            if labels[x] < 0:
                outside += horizon - t
            t = horizon
            reason = 1
            break
        # Kahan-compensated accumulation of the clock.
        y = dt - comp
        s = t + y
        comp = (s - t) - y
        t = s
        if labels[x] < 0:
            outside += dt
        u = gen.random()
        if u < cum0[x]:
            x = targets[x, 0]
        elif u < cum1[x]:
            x = targets[x, 1]
        else:
            x = targets[x, 2]
        events += 1
        lab = labels[x]
        if lab >= 0 and lab != last:
            if n_seq >= max_visits:
                reason = 3
                break
            seq_lab[n_seq] = lab
            seq_t[n_seq] = t
            n_seq += 1
            last = lab
        if events >= max_events:
            reason = 2
            break
    return x, t, events, outside, seq_lab[:n_seq].copy(), seq_t[:n_seq].copy(), reason


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class SimulationConfig:
    """Settings of a simulation.

    Attributes
    ----------
    params : ModelParams
    N : int
    seed : int
        Master seed; replica ``k`` uses the stream ``(seed, k)``.
    replicas : int
    start : int or LatticeState
        Valley index (start at the lattice point nearest its minimum) or an
        explicit state.
    targets : tuple of int, optional
        Valleys whose metastable sets stop a replica; default all other valleys.
    epsilon : float, optional
        Margin of the metastable sets, default ``0.1 * min gap``.
    max_events : int, optional
        Event budget per replica; default from :attr:`budget_factor`.
    budget_factor : float
        Default budget is ``budget_factor * predicted mean time * typical rate``.
    horizon : float
        Time horizon of :func:`run_trajectory`.
    threads : int, optional
        Worker threads; default from ``POTTS_THREADS`` or the CPU count.
    """

    params: ModelParams
    N: int
    seed: int
    replicas: int = 1
    start: int | LatticeState = 0
    targets: tuple | None = None
    epsilon: float | None = None
    max_events: int | None = None
    budget_factor: float = 5.0
    horizon: float = math.inf
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.replicas < 1:
            raise ValueError("replicas must be positive")
        if self.N > 20_000:
            raise SizeLimit("simulations are limited to N <= 20000")


@dataclass(frozen=True)
class TrajectorySummary:
    """Outcome of one Gillespie trajectory.

    Attributes
    ----------
    labels : ndarray of int
        Successive metastable sets entered (consecutive entries differ).
    entry_times : ndarray
    sojourns : ndarray
        Time from each entry to the next entry (to the end for the last).
    time_outside : float
        Time spent outside every metastable set.
    total_time : float
    events : int
    final_state : LatticeState
    stop_reason : str
        ``"target"``, ``"horizon"``, ``"event budget"`` or ``"visit buffer"``.
    """

    labels: np.ndarray
    entry_times: np.ndarray
    sojourns: np.ndarray
    time_outside: float
    total_time: float
    events: int
    final_state: LatticeState
    stop_reason: str

    @property
    def censored(self) -> bool:
        return self.stop_reason in ("event budget", "visit buffer")


@dataclass(frozen=True)
class HittingStats:
    """Statistics of first hitting times of the target sets.

    Attributes
    ----------
    times : ndarray
        Hitting times of the uncensored replicas.
    hit_targets : ndarray of int
        Valley entered, per uncensored replica.
    events : ndarray of int
        Events per replica (all replicas).
    censored : int
    mean, mean_se : float
    cv, cv_se : float
        Coefficient of variation and its bootstrap standard error.
    target_frequencies, target_se : dict
    occupation : dict
        Fraction of the total time spent in each valley's set (key ``-1``:
        outside every set), pooled over replicas.
    predicted_mean : float or None
    """

    N: int
    start: int
    targets: tuple
    times: np.ndarray
    hit_targets: np.ndarray
    events: np.ndarray
    censored: int
    mean: float
    mean_se: float
    cv: float
    cv_se: float
    target_frequencies: dict
    target_se: dict
    occupation: dict
    predicted_mean: float | None = None
    notes: list = field(default_factory=list)

    def rows(self):
        """Rows ``(replica, hitting_time, target, events, censored)``."""
        k = 0
        for r, ev in enumerate(self.events):
            if self._cens[r]:
                yield r, math.nan, -1, int(ev), True
            else:
                yield r, float(self.times[k]), int(self.hit_targets[k]), int(ev), False
                k += 1

    @property
    def _cens(self) -> np.ndarray:
        return self.__dict__.get("_censored_mask", np.zeros(len(self.events), dtype=bool))

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "start": self.start,
            "targets": list(self.targets),
            "replicas": int(len(self.events)),
            "censored": self.censored,
            "mean": self.mean,
            "mean_se": self.mean_se,
            "cv": self.cv,
            "cv_se": self.cv_se,
            "target_frequencies": {str(k): v for k, v in self.target_frequencies.items()},
            "target_se": {str(k): v for k, v in self.target_se.items()},
            "occupation": {str(k): v for k, v in self.occupation.items()},
            "predicted_mean": self.predicted_mean,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# experiment plumbing


@dataclass
class _Prepared:
    table: RateTable
    sets: MetastableSets
    report: RegimeReport
    start: int
    start_valley: int
    targets: tuple
    stop_mask: np.ndarray
    cum0: np.ndarray
    cum1: np.ndarray
    total: np.ndarray
    labels: np.ndarray
    n_labels: int
    label_keys: list


def _default_epsilon(report: RegimeReport) -> float:
    return 0.1 * min(v.gap for v in report.valleys)


def _prepare(config: SimulationConfig, report: RegimeReport | None = None) -> _Prepared:
    params, N = config.params, config.N
    report = report if report is not None else classify_regime(params)
    if report.degenerate:
        raise DegenerateRegime(f"{report.regime}: simulations at a degenerate critical value are refused")
    eps = config.epsilon if config.epsilon is not None else _default_epsilon(report)
    sets = metastable_sets(params, eps, N, report)
    table = rate_table(N, params)
    if isinstance(config.start, LatticeState):
        if config.start.N != N:
            raise ValueError("start state has the wrong size")
        start = int(lattice_index(N, config.start.n1, config.start.n2))
        start_valley = int(sets.labels[start])
    else:
        start_valley = int(config.start)
        m = report.valley(start_valley).minimum
        s = LatticeState.nearest(m.location, N)
        start = int(lattice_index(N, s.n1, s.n2))
        if sets.labels[start] != start_valley:
            raise ValueError(f"N = {N} is too small: the lattice point nearest m{start_valley} is not in its set")
    targets = tuple(config.targets) if config.targets is not None else tuple(i for i in report.index_set if i != start_valley)
    if start_valley in targets:
        raise ValueError("start and target sets must be disjoint")
    stop_mask = np.isin(sets.labels, np.array(targets, dtype=np.int64))
    total = table.total
    cum0 = table.rates[:, 0] / total
    cum1 = (table.rates[:, 0] + table.rates[:, 1]) / total
    keys = sorted(report.index_set)
    pos = {k: i for i, k in enumerate(keys)}
    labels = np.array([pos.get(int(l), -1) if l >= 0 else -1 for l in sets.labels], dtype=np.int64)
    return _Prepared(table, sets, report, start, start_valley, targets, stop_mask, cum0, cum1, total, labels, len(keys), keys)


def _threads(config: SimulationConfig) -> int:
    if config.threads is not None:
        return max(1, int(config.threads))
    env = os.environ.get("POTTS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _typical_rate(prep: _Prepared, params: ModelParams) -> float:
    """Average total rate over the starting set under the stationary law."""
    N = prep.table.N
    in_start = prep.sets.labels == prep.start_valley
    logw = _log_weights(N, params, prep.table.states[in_start])
    w = np.exp(logw - logw.max())
    return float(np.sum(w * prep.total[in_start]) / w.sum())


def run_trajectory(config: SimulationConfig, replica: int = 0, *, report: RegimeReport | None = None, max_visits: int = 1_000_000) -> TrajectorySummary:
    """Gillespie trajectory from the configured start.

    The run stops at the first entry into a target set, at the time horizon or
    when the event budget is spent (the latter raises
    :class:`EventBudgetExceeded` carrying the partial summary).  With
    ``targets=()`` only the horizon and the budget stop the run.
    """
    prep = _prepare(config, report)
    max_events = config.max_events if config.max_events is not None else 10**12
    gen = replica_generator(config.seed, replica)
    x, t, events, outside, lab, times, reason = _gillespie_kernel(
        prep.start, prep.cum0, prep.cum1, prep.total, prep.table.targets, prep.labels,
        prep.stop_mask, np.int64(max_events), float(config.horizon), gen, max_visits,
    )
    keys = np.array(prep.label_keys)
    labels = keys[lab] if len(lab) else np.array([], dtype=np.int64)
    sojourns = np.diff(np.append(times, t))
    reason_s = ["target", "horizon", "event budget", "visit buffer"][reason]
    st = prep.table.states[x]
    summary = TrajectorySummary(labels, times, sojourns, outside, t, int(events), LatticeState(*map(int, st)), reason_s)
    if summary.censored:
        raise EventBudgetExceeded(f"trajectory stopped by the {reason_s} after {events} events", summary)
    return summary


def _bootstrap(values: np.ndarray, stat, rng: np.random.Generator, n_boot: int = 1000) -> float:
    if len(values) < 2:
        return math.nan
    idx = rng.integers(0, len(values), size=(n_boot, len(values)))
    return float(np.std([stat(values[i]) for i in idx], ddof=1))


def hitting_experiment(
    config: SimulationConfig,
    report: RegimeReport | None = None,
    predicted_mean: float | None = None,
) -> HittingStats:
    """First hitting times of the target sets from the configured start.

    Replicas that exhaust the event budget are counted as censored and left
    out of the mean (a warning is issued).

    Parameters
    ----------
    config : SimulationConfig
    report : RegimeReport, optional
    predicted_mean : float, optional
        Predicted mean time used for the default event budget; computed from
        the Eyring-Kramers prediction when omitted.
    """
    from .kinetics import predict_transition

    params, N = config.params, config.N
    prep = _prepare(config, report)
    if config.max_events is not None:
        max_events = int(config.max_events)
    else:
        if predicted_mean is None:
            predicted_mean = predict_transition(prep.report, None, N, prep.start_valley).mean_time
        max_events = int(min(config.budget_factor * predicted_mean * _typical_rate(prep, params) + 10_000, 2**62))
    n_threads = min(_threads(config), config.replicas)
    M = len(prep.table.states)

    def work(chunk: range) -> list:
        visits = np.zeros(M, dtype=np.int64)
        touched = np.empty(M, dtype=np.int64)
        out = []
        for r in chunk:
            gen = replica_generator(config.seed, r)
            x, events, n_t, cens = _hit_kernel(
                prep.start, prep.cum0, prep.cum1, prep.table.targets, prep.stop_mask, np.int64(max_events), gen, visits, touched
            )
            occ = _holding_times(visits, touched, n_t, prep.total, prep.labels, prep.n_labels, gen)
            out.append((r, int(x), int(events), bool(cens), occ))
        return out

    chunks = [range(k, config.replicas, n_threads) for k in range(n_threads)]
    if n_threads == 1:
        results = work(chunks[0])
    else:
        with ThreadPoolExecutor(n_threads) as pool:
            results = [item for part in pool.map(work, chunks) for item in part]
    results.sort(key=lambda item: item[0])
    events = np.array([r[2] for r in results], dtype=np.int64)
    cens = np.array([r[3] for r in results])
    occ = np.array([r[4] for r in results])
    ok = ~cens
    times = occ[ok].sum(axis=1)
    hit = np.array([int(prep.sets.labels[r[1]]) for r in results])[ok]
    notes = []
    if cens.any():
        msg = f"{int(cens.sum())} of {config.replicas} replicas exhausted the event budget of {max_events} and are censored"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    rng = np.random.default_rng([int(config.seed) & (2**64 - 1), 2**31 - 1])
    n = len(times)
    mean = float(times.mean()) if n else math.nan
    cv = float(times.std(ddof=1) / mean) if n > 1 else math.nan
    mean_se = float(times.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    cv_se = _bootstrap(times, lambda v: v.std(ddof=1) / v.mean(), rng)
    freq = {t: float(np.mean(hit == t)) if n else math.nan for t in prep.targets}
    fse = {t: math.sqrt(freq[t] * (1.0 - freq[t]) / n) if n else math.nan for t in prep.targets}
    tot = occ[ok].sum()
    occupation = {k: float(occ[ok][:, i].sum() / tot) for i, k in enumerate(prep.label_keys)}
    occupation[-1] = float(occ[ok][:, -1].sum() / tot)
    stats = HittingStats(
        N, prep.start_valley, prep.targets, times, hit, events, int(cens.sum()), mean, mean_se, cv, cv_se,
        freq, fse, occupation, predicted_mean, notes,
    )
    stats.__dict__["_censored_mask"] = cens
    return stats


def long_run_occupation(params: ModelParams, N: int, events: int, seed: int, start: LatticeState | None = None) -> np.ndarray:
    """Time-weighted state occupation of one long trajectory, in lattice order.

    The chain runs for ``events`` jumps from ``start`` (default: the lattice
    point nearest the centroid); the result is normalized to sum to one and
    can be compared with :func:`pottsmeta.model.exact_stationary`.
    """
    table = rate_table(N, params)
    M = len(table.states)
    if start is None:
        start = LatticeState.nearest((1.0 / 3.0, 1.0 / 3.0), N)
    x0 = int(lattice_index(N, start.n1, start.n2))
    total = table.total
    cum0 = table.rates[:, 0] / total
    cum1 = (table.rates[:, 0] + table.rates[:, 1]) / total
    visits = np.zeros(M, dtype=np.int64)
    touched = np.empty(M, dtype=np.int64)
    gen = replica_generator(seed, 0)
    _, _, n_t, _ = _hit_kernel(x0, cum0, cum1, table.targets, np.zeros(M, dtype=np.bool_), np.int64(events), gen, visits, touched)
    occ = _holding_times(visits, touched, n_t, total, np.arange(M, dtype=np.int64), M, gen)[:M]
    return occ / occ.sum()


# ---------------------------------------------------------------------------
# exact linear-algebra oracles


def _target_system(N: int, params: ModelParams, stop_mask: np.ndarray):
    L = generator_matrix(N, params)
    free = np.flatnonzero(~stop_mask)
    A = -L[free][:, free]
    return L, free, A.tocsc()


def exact_mean_hitting_time(N: int, params: ModelParams, start: int, stop_mask: np.ndarray) -> float:
    """Mean hitting time of ``stop_mask`` from lattice row ``start`` (sparse solve)."""
    _, free, A = _target_system(N, params, stop_mask)
    tau = spsolve(A, np.ones(len(free)))
    return float(tau[np.searchsorted(free, start)])


def exact_occupation_fraction(N: int, params: ModelParams, start: int, stop_mask: np.ndarray, region: np.ndarray) -> tuple:
    """Expected time in ``region`` before hitting ``stop_mask`` and its share of the mean hitting time."""
    _, free, A = _target_system(N, params, stop_mask)
    lu = __import__("scipy.sparse.linalg", fromlist=["splu"]).splu(A)
    k = np.searchsorted(free, start)
    tau = lu.solve(np.ones(len(free)))[k]
    occ = lu.solve(region[free].astype(float))[k]
    return float(occ), float(occ / tau)


def expected_events(N: int, params: ModelParams, start: int, stop_mask: np.ndarray) -> float:
    """Expected number of jumps before hitting ``stop_mask``."""
    L, free, A = _target_system(N, params, stop_mask)
    rates = -L.diagonal()[free]
    return float(spsolve(A, rates)[np.searchsorted(free, start)])


def choose_feasible_N(
    params: ModelParams,
    candidates: list,
    replicas: int,
    event_budget: float,
    start: int = 0,
    targets: tuple | None = None,
    epsilon: float | None = None,
) -> int:
    """Largest candidate ``N`` whose expected total event count fits the budget.

    The expected number of jumps per replica is computed exactly from the
    linear system of the reduced chain.
    """
    report = classify_regime(params)
    best = None
    for N in sorted(candidates):
        try:
            prep = _prepare(SimulationConfig(params, N, 0, replicas, start, targets, epsilon), report)
        except ValueError:
            continue
        ev = expected_events(N, params, prep.start, prep.stop_mask)
        if ev * replicas <= event_budget:
            best = N
    if best is None:
        raise SizeLimit("no candidate N fits the event budget")
    return best


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class ScalingResult:
    """Regression of ``log(mean hitting time)`` on ``N``.

    Attributes
    ----------
    N_values : ndarray
    means : ndarray
    slope, intercept : float
    depth : float
        Depth of the starting valley.
    predicted : ndarray
        Eyring-Kramers means.
    method : str
        ``"simulation"`` or ``"exact"``.
    stats : list of HittingStats (simulation only)
    """

    N_values: np.ndarray
    means: np.ndarray
    slope: float
    intercept: float
    depth: float
    predicted: np.ndarray
    method: str
    stats: list = field(default_factory=list)

    @property
    def relative_slope_error(self) -> float:
        return abs(self.slope - self.depth) / self.depth


def scaling_study(
    params: ModelParams,
    N_list,
    replicas: int = 400,
    seed: int = 0,
    start: int = 0,
    method: str = "simulation",
    budget_factor: float = 5.0,
    threads: int | None = None,
) -> ScalingResult:
    """Slope of ``log(mean hitting time)`` against ``N``.

    ``method="exact"`` replaces the simulated means by the exact means from the
    linear system, for depths where direct simulation is out of reach.
    """
    from .kinetics import predict_transition

    report = classify_regime(params)
    Ns = np.array(sorted(int(n) for n in N_list))
    means, preds, stats = [], [], []
    for N in Ns:
        pred = predict_transition(report, None, int(N), start).mean_time
        preds.append(pred)
        cfg = SimulationConfig(params, int(N), seed, replicas, start, budget_factor=budget_factor, threads=threads)
        if method == "simulation":
            st = hitting_experiment(cfg, report, predicted_mean=pred)
            stats.append(st)
            means.append(st.mean)
        elif method == "exact":
            prep = _prepare(cfg, report)
            means.append(exact_mean_hitting_time(int(N), params, prep.start, prep.stop_mask))
        else:
            raise ValueError("method must be 'simulation' or 'exact'")
    means = np.array(means)
    slope, intercept = np.polyfit(Ns.astype(float), np.log(means), 1)
    return ScalingResult(Ns, means, float(slope), float(intercept), report.valley(start).depth, np.array(preds), method, stats)

