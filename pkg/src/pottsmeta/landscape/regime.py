"""Valleys, regime classification, metastable sets and the phase diagram.

Valleys are built from the critical points.  Every saddle is followed
downhill along both branches of its unstable direction.  A branch that stalls
at another saddle (this happens on symmetry lines) is continued from that
saddle, with its weight split equally between the continuations.  The height
of the lowest saddle leading out of a valley sets its depth.  At zero field
the structure is known in closed form and is used directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.linalg import eigh

from ..errors import EpsilonTooLarge, NoValleys, SizeLimit
from ..model import ModelParams, gradient, hessian, lattice_points, potential
from .critical import (
    DEGENERATE,
    LOCAL_MAX,
    LOCAL_MIN,
    SADDLE,
    CriticalPoint,
    critical_points,
    theta_family,
)
from .functions import (
    _beta_is,
    beta2,
    beta3,
    field_thresholds,
    find_beta1,
    h_fun,
    heights_and_depths,
    r1_closed_form,
    r2_closed_form,
    r_zero_family,
)

__all__ = [
    "Valley",
    "SaddleConnection",
    "RegimeReport",
    "REGIMES",
    "descend",
    "descend_batch",
    "valley_structure",
    "classify_regime",
    "regime_label",
    "metastable_sets",
    "MetastableSets",
    "PhaseDiagram",
    "phase_diagram",
    "zero_family_fold",
]

REGIMES = (
    "NoMetastability",
    "ZF-I",
    "ZF-II",
    "ZF-III",
    "ZF-β₂",
    "ZF-β₁-degenerate",
    "Field-π-I",
    "Field-π-II",
    "Field-π-III",
    "Field-0-I",
    "Field-0-II",
    "SmallField-CaseIII",
    "NumericGeneric",
)

#: Relative tolerance used to decide that a parameter sits on a critical value.
CRITICAL_VALUE_TOL = 1e-12

#: Metric of the simplex plane in the ``(x1, x2)`` chart (``dx0 = -dx1 - dx2``)
#: and its inverse.  Using it keeps descent paths invariant under the
#: permutations of the three coordinates.
SIMPLEX_METRIC = np.array([[2.0, 1.0], [1.0, 2.0]])
_METRIC_INV = np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0

#: Distance within which a descent end point is identified with a critical point.
_SNAP_RADIUS = 1e-4


@dataclass(frozen=True)
class Valley:
    """A metastable valley around a local minimum.

    Attributes
    ----------
    index : int
        ``0, 1, 2`` for the minima near the vertices, ``3`` for the central
        (entropic) minimum.
    minimum : CriticalPoint
    depth : float
        ``beta * (height_reference - minimum.height)``.
    gate_saddles : list of CriticalPoint
        Saddles of height ``height_reference`` through which the valley is left.
    height_reference : float
        Height of the lowest saddle leading to another valley.
    """

    index: int
    minimum: CriticalPoint
    depth: float
    gate_saddles: list
    height_reference: float

    @property
    def gap(self) -> float:
        """Height gap ``height_reference - F(minimum)`` in units of the potential."""
        return self.height_reference - self.minimum.height

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "minimum": self.minimum.as_dict(),
            "depth": self.depth,
            "gate_saddles": [s.label for s in self.gate_saddles],
            "height_reference": self.height_reference,
        }


@dataclass(frozen=True)
class SaddleConnection:
    """The valleys reached by descending from a saddle.

    ``sides`` holds, for each of the two unstable branches, a map from valley
    index to the fraction of that branch ending in the valley (fractions other
    than one only occur when a branch stalls on a symmetry line).
    """

    saddle: CriticalPoint
    sides: tuple

    @property
    def valleys(self) -> set:
        return set(self.sides[0]) | set(self.sides[1])

    @property
    def is_loop(self) -> bool:
        return len(self.valleys) < 2

    def weights(self, i: int) -> dict:
        """Landing distribution of an exit from valley ``i`` through this saddle.

        The exit leaves on the branch(es) containing ``i`` and lands on the
        opposite branch; both branches count when ``i`` sits on both.
        """
        out: dict = {}
        for a, b in ((0, 1), (1, 0)):
            wi = self.sides[a].get(i, 0.0)
            if wi == 0.0:
                continue
            for j, wj in self.sides[b].items():
                out[j] = out.get(j, 0.0) + wi * wj
        total = sum(out.values())
        return {j: w / total for j, w in out.items()} if total > 0 else {}

    def as_dict(self) -> dict:
        return {
            "saddle": self.saddle.label,
            "height": self.saddle.height,
            "sides": [{str(k): v for k, v in s.items()} for s in self.sides],
        }


@dataclass(frozen=True)
class RegimeReport:
    """Metastability structure at fixed parameters.

    Attributes
    ----------
    regime : str
        One of :data:`REGIMES`.
    params : ModelParams
    thresholds : dict
        Named critical values that apply (``beta1``, ``beta2``, ``beta3`` and,
        for fields, ``r1``, ``r2``, ``r_star`` or ``r_beta``, ``r_off``).
    critical_points : list of CriticalPoint
    index_set : tuple of int
        Indices of the valleys.
    valleys : list of Valley
    connections : list of SaddleConnection
        Every saddle together with the valleys on its two sides.
    degenerate : bool
        True on a critical value where Eyring-Kramers predictions do not apply.
    notes : list of str
    """

    regime: str
    params: ModelParams
    thresholds: dict
    critical_points: list
    index_set: tuple
    valleys: list
    connections: list
    degenerate: bool = False
    notes: list = field(default_factory=list)

    @property
    def ek_available(self) -> bool:
        return not self.degenerate and len(self.valleys) >= 2

    def valley(self, index: int) -> Valley:
        for v in self.valleys:
            if v.index == index:
                return v
        raise KeyError(f"no valley with index {index}; index set is {self.index_set}")

    def adjacency(self) -> list:
        """Triples ``(saddle label, i, j)`` with ``i < j`` separated by the saddle."""
        out = []
        for c in self.connections:
            for i in sorted(c.sides[0]):
                for j in sorted(c.sides[1]):
                    if i != j:
                        a, b = min(i, j), max(i, j)
                        if (c.saddle.label, a, b) not in out:
                            out.append((c.saddle.label, a, b))
        return sorted(out, key=lambda t: (t[1], t[2], t[0]))

    def separating_saddles(self, i: int, j: int) -> list:
        """Labels of saddles joining valleys ``i`` and ``j`` directly."""
        a, b = min(i, j), max(i, j)
        return [s for s, u, v in self.adjacency() if (u, v) == (a, b)]

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "params": self.params.as_dict(),
            "thresholds": dict(self.thresholds),
            "critical_points": [c.as_dict() for c in self.critical_points],
            "index_set": list(self.index_set),
            "valleys": [v.as_dict() for v in self.valleys],
            "adjacency": [list(t) for t in self.adjacency()],
            "connections": [c.as_dict() for c in self.connections],
            "degenerate": self.degenerate,
            "ek_available": self.ek_available,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# gradient descent


def descend_batch(
    X: np.ndarray,
    params: ModelParams,
    tol: float = 1e-8,
    max_iter: int = 20_000,
    step_cap: float = 1e-2,
    newton_radius: float = 1e-3,
    stops: np.ndarray | None = None,
    stop_radius: float = 1e-7,
) -> np.ndarray:
    """Explicit-Euler gradient descent with backtracking for many points.

    The descent direction is the gradient with respect to the Euclidean
    metric of the simplex plane, so paths respect the permutation symmetry of
    the coordinates.  Each step moves by at most ``step_cap``.  A step
    is accepted when it stays in the open simplex and lowers the potential
    (Armijo condition); otherwise it is halved.  Accepted steps double the
    step length for the next iteration.  Close to a local minimum (gradient
    norm below ``newton_radius`` and positive definite Hessian) the Euler
    direction is replaced by the Newton direction, which removes the slow
    final approach in narrow valleys without changing the end point.

    Parameters
    ----------
    X : ndarray of shape (n, 2)
        Starting points ``(x1, x2)``, interior.
    params : ModelParams
    tol : float
        Stop when the gradient norm falls below ``tol``.
    stops : ndarray of shape (k, 2), optional
        Points (typically saddles) at which a trajectory is stopped once it
        comes within ``stop_radius``.

    Returns
    -------
    ndarray of shape (n, 2)
        End points.
    """
    X = np.array(X, dtype=float, copy=True).reshape(-1, 2)
    stops = None if stops is None or len(stops) == 0 else np.asarray(stops, dtype=float).reshape(-1, 2)
    n = len(X)
    h = np.full(n, 1.0)
    F = potential(X, params)
    F = np.atleast_1d(F)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        x = X[idx]
        g = np.atleast_2d(gradient(x, params))
        gn = np.linalg.norm(g, axis=1)
        done = gn < tol
        if stops is not None:
            dist = np.linalg.norm(x[:, None, :] - stops[None, :, :], axis=2).min(axis=1)
            done |= dist < stop_radius
        active[idx[done]] = False
        keep = ~done
        idx, x, g, gn = idx[keep], x[keep], g[keep], gn[keep]
        if idx.size == 0:
            break
        d = g @ _METRIC_INV
        hk = np.minimum(h[idx], step_cap / np.linalg.norm(d, axis=1))
        near = gn < newton_radius
        if near.any():
            Hs = hessian(x[near], params).reshape(-1, 2, 2)
            det = Hs[:, 0, 0] * Hs[:, 1, 1] - Hs[:, 0, 1] * Hs[:, 1, 0]
            pd = (det > 0) & (Hs[:, 0, 0] > 0)
            sel = np.flatnonzero(near)[pd]
            if sel.size:
                d[sel] = np.linalg.solve(Hs[pd], g[sel][..., None])[..., 0]
                dn = np.linalg.norm(d[sel], axis=1)
                hk[sel] = np.minimum(1.0, step_cap / dn)
        slope = np.einsum("ij,ij->i", g, d)
        for _ in range(60):
            trial = x - hk[:, None] * d
            x0 = 1.0 - trial[:, 0] - trial[:, 1]
            inside = (trial[:, 0] > 0) & (trial[:, 1] > 0) & (x0 > 0)
            Ft = np.full(len(idx), np.inf)
            if inside.any():
                Ft[inside] = potential(trial[inside], params)
            ok = inside & (Ft <= F[idx] - 1e-4 * hk * slope)
            if ok.all():
                break
            hk = np.where(ok, hk, 0.5 * hk)
        X[idx[ok]] = trial[ok]
        F[idx[ok]] = Ft[ok]
        h[idx] = np.where(ok, 2.0 * hk, hk)
        # Steps that underflow or fail mean convergence to machine precision.
        moved = hk * np.linalg.norm(d, axis=1)
        active[idx[~ok | (moved < 1e-14)]] = False
    return X


def descend(x, params: ModelParams, tol: float = 1e-8, step_cap: float = 1e-2) -> np.ndarray:
    """Gradient descent from a single point; see :func:`descend_batch`."""
    return descend_batch(np.asarray(x, dtype=float)[None, :2], params, tol=tol, step_cap=step_cap)[0]


def _nearest(x: np.ndarray, points: list[CriticalPoint]) -> tuple[int, float]:
    d = [float(np.hypot(x[0] - c.location.x1, x[1] - c.location.x2)) for c in points]
    k = int(np.argmin(d))
    return k, d[k]


def _valley_index(label: str, taken: set) -> int:
    base = {"m0": 0, "m1": 1, "m2": 2, "p": 3}.get(label)
    if base is not None and base not in taken:
        return base
    k = 4
    while k in taken:
        k += 1
    return k


def _unstable_direction(c: CriticalPoint, params: ModelParams) -> np.ndarray:
    w, v = eigh(hessian((c.location.x1, c.location.x2), params), SIMPLEX_METRIC)
    return v[:, 0] / np.linalg.norm(v[:, 0])


def _branch_landing(
    start: np.ndarray,
    params: ModelParams,
    cps: list[CriticalPoint],
    min_index: dict,
    depth: int = 0,
    origin: CriticalPoint | None = None,
) -> dict:
    """Valley distribution reached by descending from ``start``."""
    stops = np.array([[c.location.x1, c.location.x2] for c in cps if c.kind != LOCAL_MIN and c is not origin])
    radius = 1e-6
    axis = _mirror_axis(params)
    if axis is not None and _on_mirror(start, axis):
        # Rounding pushes a path on the mirror line off it near the next
        # saddle; catch the saddles lying on the same line from further away.
        stops = np.array([s for s in stops if _on_mirror(s, axis)])
        radius = 1e-3
    end = descend_batch(start[None, :], params, tol=1e-10, stops=stops, stop_radius=radius)[0]
    k, dist = _nearest(end, cps)
    c = cps[k]
    if dist > max(_SNAP_RADIUS, 1.01 * radius):
        raise RuntimeError(f"descent ended at {end}, away from every critical point")
    if c.kind == LOCAL_MIN:
        return {min_index[c.label]: 1.0}
    if depth > 4:
        raise RuntimeError("descent did not reach a local minimum")
    # Stalled on the stable manifold of another saddle: continue from it.
    out: dict = {}
    for part in _saddle_sides(c, params, cps, min_index, depth + 1):
        for j, w in part.items():
            out[j] = out.get(j, 0.0) + 0.5 * w
    return out


def _mirror_axis(params: ModelParams) -> int | None:
    """Coordinate fixed by the mirror symmetry of the potential, if any."""
    if params.r_e == 0.0:
        return None
    family, k = theta_family(params.theta_e)
    return None if family is None else k


def _on_mirror(x: np.ndarray, axis: int, tol: float = 1e-9) -> bool:
    c = np.array([1.0 - x[0] - x[1], x[0], x[1]])
    a, b = [j for j in range(3) if j != axis]
    return abs(c[a] - c[b]) < tol


def _saddle_sides(c, params, cps, min_index, depth=0) -> tuple:
    x = np.array([c.location.x1, c.location.x2])
    v = _unstable_direction(c, params)
    scale = 1e-4 * min(1.0, float(np.min(c.coords)) * 10)
    return tuple(_branch_landing(x + sgn * scale * v, params, cps, min_index, depth, c) for sgn in (1.0, -1.0))


def valley_structure(params: ModelParams, cps: list[CriticalPoint] | None = None) -> tuple[list, list]:
    """Valleys and saddle connections obtained by descent from every saddle.

    Returns
    -------
    (valleys, connections)
        Both empty when there is at most one local minimum.
    """
    if cps is None:
        cps = critical_points(params)
    minima = [c for c in cps if c.kind == LOCAL_MIN]
    if len(minima) < 2:
        return [], []
    min_index: dict = {}
    for c in sorted(minima, key=lambda c: c.label):
        min_index[c.label] = _valley_index(c.label, set(min_index.values()))
    connectors = [
        c
        for c in cps
        if c.kind == SADDLE or (c.kind == DEGENERATE and c.hessian_eigs[0] < 0.0 < c.hessian_eigs[1] + 1e-300)
    ]
    connections = [SaddleConnection(c, _saddle_sides(c, params, cps, min_index)) for c in connectors]
    return _valleys_from_connections(params, minima, min_index, connections), connections


def _valleys_from_connections(params, minima, min_index, connections) -> list:
    valleys = []
    for m in minima:
        i = min_index[m.label]
        exits = [c for c in connections if i in c.valleys and not c.is_loop]
        if not exits:
            continue
        E = min(c.saddle.height for c in exits)
        tol = 1e-10 * max(1.0, abs(E))
        gates = [c.saddle for c in exits if c.saddle.height <= E + tol]
        valleys.append(Valley(i, m, params.beta * (E - m.height), gates, E))
    return sorted(valleys, key=lambda v: v.index)


# ---------------------------------------------------------------------------
# zero field


def _zero_field_structure(params: ModelParams, cps: list[CriticalPoint], regime: str) -> tuple[list, list]:
    by = {c.label: c for c in cps}
    beta = params.beta
    if regime == "NoMetastability":
        return [], []
    hd = heights_and_depths(beta)
    conns = []
    if regime in ("ZF-I",):
        # sigma_k separates m_i and m_j, {i, j, k} = {0, 1, 2}.
        for k in range(3):
            i, j = [a for a in range(3) if a != k]
            conns.append(SaddleConnection(by[f"σ{k}"], ({i: 1.0}, {j: 1.0})))
        valleys = [
            Valley(i, by[f"m{i}"], hd.theta[i], [by[f"σ{k}"] for k in range(3) if k != i], hd.H_beta)
            for i in range(3)
        ]
        return valleys, conns
    if regime == "ZF-β₁-degenerate":
        # The three saddles merge into the degenerate centre.
        p = by["p"]
        valleys = [Valley(i, by[f"m{i}"], hd.theta[i], [p], hd.H_beta) for i in range(3)]
        return valleys, conns
    # beta3 < beta < 2: sigma_i separates m_i from the central minimum p.
    for i in range(3):
        conns.append(SaddleConnection(by[f"σ{i}"], ({i: 1.0}, {3: 1.0})))
    valleys = [Valley(i, by[f"m{i}"], hd.theta[i], [by[f"σ{i}"]], hd.H_beta) for i in range(3)]
    valleys.append(Valley(3, by["p"], hd.theta[3], [by[f"σ{i}"] for i in range(3)], hd.H_beta))
    return valleys, conns


# ---------------------------------------------------------------------------
# regime labels


def _near(a: float, b: float, tol: float = CRITICAL_VALUE_TOL) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(b))


def zero_field_regime(beta: float) -> str:
    """Regime label at zero field."""
    b3, b2, b1 = beta3(), beta2(), find_beta1()
    if beta < b3 or _near(beta, b3):
        return "NoMetastability"
    if _near(beta, b2):
        return "ZF-β₂"
    if beta < b2:
        return "ZF-III"
    if _near(beta, b1):
        return "ZF-β₁-degenerate"
    if beta < b1:
        return "ZF-II"
    return "ZF-I"


def regime_label(params: ModelParams, cps: list[CriticalPoint] | None = None) -> tuple[str, bool]:
    """Regime label and a flag telling whether the parameters sit on a degenerate value.

    The label depends only on ``(beta, r_e, theta_e)`` through the critical
    values, except for generic angles where the count of local minima is used.
    """
    beta, r = params.beta, params.r_e
    if r == 0.0:
        lab = zero_field_regime(beta)
        return lab, lab == "ZF-β₁-degenerate"
    family, _ = theta_family(params.theta_e)
    if beta > 2.0 and family == "pi-family":
        r1, r2 = r1_closed_form(beta), r2_closed_form(beta)
        if _near(r, r1):
            return "Field-π-I", True
        if r < r1:
            return "Field-π-I", False
        if r < r2:
            return "Field-π-II", False
        return "Field-π-III", False
    if beta > 2.0 and family == "zero-family":
        return ("Field-0-I" if r < r_zero_family(beta) else "Field-0-II"), False
    if cps is None:
        cps = critical_points(params)
    n_min = sum(c.kind == LOCAL_MIN for c in cps)
    n_sad = sum(c.kind == SADDLE for c in cps)
    if beta > 2.0 and n_min == 3 and n_sad == 3:
        return "SmallField-CaseIII", False
    return "NumericGeneric", False


def _thresholds(params: ModelParams) -> dict:
    out = {"beta1": find_beta1(), "beta2": beta2(), "beta3": beta3()}
    if params.r_e == 0.0 or params.beta <= 2.0:
        return out
    family, _ = theta_family(params.theta_e)
    if family == "pi-family":
        out.update(field_thresholds(params.beta, "pi-family"))
    elif family == "zero-family":
        out.update(field_thresholds(params.beta, "zero-family"))
        out["r_off"] = zero_family_fold(params.beta)
    return out


@lru_cache(maxsize=64)
def zero_family_fold(beta: float, xtol: float = 1e-10) -> float:
    """Field strength at which the two minima away from the field direction vanish.

    For a field along a spin direction and ``beta > 2``, the pair of minima
    ``m_1, m_2`` and their saddles persist beyond the threshold ``r_beta``
    where the central pair disappears.  This value is found by bisection on
    the number of local minima.
    """

    def n_min(r: float) -> int:
        return sum(c.kind == LOCAL_MIN for c in critical_points(ModelParams(beta, r, 0.0)))

    lo, hi = r_zero_family(beta), 0.05
    while n_min(hi) > 1:
        lo, hi = hi, 2.0 * hi
        if hi > 10.0:
            return math.inf
    while hi - lo > xtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if n_min(mid) > 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify_regime(params: ModelParams) -> RegimeReport:
    """Regime, critical values, critical points and valleys at ``params``.

    Zero-field valleys come from the closed-form structure.  With a field they
    are obtained by descent from the saddles.  Parameters on ``beta = 2``
    (zero field) or on ``r = r1`` (field opposite to a spin) are flagged as
    degenerate: the structure is reported but kinetic predictions refuse to
    run.
    """
    cps = critical_points(params)
    regime, degenerate = regime_label(params, cps)
    notes: list = []
    if params.r_e == 0.0:
        valleys, conns = _zero_field_structure(params, cps, regime)
    else:
        valleys, conns = valley_structure(params, cps)
    thresholds = _thresholds(params)
    if regime == "Field-0-II" and len(valleys) >= 2:
        notes.append(
            "two minima away from the field direction persist up to "
            f"r_off = {thresholds['r_off']:.12g}; the central pair has vanished"
        )
    if degenerate:
        notes.append("degenerate critical point present; Eyring-Kramers predictions unavailable")
    index_set = tuple(v.index for v in valleys)
    return RegimeReport(regime, params, thresholds, cps, index_set, valleys, conns, degenerate, notes)


# ---------------------------------------------------------------------------
# metastable sets


@dataclass(frozen=True)
class MetastableSets:
    """Lattice discretization of the epsilon-trimmed valleys.

    Attributes
    ----------
    N : int
    epsilon : float
        Margin below the gate height, in units of the potential.
    states : ndarray of shape (M, 3)
        All lattice states ``(n0, n1, n2)`` in the enumeration order of
        :func:`pottsmeta.model.lattice_points`.
    labels : ndarray of shape (M,)
        Valley index of each state, ``-1`` outside every set.
    """

    N: int
    epsilon: float
    states: np.ndarray
    labels: np.ndarray

    def members(self, i: int) -> np.ndarray:
        return self.states[self.labels == i]

    def as_dict(self) -> dict:
        return {int(i): self.members(int(i)) for i in np.unique(self.labels) if i >= 0}

    def __getitem__(self, i: int) -> np.ndarray:
        return self.members(i)


def metastable_sets(
    params: ModelParams,
    epsilon: float,
    N: int,
    report: RegimeReport | None = None,
    method: str = "components",
) -> MetastableSets:
    """Lattice points of the valleys trimmed by ``epsilon`` below their gate height.

    A lattice point belongs to valley ``i`` when its potential is below
    ``E_i - epsilon`` (``E_i`` the gate height of the valley) and gradient
    descent from it ends at the minimum of valley ``i``.

    Parameters
    ----------
    params : ModelParams
    epsilon : float
        Margin in units of the potential, ``0 < epsilon < min_i (E_i - F(m_i))``.
    N : int
    report : RegimeReport, optional
        Reused when given.
    method : {"components", "descent"}
        ``"descent"`` descends from every candidate point.  ``"components"``
        splits the candidates into lattice-connected components and descends
        from the lowest point of each; descent cannot leave a connected
        sublevel component, so both give the same sets.

    Raises
    ------
    EpsilonTooLarge
        If ``epsilon`` is not in the admissible range.
    NoValleys
        If the landscape has fewer than two valleys.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if N > 20_000:
        raise SizeLimit("metastable sets are enumerated for N <= 20000")
    report = report if report is not None else classify_regime(params)
    if not report.valleys:
        raise NoValleys(f"no metastable valleys in regime {report.regime}")
    gap = min(v.gap for v in report.valleys)
    if not 0.0 < epsilon < gap:
        raise EpsilonTooLarge(f"epsilon must lie in (0, {gap:.6g}); got {epsilon}")
    states = lattice_points(N)
    labels = np.full(len(states), -1, dtype=np.int64)
    interior = np.all(states > 0, axis=1)
    x = states[:, 1:] / N
    # The potential extends continuously to the boundary (0 log 0 = 0);
    # boundary points join the set of an adjacent interior component.
    F = np.asarray(potential(x, params))
    struct = np.array([[0, 1, 1], [1, 1, 1], [1, 1, 0]], dtype=bool)
    minima = {v.index: v.minimum for v in report.valleys}
    mins = list(minima.values())
    keys = list(minima.keys())

    def identify(ends: np.ndarray) -> np.ndarray:
        out = np.full(len(ends), -1, dtype=np.int64)
        for a, e in enumerate(ends):
            k, d = _nearest(e, mins)
            if d < 1e-3:
                out[a] = keys[k]
        return out

    for v in sorted(report.valleys, key=lambda v: v.height_reference):
        cand = (F < v.height_reference - epsilon) & (labels < 0)
        if not cand.any():
            continue
        if method not in ("components", "descent"):
            raise ValueError("method must be 'components' or 'descent'")
        grid = np.zeros((N + 1, N + 1), dtype=bool)
        n1, n2 = states[:, 1], states[:, 2]
        grid[n1[cand], n2[cand]] = True
        # Lattice moves change (n1, n2) by (+-1, 0), (0, +-1) or (+-1, -+1).
        comp, ncomp = ndimage.label(grid, structure=struct)
        comp_of = comp[n1, n2]
        cidx = np.flatnonzero(cand)
        inner = cand & interior
        if method == "descent":
            ends = descend_batch(x[inner], params, tol=1e-9)
            ids = identify(ends)
            sel = np.flatnonzero(inner)[ids == v.index]
            labels[sel] = v.index
            good = set(comp_of[sel].tolist())
            edge = cidx[~interior[cidx] & np.isin(comp_of[cidx], list(good))]
            labels[edge] = v.index
            continue
        Fi = np.where(interior, F, np.inf)
        reps = ndimage.minimum_position(
            np.where(grid, F_grid(Fi, states, N), np.inf), comp, index=np.arange(1, ncomp + 1)
        )
        has_inner = ndimage.maximum(
            F_grid(inner.astype(float), states, N) == 1.0, comp, index=np.arange(1, ncomp + 1)
        )
        keep = [c for c in range(ncomp) if has_inner[c]]
        if not keep:
            continue
        rep_x = np.array([[reps[c][0] / N, reps[c][1] / N] for c in keep])
        ends = descend_batch(rep_x, params, tol=1e-9)
        ids = identify(ends)
        good = {keep[a] + 1 for a in range(len(keep)) if ids[a] == v.index}
        sel = cidx[np.isin(comp_of[cidx], list(good))]
        labels[sel] = v.index
    return MetastableSets(N, epsilon, states, labels)


def F_grid(F: np.ndarray, states: np.ndarray, N: int) -> np.ndarray:
    """Arrange per-state values on the ``(n1, n2)`` grid (``inf`` outside the simplex)."""
    g = np.full((N + 1, N + 1), np.inf)
    g[states[:, 1], states[:, 2]] = F
    return g


# ---------------------------------------------------------------------------
# phase diagram


@dataclass(frozen=True)
class PhaseDiagram:
    """Regime labels on a ``(beta, r)`` grid with the band boundaries.

    Attributes
    ----------
    betas, rs : ndarray
    labels : ndarray of str, shape (len(betas), len(rs))
    boundaries : dict
        Name to ``(beta, r)`` polyline (ndarray of shape (k, 2)).
    """

    theta_class: str
    betas: np.ndarray
    rs: np.ndarray
    labels: np.ndarray
    boundaries: dict

    def rows(self):
        for i, b in enumerate(self.betas):
            for j, r in enumerate(self.rs):
                yield float(b), float(r), str(self.labels[i, j])


def phase_diagram(
    beta_range: tuple = (2.0, 4.0),
    r_range: tuple = (0.0, 0.3),
    theta_class: str = "pi-family",
    resolution: int | tuple = 100,
) -> PhaseDiagram:
    """Regime labels from the closed-form critical values.

    No root finding is done per cell: the pi family uses ``r1`` and ``r2``,
    the zero family uses ``r_beta``.  Cells with ``r = 0`` take the zero-field
    label and cells with ``beta <= 2`` and a field are ``NumericGeneric``.

    Parameters
    ----------
    beta_range, r_range : (float, float)
    theta_class : {"pi-family", "zero-family"}
    resolution : int or (int, int)
        Points per axis, at most 2000.
    """
    nb, nr = (resolution, resolution) if np.isscalar(resolution) else resolution
    if max(nb, nr) > 2000 or min(nb, nr) < 2:
        raise ValueError("resolution must be between 2 and 2000 per axis")
    if theta_class not in ("pi-family", "zero-family"):
        raise ValueError("theta_class must be 'pi-family' or 'zero-family'")
    betas = np.linspace(*beta_range, nb)
    rs = np.linspace(*r_range, nr)
    labels = np.empty((nb, nr), dtype=object)
    zf = {float(b): zero_field_regime(float(b)) for b in betas}
    for i, b in enumerate(betas):
        b = float(b)
        if b > 2.0:
            if theta_class == "pi-family":
                r1, r2 = r1_closed_form(b), r2_closed_form(b)
                row = np.where(rs < r1, "Field-π-I", np.where(rs < r2, "Field-π-II", "Field-π-III"))
            else:
                rb = r_zero_family(b)
                row = np.where(rs < rb, "Field-0-I", "Field-0-II")
        else:
            row = np.full(nr, "NumericGeneric", dtype=object)
        row = row.astype(object)
        row[rs == 0.0] = zf[b]
        labels[i] = row
    bb = betas[betas >= 2.0]
    boundaries = {}
    if theta_class == "pi-family":
        boundaries["r1"] = np.column_stack([bb, [r1_closed_form(float(b)) for b in bb]])
        boundaries["r2"] = np.column_stack([bb, [r2_closed_form(float(b)) for b in bb]])
    else:
        boundaries["r_beta"] = np.column_stack([bb, [r_zero_family(float(b)) for b in bb]])
    return PhaseDiagram(theta_class, betas, rs, labels.astype(str), boundaries)
