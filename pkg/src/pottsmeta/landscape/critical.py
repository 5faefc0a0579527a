"""Critical points of the potential and their classification.

Three routes are used depending on the field:

* zero field: the seven (or fewer) points are built from the branch roots
  ``p_beta < q_beta`` of ``f_0(t) = beta``;
* field angle a multiple of ``pi/3``: the symmetry line through the field
  direction carries roots of a one-dimensional branch equation, and the
  remaining points are solutions of a scalar equation in the level ``y`` of
  the profile ``G(x) = log(x)/beta - 3x/2`` (all coordinates of a critical
  point satisfy ``G(x_i) - h_e . v_i = const``);
* any other angle: damped Newton iterations on the gradient from a grid of
  interior starting points, deduplicated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..errors import NoSolution
from ..model import (
    ModelParams,
    SimplexPoint,
    a_hessian_spectrum,
    gradient,
    hessian,
    hessian_det,
    potential,
)
from .functions import (
    BranchRoots,
    beta3,
    bracketed_root,
    g_profile,
    g_profile_inverses,
    g_profile_top,
    online_roots,
    solve_branch_roots,
    _beta_is,
)

__all__ = [
    "LOCAL_MIN",
    "SADDLE",
    "LOCAL_MAX",
    "DEGENERATE",
    "DEGENERACY_TOL",
    "CriticalPoint",
    "OffDiagonalSolution",
    "classify_point",
    "newton_refine",
    "critical_points",
    "multistart_critical_points",
    "solve_offdiagonal",
    "theta_family",
]

LOCAL_MIN = "LocalMin"
SADDLE = "Saddle"
LOCAL_MAX = "LocalMax"
DEGENERATE = "Degenerate"

#: ``|det hessian|`` below this value marks a critical point as degenerate.
DEGENERACY_TOL = 1e-8

#: Largest gradient norm accepted for a reported critical point.
GRADIENT_TOL = 1e-9

_LABEL_ORDER = ["m0", "m1", "m2", "σ0", "σ1", "σ2", "p"]


@dataclass(frozen=True)
class CriticalPoint:
    """A critical point of the potential with its local classification.

    Attributes
    ----------
    location : SimplexPoint
    kind : str
        One of ``LocalMin``, ``Saddle``, ``LocalMax``, ``Degenerate``.
    height : float
        Value of the potential.
    hessian_eigs : tuple of float
        Eigenvalues of the Hessian, ascending.
    a_hessian_negative_eig : float or None
        The negative eigenvalue ``-mu`` of ``A @ hessian`` at a saddle.
    label : str
        ``m0..m2`` (minima near a vertex), ``σ0..σ2`` (saddles), ``p``
        (central point and its continuation).
    det : float
        Determinant of the Hessian.
    gradient_norm : float
    """

    location: SimplexPoint
    kind: str
    height: float
    hessian_eigs: tuple
    a_hessian_negative_eig: float | None
    label: str
    det: float
    gradient_norm: float

    @property
    def coords(self) -> np.ndarray:
        return self.location.coords

    @property
    def mu(self) -> float | None:
        """Positive number ``mu`` with ``-mu`` the negative eigenvalue of ``A @ hessian``."""
        return None if self.a_hessian_negative_eig is None else -self.a_hessian_negative_eig

    @property
    def degenerate(self) -> bool:
        return self.kind == DEGENERATE

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "x1": self.location.x1,
            "x2": self.location.x2,
            "x0": self.location.x0,
            "height": self.height,
            "hessian_eigs": list(self.hessian_eigs),
            "det": self.det,
            "a_hessian_negative_eig": self.a_hessian_negative_eig,
            "gradient_norm": self.gradient_norm,
            "degenerate": self.degenerate,
        }


def classify_point(x, params: ModelParams, label: str | None = None) -> CriticalPoint:
    """Classify a (numerically) critical point through its Hessian."""
    pt = x if isinstance(x, SimplexPoint) else SimplexPoint(float(x[0]), float(x[1]))
    xy = (pt.x1, pt.x2)
    hess = hessian(xy, params)
    eigs = np.linalg.eigvalsh(hess)
    det = float(hessian_det(xy, params))
    if abs(det) < DEGENERACY_TOL:
        kind = DEGENERATE
    elif det < 0.0:
        kind = SADDLE
    elif eigs[0] > 0.0:
        kind = LOCAL_MIN
    else:
        kind = LOCAL_MAX
    neg = None
    if kind == SADDLE:
        spec = a_hessian_spectrum(xy, params)
        neg = float(np.min(np.real(spec.eigenvalues)))
    gnorm = float(np.linalg.norm(gradient(xy, params)))
    lab = label if label is not None else _geometric_label(pt.coords, kind)
    return CriticalPoint(
        location=pt,
        kind=kind,
        height=float(potential(xy, params)),
        hessian_eigs=(float(eigs[0]), float(eigs[1])),
        a_hessian_negative_eig=neg,
        label=lab,
        det=det,
        gradient_norm=gnorm,
    )


def _geometric_label(c: np.ndarray, kind: str) -> str:
    order = np.sort(c)
    spread = order[2] - order[0]
    if kind == LOCAL_MAX:
        return "p"
    if spread < 1e-6:
        return "p"
    if kind == LOCAL_MIN:
        return "p" if spread < 0.25 else f"m{int(np.argmax(c))}"
    if kind == SADDLE:
        on_line = min(order[1] - order[0], order[2] - order[1]) < 1e-9
        if on_line and order[1] - order[0] < order[2] - order[1]:
            return "p"
        return f"σ{int(np.argmin(c))}"
    return f"m{int(np.argmax(c))}"


def newton_refine(x, params: ModelParams, tol: float = 1e-13, max_iter: int = 60) -> np.ndarray:
    """Newton iterations on the gradient, damped to stay inside the simplex."""
    X = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    out = _newton_batch(X, params, tol=tol, max_iter=max_iter)
    return out[0] if np.ndim(x) == 1 else out


def _newton_batch(X: np.ndarray, params: ModelParams, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    X = X.copy()
    active = np.ones(len(X), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        Xa = X[active]
        g = gradient(Xa, params)
        gn = np.linalg.norm(g, axis=1)
        done = gn <= tol
        H = hessian(Xa, params)
        det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
        safe = np.abs(det) > 1e-300
        inv_det = np.where(safe, 1.0 / np.where(safe, det, 1.0), 0.0)
        step = np.empty_like(g)
        step[:, 0] = (H[:, 1, 1] * g[:, 0] - H[:, 0, 1] * g[:, 1]) * inv_det
        step[:, 1] = (-H[:, 1, 0] * g[:, 0] + H[:, 0, 0] * g[:, 1]) * inv_det
        step = np.where(safe[:, None], step, g)
        norm = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, 0.1 / np.maximum(norm, 1e-300))
        dx = -step * scale[:, None]
        coords = np.stack([1.0 - Xa[:, 0] - Xa[:, 1], Xa[:, 0], Xa[:, 1]], axis=1)
        dcoords = np.stack([-dx[:, 0] - dx[:, 1], dx[:, 0], dx[:, 1]], axis=1)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = np.where(dcoords < 0.0, coords / -dcoords, np.inf)
        alpha = np.minimum(1.0, 0.9 * ratio.min(axis=1))
        dx = dx * alpha[:, None]
        dx[done] = 0.0
        X[active] = Xa + dx
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return X


def _dedupe(points: list[np.ndarray], radius: float) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for pt in points:
        if all(np.linalg.norm(pt - k) > radius for k in kept):
            kept.append(pt)
    return kept


def multistart_critical_points(
    params: ModelParams, grid: int = 40, dedupe_radius: float = 1e-7
) -> list[CriticalPoint]:
    """All critical points reached by Newton iterations from an interior grid.

    Parameters
    ----------
    params : ModelParams
    grid : int, default 40
        Starting points ``((i + 1/2)/grid, (j + 1/2)/grid)`` inside the simplex.
    dedupe_radius : float, default 1e-7
    """
    ticks = (np.arange(grid) + 0.5) / grid
    a, b = np.meshgrid(ticks, ticks, indexing="ij")
    starts = np.stack([a.ravel(), b.ravel()], axis=1)
    starts = starts[starts.sum(axis=1) < 1.0 - 0.25 / grid]
    X = _newton_batch(starts, params, tol=1e-14, max_iter=200)
    coords = np.stack([1.0 - X[:, 0] - X[:, 1], X[:, 0], X[:, 1]], axis=1)
    ok = np.all(coords > 0.0, axis=1) & np.all(np.isfinite(X), axis=1)
    X = X[ok]
    gn = np.linalg.norm(gradient(X, params), axis=1)
    X = X[gn <= GRADIENT_TOL]
    # Sort for deterministic deduplication: lowest gradient first.
    order = np.argsort(np.linalg.norm(gradient(X, params), axis=1), kind="stable")
    kept = _dedupe([X[i] for i in order], dedupe_radius)
    return _finalize([classify_point(k, params) for k in kept])


def theta_family(theta: float, tol: float = 1e-12) -> tuple[str | None, int]:
    """Classify a field angle as a multiple of ``pi/3``.

    Returns
    -------
    (family, k)
        ``("zero-family", k)`` for ``theta = 2 k pi / 3``, ``("pi-family", k)``
        for ``theta = pi + 2 k pi / 3``, ``(None, 0)`` otherwise.
    """
    m = theta / (math.pi / 3.0)
    mi = round(m)
    if abs(m - mi) > tol * max(1.0, abs(m)):
        return None, 0
    mi %= 6
    if mi % 2 == 0:
        return "zero-family", mi // 2
    return "pi-family", ((mi - 3) // 2) % 3


def _rotate(coords: np.ndarray, k: int) -> np.ndarray:
    """Coordinates after rotating the picture by ``2 pi k / 3``: ``x'_j = x_{j-k}``."""
    return np.roll(coords, k)


def _zero_field_locations(beta: float) -> list[tuple[np.ndarray, str]]:
    center = np.array([1.0, 1.0, 1.0]) / 3.0
    out = [(center, "p")]
    b3 = beta3()
    if beta < b3 and not _beta_is(beta, b3, 1e-12):
        return out
    roots = solve_branch_roots(beta, 0.0)
    for t, name in ((roots.p, "m"), (roots.q, "σ")):
        for i in range(3):
            c = np.full(3, t)
            c[i] = 1.0 - 2.0 * t
            out.append((c, f"{name}{i}"))
    return out


def _zero_field_points(params: ModelParams) -> list[CriticalPoint]:
    locs = _zero_field_locations(params.beta)
    pts: list[CriticalPoint] = []
    seen: list[np.ndarray] = []
    for c, name in locs:
        if any(np.linalg.norm(c - s) < 1e-12 for s in seen):
            continue
        seen.append(c)
        cp = classify_point(SimplexPoint(float(c[1]), float(c[2])), params, label=name)
        if cp.kind == DEGENERATE and name != "p" and name.startswith("σ"):
            # At beta3 the minimum and saddle branches merge; keep the m label.
            cp = _relabel(cp, "m" + name[1:])
        pts.append(cp)
    return _finalize(pts, relabel=False)


def _relabel(cp: CriticalPoint, label: str) -> CriticalPoint:
    return CriticalPoint(**{**cp.__dict__, "label": label})


class OffDiagonalSolution(NamedTuple):
    """Off-line critical points of the field family at angle ``pi``.

    ``y1`` solves ``K(y - 3r/2) + H(y) + K(y) = 1`` (two saddles) and ``y2``
    solves ``H(y - 3r/2) + H(y) + K(y) = 1`` (two minima).
    """

    y1: float | None
    y2: float
    minima: tuple
    saddles: tuple


def _offline_levels(beta: float, s: float, branch: str) -> list[float]:
    """Levels ``y`` with ``X(y + s) + H(y) + K(y) = 1``, ``X`` the given branch."""
    l, g = g_profile_top(beta)
    if l >= 1.0:
        return []
    y_lo = float(g_profile(1.0, beta))
    y_hi = min(g, g - s)
    if y_hi <= y_lo:
        return []
    pick = 0 if branch == "H" else 1

    def resid(y):
        y = np.minimum(y, y_hi)
        H, K = g_profile_inverses(beta, y)
        X = g_profile_inverses(beta, np.minimum(y + s, g))[pick]
        return X + H + K - 1.0

    u = np.linspace(0.0, 1.0, 4001)
    grid = y_hi - (y_hi - y_lo) * u**2
    grid = grid[::-1]
    vals = resid(grid)
    roots = []
    f = lambda y: float(resid(np.float64(y)))  # noqa: E731
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(bracketed_root(f, float(grid[i]), float(grid[i + 1]), xtol=1e-15))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def _offline_points(beta: float, s: float) -> list[tuple[np.ndarray, str]]:
    out = []
    for branch in ("K", "H"):
        for y in _offline_levels(beta, s, branch):
            H, K = g_profile_inverses(beta, y)
            X = g_profile_inverses(beta, min(y + s, g_profile_top(beta)[1]))[0 if branch == "H" else 1]
            out.append((np.array([X, H, K]), branch))
            out.append((np.array([X, K, H]), branch))
    return out


def solve_offdiagonal(beta: float, r: float) -> OffDiagonalSolution:
    """Off-line critical points for the field at angle ``pi``.

    Raises
    ------
    NoSolution
        If the minimum equation has no solution.
    """
    if beta <= 2.0:
        raise ValueError("the off-line analysis assumes beta > 2")
    params = ModelParams(beta, r, math.pi)
    s = -1.5 * r
    y1s = _offline_levels(beta, s, "K")
    y2s = _offline_levels(beta, s, "H")
    if not y2s:
        raise NoSolution("no solution of the minimum equation")
    y2 = y2s[0]
    H2, K2 = g_profile_inverses(beta, y2)
    x0 = g_profile_inverses(beta, y2 + s)[0]
    minima = tuple(
        classify_point(SimplexPoint(*_polish_point(np.array([a, b]), params)), params)
        for a, b in ((H2, K2), (K2, H2))
    )
    saddles: tuple = ()
    y1 = None
    if y1s:
        y1 = y1s[0]
        H1, K1 = g_profile_inverses(beta, y1)
        saddles = tuple(
            classify_point(SimplexPoint(*_polish_point(np.array([a, b]), params)), params)
            for a, b in ((H1, K1), (K1, H1))
        )
    del x0
    return OffDiagonalSolution(y1, y2, minima, saddles)


def _polish_point(xy: np.ndarray, params: ModelParams) -> np.ndarray:
    g0 = np.linalg.norm(gradient(xy, params))
    if g0 <= 1e-14:
        return xy
    refined = newton_refine(xy, params, tol=1e-14, max_iter=8)
    if np.all(np.isfinite(refined)) and np.linalg.norm(refined - xy) < 1e-6:
        g1 = np.linalg.norm(gradient(refined, params))
        if g1 < g0:
            return refined
    return xy


def _symmetric_family_points(params: ModelParams, family: str, k: int) -> list[CriticalPoint]:
    beta, r = params.beta, params.r_e
    s_line = r if family == "pi-family" else -r
    s_off = -1.5 * r if family == "pi-family" else 1.5 * r
    candidates: list[np.ndarray] = []
    for t in online_roots(beta, s_line):
        candidates.append(np.array([1.0 - 2.0 * t, t, t]))
    for c, _ in _offline_points(beta, s_off):
        candidates.append(c)
    pts: list[np.ndarray] = []
    for c in candidates:
        c = _rotate(c, k)
        xy = _polish_point(np.array([c[1], c[2]]), params)
        inside = np.all(np.array([1.0 - xy[0] - xy[1], xy[0], xy[1]]) > 0.0)
        if inside and np.linalg.norm(gradient(xy, params)) <= GRADIENT_TOL:
            pts.append(xy)
    kept = _dedupe(pts, 1e-9)
    return _finalize([classify_point(x, params) for x in kept])


def _finalize(points: list[CriticalPoint], relabel: bool = True) -> list[CriticalPoint]:
    if relabel:
        counts: dict[str, int] = {}
        fixed = []
        for cp in sorted(points, key=lambda c: (c.label, c.height, c.location.x1)):
            n = counts.get(cp.label, 0)
            counts[cp.label] = n + 1
            fixed.append(cp if n == 0 else _relabel(cp, cp.label + "'" * n))
        points = fixed

    def key(cp: CriticalPoint):
        base = cp.label.rstrip("'")
        rank = _LABEL_ORDER.index(base) if base in _LABEL_ORDER else len(_LABEL_ORDER)
        return (rank, len(cp.label), cp.height)

    return sorted(points, key=key)


def critical_points(params: ModelParams, method: str = "auto") -> list[CriticalPoint]:
    """All critical points of the potential.

    Parameters
    ----------
    params : ModelParams
    method : {"auto", "multistart"}
        ``"auto"`` uses the exact constructions at zero field and for angles
        that are multiples of ``pi/3`` and Newton multistart otherwise;
        ``"multistart"`` forces the numerical route.

    Returns
    -------
    list of CriticalPoint
        Sorted by label (``m0, m1, m2, σ0, σ1, σ2, p``).  Degenerate points
        are flagged through ``kind == "Degenerate"``.
    """
    if method == "multistart":
        return multistart_critical_points(params)
    if method != "auto":
        raise ValueError("method must be 'auto' or 'multistart'")
    if params.r_e == 0.0:
        return _zero_field_points(params)
    family, k = theta_family(params.theta_e)
    if family is not None:
        return _symmetric_family_points(params, family, k)
    return multistart_critical_points(params)


def _pi_family_online(beta: float, r: float) -> BranchRoots:
    return solve_branch_roots(beta, r)
