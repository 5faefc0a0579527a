"""Scalar functions, critical constants and thresholds of the landscape.

The one-dimensional functions below govern the critical points of the
potential on the symmetry lines ``x1 = x2`` (and their rotations):

* ``f_r(t) = 2 log((1 - 2t)/t) / (3 (1 - r - 3t))``: a point ``(t, t)`` is
  critical for the field ``r`` at angle ``pi`` iff ``f_r(t) = beta``;
* ``h(t) = -3t(1 - 2t) log((1 - 2t)/t) - 3t + 1``: the sign of ``r - h(t)``
  is the sign of ``f_r'(t)``;
* ``g0`` and ``k0``: auxiliary functions of the zero-field analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import lambertw

from ..errors import NoRoot, NoValleys, OutOfRange, SingularInput
from ..model import ModelParams, potential

__all__ = [
    "Diagnostics",
    "BranchRoots",
    "ZeroFieldHeights",
    "LineProfile",
    "f_r",
    "h_fun",
    "g0",
    "k0",
    "diagnostics",
    "find_m0_beta3",
    "find_beta1",
    "find_beta2",
    "beta3",
    "m0_root",
    "beta2",
    "m0_of_r",
    "solve_branch_roots",
    "online_roots",
    "heights_and_depths",
    "line_profile",
    "g_profile",
    "g_profile_inverses",
    "field_thresholds",
    "bracketed_root",
    "r1_closed_form",
    "r2_closed_form",
    "r_zero_family",
    "g_profile_top",
]

#: Absolute tolerance of all one-dimensional root solves.
XTOL = 1e-14

_TINY_T = 1e-300


def bracketed_root(f: Callable[[float], float], a: float, b: float, xtol: float = XTOL) -> float:
    """Root of ``f`` inside a sign-changing bracket ``[a, b]`` (Brent's method)."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise NoRoot(f"no sign change on [{a!r}, {b!r}]")
    return float(brentq(f, a, b, xtol=xtol, rtol=8.9e-16, maxiter=500))


def _log1p_ratio(z):
    """``log1p(z) / z`` with its removable value 1 at ``z = 0``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    zs = np.where(small, z, 0.0)
    out = np.where(small, 1.0 - zs / 2.0 + zs * zs / 3.0, np.log1p(safe) / safe)
    return out if out.ndim else float(out)


def _scalar(value):
    return float(value) if np.ndim(value) == 0 else value


def f_r(t, r: float = 0.0):
    """Branch function ``f_r(t)`` on ``(0, 1/2)``.

    Negative ``r`` is accepted and describes the field aligned with a spin
    (``f_{-r}`` is the branch function of that family).  At ``r = 0`` the
    removable value ``f_0(1/3) = 2`` is used.

    Raises
    ------
    SingularInput
        If ``t`` equals the pole ``(1 - r)/3`` for ``r != 0``.
    """
    t = np.asarray(t, dtype=float)
    u = 1.0 - 3.0 * t
    if r == 0.0:
        return _scalar(2.0 / (3.0 * t) * _log1p_ratio(u / t))
    denom = u - r
    if np.any(denom == 0.0):
        raise SingularInput(f"f_r has a pole at t=(1-r)/3={(1.0 - r) / 3.0!r}")
    return _scalar(2.0 * np.log1p(u / t) / (3.0 * denom))


def h_fun(t):
    """``h(t) = -3t(1-2t) log((1-2t)/t) - 3t + 1``, extended by ``h(1/2) = -1/2``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logterm = np.where(t < 0.5, (1.0 - 2.0 * t) * np.log1p((1.0 - 3.0 * t) / t), 0.0)
    return _scalar(-3.0 * t * logterm - 3.0 * t + 1.0)


def g0(t):
    """``g0(t) = (log t + 1/(3t)) - (log(1-2t) + 1/(3(1-2t)))``."""
    t = np.asarray(t, dtype=float)
    s = 1.0 - 2.0 * t
    return _scalar(np.log(t) + 1.0 / (3.0 * t) - np.log(s) - 1.0 / (3.0 * s))


def k0(t):
    """``k0(t) = (2 - 3t) log(1 - 2t) + (3t + 1) log t``."""
    t = np.asarray(t, dtype=float)
    return _scalar((2.0 - 3.0 * t) * np.log(1.0 - 2.0 * t) + (3.0 * t + 1.0) * np.log(t))


class Diagnostics(NamedTuple):
    f_r: float
    h: float
    g0: float
    k0: float


def diagnostics(t: float, r: float = 0.0) -> Diagnostics:
    """Evaluate ``f_r``, ``h``, ``g0`` and ``k0`` at ``t`` in ``(0, 1/2)``."""
    t = float(t)
    if not 0.0 < t < 0.5:
        raise ValueError(f"t must lie in (0, 1/2), got {t!r}")
    if r < 0.0:
        raise ValueError("r must be nonnegative")
    return Diagnostics(f_r(t, r), h_fun(t), g0(t), k0(t))


@lru_cache(maxsize=None)
def find_m0_beta3() -> tuple[float, float]:
    """Minimizer ``m0`` of ``f_0`` on ``(0, 1/2)`` and the value ``beta3 = f_0(m0)``.

    ``m0`` is the unique zero of ``h`` on ``(0, 1/4)``.
    """
    m0 = bracketed_root(h_fun, 1e-6, 0.25, xtol=1e-16)
    return m0, float(f_r(m0))


def m0_root() -> float:
    return find_m0_beta3()[0]


def beta3() -> float:
    return find_m0_beta3()[1]


def _hessian_factor_at_center(beta: float) -> float:
    # Hessian at (1/3, 1/3) is 3(2 - beta)/(2 beta) [[2, 1], [1, 2]].
    return 3.0 * (2.0 - beta) / (2.0 * beta)


@lru_cache(maxsize=None)
def find_beta1() -> float:
    """Inverse temperature at which the Hessian at the center changes sign.

    Plain bisection on the scalar factor of the Hessian at ``(1/3, 1/3)``;
    the bracket ``[1, 3]`` makes the first midpoint the exact root ``2``.
    """
    lo, hi = 1.0, 3.0
    flo = _hessian_factor_at_center(lo)
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        fm = _hessian_factor_at_center(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


class BranchRoots(NamedTuple):
    """Roots of ``f_r(t) = beta`` on ``(0, 1/2)``.

    For the field opposing a spin (``r >= 0``): ``p < u < q`` where present.
    At ``r = 0`` only ``p`` and ``q`` exist.
    """

    p: float | None
    u: float | None
    q: float | None

    def present(self) -> list[float]:
        return [v for v in self if v is not None]


def m0_of_r(r: float) -> float:
    """Minimizer ``m0(r)`` of ``f_r`` on ``(0, (1 - r)/3)``, i.e. ``h(m0(r)) = r``.

    Defined for ``0 <= r < 1``.
    """
    if not 0.0 <= r < 1.0:
        raise ValueError("m0(r) is defined for 0 <= r < 1")
    if r == 0.0:
        return m0_root()
    return bracketed_root(lambda t: h_fun(t) - r, _TINY_T, m0_root())


def _beta_is(beta: float, ref: float, tol: float = 1e-10) -> bool:
    return abs(beta - ref) <= tol * max(1.0, abs(ref))


def _scan_roots(g: Callable[[float], float], a: float, b: float, grid: np.ndarray | None = None) -> list[float]:
    """All sign changes of ``g`` on a grid of ``[a, b]`` refined by Brent's method."""
    if grid is None:
        grid = np.linspace(a, b, 2001)
    vals = np.array([g(float(t)) for t in grid])
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(bracketed_root(g, float(grid[i]), float(grid[i + 1])))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def _t_grid(a: float, b: float, n: int = 1500) -> np.ndarray:
    """Grid on ``[a, b]`` that is geometric near the left end."""
    if a <= 0.0:
        raise ValueError("left end must be positive")
    if a >= 1e-3:
        return np.linspace(a, b, n)
    split = min(1e-3, 0.5 * (a + b))
    left = np.geomspace(a, split, 200)
    right = np.linspace(split, b, n)
    return np.unique(np.concatenate([left, right]))


def online_roots(beta: float, s: float) -> list[float]:
    """All roots of ``f_s(t) = beta`` on ``(0, 1/2)`` for any real ``s``.

    The interval is split at the pole ``(1 - s)/3`` when it lies inside, each
    pole-free piece is scanned for sign changes and each change is refined.
    """
    g = lambda t: f_r(t, s) - beta  # noqa: E731
    pole = (1.0 - s) / 3.0
    upper = 0.5 - 1e-15
    pieces = []
    if s != 0.0 and 0.0 < pole < 0.5:
        gap = 1e-13
        pieces = [(_TINY_T, pole - gap), (pole + gap, upper)]
    else:
        pieces = [(_TINY_T, upper)]
    roots: list[float] = []
    for a, b in pieces:
        if b <= a:
            continue
        grid = _t_grid(max(a, _TINY_T), b)
        if grid[0] > a:
            grid = np.concatenate([[a], grid])
        roots.extend(_scan_roots(g, a, b, grid))
    return sorted(set(roots))


def solve_branch_roots(beta: float, r: float = 0.0) -> BranchRoots:
    """Roots of ``f_r(t) = beta`` for the field opposing a spin.

    Parameters
    ----------
    beta : float
    r : float, default 0
        Field magnitude, nonnegative.

    Returns
    -------
    BranchRoots
        ``r = 0``: ``p < m0 < q`` (both equal to ``m0`` at ``beta3``).
        ``0 < r < r2``: ``p < u < q`` with ``q > 1/3``.  Otherwise only ``q``.

    Raises
    ------
    NoRoot
        If ``r = 0`` and ``beta < beta3``.
    """
    if beta <= 0.0 or r < 0.0:
        raise ValueError("beta must be positive and r nonnegative")
    m0, b3 = find_m0_beta3()
    if r == 0.0:
        if _beta_is(beta, b3, 1e-12):
            return BranchRoots(m0, None, m0)
        if beta < b3:
            raise NoRoot(f"f_0(t) = beta has no solution for beta < beta3 = {b3:.12g}")
        g = lambda t: f_r(t) - beta  # noqa: E731
        p = bracketed_root(g, _TINY_T, m0)
        q = bracketed_root(g, m0, 0.5 - 1e-15)
        if beta == 2.0:
            q = 1.0 / 3.0
        return BranchRoots(p, None, q)
    g = lambda t: f_r(t, r) - beta  # noqa: E731
    # f_r(1/3) = 0 < beta and f_r -> +inf as t -> 1/2: one root above 1/3.
    q = bracketed_root(g, 1.0 / 3.0, 0.5 - 1e-15)
    if r >= 1.0:
        return BranchRoots(None, None, q)
    # On (0, (1-r)/3) f_r decreases to its minimum at m0(r), then increases to +inf.
    m = m0_of_r(r)
    fmin = g(m)
    if fmin > 0.0:
        return BranchRoots(None, None, q)
    if fmin == 0.0:
        return BranchRoots(m, m, q)
    pole = (1.0 - r) / 3.0
    p = bracketed_root(g, _TINY_T, m)
    u = bracketed_root(g, m, pole * (1.0 - 1e-14))
    return BranchRoots(p, u, q)


@dataclass(frozen=True)
class ZeroFieldHeights:
    """Heights of the zero-field landscape.

    Attributes
    ----------
    beta : float
    H_beta : float
        Height of the saddles.
    h_beta : float
        Height of the aligned minima.
    theta : dict
        Valley depths; keys 0, 1, 2 for the aligned minima and 3 for the
        central valley when ``beta3 < beta < 2``.
    p, q : float
        Branch roots defining the minima and the saddles.
    """

    beta: float
    H_beta: float
    h_beta: float
    theta: dict
    p: float
    q: float


def heights_and_depths(beta: float) -> ZeroFieldHeights:
    """Saddle and minimum heights and valley depths at zero field.

    Raises
    ------
    NoValleys
        If ``beta <= beta3``.
    """
    b3 = beta3()
    if beta <= b3 or _beta_is(beta, b3, 1e-12):
        raise NoValleys(f"no metastable valleys for beta <= beta3 = {b3:.12g}")
    roots = solve_branch_roots(beta, 0.0)
    params = ModelParams(beta)
    p, q = roots.p, roots.q
    H = float(potential((q, q), params))
    h = float(potential((p, p), params))
    theta = {i: beta * (H - h) for i in range(3)}
    if beta < 2.0:
        theta[3] = beta * H
    return ZeroFieldHeights(beta, H, h, theta, p, q)


def _h_beta(beta: float) -> float:
    p = solve_branch_roots(beta, 0.0).p
    return float(potential((p, p), ModelParams(beta)))


@lru_cache(maxsize=None)
def find_beta2() -> float:
    """Unique ``beta2`` in ``(beta3, 2)`` where the aligned minima reach height 0."""
    b3 = beta3()
    return bracketed_root(_h_beta, b3 * (1.0 + 1e-12), 2.0, xtol=1e-13)


def beta2() -> float:
    return find_beta2()


class LineProfile(NamedTuple):
    t: float
    F: float
    dF_dt: float
    identity: float


_LINES = {
    0: lambda t: (t, t),
    1: lambda t: (1.0 - 2.0 * t, t),
    2: lambda t: (t, 1.0 - 2.0 * t),
}


def line_profile(i: int, t: float, beta: float) -> LineProfile:
    """Potential along the symmetry line ``l_i`` at zero field.

    ``l_0(t) = (t, t)``, ``l_1(t) = (1 - 2t, t)``, ``l_2(t) = (t, 1 - 2t)``;
    on each, ``x_i = 1 - 2t`` and the other two coordinates equal ``t``.

    Returns
    -------
    LineProfile
        ``F`` and ``dF/dt`` computed by differentiating ``F`` along the line,
        and ``identity = (3/beta)(3t - 1)(f_0(t) - beta)``.
    """
    if i not in _LINES:
        raise ValueError("line index must be 0, 1 or 2")
    if not 0.0 <= t <= 0.5:
        raise ValueError("t must lie in [0, 1/2]")
    params = ModelParams(beta)
    x = _LINES[i](t)
    F = float(potential(x, params))
    if 0.0 < t < 0.5:
        # F(l_i(t)) = -(9t^2 - 6t + 1)/2 + [2 t log(3t) + (1-2t) log(3(1-2t))]/beta
        dF = -(9.0 * t - 3.0) + (2.0 * math.log(3.0 * t) - 2.0 * math.log(3.0 * (1.0 - 2.0 * t))) / beta
        ident = 3.0 / beta * (3.0 * t - 1.0) * (f_r(t) - beta)
    else:
        dF = math.nan
        ident = math.nan
    return LineProfile(t, F, dF, ident)


def g_profile(x, beta: float):
    """Scalar profile ``G(x) = log(x)/beta - 3x/2`` of the field analysis."""
    return _scalar(np.log(np.asarray(x, dtype=float)) / beta - 1.5 * np.asarray(x, dtype=float))


def g_profile_top(beta: float) -> tuple[float, float]:
    """Maximizer ``l = 2/(3 beta)`` of :func:`g_profile` and the maximum ``g``."""
    l = 2.0 / (3.0 * beta)
    return l, float(g_profile(l, beta))


def _polish(x: float, y: float, beta: float) -> float:
    for _ in range(2):
        d = 1.0 / (beta * x) - 1.5
        if abs(d) < 1e-6:
            break
        step = (float(g_profile(x, beta)) - y) / d
        if not math.isfinite(step) or abs(step) > 0.5 * x:
            break
        x -= step
    return x


def g_profile_inverses(beta: float, y):
    """Both preimages ``H(y) <= l <= K(y)`` of ``y`` under :func:`g_profile`.

    Uses the two real branches of the Lambert W function,
    ``x = -W(-(3 beta/2) e^{beta y}) / (3 beta / 2)``, followed by a guarded
    Newton polish away from the fold at ``l``.

    Raises
    ------
    OutOfRange
        If ``y`` exceeds the maximum ``g`` of the profile.
    """
    l, g = g_profile_top(beta)
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr > g + 1e-15 * max(1.0, abs(g))):
        raise OutOfRange(f"y must not exceed g_beta = {g!r}")
    c = 1.5 * beta
    z = np.maximum(-c * np.exp(beta * np.minimum(y_arr, g)), -math.exp(-1.0))
    H = np.real(-lambertw(z, 0) / c)
    K = np.real(-lambertw(z, -1) / c)
    H = np.minimum(H, l)
    K = np.maximum(K, l)
    if y_arr.ndim == 0:
        yv = float(y_arr)
        return _polish(float(H), yv, beta), _polish(float(K), yv, beta)
    return H, K


def _r_star(beta: float, r2: float) -> float | None:
    """Field at which the central minimum and the central saddle are level."""

    def diff(r: float) -> float:
        roots = solve_branch_roots(beta, r)
        if roots.p is None:
            return math.nan
        params = ModelParams(beta, r, math.pi)
        return float(potential((roots.p, roots.p), params) - potential((roots.q, roots.q), params))

    grid = np.linspace(r2 * 1e-6, r2 * (1.0 - 1e-9), 200)
    vals = np.array([diff(float(r)) for r in grid])
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if math.isfinite(a) and math.isfinite(b) and a * b < 0.0:
            return bracketed_root(diff, float(grid[i]), float(grid[i + 1]), xtol=1e-15)
    return None


def r1_closed_form(beta: float) -> float:
    """Field at which the off-line saddles merge with the central point (angle pi)."""
    if beta == 2.0:
        return 0.0
    return 1.0 - 2.0 / beta - 2.0 / (3.0 * beta) * math.log(1.5 * beta - 2.0)


def _t_beta(beta: float, sign: float) -> float:
    return 0.25 + sign * math.sqrt(1.0 / 16.0 - 1.0 / (9.0 * beta))


def r2_closed_form(beta: float) -> float:
    """Field above which only one critical point remains on the line (angle pi)."""
    return float(h_fun(_t_beta(beta, -1.0)))


def r_zero_family(beta: float) -> float:
    """Field above which metastability disappears for a field aligned with a spin.

    Equal to ``-h(1/4 + sqrt(1/16 - 1/(9 beta)))``, which is positive for
    ``beta > 2`` because ``h < 0`` on ``(1/3, 1/2)``.
    """
    t = _t_beta(beta, +1.0)
    if t == 1.0 / 3.0 or beta == 2.0:
        return 0.0
    return float(-h_fun(t))


def field_thresholds(beta: float, theta_class: str = "pi-family", include_r_star: bool = True) -> dict:
    """Critical field strengths for the two symmetric field families.

    Parameters
    ----------
    beta : float
        Inverse temperature, at least 2.
    theta_class : {"pi-family", "zero-family"}
        ``"pi-family"`` for angles ``(2k + 1) pi / 3`` (field between two
        spins), ``"zero-family"`` for ``2 k pi / 3`` (field along a spin).
    include_r_star : bool, default True
        Whether to solve numerically for ``r_star`` (pi family only).

    Returns
    -------
    dict
        ``{"r1", "r2", "r_star"}`` or ``{"r_beta"}``.
    """
    if beta < 2.0:
        raise ValueError("field thresholds are defined for beta >= 2")
    if theta_class in ("pi-family", "pi"):
        r1 = r1_closed_form(beta)
        r2 = r2_closed_form(beta)
        out = {"r1": r1, "r2": r2}
        if include_r_star:
            out["r_star"] = _r_star(beta, r2) if beta > 2.0 else None
        return out
    if theta_class in ("zero-family", "zero", "0"):
        return {"r_beta": r_zero_family(beta)}
    raise ValueError(f"unknown theta class {theta_class!r}")
