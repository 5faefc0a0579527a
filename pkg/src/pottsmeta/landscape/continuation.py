"""Continuation of the zero-field critical points in the field strength.

Each non-degenerate critical point of the zero-field potential persists for
small fields.  It is followed in ``r`` (field direction fixed) with an Euler
predictor ``dx/dr = -hess^{-1} d(grad F)/dr`` and a Newton corrector.  A
failed corrector halves the step; a step below ``dr_min`` signals a fold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInput, FoldDetected
from ..model import ModelParams, gradient, hessian, potential
from .critical import DEGENERATE, CriticalPoint, classify_point, critical_points
from .functions import beta3, solve_branch_roots

__all__ = [
    "ContinuationResult",
    "continuation_small_field",
    "height_slopes_at_zero",
    "numeric_height_slope",
]


@dataclass(frozen=True)
class ContinuationResult:
    """Critical points followed from zero field to ``r_target``.

    Attributes
    ----------
    beta, theta_e, r_target : float
    tracks : dict
        Label to an array of rows ``(r, x1, x2)``.
    points : list of CriticalPoint
        The continued points at ``r_target`` (labels kept from zero field).
    height_slopes : dict
        Label to ``dF/dr`` at ``r = 0`` along the branch.
    """

    beta: float
    theta_e: float
    r_target: float
    tracks: dict
    points: list
    height_slopes: dict

    def point(self, label: str) -> CriticalPoint:
        for c in self.points:
            if c.label == label:
                return c
        raise KeyError(label)


def _direction_cosines(theta: float) -> np.ndarray:
    return np.cos(theta - 2.0 * np.pi * np.arange(3) / 3.0)


def height_slopes_at_zero(beta: float, theta_e: float) -> dict:
    """Closed-form ``dF/dr`` at ``r = 0`` along the minimum and saddle branches.

    With ``p < q`` the zero-field branch roots and ``c_i = cos(theta_e - 2 pi i / 3)``,
    the minimum near vertex ``i`` has slope ``(3p - 1) c_i`` and the saddle
    opposite vertex ``i`` has slope ``(3q - 1) c_i``.
    """
    roots = solve_branch_roots(beta, 0.0)
    c = _direction_cosines(theta_e)
    out = {f"m{i}": (3.0 * roots.p - 1.0) * c[i] for i in range(3)}
    out.update({f"σ{i}": (3.0 * roots.q - 1.0) * c[i] for i in range(3)})
    out["p"] = 0.0
    return out


def _newton(x: np.ndarray, params: ModelParams, tol: float, max_iter: int = 25) -> np.ndarray | None:
    for _ in range(max_iter):
        g = gradient(x, params)
        if np.linalg.norm(g) <= tol:
            return x
        try:
            step = np.linalg.solve(hessian(x, params), g)
        except np.linalg.LinAlgError:
            return None
        x = x - step
        if x[0] <= 0 or x[1] <= 0 or x[0] + x[1] >= 1 or not np.all(np.isfinite(x)):
            return None
    return x if np.linalg.norm(gradient(x, params)) <= tol else None


def _track(
    x: np.ndarray,
    beta: float,
    theta: float,
    r_target: float,
    dr0: float,
    dr_min: float,
    tol: float,
    label: str,
) -> np.ndarray:
    c = _direction_cosines(theta)
    dgrad_dr = -np.array([c[1] - c[0], c[2] - c[0]])
    sign0 = np.sign(np.linalg.det(hessian(x, ModelParams(beta, 0.0, theta))))
    r, dr = 0.0, dr0
    rows = [(0.0, x[0], x[1])]
    while r < r_target:
        step = min(dr, r_target - r)
        params = ModelParams(beta, r, theta)
        pred = x - step * np.linalg.solve(hessian(x, params), dgrad_dr)
        new = None
        if pred[0] > 0 and pred[1] > 0 and pred[0] + pred[1] < 1:
            new = _newton(pred, ModelParams(beta, r + step, theta), tol)
        ok = (
            new is not None
            and np.linalg.norm(new - pred) <= max(10.0 * np.linalg.norm(pred - x), 1e-9)
            and np.sign(np.linalg.det(hessian(new, ModelParams(beta, r + step, theta)))) == sign0
        )
        if not ok:
            dr = 0.5 * step
            if dr < dr_min:
                raise FoldDetected(f"branch {label} folds near r = {r:.9g} (beta = {beta}, theta = {theta})")
            continue
        x, r = new, r + step
        rows.append((r, x[0], x[1]))
        dr = min(2.0 * step, dr0)
    return np.array(rows)


def continuation_small_field(
    beta: float,
    theta_e: float,
    r_target: float,
    dr0: float = 1e-3,
    dr_min: float = 1e-6,
    tol: float = 1e-11,
    labels: tuple | None = None,
) -> ContinuationResult:
    """Follow the zero-field critical points to field strength ``r_target``.

    Parameters
    ----------
    beta : float
        Must exceed the critical value ``beta3`` and must not be ``2``
        (where the central point is degenerate).
    theta_e : float
        Field angle.
    r_target : float
        Field strength, below the first fold of the followed branches.
    dr0, dr_min : float
        Initial and smallest step in ``r``.
    tol : float
        Newton tolerance on the gradient norm.
    labels : tuple of str, optional
        Restrict to these branches.

    Raises
    ------
    FoldDetected
        If a branch cannot be continued with steps above ``dr_min``.
    DegenerateInput
        If a zero-field point to be followed is degenerate.
    """
    if beta <= beta3():
        raise DegenerateInput("continuation needs beta above beta3")
    if r_target < 0:
        raise ValueError("r_target must be nonnegative")
    start = critical_points(ModelParams(beta, 0.0, theta_e))
    tracks, points = {}, []
    for cp in start:
        if labels is not None and cp.label not in labels:
            continue
        if cp.kind == DEGENERATE:
            raise DegenerateInput(f"zero-field point {cp.label} is degenerate at beta = {beta}")
        x = np.array([cp.location.x1, cp.location.x2])
        rows = _track(x, beta, theta_e, r_target, dr0, dr_min, tol, cp.label)
        tracks[cp.label] = rows
        points.append(classify_point(rows[-1, 1:], ModelParams(beta, r_target, theta_e), label=cp.label))
    slopes = {k: v for k, v in height_slopes_at_zero(beta, theta_e).items() if k in tracks}
    return ContinuationResult(beta, theta_e, r_target, tracks, points, slopes)


def numeric_height_slope(beta: float, theta_e: float, label: str, delta: float = 1e-4) -> float:
    """Finite-difference slope ``(F(x(delta), delta) - F(x(0), 0)) / delta`` of a branch."""
    res = continuation_small_field(beta, theta_e, delta, dr0=delta, labels=(label,))
    rows = res.tracks[label]
    f0 = float(potential(rows[0, 1:], ModelParams(beta, 0.0, theta_e)))
    f1 = float(potential(rows[-1, 1:], ModelParams(beta, delta, theta_e)))
    return (f1 - f0) / delta
