"""Model-level quantities of the three-spin mean-field Potts model.

The state of the reduced (magnetization) dynamics is a point of the
two-dimensional simplex ``x = (x1, x2)`` with implied ``x0 = 1 - x1 - x2``;
``x_k`` is the fraction of sites whose spin equals ``v_k``.  At system size
``N`` the reachable points are the lattice points ``(n1 / N, n2 / N)``.

All functions accept a :class:`SimplexPoint`, a :class:`LatticeState`, a pair
``(x1, x2)`` or an array whose last axis has length two.  Scalar inputs
return Python floats; array inputs broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, NamedTuple, Union

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .errors import BoundaryPoint, SizeLimit

__all__ = [
    "SPIN_VECTORS",
    "ModelParams",
    "SimplexPoint",
    "LatticeState",
    "SpinConfiguration",
    "Measure",
    "ASpectrum",
    "A_MATRIX",
    "field_projection",
    "hamiltonian",
    "lattice_hamiltonian",
    "psi",
    "psi_inverse",
    "entropy",
    "potential",
    "g_correction",
    "gradient",
    "hessian",
    "hessian_det",
    "a_hessian_spectrum",
    "exact_stationary",
    "finite_size_potential",
    "lattice_points",
    "lattice_index",
]

_SQRT3_2 = math.sqrt(3.0) / 2.0

#: The three spin values ``v_k = (cos 2 pi k / 3, sin 2 pi k / 3)`` as rows.
SPIN_VECTORS = np.array([[1.0, 0.0], [-0.5, _SQRT3_2], [-0.5, -_SQRT3_2]])

#: The matrix coupling the Hessian to the cyclic drift of the dynamics.
A_MATRIX = np.array([[1.0, 0.0], [-1.0, 1.0]])

#: Largest system size accepted by full enumeration of the lattice.
MAX_ENUMERATION_N = 200

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature, external field and optional system size.

    Parameters
    ----------
    beta : float
        Inverse temperature, strictly positive.
    r_e : float, default 0.0
        Magnitude of the external field, nonnegative.
    theta_e : float, default 0.0
        Angle of the external field in ``[0, 2 pi)``.
    N : int or None
        Optional number of sites.
    """

    beta: float
    r_e: float = 0.0
    theta_e: float = 0.0
    N: int | None = None

    def __post_init__(self) -> None:
        beta = float(self.beta)
        r_e = float(self.r_e)
        theta = float(self.theta_e)
        if not (math.isfinite(beta) and beta > 0.0):
            raise ValueError(f"beta must be a positive finite number, got {self.beta!r}")
        if not (math.isfinite(r_e) and r_e >= 0.0):
            raise ValueError(f"r_e must be a nonnegative finite number, got {self.r_e!r}")
        if not (math.isfinite(theta) and 0.0 <= theta < _TWO_PI):
            raise ValueError(f"theta_e must lie in [0, 2*pi), got {self.theta_e!r}")
        if self.N is not None and (int(self.N) != self.N or int(self.N) < 1):
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "r_e", r_e)
        object.__setattr__(self, "theta_e", theta)
        if self.N is not None:
            object.__setattr__(self, "N", int(self.N))

    @property
    def field(self) -> np.ndarray:
        """Field vector ``h_e = (r_e cos theta_e, r_e sin theta_e)``."""
        return np.array([self.r_e * math.cos(self.theta_e), self.r_e * math.sin(self.theta_e)])

    def with_(self, **changes: Any) -> "ModelParams":
        """Return a copy with some fields replaced."""
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {"beta": self.beta, "r_e": self.r_e, "theta_e": self.theta_e, "N": self.N}


@dataclass(frozen=True)
class SimplexPoint:
    """A point ``(x1, x2)`` of the simplex with implied ``x0 = 1 - x1 - x2``."""

    x1: float
    x2: float

    @property
    def x0(self) -> float:
        return 1.0 - self.x1 - self.x2

    @property
    def coords(self) -> np.ndarray:
        """The full proportion vector ``(x0, x1, x2)``."""
        return np.array([self.x0, self.x1, self.x2])

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])

    def in_simplex(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.coords >= -tol))

    def is_interior(self) -> bool:
        return bool(np.all(self.coords > 0.0))

    @classmethod
    def from_coords(cls, coords: Iterable[float]) -> "SimplexPoint":
        """Build from the proportion vector ``(x0, x1, x2)``."""
        c = list(coords)
        return cls(float(c[1]), float(c[2]))


@dataclass(frozen=True, order=True)
class LatticeState:
    """Exact spin counts ``(n0, n1, n2)`` of a configuration with ``N`` sites."""

    n0: int
    n1: int
    n2: int

    def __post_init__(self) -> None:
        for name in ("n0", "n1", "n2"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def N(self) -> int:
        return self.n0 + self.n1 + self.n2

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.n0, self.n1, self.n2)

    def to_simplex(self) -> SimplexPoint:
        return SimplexPoint(self.n1 / self.N, self.n2 / self.N)

    @classmethod
    def nearest(cls, x: "PointLike", N: int) -> "LatticeState":
        """Lattice point of size ``N`` closest to ``x`` in the Euclidean sense."""
        x1, x2 = (float(v) for v in _xy(x))
        best = None
        for n1 in (math.floor(N * x1), math.ceil(N * x1)):
            for n2 in (math.floor(N * x2), math.ceil(N * x2)):
                if n1 < 0 or n2 < 0 or n1 + n2 > N:
                    continue
                d = (n1 / N - x1) ** 2 + (n2 / N - x2) ** 2
                if best is None or d < best[0]:
                    best = (d, n1, n2)
        if best is None:
            n1 = min(max(round(N * x1), 0), N)
            n2 = min(max(round(N * x2), 0), N - n1)
            return cls(N - n1 - n2, n1, n2)
        return cls(N - best[1] - best[2], best[1], best[2])


PointLike = Union[SimplexPoint, LatticeState, tuple, list, np.ndarray]


class SpinConfiguration:
    """Assignment of a spin ``v_k`` (stored as ``k``) to each of ``N`` sites.

    Parameters
    ----------
    spins : array_like of int
        Spin index of each site, values in ``{0, 1, 2}``.
    """

    def __init__(self, spins: Iterable[int]) -> None:
        arr = np.array(list(spins) if not isinstance(spins, np.ndarray) else spins, dtype=np.int8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("spins must be a non-empty one-dimensional sequence")
        if np.any((arr < 0) | (arr > 2)):
            raise ValueError("spin indices must lie in {0, 1, 2}")
        arr.setflags(write=False)
        self._spins = arr

    @property
    def spins(self) -> np.ndarray:
        return self._spins

    @property
    def N(self) -> int:
        return int(self._spins.size)

    def counts(self) -> LatticeState:
        c = np.bincount(self._spins, minlength=3)
        return LatticeState(int(c[0]), int(c[1]), int(c[2]))

    def rotate(self, site: int) -> "SpinConfiguration":
        """Rotate the spin at ``site`` counter-clockwise, ``v_k -> v_{k+1}``."""
        new = self._spins.copy()
        new[site] = (new[site] + 1) % 3
        return SpinConfiguration(new)

    def magnetization(self) -> np.ndarray:
        return SPIN_VECTORS[self._spins].mean(axis=0)

    def hamiltonian(self, params: ModelParams) -> float:
        """Energy from the pairwise sum over all sites, with the field term."""
        vecs = SPIN_VECTORS[self._spins]
        pair = float(np.sum(vecs @ vecs.T))
        return -pair / (2.0 * self.N) - float(np.sum(vecs @ params.field))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SpinConfiguration) and np.array_equal(self._spins, other._spins)

    def __hash__(self) -> int:
        return hash(self._spins.tobytes())

    def __repr__(self) -> str:
        return f"SpinConfiguration({self._spins.tolist()})"


@dataclass(frozen=True)
class Measure:
    """Probability weights on the lattice of size ``N``.

    Attributes
    ----------
    N : int
    states : ndarray of int, shape (M, 3)
        Count triples ``(n0, n1, n2)`` in lattice order.
    weights : ndarray, shape (M,)
    log_partition : float
        Logarithm of the normalizing constant of the unnormalized weights.
    """

    N: int
    states: np.ndarray
    weights: np.ndarray
    log_partition: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")

    def __getitem__(self, state: LatticeState) -> float:
        return float(self.weights[lattice_index(self.N, state.n1, state.n2)])

    def to_rows(self) -> list[tuple[int, int, int, float]]:
        return [(int(a), int(b), int(c), float(w)) for (a, b, c), w in zip(self.states, self.weights)]


class ASpectrum(NamedTuple):
    """Spectrum of ``A @ hessian`` at a point."""

    eigenvalues: np.ndarray
    trace: float
    det: float


def field_projection(params: ModelParams) -> np.ndarray:
    """Return ``h_e . v_k = r_e cos(theta_e - 2 pi k / 3)`` for ``k = 0, 1, 2``."""
    k = np.arange(3)
    return params.r_e * np.cos(params.theta_e - _TWO_PI * k / 3.0)


def _xy(x: PointLike) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, SimplexPoint):
        return np.float64(x.x1), np.float64(x.x2)
    if isinstance(x, LatticeState):
        return np.float64(x.n1 / x.N), np.float64(x.n2 / x.N)
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ValueError(f"expected a point (x1, x2) or an array of them, got shape {arr.shape}")
    return arr[..., 0], arr[..., 1]


def _out(value: Any) -> Any:
    if np.ndim(value) == 0:
        return float(value)
    return value


def _require_interior(x0, x1, x2) -> None:
    if np.any(x0 <= 0.0) or np.any(x1 <= 0.0) or np.any(x2 <= 0.0):
        raise BoundaryPoint("derivatives of the potential diverge on the boundary of the simplex")


def psi(x: PointLike) -> np.ndarray:
    """Magnetization ``psi(x) = x0 v0 + x1 v1 + x2 v2``.

    Returns
    -------
    ndarray, shape (..., 2)
    """
    x1, x2 = _xy(x)
    a = 2.0 * x1 + x2 - 1.0
    b = x1 + 2.0 * x2 - 1.0
    return a[..., None] * SPIN_VECTORS[1] + b[..., None] * SPIN_VECTORS[2]


def psi_inverse(m: np.ndarray) -> np.ndarray:
    """Invert :func:`psi`: return ``(x1, x2)`` whose magnetization is ``m``."""
    m = np.asarray(m, dtype=float)
    basis = np.stack([SPIN_VECTORS[1], SPIN_VECTORS[2]], axis=1)
    ab = np.linalg.solve(basis, m[..., None])[..., 0] if m.ndim > 1 else np.linalg.solve(basis, m)
    a, b = ab[..., 0], ab[..., 1]
    # a = 2 x1 + x2 - 1 and b = x1 + 2 x2 - 1
    x1 = (2.0 * (a + 1.0) - (b + 1.0)) / 3.0
    x2 = (2.0 * (b + 1.0) - (a + 1.0)) / 3.0
    return np.stack([x1, x2], axis=-1)


def hamiltonian(x: PointLike, params: ModelParams) -> float | np.ndarray:
    """Mean-field energy per site ``H(x) = -|psi|^2 / 2 - h_e . psi``.

    Examples
    --------
    >>> hamiltonian((0.0, 0.0), ModelParams(beta=1.0))
    -0.5
    """
    m = psi(x)
    value = -0.5 * np.sum(m * m, axis=-1) - m @ params.field
    return _out(value)


def lattice_hamiltonian(state: LatticeState, params: ModelParams) -> float:
    """Total energy ``N * H(x)`` of any configuration with counts ``state``."""
    return state.N * hamiltonian(state, params)


def entropy(x: PointLike) -> float | np.ndarray:
    """Relative entropy ``S(x) = sum_i x_i log(3 x_i)`` with ``0 log 0 = 0``."""
    x1, x2 = _xy(x)
    x0 = 1.0 - x1 - x2
    total = 0.0
    for c in (x0, x1, x2):
        c = np.maximum(c, 0.0)
        total = total + xlogy(c, 3.0 * c)
    return _out(total)


def potential(x: PointLike, params: ModelParams) -> float | np.ndarray:
    """Large-deviation potential ``F(x) = H(x) + S(x) / beta``.

    The field enters once, through ``H``; equivalently the zero-field
    potential minus ``r_e sum_i x_i cos(theta_e - 2 pi i / 3)``.
    """
    return _out(np.asarray(hamiltonian(x, params)) + np.asarray(entropy(x)) / params.beta)


def g_correction(x: PointLike, params: ModelParams) -> float | np.ndarray:
    """First-order finite-size correction ``log(x0 x1 x2) / (2 beta)``."""
    x1, x2 = _xy(x)
    x0 = 1.0 - x1 - x2
    _require_interior(x0, x1, x2)
    return _out(np.log(x0 * x1 * x2) / (2.0 * params.beta))


def gradient(x: PointLike, params: ModelParams) -> np.ndarray:
    """Gradient ``(dF/dx1, dF/dx2)`` in the coordinates ``(x1, x2)``.

    Raises
    ------
    BoundaryPoint
        If any of ``x0, x1, x2`` vanishes.
    """
    x1, x2 = _xy(x)
    x0 = 1.0 - x1 - x2
    _require_interior(x0, x1, x2)
    b = params.beta
    c = field_projection(params)
    g1 = -1.5 * (x1 - x0) + np.log(x1 / x0) / b - (c[1] - c[0])
    g2 = -1.5 * (x2 - x0) + np.log(x2 / x0) / b - (c[2] - c[0])
    return np.stack([g1, g2], axis=-1)


def hessian(x: PointLike, params: ModelParams) -> np.ndarray:
    """Hessian of the potential (independent of the field).

    Returns
    -------
    ndarray, shape (..., 2, 2)
    """
    x1, x2 = _xy(x)
    x0 = 1.0 - x1 - x2
    _require_interior(x0, x1, x2)
    b = params.beta
    off = 1.0 / (b * x0) - 1.5
    d1 = 1.0 / (b * x0) + 1.0 / (b * x1) - 3.0
    d2 = 1.0 / (b * x0) + 1.0 / (b * x2) - 3.0
    row1 = np.stack([d1, off], axis=-1)
    row2 = np.stack([off, d2], axis=-1)
    return np.stack([row1, row2], axis=-2)


def hessian_det(x: PointLike, params: ModelParams) -> float | np.ndarray:
    """Closed-form determinant of the Hessian.

    ``(1/beta^2) sum_{i<j} 1/(x_i x_j) - (3/beta) sum_i 1/x_i + 27/4``.
    """
    x1, x2 = _xy(x)
    x0 = 1.0 - x1 - x2
    _require_interior(x0, x1, x2)
    b = params.beta
    pairs = 1.0 / (x0 * x1) + 1.0 / (x0 * x2) + 1.0 / (x1 * x2)
    singles = 1.0 / x0 + 1.0 / x1 + 1.0 / x2
    return _out(pairs / b**2 - 3.0 * singles / b + 6.75)


def a_hessian_spectrum(x: PointLike, params: ModelParams) -> ASpectrum:
    """Trace, determinant and eigenvalues of ``A @ hessian`` at a single point.

    The trace has the closed form ``(1/beta) sum_i 1/x_i - 9/2`` and the
    determinant equals that of the Hessian because ``det A = 1``.  The
    eigenvalues are the roots of ``lambda^2 - T lambda + D``; they are returned
    as real numbers when the discriminant is nonnegative and as complex
    numbers otherwise.
    """
    x1, x2 = (float(v) for v in _xy(x))
    x0 = 1.0 - x1 - x2
    _require_interior(x0, x1, x2)
    b = params.beta
    trace = (1.0 / x0 + 1.0 / x1 + 1.0 / x2) / b - 4.5
    det = float(hessian_det((x1, x2), params))
    disc = trace * trace - 4.0 * det
    if disc >= 0.0:
        root = math.sqrt(disc)
        # Stable pairing of the two roots.
        big = 0.5 * (trace + math.copysign(root, trace)) if trace != 0.0 else 0.5 * root
        small = det / big if big != 0.0 else -big
        eig = np.sort(np.array([small, big]))
    else:
        root = math.sqrt(-disc)
        eig = np.array([complex(0.5 * trace, -0.5 * root), complex(0.5 * trace, 0.5 * root)])
    return ASpectrum(eig, trace, det)


def lattice_points(N: int) -> np.ndarray:
    """All count triples ``(n0, n1, n2)`` of size ``N`` in lattice order.

    The order is ``n1`` ascending, then ``n2`` ascending; the row of a state
    is given by :func:`lattice_index`.
    """
    n1 = np.repeat(np.arange(N + 1), np.arange(N + 1, 0, -1))
    idx = np.arange(n1.size)
    n2 = idx - lattice_index(N, n1, 0)
    return np.stack([N - n1 - n2, n1, n2], axis=1).astype(np.int64)


def lattice_index(N: int, n1, n2):
    """Row of the state with counts ``(N - n1 - n2, n1, n2)`` in lattice order."""
    return n1 * (N + 1) - (n1 * (n1 - 1)) // 2 + n2


def _log_weights(N: int, params: ModelParams, states: np.ndarray) -> np.ndarray:
    """Logarithm of ``2 pi N 3^-N multinomial(N; n) exp(-beta N H)``."""
    logmult = gammaln(N + 1.0) - gammaln(states + 1.0).sum(axis=1)
    H = np.asarray(hamiltonian(states[:, 1:] / N, params))
    return math.log(_TWO_PI * N) - N * math.log(3.0) + logmult - params.beta * N * H


def exact_stationary(N: int, params: ModelParams) -> Measure:
    """Exact stationary law of the reduced chain by enumeration of the lattice.

    ``nu(x)`` is proportional to ``multinomial(N; n0, n1, n2) exp(-beta N H(x))``;
    the computation is carried out in the log domain.

    Raises
    ------
    SizeLimit
        If ``N`` exceeds the enumeration guard of 200.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    if N > MAX_ENUMERATION_N:
        raise SizeLimit(f"full enumeration is limited to N <= {MAX_ENUMERATION_N}, got N={N}")
    states = lattice_points(N)
    logw = _log_weights(N, params, states)
    logz = float(logsumexp(logw))
    weights = np.exp(logw - logz)
    weights /= weights.sum()
    return Measure(N=N, states=states, weights=weights, log_partition=logz)


def finite_size_potential(
    x: PointLike, N: int, params: ModelParams, mode: str = "asymptotic"
) -> float | np.ndarray:
    """Finite-size potential whose Gibbs weight is the stationary law.

    Parameters
    ----------
    x : point-like
        Lattice point (``mode="exact"``) or interior point (``mode="asymptotic"``).
    N : int
    params : ModelParams
    mode : {"exact", "asymptotic"}
        ``"exact"`` returns ``-log(2 pi N 3^-N multinomial e^{-beta N H}) / (beta N)``,
        so that ``exp(-beta N F)`` is the stationary weight up to a
        ``x``-independent constant.  ``"asymptotic"`` returns
        ``F(x) + log(x0 x1 x2) / (2 beta N)``.
    """
    if mode == "asymptotic":
        return _out(np.asarray(potential(x, params)) + np.asarray(g_correction(x, params)) / N)
    if mode != "exact":
        raise ValueError(f"mode must be 'exact' or 'asymptotic', got {mode!r}")
    if isinstance(x, LatticeState):
        if x.N != N:
            raise ValueError("lattice state size does not match N")
        counts = np.array([x.counts], dtype=float)
    else:
        x1, x2 = _xy(x)
        n1 = np.rint(np.asarray(x1) * N)
        n2 = np.rint(np.asarray(x2) * N)
        if not (np.allclose(n1, np.asarray(x1) * N, atol=1e-9) and np.allclose(n2, np.asarray(x2) * N, atol=1e-9)):
            raise ValueError("exact mode requires lattice points of size N")
        counts = np.stack([N - n1 - n2, n1, n2], axis=-1).reshape(-1, 3)
        if np.any(counts < 0):
            raise ValueError("point lies outside the simplex")
    value = -_log_weights(N, params, counts) / (params.beta * N)
    if isinstance(x, LatticeState) or np.ndim(_xy(x)[0]) == 0:
        return float(value[0])
    return value.reshape(np.shape(_xy(x)[0]))
