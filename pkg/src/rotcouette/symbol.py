"""Fourier symbols of the linearised rotating-Couette operator.

All matrices act on the Fourier amplitude ``(u1, u2, u3)`` at a real
wavevector ``xi = (xi1, xi2, xi3)``.  The shear transport ``xi1 d/dxi2`` is
not a multiplication operator and is handled by :mod:`rotcouette.kelvin`;
everything here is the algebraic (pointwise) part.

The vectorised builders (``*_matrices``) accept arrays of wavevector
components and return stacks of shape ``(..., 3, 3)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "FlowParams",
    "WaveVector",
    "EigenTriple",
    "Lambda1Scan",
    "growth_rates",
    "rayleigh_discriminant",
    "instability_window",
    "symbol_streak",
    "symbol_algebraic",
    "symbol_sym",
    "algebraic_matrices",
    "sym_matrices",
    "coupling_matrix",
    "coupling_bound",
    "streak_eigenpairs",
    "streak_lambda1",
    "normalized",
    "lambda1_range_scan",
]

WINDOW_LO = 2.0 / 17.0 * (5.0 - 2.0 * math.sqrt(2.0))
WINDOW_HI = 2.0 / 17.0 * (5.0 + 2.0 * math.sqrt(2.0))


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


@dataclass(frozen=True)
class FlowParams:
    """Coriolis coefficient ``f`` and kinematic viscosity ``nu``."""

    f: float
    nu: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.f) and math.isfinite(self.nu)):
            raise DomainError(f"non-finite parameters f={self.f}, nu={self.nu}")
        if self.nu < 0:
            raise DomainError(f"viscosity must be >= 0, got nu={self.nu}")

    @classmethod
    def unstable(cls, f: float, nu: float = 0.0) -> "FlowParams":
        """Constructor for instability studies: requires ``0 < f < 1``."""
        if not 0.0 < f < 1.0:
            raise DomainError(f"instability studies need 0 < f < 1, got f={f}")
        return cls(f, nu)

    @property
    def in_unit_interval(self) -> bool:
        return 0.0 < self.f < 1.0

    @property
    def lower_rate(self) -> float:
        return growth_rates(self)[0]

    @property
    def upper_rate(self) -> float:
        return growth_rates(self)[1]

    @property
    def rayleigh(self) -> float:
        return rayleigh_discriminant(self.f)


class WaveVector(NamedTuple):
    xi1: float
    xi2: float
    xi3: float

    @property
    def norm2(self) -> float:
        return self.xi1 * self.xi1 + self.xi2 * self.xi2 + self.xi3 * self.xi3


@dataclass(frozen=True)
class EigenTriple:
    """Eigenvalue with its (unnormalised) eigenvector.

    ``degenerate`` marks the ``xi3 = 0`` case where the streak symbol is a
    Jordan block and the closed-form vectors do not exist.
    """

    lam: float
    vector: np.ndarray
    degenerate: bool = False


def growth_rates(params: FlowParams) -> tuple[float, float]:
    """Return ``(sqrt(f(1-f)), (2-f)/2)``: growth of the unstable modes and
    the numerical-range bound of the operator."""
    f = params.f
    if not 0.0 < f < 1.0:
        raise DomainError(f"growth rates are defined for 0 < f < 1, got f={f}")
    return math.sqrt(f * (1.0 - f)), (2.0 - f) / 2.0


def rayleigh_discriminant(f: float) -> float:
    return f * (f - 1.0)


def instability_window(f: float) -> tuple[bool, float, float]:
    """Interval of ``f`` where twice the mode growth rate beats the semigroup
    bound.  Returns ``(inside, lo, hi)``."""
    return WINDOW_LO < f < WINDOW_HI, WINDOW_LO, WINDOW_HI


def _as_xi(xi) -> tuple[float, float, float]:
    x1, x2, x3 = (float(c) for c in xi)
    return x1, x2, x3


def algebraic_matrices(f: float, nu: float, xi1, xi2, xi3) -> np.ndarray:
    """Stack of multiplication-part symbols, shape ``broadcast(xi).shape + (3, 3)``.

    Points with ``|xi| = 0`` are the caller's responsibility; they produce
    NaNs rather than raising.
    """
    xi1, xi2, xi3 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (xi1, xi2, xi3)))
    r2 = xi1 * xi1 + xi2 * xi2 + xi3 * xi3
    inv = np.divide(1.0, r2, out=np.full(r2.shape, np.nan), where=r2 > 0)
    g = 2.0 - f
    out = np.zeros(xi1.shape + (3, 3))
    visc = -nu * r2
    out[..., 0, 0] = visc + f * xi1 * xi2 * inv
    out[..., 0, 1] = f - 1.0 + g * xi1 * xi1 * inv
    out[..., 1, 0] = -f + f * xi2 * xi2 * inv
    out[..., 1, 1] = visc + g * xi1 * xi2 * inv
    out[..., 2, 0] = f * xi2 * xi3 * inv
    out[..., 2, 1] = g * xi1 * xi3 * inv
    out[..., 2, 2] = visc
    return out


def sym_matrices(f: float, nu: float, xi1, xi2, xi3) -> np.ndarray:
    """Stack of Hermitian parts, built entry by entry from the closed form."""
    xi1, xi2, xi3 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (xi1, xi2, xi3)))
    r2 = xi1 * xi1 + xi2 * xi2 + xi3 * xi3
    inv = np.divide(1.0, r2, out=np.full(r2.shape, np.nan), where=r2 > 0)
    g = 2.0 - f
    visc = -nu * r2
    b = 0.5 * (-1.0 + g * xi1 * xi1 * inv + f * xi2 * xi2 * inv)
    c = 0.5 * f * xi2 * xi3 * inv
    d = 0.5 * g * xi1 * xi3 * inv
    out = np.empty(xi1.shape + (3, 3))
    out[..., 0, 0] = visc + f * xi1 * xi2 * inv
    out[..., 1, 1] = visc + g * xi1 * xi2 * inv
    out[..., 2, 2] = visc
    out[..., 0, 1] = out[..., 1, 0] = b
    out[..., 0, 2] = out[..., 2, 0] = c
    out[..., 1, 2] = out[..., 2, 1] = d
    return out


def symbol_streak(params: FlowParams, xi2: float, xi3: float) -> np.ndarray:
    """Symbol of the x-independent operator at ``(0, xi2, xi3)``."""
    r2 = xi2 * xi2 + xi3 * xi3
    if r2 == 0:
        raise DomainError("streak symbol undefined at xi2 = xi3 = 0")
    f, nu = params.f, params.nu
    return np.array(
        [
            [-nu * r2, f - 1.0, 0.0],
            [-f + f * xi2 * xi2 / r2, -nu * r2, 0.0],
            [f * xi2 * xi3 / r2, 0.0, -nu * r2],
        ]
    )


def symbol_algebraic(params: FlowParams, xi: Sequence[float]) -> np.ndarray:
    x1, x2, x3 = _as_xi(xi)
    if x1 * x1 + x2 * x2 + x3 * x3 == 0.0:
        raise DomainError("symbol undefined at xi = 0 (or |xi|^2 underflows)")
    return algebraic_matrices(params.f, params.nu, x1, x2, x3)


def symbol_sym(params: FlowParams, xi: Sequence[float]) -> np.ndarray:
    x1, x2, x3 = _as_xi(xi)
    if x1 * x1 + x2 * x2 + x3 * x3 == 0.0:
        raise DomainError("symbol undefined at xi = 0 (or |xi|^2 underflows)")
    return sym_matrices(params.f, params.nu, x1, x2, x3)


def coupling_matrix(f: float, xi2, xi1s: float, xi3s: float) -> np.ndarray:
    """Bounded coupling matrix of the no-eigenfunction argument.

    ``xi2`` may be an array, giving a stack of matrices.
    """
    xi2 = np.asarray(xi2, dtype=float)
    r2 = xi1s * xi1s + xi2 * xi2 + xi3s * xi3s
    if np.any(r2 == 0):
        raise DomainError("coupling matrix undefined at the zero frequency triple")
    g = 2.0 - f
    out = np.zeros(xi2.shape + (3, 3))
    out[..., 0, 0] = -f * xi1s * xi2 / r2
    out[..., 0, 1] = -f + 1.0 - g * xi1s * xi1s / r2
    out[..., 1, 0] = f - f * xi2 * xi2 / r2
    out[..., 1, 1] = -g * xi1s * xi2 / r2
    out[..., 2, 0] = -f * xi2 * xi3s / r2
    out[..., 2, 1] = -g * xi1s * xi3s / r2
    return out


def coupling_bound(f: float, xi1s: float, xi3s: float, xi2_grid) -> tuple[float, float]:
    """Empirical sup of the spectral norm over a ``xi2`` scan: ``(sup, argsup)``."""
    xi2_grid = np.asarray(xi2_grid, dtype=float)
    norms = np.linalg.norm(coupling_matrix(f, xi2_grid, xi1s, xi3s), ord=2, axis=(-2, -1))
    i = int(np.argmax(norms))
    return float(norms[i]), float(xi2_grid[i])


def streak_lambda1(params: FlowParams, xi2, xi3) -> np.ndarray:
    """Vectorised leading streak eigenvalue; requires ``0 <= f <= 1``."""
    xi2 = np.asarray(xi2, dtype=float)
    xi3 = np.asarray(xi3, dtype=float)
    r2 = xi2 * xi2 + xi3 * xi3
    return -params.nu * r2 + math.sqrt(params.f * (1.0 - params.f)) * np.abs(xi3) / np.sqrt(r2)


def streak_eigenpairs(params: FlowParams, xi2: float, xi3: float) -> list[EigenTriple]:
    """The three eigenpairs of :func:`symbol_streak`, ordered ``lam1 >= lam3 >= lam2``.

    Vectors are the unnormalised closed forms
    ``(+-|xi| sqrt(f(1-f)) |xi3| / f, -xi3^2, xi2 xi3)`` with the upper sign on
    the growing eigenvalue ``lam1``.  At ``xi3 = 0`` the matrix is a
    Jordan block; the triples are then flagged ``degenerate`` and carry the
    available eigenvectors ``e1, e1, e3``.
    """
    f, nu = params.f, params.nu
    if not 0.0 < f < 1.0:
        raise DomainError(f"streak eigenpairs need 0 < f < 1, got f={f}")
    r2 = xi2 * xi2 + xi3 * xi3
    if r2 == 0:
        raise DomainError("streak eigenpairs undefined at xi2 = xi3 = 0")
    decay = -nu * r2
    if xi3 == 0:
        e1 = np.array([1.0, 0.0, 0.0])
        e3 = np.array([0.0, 0.0, 1.0])
        return [EigenTriple(decay, e1, True), EigenTriple(decay, e1.copy(), True), EigenTriple(decay, e3, True)]
    r = math.sqrt(r2)
    root = math.sqrt(f * (1.0 - f)) * abs(xi3)
    rate = root / r
    # the growing branch needs u1 and u2 of opposite sign because the
    # (1, 2) coupling f - 1 is negative
    first = r * root / f
    return [
        EigenTriple(decay + rate, np.array([first, -xi3 * xi3, xi2 * xi3])),
        EigenTriple(decay - rate, np.array([-first, -xi3 * xi3, xi2 * xi3])),
        EigenTriple(decay, np.array([0.0, 0.0, 1.0])),
    ]


def normalized(v) -> np.ndarray:
    v = np.asarray(v)
    n = np.linalg.norm(v)
    if n == 0:
        raise DomainError("cannot normalise the zero vector")
    return v / n


@dataclass(frozen=True)
class Lambda1Scan:
    sup: float
    argsup: tuple[float, float]
    lo: float
    hi: float
    bound: float
    values: np.ndarray

    @property
    def below_bound(self) -> bool:
        return self.hi <= self.bound + 1e-12


def lambda1_range_scan(params: FlowParams, xi2_grid, xi3_grid) -> Lambda1Scan:
    """Sample the leading streak eigenvalue over a tensor grid.

    The origin is skipped.  ``values`` has shape ``(len(xi2_grid), len(xi3_grid))``
    with NaN at the origin.
    """
    if not 0.0 < params.f < 1.0 or params.nu <= 0:
        raise DomainError("lambda1 scan needs 0 < f < 1 and nu > 0")
    xi2_grid = np.asarray(xi2_grid, dtype=float).ravel()
    xi3_grid = np.asarray(xi3_grid, dtype=float).ravel()
    if xi2_grid.size == 0 or xi3_grid.size == 0:
        raise DomainError("empty frequency grid")
    x2, x3 = np.meshgrid(xi2_grid, xi3_grid, indexing="ij")
    origin = (x2 == 0) & (x3 == 0)
    if origin.all():
        raise DomainError("frequency grid contains only the origin")
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = streak_lambda1(params, x2, x3)
    vals = np.where(origin, np.nan, vals)
    i = np.unravel_index(np.nanargmax(vals), vals.shape)
    return Lambda1Scan(
        sup=float(vals[i]),
        argsup=(float(x2[i]), float(x3[i])),
        lo=float(np.nanmin(vals)),
        hi=float(np.nanmax(vals)),
        bound=params.lower_rate,
        values=vals,
    )
