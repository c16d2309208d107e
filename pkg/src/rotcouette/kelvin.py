"""Linear evolution of Fourier modes along sheared wavevectors.

The shear transport ``xi1 d/dxi2`` is integrated exactly by following the
characteristic ``xi(t) = (xi1, xi2 - xi1 t, xi3)``; along it the amplitude
obeys the ODE ``dv/dt = A(xi(t)) v`` with ``A`` the algebraic symbol.  The
ODE is advanced with classical fixed-step RK4.  Because the transport
preserves volume in frequency space, quadrature weights of an ensemble are
time-invariant and norms are plain weighted sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rotcouette.symbol import DomainError, FlowParams, WaveVector

__all__ = [
    "SingularPassageError",
    "SupportError",
    "ModeTrajectory",
    "ModeEnsemble",
    "GrowthSeries",
    "advect_wavevector",
    "default_dt",
    "propagate_mode",
    "propagate_batch",
    "propagate_field",
    "sobolev_ratio_check",
    "envelope_series",
]

SINGULAR_TOL = 1e-12


class SingularPassageError(DomainError):
    """A characteristic passes through (or next to) the zero frequency."""


class SupportError(DomainError):
    """An ensemble node lies outside the declared frequency ball."""


def advect_wavevector(xi0, t: float) -> WaveVector:
    x1, x2, x3 = (float(c) for c in xi0)
    return WaveVector(x1, x2 - x1 * t, x3)


def _min_norm2(xi: np.ndarray, t0: float, t1: float) -> np.ndarray:
    """Exact minimum of ``|xi(t)|^2`` over ``[t0, t1]`` for each row of ``xi``."""
    x1, x2, x3 = xi[:, 0], xi[:, 1], xi[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        tstar = np.where(x1 != 0, x2 / x1, t0)
    tstar = np.clip(tstar, t0, t1)
    y = x2 - x1 * tstar
    return x1 * x1 + y * y + x3 * x3


def default_dt(params: FlowParams, xi: np.ndarray, t_end: float) -> float:
    """``min(0.01, 0.1/(nu max|xi(t)|^2 + 1))`` over the trajectories in ``xi``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    end = xi.copy()
    end[:, 1] -= xi[:, 0] * t_end
    m = max(float(np.max(np.sum(xi * xi, axis=1))), float(np.max(np.sum(end * end, axis=1))))
    return min(0.01, 0.1 / (params.nu * m + 1.0))


def _check_passage(xi: np.ndarray, t0: float, t1: float):
    m = _min_norm2(xi, t0, t1)
    bad = np.flatnonzero(m < SINGULAR_TOL)
    if bad.size:
        i = int(bad[0])
        raise SingularPassageError(f"mode {i} at xi0={tuple(xi[i])} reaches |xi|^2={m[i]:.3e} in [{t0}, {t1}]")


class _SymbolAction:
    """Applies ``A(xi(t))`` to a stack of amplitudes without forming matrices."""

    def __init__(self, f, nu, xi):
        self.f, self.nu = f, nu
        self.x1, self.x2, self.x3 = xi[:, 0], xi[:, 1], xi[:, 2]
        self.s11 = self.x1 * self.x1
        self.s33 = self.x3 * self.x3

    def at(self, t):
        f, g = self.f, 2.0 - self.f
        y = self.x2 - self.x1 * t
        r2 = self.s11 + y * y + self.s33
        inv = 1.0 / r2
        visc = -self.nu * r2
        a = self.x1 * inv
        e = (
            visc + f * a * y,  # (0, 0)
            f - 1.0 + g * a * self.x1,  # (0, 1)
            -f + f * y * y * inv,  # (1, 0)
            visc + g * a * y,  # (1, 1)
            f * y * self.x3 * inv,  # (2, 0)
            g * a * self.x3,  # (2, 1)
            visc,  # (2, 2)
        )
        return tuple(c[:, None] if np.ndim(c) else c for c in e)

    @staticmethod
    def apply(e, v):
        a00, a01, a10, a11, a20, a21, a22 = e
        out = np.empty_like(v)
        v0, v1, v2 = v[:, 0:1], v[:, 1:2], v[:, 2:3]
        out[:, 0:1] = a00 * v0 + a01 * v1
        out[:, 1:2] = a10 * v0 + a11 * v1
        out[:, 2:3] = a20 * v0 + a21 * v1 + a22 * v2
        return out


def _rk4(f, nu, xi, V, t0, n, dt):
    """Advance ``V`` (N, 3) from ``t0`` by ``n`` RK4 steps of size ``dt``."""
    act = _SymbolAction(f, nu, xi)
    mv = act.apply
    t = t0
    A0 = act.at(t)
    for _ in range(n):
        Ah = act.at(t + 0.5 * dt)
        A1 = act.at(t + dt)
        k1 = mv(A0, V)
        k2 = mv(Ah, V + 0.5 * dt * k1)
        k3 = mv(Ah, V + 0.5 * dt * k2)
        k4 = mv(A1, V + dt * k3)
        V = V + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + dt
        A0 = A1
    return V


def _steps(span: float, dt: float) -> int:
    return max(1, int(math.ceil(span / dt - 1e-9)))


@dataclass
class ModeTrajectory:
    xi0: WaveVector
    times: np.ndarray
    states: np.ndarray

    def wavevector(self, i: int) -> WaveVector:
        return advect_wavevector(self.xi0, self.times[i])


def propagate_mode(
    params: FlowParams, xi0, v0, t_end: float, dt: float | None = None, record: bool = True
) -> ModeTrajectory:
    """RK4 solution of ``dv/dt = A(xi(t)) v`` on ``[0, t_end]``.

    The step is shrunk so that an integer number of steps lands on ``t_end``.
    With ``record`` every step is stored, otherwise only the endpoints.
    """
    xi = np.asarray([tuple(float(c) for c in xi0)])
    _check_passage(xi, 0.0, t_end)
    dt = dt or default_dt(params, xi, t_end)
    n = _steps(t_end, dt)
    h = t_end / n
    V = np.asarray(v0, dtype=complex).reshape(1, 3)
    states = [V[0].copy()]
    times = [0.0]
    if record:
        for k in range(n):
            V = _rk4(params.f, params.nu, xi, V, k * h, 1, h)
            states.append(V[0].copy())
            times.append((k + 1) * h)
    else:
        V = _rk4(params.f, params.nu, xi, V, 0.0, n, h)
        states.append(V[0].copy())
        times.append(t_end)
    return ModeTrajectory(WaveVector(*xi[0]), np.array(times), np.array(states))


def propagate_batch(
    params: FlowParams,
    xi: np.ndarray,
    V: np.ndarray,
    times: Sequence[float],
    dt: float | None = None,
    reduce=None,
):
    """Propagate many modes and report them at each entry of ``times`` (first must be 0).

    Without ``reduce`` the result is the state stack ``(len(times), N, 3)``;
    otherwise it is ``[reduce(state) for each time]``, which avoids holding
    every snapshot.  Real input is propagated in real arithmetic (the symbol
    is real, so this is exact).
    """
    xi = np.asarray(xi, dtype=float)
    V = np.asarray(V)
    if np.iscomplexobj(V) and not np.any(V.imag):
        V = V.real
    V = V.astype(float) if not np.iscomplexobj(V) else V.astype(complex)
    times = np.asarray(times, dtype=float)
    if times.size == 0 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise DomainError("times must start at 0 and increase strictly")
    t_end = float(times[-1])
    _check_passage(xi, 0.0, t_end)
    dt = dt or default_dt(params, xi, t_end)
    out = [V if reduce is None else reduce(V)]
    for i in range(1, times.size):
        span = times[i] - times[i - 1]
        n = _steps(span, dt)
        V = _rk4(params.f, params.nu, xi, V, times[i - 1], n, span / n)
        out.append(V if reduce is None else reduce(V))
    if reduce is None:
        return np.asarray(out, dtype=complex)
    return out


@dataclass
class ModeEnsemble:
    """Weighted set of Fourier modes standing in for an ``L^2`` field."""

    xi: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    provenance: str = ""
    radius: float | None = None

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(-1, 3)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        self.values = np.asarray(self.values, dtype=complex).reshape(-1, 3)
        if not (self.xi.shape[0] == self.weights.size == self.values.shape[0]):
            raise DomainError("ensemble arrays disagree in length")
        if np.any(self.weights <= 0):
            raise DomainError("ensemble weights must be positive")

    @classmethod
    def from_field(cls, fld, radius: float | None = None) -> "ModeEnsemble":
        return cls(fld.nodes, fld.weights, fld.values, provenance=f"pseudomode {fld.spec.as_dict()}", radius=radius)

    @classmethod
    def random_band_limited(cls, rng: np.random.Generator, n_pairs: int, radius: float = 2.0, min_radius: float = 0.05):
        """Random Hermitian-symmetric ensemble with ``min_radius <= |xi| < radius``.

        Values are projected onto ``xi . v = 0`` like a velocity field.
        """
        d = rng.standard_normal((n_pairs, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = rng.uniform(min_radius, radius, n_pairs)
        xi = d * r[:, None]
        v = rng.standard_normal((n_pairs, 3)) + 1j * rng.standard_normal((n_pairs, 3))
        v -= (np.sum(v * d, axis=1))[:, None] * d
        w = rng.uniform(0.5, 1.5, n_pairs)
        return cls(
            np.concatenate([xi, -xi]),
            np.concatenate([w, w]),
            np.concatenate([v, v.conj()]),
            provenance="random band-limited",
            radius=radius,
        )

    @property
    def size(self) -> int:
        return self.weights.size

    def norm(self, values: np.ndarray | None = None) -> float:
        v = self.values if values is None else values
        return float(np.sqrt(np.sum(self.weights * np.sum(np.abs(v) ** 2, axis=1))))

    def sobolev_norm(self, k: float, values: np.ndarray | None = None) -> float:
        v = self.values if values is None else values
        fac = (1.0 + np.sum(self.xi**2, axis=1)) ** k
        return float(np.sqrt(np.sum(self.weights * fac * np.sum(np.abs(v) ** 2, axis=1))))

    def hermitian_defect(self) -> float:
        """Largest ``|v(-xi) - conj v(xi)|`` relative to the largest value, or NaN
        if the node set is not symmetric."""
        key = {tuple(np.round(x, 15)): i for i, x in enumerate(self.xi)}
        worst = 0.0
        for i, x in enumerate(self.xi):
            j = key.get(tuple(np.round(-x, 15)))
            if j is None:
                return math.nan
            worst = max(worst, float(np.max(np.abs(self.values[j] - self.values[i].conj()))))
        return worst / max(float(np.max(np.abs(self.values))), 1e-300)


@dataclass
class GrowthSeries:
    times: np.ndarray
    norms: np.ndarray
    env_lo: np.ndarray | None = None
    env_hi: np.ndarray | None = None
    upper_bound: np.ndarray | None = None
    h1: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> np.ndarray:
        return self.norms / self.norms[0]

    def to_csv(self, path) -> None:
        n = self.times.size
        nan = np.full(n, np.nan)
        cols = [
            self.times,
            self.norms,
            nan if self.env_lo is None else self.env_lo,
            nan if self.env_hi is None else self.env_hi,
            nan if self.upper_bound is None else self.upper_bound,
        ]
        np.savetxt(
            path,
            np.column_stack(cols),
            fmt="%.16e",
            delimiter=",",
            header="t,l2,env_lo,env_hi,upper_bound",
            comments="",
        )


def propagate_field(
    params: FlowParams,
    ens: ModeEnsemble,
    t_end: float,
    dt: float | None = None,
    sample_times: Sequence[float] | None = None,
) -> tuple[GrowthSeries, ModeEnsemble]:
    """Propagate every mode; return norms at ``sample_times`` and the final ensemble.

    ``upper_bound`` in the series is ``exp(t upper_rate) |u(0)|`` when ``0 < f < 1``.
    """
    if sample_times is None:
        sample_times = np.linspace(0.0, t_end, 201)
    times = np.asarray(sample_times, dtype=float)
    if times[0] != 0.0:
        times = np.concatenate([[0.0], times])
    last = {}

    def reduce(V):
        last["V"] = V
        return ens.norm(V), ens.sobolev_norm(1, V)

    stats = np.array(propagate_batch(params, ens.xi, ens.values, times, dt, reduce=reduce))
    norms, h1 = stats[:, 0], stats[:, 1]
    upper = None
    if params.in_unit_interval:
        upper = np.exp(times * params.upper_rate) * norms[0]
    final_xi = ens.xi.copy()
    final_xi[:, 1] -= ens.xi[:, 0] * times[-1]
    final = ModeEnsemble(final_xi, ens.weights, last["V"], ens.provenance + f" propagated to t={times[-1]}", None)
    return GrowthSeries(times, norms, upper_bound=upper, h1=h1), final


def envelope_series(series: GrowthSeries, lower_rate: float, eps: float) -> GrowthSeries:
    """Attach the ``(e^{t lower} -+ eps) |u(0)|`` envelope to a series."""
    g = np.exp(series.times * lower_rate) * series.norms[0]
    series.env_lo = g - eps * series.norms[0]
    series.env_hi = g + eps * series.norms[0]
    return series


def sobolev_ratio_check(ens: ModeEnsemble, k: float, radius: float | None = None) -> tuple[float, float, bool]:
    """``|u|_{H^k} / |u|_{L^2}`` against ``(1 + R^2)^{k/2}`` for support in ``B(0, R)``."""
    R = radius if radius is not None else ens.radius
    if R is None:
        raise SupportError("support radius unknown; pass radius")
    r = np.sqrt(np.sum(ens.xi**2, axis=1))
    if np.any(r > R):
        i = int(np.argmax(r))
        raise SupportError(f"node {i} at |xi|={r[i]:.6g} lies outside B(0, {R})")
    ratio = ens.sobolev_norm(k) / ens.norm()
    bound = (1.0 + R * R) ** (k / 2.0)
    return ratio, bound, bool(ratio <= bound)
