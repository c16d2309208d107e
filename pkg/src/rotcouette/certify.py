"""Floating-point certificates for the numerical-range bound of the operator.

The Hermitian part of the symbol at ``nu = 0`` depends only on the direction
``xi/|xi| = (sin th cos ph, sin th sin ph, cos th)``.  Its characteristic
cubic, shifted by the bound ``(2-f)/2``, has coefficients ``b0..b3``; the
Routh-Hurwitz sign conditions on them imply that every eigenvalue is at most
``(2-f)/2``.  Under ``s = cos 2th`` and ``t = sin 2ph`` all coefficients are
polynomials in ``(s, t, f)``, which is how the lattice scans evaluate them.

Certificates are floating-point scans with explicit margins, not proofs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from rotcouette.symbol import DomainError, FlowParams, algebraic_matrices, sym_matrices

__all__ = [
    "DEFAULT_SEED",
    "CharCoeffs",
    "ShiftedCoeffs",
    "Certificate",
    "ResolventReport",
    "WeightedIntegralReport",
    "charpoly_coeffs",
    "shifted_coeffs",
    "shifted_coeffs_st",
    "angles_from_st",
    "bpoly",
    "auxiliary_quantities",
    "certify_numerical_range",
    "certify_routh_hurwitz",
    "resolvent_lower_bound_check",
    "weighted_integral_bound_check",
]

DEFAULT_SEED = 20240517
BOUND_TOL = 1e-12


class CharCoeffs(NamedTuple):
    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray


class ShiftedCoeffs(NamedTuple):
    b0: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray


def _direction(theta, phi):
    st = np.sin(theta)
    return st * np.cos(phi), st * np.sin(phi), np.cos(theta)


def charpoly_coeffs(f, theta, phi) -> CharCoeffs:
    """Coefficients of ``a3 x^3 + a2 x^2 + a1 x + a0``, whose roots are the
    eigenvalues of the inviscid Hermitian part in direction ``(theta, phi)``."""
    f = np.asarray(f, dtype=float)
    g = f * (2.0 - f)
    sth2 = np.sin(theta) ** 2
    a0 = g * np.sin(2 * theta) ** 2 * np.sin(2 * phi) / 32.0
    a1 = (
        -4.0 * (2.0 * g + 1.0) * np.cos(2 * theta)
        - 8.0 * sth2 * sth2 * np.cos(4 * phi)
        + np.cos(4 * theta)
        + 8.0 * g
        - 13.0
    ) / 64.0
    a2 = -sth2 * np.sin(2 * phi)
    return CharCoeffs(a0, a1, a2, np.ones_like(a2))


def _shifted_from_trig(f, c2, S, s4, c4) -> ShiftedCoeffs:
    # c2 = cos 2th, S = sin^2 th sin 2ph, s4 = sin^4 th cos 4ph, c4 = cos 4th
    g = f * (2.0 - f)
    b0 = -(2.0 - f) / 128.0 * (
        8.0 * (8.0 - 5.0 * f) * S
        + c2 * (-8.0 * f * S + 8.0 * g + 4.0)
        + 8.0 * s4
        - c4
        + 8.0 * f * (6.0 - f)
        - 51.0
    )
    b1 = (
        -64.0 * (2.0 - f) * S
        - 4.0 * (2.0 * g + 1.0) * c2
        - 8.0 * s4
        + c4
        - 8.0 * f * (22.0 - 5.0 * f)
        + 179.0
    ) / 64.0
    b2 = 3.0 - 1.5 * f - S
    return ShiftedCoeffs(b0, b1, b2, np.ones_like(b2))


def shifted_coeffs(f, theta, phi) -> ShiftedCoeffs:
    """Coefficients of ``h(y) = g(y + (2-f)/2)`` in angle form."""
    f = np.asarray(f, dtype=float)
    sth2 = np.sin(theta) ** 2
    return _shifted_from_trig(
        f,
        np.cos(2 * theta),
        sth2 * np.sin(2 * phi),
        sth2 * sth2 * np.cos(4 * phi),
        np.cos(4 * theta),
    )


def shifted_coeffs_st(s, t, f) -> ShiftedCoeffs:
    """Coefficients of ``h`` as polynomials in ``s = cos 2th``, ``t = sin 2ph``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    half = 0.5 * (1.0 - s)  # sin^2 th
    return _shifted_from_trig(f, s, half * t, half * half * (1.0 - 2.0 * t * t), 2.0 * s * s - 1.0)


def angles_from_st(s, t):
    """Canonical ``(theta, phi)`` in ``[0, pi/2] x [-pi/4, pi/4]`` realising ``(s, t)``."""
    return 0.5 * np.arccos(np.clip(s, -1.0, 1.0)), 0.5 * np.arcsin(np.clip(t, -1.0, 1.0))


def bpoly(s, t, f):
    """Closed form of ``32 (b2 b1 - b3 b0)`` in the ``(s, t, f)`` variables."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    g = f * (2.0 - f)
    sm = s - 1.0
    return (
        4.0 * (2.0 - f) * (30.0 * (1.0 - f) + 7.0 * f * f - g * s)
        + sm * (124.0 - 122.0 * f + 29.0 * f * f - g * s) * t
        + 10.0 * (2.0 - f) * sm * sm * t * t
        + sm**3 * t**3
    )


def auxiliary_quantities(s, t, f) -> dict:
    """Side quantities used to show the Routh-Hurwitz coefficients keep sign.

    ``b12`` and ``b02`` are the discriminants of ``b1 = 0`` and ``b0 = 0``
    viewed as quadratics in ``f``; ``t2`` and ``t1 - t0`` control the critical
    points of ``bpoly`` in ``t``; ``phi1`` is the value at ``u = 1`` of the
    quadratic whose positivity pushes those critical points outside ``[-1, 1]``.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    sm = s - 1.0
    b12 = 128.0 * (2.0 * (11.0 + s * s) - sm * sm * t * (8.0 + (s - 3.0) * t))
    b02 = 16.0 * (16.0 * (3.0 + s * s) + sm * t * (8.0 * (7.0 + s * s) + sm * (17.0 + s * (2.0 + s)) * t))
    t2 = f * (3.0 * (2.0 - f) * s + 13.0 * f - 34.0) + 28.0
    t1_minus_t0 = 17.0 - 10.0 * f + 3.0 * s
    phi1 = (14.0 + f * (-20.0 + 7.0 * f)) / 3.0
    shape = np.broadcast_shapes(s.shape, t.shape, f.shape)
    return {
        "b12": np.broadcast_to(b12, shape),
        "b02": np.broadcast_to(b02, shape),
        "t2": np.broadcast_to(t2, shape),
        "t1_minus_t0": np.broadcast_to(t1_minus_t0, shape),
        "phi1": np.broadcast_to(phi1, shape),
    }


@dataclass
class Certificate:
    """Outcome of one scan: ``min`` of ``quantity`` against ``bound``.

    ``strict`` certificates need ``min > bound``; otherwise ``min >= bound - tol``.
    ``argmin`` is an ``(s, t, f)`` triple.
    """

    quantity: str
    bound: float
    min: float
    argmin: tuple
    samples: int
    seed: int
    grid: str
    strict: bool = False
    tol: float = BOUND_TOL
    notes: dict = field(default_factory=dict)
    side_conditions_ok: bool = True

    @property
    def margin(self) -> float:
        return self.min - self.bound

    @property
    def passed(self) -> bool:
        if not (self.side_conditions_ok and math.isfinite(self.min)):
            return False
        if self.strict:
            return self.min > self.bound
        return self.min >= self.bound - self.tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["argmin"] = {"s": self.argmin[0], "t": self.argmin[1], "f": self.argmin[2]}
        d["margin"] = self.margin
        d["pass"] = self.passed
        return d


class _MinTracker:
    """Running minimum over batches; ties resolved by first occurrence."""

    def __init__(self):
        self.value = math.inf
        self.where = (math.nan, math.nan, math.nan)
        self.count = 0

    def update(self, vals, s, t, f):
        vals = np.asarray(vals)
        self.count += vals.size
        if vals.size == 0:
            return
        if np.isnan(vals).any():
            i = int(np.flatnonzero(np.isnan(vals.ravel()))[0])
            self.value = math.nan
        else:
            i = int(np.argmin(vals))
            if not vals.ravel()[i] < self.value:
                return
            self.value = float(vals.ravel()[i])
        s, t, f = (np.broadcast_to(a, vals.shape).ravel() for a in (s, t, f))
        self.where = (float(s[i]), float(t[i]), float(f[i]))


def _default_f_grid():
    return np.arange(1, 100) / 100.0


def certify_numerical_range(
    f_grid: Iterable[float] | None = None,
    n_theta: int = 201,
    n_phi: int = 201,
    n_random: int = 10**6,
    seed: int = DEFAULT_SEED,
    nu: float = 0.0,
    radius: float = 1.0,
) -> Certificate:
    """Scan ``(2-f)/2 - max eig`` of the Hermitian part; pass when it is >= -1e-12.

    Directions are a tensor grid ``theta in [0, pi]``, ``phi in [0, 2 pi]`` for
    every ``f`` in ``f_grid`` plus ``n_random`` points with uniform ``f`` and
    isotropic directions.  With ``nu > 0`` the symbol is taken at ``|xi| = radius``.
    Violations produce a failing certificate rather than an exception.
    """
    f_grid = _default_f_grid() if f_grid is None else np.asarray(list(f_grid), dtype=float)
    if f_grid.size == 0 or n_theta < 1 or n_phi < 1:
        raise DomainError("numerical-range scan needs nonempty grids")
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    x1, x2, x3 = (radius * c for c in _direction(th, ph))
    s_lat, t_lat = np.cos(2 * th), np.sin(2 * ph)
    track = _MinTracker()
    for f in f_grid:
        ev = np.linalg.eigvalsh(sym_matrices(f, nu, x1, x2, x3))[..., -1]
        track.update((2.0 - f) / 2.0 - ev, s_lat, t_lat, f)
    # direction (1, 1, 0)/sqrt(2): the bound is attained there when nu = 0
    diag = np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0) * radius
    gaps = []
    for f in f_grid:
        ev = np.linalg.eigvalsh(sym_matrices(f, nu, *diag))[-1]
        gaps.append(abs((2.0 - f) / 2.0 - ev))
    at_diag = float(max(gaps))

    rng = np.random.default_rng(seed)
    batch = 200_000
    left = int(n_random)
    while left > 0:
        m = min(batch, left)
        left -= m
        fr = rng.uniform(0.0, 1.0, m)
        fr = np.where(fr == 0.0, 0.5, fr)
        v = rng.standard_normal((m, 3))
        v *= radius / np.linalg.norm(v, axis=1, keepdims=True)
        ev = np.linalg.eigvalsh(sym_matrices(fr, nu, v[:, 0], v[:, 1], v[:, 2]))[:, -1]
        r = np.hypot(np.hypot(v[:, 0], v[:, 1]), v[:, 2])
        costh = v[:, 2] / r
        ph_r = np.arctan2(v[:, 1], v[:, 0])
        track.update((2.0 - fr) / 2.0 - ev, 2 * costh**2 - 1.0, np.sin(2 * ph_r), fr)

    return Certificate(
        quantity="numerical_range_gap",
        bound=0.0,
        min=track.value,
        argmin=track.where,
        samples=track.count,
        seed=seed,
        grid=f"theta x phi = {n_theta} x {n_phi}, {f_grid.size} f values, {int(n_random)} random, nu={nu}",
        notes={"max_gap_at_diagonal_direction": at_diag},
    )


def certify_routh_hurwitz(
    n_s: int = 201,
    n_t: int = 201,
    f_grid: Iterable[float] | None = None,
    n_random: int = 10**5,
    seed: int = DEFAULT_SEED,
    zero_tol: float = 1e-12,
) -> list[Certificate]:
    """Certify the Routh-Hurwitz sign conditions on an ``(s, t, f)`` lattice.

    Returns certificates, in order, for ``b2 > 0``, ``b1 > 0``, ``b0 >= 0``
    (whose zero set on the lattice must be exactly ``(s, t) = (-1, 1)``),
    ``b2 b1 - b3 b0 > 0``, the five auxiliary quantities, the factorised
    ``bpoly(s, 1; f) > 0``, and the agreement of :func:`bpoly` with the
    coefficient product on ``n_random`` random points (relative error <= 1e-10).
    """
    f_grid = _default_f_grid() if f_grid is None else np.asarray(list(f_grid), dtype=float)
    if f_grid.size == 0 or n_s < 2 or n_t < 2:
        raise DomainError("Routh-Hurwitz scan needs nonempty grids")
    s = np.linspace(-1.0, 1.0, n_s)[:, None, None]
    t = np.linspace(-1.0, 1.0, n_t)[None, :, None]
    f = f_grid[None, None, :]
    grid = f"s x t x f = {n_s} x {n_t} x {f_grid.size}"
    b0, b1, b2, b3 = shifted_coeffs_st(s, t, f)
    hurwitz = b2 * b1 - b3 * b0

    def cert(name, vals, strict, bound=0.0, **notes):
        tr = _MinTracker()
        tr.update(vals, s, t, f)
        return Certificate(name, bound, tr.value, tr.where, tr.count, seed, grid, strict=strict, notes=notes)

    out = [cert("b2", b2, True), cert("b1", b1, True)]

    zero = b0 <= zero_tol
    zs, zt, _ = np.nonzero(zero)
    zero_pts = sorted({(float(s.ravel()[i]), float(t.ravel()[j])) for i, j in zip(zs, zt)})
    c0 = cert("b0", b0, False, zero_set=zero_pts)
    c0.side_conditions_ok = zero_pts == [(-1.0, 1.0)]
    out.append(c0)
    out.append(cert("b2*b1-b3*b0", hurwitz, True))

    for name, vals in auxiliary_quantities(s, t, f).items():
        out.append(cert(name, vals, name != "b02"))
    s1 = s[:, :1, :]
    tr = _MinTracker()
    tr.update(bpoly(s1, 1.0, f), s1, 1.0, f)
    out.append(Certificate("bpoly(s,1,f)", 0.0, tr.value, tr.where, tr.count, seed, grid, strict=True))

    rng = np.random.default_rng(seed)
    sr = rng.uniform(-1.0, 1.0, n_random)
    trr = rng.uniform(-1.0, 1.0, n_random)
    fr = rng.uniform(0.0, 1.0, n_random)
    th, ph = angles_from_st(sr, trr)
    c = shifted_coeffs(fr, th, ph)
    closed = bpoly(sr, trr, fr)
    rel = np.abs(closed - 32.0 * (c.b2 * c.b1 - c.b3 * c.b0)) / np.maximum(1.0, np.abs(closed))
    tr = _MinTracker()
    tr.update(-rel, sr, trr, fr)
    out.append(
        Certificate(
            "bpoly_consistency", -1e-10, tr.value, tr.where, tr.count, seed, f"{n_random} random points", tol=0.0
        )
    )
    return out


@dataclass
class ResolventReport:
    lam: complex
    bound: float
    min_ratio: float
    samples: int
    seed: int
    passed: bool
    first_violation: tuple | None = None


def resolvent_lower_bound_check(
    params: FlowParams,
    lam: complex,
    samples: int = 10**5,
    seed: int = DEFAULT_SEED,
    max_radius: float = 10.0,
) -> ResolventReport:
    """Check ``|(lam - A(xi)) v| >= (Re lam - upper_rate)`` for random unit ``v``, ``xi``.

    Wavevector magnitudes are log-uniform in ``[1e-2, max_radius]``.
    """
    upper = params.upper_rate
    lam = complex(lam)
    if not lam.real > upper:
        raise DomainError(f"need Re(lambda) > {upper}, got {lam.real}")
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((samples, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = np.exp(rng.uniform(math.log(1e-2), math.log(max_radius), samples))
    xi = d * r[:, None]
    A = algebraic_matrices(params.f, params.nu, xi[:, 0], xi[:, 1], xi[:, 2])
    v = rng.standard_normal((samples, 3)) + 1j * rng.standard_normal((samples, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    res = lam * v - np.einsum("nij,nj->ni", A, v)
    ratio = np.linalg.norm(res, axis=1)
    bound = lam.real - upper
    bad = np.flatnonzero(ratio < bound * (1.0 - 1e-10))
    first = None
    if bad.size:
        i = int(bad[0])
        first = (i, tuple(xi[i]), float(ratio[i]))
    return ResolventReport(lam, bound, float(ratio.min()), samples, seed, bad.size == 0, first)


@dataclass
class WeightedIntegralReport:
    a: float
    b: float
    K: float
    trials: int
    seed: int
    worst_ratio: float
    passed: bool
    violation: tuple | None = None


def _random_profile(rng, a, K, T, n_cells):
    """Random piecewise-constant ``F^2`` on ``[0, T]`` rescaled so that
    ``sup_t e^{-2at} int_0^t F^2 = K`` exactly (the hypothesis is saturated)."""
    edges = np.concatenate([[0.0], np.sort(rng.uniform(0.0, T, n_cells - 1)), [T]])
    kind = rng.integers(3)
    if kind == 0:
        c = rng.exponential(1.0, n_cells)
    elif kind == 1:  # sparse spikes
        c = rng.exponential(1.0, n_cells) * (rng.uniform(size=n_cells) < 0.2)
    else:  # exponentially growing with random rate
        mid = 0.5 * (edges[1:] + edges[:-1])
        c = np.exp(2.0 * a * rng.uniform(0.5, 1.5) * mid) * rng.uniform(0.5, 1.5, n_cells)
    if not c.any():
        c[rng.integers(n_cells)] = 1.0
    w = np.diff(edges)
    G = np.concatenate([[0.0], np.cumsum(c * w)])
    # sup of (G_i + c (t - t_i)) e^{-2at} on each cell: endpoints or interior critical point
    cand = G * np.exp(-2.0 * a * edges)
    with np.errstate(divide="ignore", invalid="ignore"):
        tc = edges[:-1] + (c / (2.0 * a) - G[:-1]) / c
    inside = (c > 0) & (tc > edges[:-1]) & (tc < edges[1:])
    tc = np.where(inside, tc, edges[:-1])
    interior = np.where(inside, (G[:-1] + c * (tc - edges[:-1])) * np.exp(-2.0 * a * tc), 0.0)
    sup = max(cand.max(), interior.max())
    return edges, c * (K / sup)


def weighted_integral_bound_check(
    a: float,
    b: float,
    K: float,
    trials: int = 1000,
    seed: int = DEFAULT_SEED,
    T: float = 5.0,
    n_cells: int = 64,
    n_probe: int = 8,
) -> WeightedIntegralReport:
    """Randomised check of: ``int_0^t F^2 <= K e^{2at}`` for all ``t`` implies
    ``int_0^t F^2 e^{-2bs} ds <= (aK/(a-b)) e^{2(a-b)t}`` (checked with factor 1+1e-9).

    Both sides are exact for piecewise-constant ``F^2``; the conclusion is
    checked at cell edges and ``n_probe`` interior points per cell.
    """
    if not (a > b > 0 and K > 0):
        raise DomainError(f"need a > b > 0 and K > 0, got a={a}, b={b}, K={K}")
    rng = np.random.default_rng(seed)
    C = a * K / (a - b)
    worst = 0.0
    violation = None
    frac = np.linspace(0.0, 1.0, n_probe + 2)[1:]
    for trial in range(trials):
        edges, c = _random_profile(rng, a, K, T, n_cells)
        left = edges[:-1]
        decay = np.exp(-2.0 * b * edges)
        cum = np.concatenate([[0.0], np.cumsum(c * (decay[:-1] - decay[1:]) / (2.0 * b))])
        tt = left[:, None] + np.diff(edges)[:, None] * frac[None, :]
        lhs = cum[:-1, None] + c[:, None] * (np.exp(-2.0 * b * left)[:, None] - np.exp(-2.0 * b * tt)) / (2.0 * b)
        ratio = lhs / (C * np.exp(2.0 * (a - b) * tt))
        r = float(ratio.max())
        if r > worst:
            worst = r
        if r > 1.0 + 1e-9 and violation is None:
            i = np.unravel_index(np.argmax(ratio), ratio.shape)
            violation = (trial, float(tt[i]))
    return WeightedIntegralReport(a, b, K, trials, seed, worst, violation is None, violation)
