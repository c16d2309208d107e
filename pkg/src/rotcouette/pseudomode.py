"""Mollified pseudo-eigenfunctions of the linearised operator.

A pseudo-mode is the streak eigenvector ``u1(xi2*, xi3*)`` multiplied by a
sum of smooth bumps centred at ``(0, +-xi2*, +-xi3*)`` (two bumps when
``xi2* = 0``).  Each bump is a product of one-dimensional mollifiers of
width ``delta`` in ``xi1``, ``xi3`` and ``delta'`` in ``xi2``.

The field is sampled on a tensor Gauss-Legendre grid per bump.  Bump values
and their ``xi2`` derivatives are evaluated from scaled local coordinates,
so the construction stays accurate for very small widths.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from rotcouette.symbol import (
    DomainError,
    FlowParams,
    algebraic_matrices,
    growth_rates,
    streak_eigenpairs,
)

__all__ = [
    "OverlapError",
    "QuadratureError",
    "Mollifier1D",
    "PseudoModeSpec",
    "SampledFourierField",
    "ResidualReport",
    "mollifier_eval",
    "build_pseudomode",
    "predicted_norm_sq",
    "residual",
    "center_mismatch",
    "component_ratio_check",
    "select_linear_params",
    "residual_schedule",
    "certify_pseudomode",
    "write_field_csv",
]


class OverlapError(DomainError):
    """Bump supports of a pseudo-mode recipe intersect."""


class QuadratureError(RuntimeError):
    """Quadrature refinement changed the residual by more than 10%."""


def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
    return out


def _bump_slope(x):
    """d/dx log-free derivative of the unnormalised bump."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    q = 1.0 - xi * xi
    out[inside] = np.exp(-1.0 / q) * (-2.0 * xi / (q * q))
    return out


@functools.lru_cache(maxsize=None)
def _constants() -> tuple[float, float, float, float]:
    """``(c, int theta^2, int (x theta)^2, int theta'^2)`` for the unit mollifier."""
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    mass = integrate.quad(lambda x: float(_bump(x)), -1.0, 1.0, **opts)[0]
    c = 1.0 / mass
    sq = integrate.quad(lambda x: float(_bump(x)) ** 2, -1.0, 1.0, **opts)[0] * c * c
    xsq = integrate.quad(lambda x: (x * float(_bump(x))) ** 2, -1.0, 1.0, **opts)[0] * c * c
    dsq = integrate.quad(lambda x: float(_bump_slope(x)) ** 2, -1.0, 1.0, **opts)[0] * c * c
    return c, sq, xsq, dsq


@dataclass(frozen=True)
class Mollifier1D:
    """``theta_delta(x) = theta(x/delta)/delta`` with ``theta = c exp(-1/(1-x^2))``."""

    delta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise DomainError(f"mollifier width must lie in (0, 1], got {self.delta}")

    @staticmethod
    def unit(x):
        return _constants()[0] * _bump(x)

    @staticmethod
    def unit_derivative(x):
        return _constants()[0] * _bump_slope(x)

    def __call__(self, x):
        return self.unit(np.asarray(x, dtype=float) / self.delta) / self.delta

    def derivative(self, x):
        return self.unit_derivative(np.asarray(x, dtype=float) / self.delta) / self.delta**2


def mollifier_eval(m: Mollifier1D, x):
    return m(x)


@dataclass(frozen=True)
class PseudoModeSpec:
    """Bump recipe: target frequencies ``(xi2s, xi3s)`` and widths ``delta``, ``deltap``."""

    xi2s: float
    xi3s: float
    delta: float
    deltap: float

    def __post_init__(self):
        if not self.xi2s >= 0.0:
            raise DomainError(f"xi2s must be >= 0, got {self.xi2s}")
        if not self.xi3s > 0.0:
            raise DomainError(f"xi3s must be > 0, got {self.xi3s}")
        for name in ("delta", "deltap"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {v}")
        if not self.delta < self.xi3s:
            raise OverlapError(f"delta={self.delta} must be < xi3s={self.xi3s} for disjoint bumps")
        if self.xi2s > 0 and not self.deltap < self.xi2s:
            raise OverlapError(f"deltap={self.deltap} must be < xi2s={self.xi2s} for disjoint bumps")

    @property
    def degenerate(self) -> bool:
        return self.xi2s == 0.0

    @property
    def centers(self) -> np.ndarray:
        if self.degenerate:
            return np.array([[0.0, 0.0, self.xi3s], [0.0, 0.0, -self.xi3s]])
        a, b = self.xi2s, self.xi3s
        return np.array([[0.0, a, b], [0.0, -a, b], [0.0, a, -b], [0.0, -a, -b]])

    @property
    def n_bumps(self) -> int:
        return 2 if self.degenerate else 4

    def as_dict(self) -> dict:
        return {"xi2s": self.xi2s, "xi3s": self.xi3s, "delta": self.delta, "deltap": self.deltap}


@dataclass
class SampledFourierField:
    """Quadrature realisation of a pseudo-mode.

    ``values`` and ``dvalues`` (the ``xi2`` derivative) are complex ``(N, 3)``;
    ``local`` holds the scaled coordinates in ``[-1, 1]^3`` of each node
    inside its bump and ``bump`` the bump index.
    """

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    dvalues: np.ndarray
    local: np.ndarray
    bump: np.ndarray
    spec: PseudoModeSpec
    params: FlowParams
    vector: np.ndarray
    quad: int
    per_bump_vectors: bool = False
    bump_vectors: np.ndarray | None = None

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights * np.sum(np.abs(self.values) ** 2, axis=1))))

    def physical(self, x: np.ndarray) -> np.ndarray:
        """Inverse Fourier sum ``sum_j w_j v_j exp(i xi_j . x)`` at points ``x`` (M, 3)."""
        phase = np.exp(1j * np.asarray(x, dtype=float) @ self.nodes.T)
        return phase @ (self.weights[:, None] * self.values)


def predicted_norm_sq(params: FlowParams, spec: PseudoModeSpec, vector=None) -> float:
    """Closed-form ``|u|^2 = (n_bumps/(delta^2 delta')) |u1|^2 (int theta^2)^3``."""
    if vector is None:
        vector = streak_eigenpairs(params, spec.xi2s, spec.xi3s)[0].vector
    sq = _constants()[1]
    return spec.n_bumps / (spec.delta**2 * spec.deltap) * float(np.sum(np.abs(vector) ** 2)) * sq**3


def build_pseudomode(
    params: FlowParams, spec: PseudoModeSpec, quad: int = 32, per_bump_vectors: bool = False
) -> SampledFourierField:
    """Sample the bump-sum pseudo-mode on ``quad**3`` Gauss-Legendre nodes per bump.

    By default every bump carries the same vector ``u1(xi2s, xi3s)``.  With
    ``per_bump_vectors`` each bump instead carries the streak eigenvector of
    its own centre, which makes the multiplication residual vanish at all
    four centres in the non-degenerate case.
    """
    if not params.in_unit_interval:
        raise DomainError(f"pseudo-modes need 0 < f < 1, got f={params.f}")
    if quad < 2:
        raise DomainError("need at least 2 quadrature nodes per axis")
    x, w = np.polynomial.legendre.leggauss(quad)
    X1, X2, X3 = (a.ravel() for a in np.meshgrid(x, x, x, indexing="ij"))
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    loc = np.stack([X1, X2, X3], axis=1)
    d, dp = spec.delta, spec.deltap
    th = Mollifier1D.unit
    # values in scaled coordinates; the 1/(delta^2 delta') amplitude is applied once
    amp = 1.0 / (d * d * dp)
    prof = th(X1) * th(X2) * th(X3) * amp
    dprof = th(X1) * Mollifier1D.unit_derivative(X2) * th(X3) * (amp / dp)
    base = streak_eigenpairs(params, spec.xi2s, spec.xi3s)[0].vector.astype(complex)
    nodes, weights, values, dvalues, locs, ids, vecs = [], [], [], [], [], [], []
    for j, c in enumerate(spec.centers):
        vec = base
        if per_bump_vectors:
            vec = streak_eigenpairs(params, c[1], c[2])[0].vector.astype(complex)
        vecs.append(vec)
        nodes.append(np.stack([c[0] + d * X1, c[1] + dp * X2, c[2] + d * X3], axis=1))
        weights.append(W * (d * d * dp))
        values.append(prof[:, None] * vec[None, :])
        dvalues.append(dprof[:, None] * vec[None, :])
        locs.append(loc)
        ids.append(np.full(W.size, j))
    return SampledFourierField(
        nodes=np.concatenate(nodes),
        weights=np.concatenate(weights),
        values=np.concatenate(values),
        dvalues=np.concatenate(dvalues),
        local=np.concatenate(locs),
        bump=np.concatenate(ids),
        spec=spec,
        params=params,
        vector=base,
        quad=quad,
        per_bump_vectors=per_bump_vectors,
        bump_vectors=np.array(vecs),
    )


@dataclass(frozen=True)
class ResidualReport:
    """Normalised residual ``|(lam1 - L)u| / |u|`` and its two parts.

    ``I1`` is the multiplication mismatch, ``I2`` the shear-transport part.
    """

    I1: float
    I2: float
    total: float
    lambda1: float
    norm: float
    quad_error: float = 0.0

    def in_pseudospectrum(self, eps: float) -> bool:
        return self.total < eps


def _residual_parts(fld: SampledFourierField, lam1: float):
    p = fld.params
    A = algebraic_matrices(p.f, p.nu, fld.nodes[:, 0], fld.nodes[:, 1], fld.nodes[:, 2])
    mult = lam1 * fld.values - np.einsum("nij,nj->ni", A, fld.values)
    trans = fld.nodes[:, :1] * fld.dvalues
    w = fld.weights
    sq = lambda v: float(np.sum(w * np.sum(np.abs(v) ** 2, axis=1)))
    n2 = sq(fld.values)
    return math.sqrt(sq(mult) / n2), math.sqrt(sq(trans) / n2), math.sqrt(sq(mult - trans) / n2), math.sqrt(n2)


def residual(params: FlowParams, fld: SampledFourierField, refine: int | None = None) -> ResidualReport:
    """Quadrature residual of the pseudo-mode at ``lam1 = lambda1(xi2s, xi3s)``.

    The same quantity is recomputed with ``refine`` nodes per axis (default
    ``1.5 * quad``); a relative change above 10% raises :class:`QuadratureError`.
    """
    spec = fld.spec
    lam1 = streak_eigenpairs(params, spec.xi2s, spec.xi3s)[0].lam
    if params != fld.params:
        fld = build_pseudomode(params, spec, fld.quad, fld.per_bump_vectors)
    I1, I2, tot, nrm = _residual_parts(fld, lam1)
    refine = refine or (3 * fld.quad) // 2
    fine = build_pseudomode(params, spec, refine, fld.per_bump_vectors)
    _, _, tot_f, _ = _residual_parts(fine, lam1)
    err = abs(tot_f - tot)
    if err > 0.1 * max(tot_f, 1e-300):
        raise QuadratureError(f"residual changed from {tot:.3e} to {tot_f:.3e} under refinement")
    return ResidualReport(I1, I2, tot, lam1, nrm, err)


def center_mismatch(params: FlowParams, fld: SampledFourierField) -> np.ndarray:
    """``|(lam1 - A(c_j)) v_j| / |v_j|`` at each bump centre ``c_j``."""
    spec = fld.spec
    lam1 = streak_eigenpairs(params, spec.xi2s, spec.xi3s)[0].lam
    out = []
    for c, v in zip(spec.centers, fld.bump_vectors):
        A = algebraic_matrices(params.f, params.nu, *c)
        out.append(np.linalg.norm(lam1 * v - A @ v) / np.linalg.norm(v))
    return np.array(out)


def component_ratio_check(fld: SampledFourierField, f: float, rtol: float = 1e-12) -> tuple[bool, int | None]:
    """Check ``u1 = -(|xi*|/|xi3*|) sqrt((1-f)/f) u2`` and ``u3 = -(xi2*/xi3*) u2`` node by node.

    The sign of the first ratio is the one carried by the growing eigenvector.

    Returns ``(ok, first_bad_index)``.
    """
    spec = fld.spec
    r1 = -math.hypot(spec.xi2s, spec.xi3s) / abs(spec.xi3s) * math.sqrt(1.0 - f) / math.sqrt(f)
    r3 = -spec.xi2s / spec.xi3s
    u1, u2, u3 = fld.values.T
    scale = np.maximum(np.abs(fld.values).max(axis=1), 1e-300)
    bad = (np.abs(u1 - r1 * u2) > rtol * scale) | (np.abs(u3 - r3 * u2) > rtol * scale)
    idx = np.flatnonzero(bad)
    return (idx.size == 0, int(idx[0]) if idx.size else None)


def select_linear_params(f: float, nu: float, T: float, eps: float, cap: float = 0.49) -> tuple[float, float]:
    """Target frequency ``xi3`` and residual level ``gamma`` for a growth envelope of width ``eps`` on ``[0, T]``."""
    if not (nu > 0 and T > 0 and eps > 0):
        raise DomainError(f"need nu, T, eps > 0, got nu={nu}, T={T}, eps={eps}")
    lower, upper = growth_rates(FlowParams(f, nu))
    ratio = eps / (2.0 * math.exp(T * lower))
    if ratio >= 1.0:
        xi3 = cap
    else:
        xi3 = min(cap, math.sqrt(-math.log1p(-ratio) / (nu * T)))
    gamma = eps * (upper - lower) / (2.0 * math.exp(T * upper))
    return xi3, gamma


def default_schedule(start: float = 0.1, n: int = 40) -> list[float]:
    return [start * 0.5**k for k in range(n)]


def residual_schedule(
    params: FlowParams,
    xi2s: float,
    xi3s: float,
    deltas: Iterable[float],
    quad: int = 32,
    stop_below: float | None = None,
) -> list[tuple[float, float, ResidualReport | None]]:
    """Residuals along ``delta' = sqrt(delta)``.

    Entries whose bumps would overlap are kept with report ``None``.  Stops
    after the first residual below ``stop_below`` when given.
    """
    out = []
    for d in deltas:
        dp = math.sqrt(d)
        try:
            spec = PseudoModeSpec(xi2s, xi3s, d, dp)
        except OverlapError:
            out.append((d, dp, None))
            continue
        rep = residual(params, build_pseudomode(params, spec, quad))
        out.append((d, dp, rep))
        if stop_below is not None and rep.total < stop_below:
            break
    return out


@dataclass
class CertifiedPseudoMode:
    spec: PseudoModeSpec
    report: ResidualReport
    field: SampledFourierField
    xi3eps: float
    gamma: float
    tried: list = field(default_factory=list)


def certify_pseudomode(
    params: FlowParams, T: float, eps: float, xi2s: float = 0.0, quad: int = 32, max_halvings: int = 80
) -> CertifiedPseudoMode:
    """Shrink ``delta`` (with ``delta' = sqrt(delta)``) until the residual is below ``gamma``."""
    xi3, gamma = select_linear_params(params.f, params.nu, T, eps)
    tried = []
    for d in default_schedule(n=max_halvings):
        dp = math.sqrt(d)
        try:
            spec = PseudoModeSpec(xi2s, xi3, d, dp)
        except OverlapError:
            continue
        fld = build_pseudomode(params, spec, quad)
        rep = residual(params, fld)
        tried.append((d, rep.total))
        if rep.total < gamma:
            return CertifiedPseudoMode(spec, rep, fld, xi3, gamma, tried)
    raise QuadratureError(f"no admissible delta reached residual {gamma:.3e}; best {min(t[1] for t in tried):.3e}")


def write_field_csv(path, fld: SampledFourierField) -> None:
    """Columnar dump: xi1, xi2, xi3, weight, then Re/Im of the three components."""
    s = fld.spec
    header = (
        f"pseudomode f={fld.params.f!r} nu={fld.params.nu!r} xi2s={s.xi2s!r} xi3s={s.xi3s!r} "
        f"delta={s.delta!r} deltap={s.deltap!r} quad={fld.quad}\n"
        "xi1,xi2,xi3,weight,re_u1,im_u1,re_u2,im_u2,re_u3,im_u3"
    )
    v = fld.values
    cols = np.column_stack([fld.nodes, fld.weights, v[:, 0].real, v[:, 0].imag, v[:, 1].real, v[:, 1].imag, v[:, 2].real, v[:, 2].imag])
    np.savetxt(path, cols, fmt="%.16e", delimiter=",", header=header, comments="# ")
