"""Pseudo-spectral solver for perturbations of rotating Couette flow.

The perturbation lives in a periodic box that co-moves with the shear
(Rogallo coordinates).  A lattice mode with integer indices ``(m, n, l)``
has the effective wavevector::

    k(s) = (dk1 m, dk2 n - dk1 m s, dk3 l)

where ``s`` is the accumulated shear since the last remesh.  The shear
transport is therefore exact; the remaining linear terms are the algebraic
symbol at ``k(s)``, and the quadratic term is formed in the sheared physical
coordinates with the 2/3 rule applied in index space.  Viscosity enters
through an exact integrating factor ``exp(-nu int |k(s)|^2 ds)`` inside a
classical four-stage Runge-Kutta step.

Normalisation: ``u(x) = sum_k v_k exp(i k.x)``, so ``|u|^2 = V sum_k |v_k|^2``
with ``V`` the box volume.  Arrays hold the ``rfftn`` half spectrum, shape
``(3, N, N, N//2 + 1)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from rotcouette.kelvin import GrowthSeries
from rotcouette.pseudomode import Mollifier1D, PseudoModeSpec
from rotcouette.symbol import DomainError, FlowParams, streak_eigenpairs

__all__ = [
    "CFLError",
    "ResolutionError",
    "ScanIncompleteError",
    "DnsConfig",
    "Lattice",
    "SpectralField",
    "EnergyBudget",
    "RunResult",
    "EscapeReport",
    "EscapeScanResult",
    "default_dns_spec",
    "init_from_pseudomode",
    "init_single_mode",
    "step",
    "remesh",
    "run",
    "escape_time",
    "escape_scan",
    "save_checkpoint",
    "load_checkpoint",
    "write_run_csv",
]

CHECKPOINT_FORMAT = "rotcouette-sheardns"
CHECKPOINT_VERSION = 1


class CFLError(RuntimeError):
    """Velocity too large for the time step."""


class ResolutionError(DomainError):
    """The lattice cannot resolve the requested initial data."""


class ScanIncompleteError(RuntimeError):
    """A run of an escape scan did not escape within its time budget."""


@dataclass(frozen=True)
class DnsConfig:
    f: float
    nu: float
    n: int = 32
    box: tuple = (8 * math.pi, 8 * math.pi, 8 * math.pi)
    dt: float = 0.02
    dealias: float = 2.0 / 3.0
    remesh_threshold: float = 0.5
    seed: int = 0
    nonlinear: bool = True

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise DomainError(f"grid must be a power of two >= 16, got {self.n}")
        if not 0.5 < self.dealias < 1.0:
            raise DomainError(f"dealias fraction must lie in (1/2, 1), got {self.dealias}")
        if self.dt <= 0 or self.nu < 0:
            raise DomainError("need dt > 0 and nu >= 0")
        if len(self.box) != 3 or min(self.box) <= 0:
            raise DomainError("box needs three positive half-lengths")
        if not 0.0 < self.remesh_threshold <= 1.0:
            raise DomainError("remesh_threshold must lie in (0, 1]")

    @property
    def params(self) -> FlowParams:
        return FlowParams(self.f, self.nu)


class Lattice:
    """Index and wavenumber arrays for a config (half spectrum along axis 2)."""

    def __init__(self, cfg: DnsConfig):
        n = cfg.n
        self.n = n
        self.dk = tuple(math.pi / L for L in cfg.box)
        self.volume = float(np.prod([2.0 * L for L in cfg.box]))
        self.dx = tuple(2.0 * L / n for L in cfg.box)
        full = np.fft.fftfreq(n, 1.0 / n).astype(int)
        half = np.arange(n // 2 + 1)
        self.m = full[:, None, None]
        self.nn = full[None, :, None]
        self.l = half[None, None, :]
        self.shape = (n, n, n // 2 + 1)
        cut = cfg.dealias * n / 2.0
        self.cut = cut
        self.mask = (np.abs(self.m) < cut) & (np.abs(self.nn) < cut) & (self.l < cut)
        self.mask = np.broadcast_to(self.mask, self.shape).copy()
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        self.weight = np.broadcast_to(w[None, None, :], self.shape)
        self.k1 = self.dk[0] * self.m * np.ones(self.shape)
        self.k3 = self.dk[2] * self.l * np.ones(self.shape)
        self.k2base = self.dk[1] * self.nn * np.ones(self.shape)
        self.max_m = int(np.max(np.abs(self.m)[np.abs(self.m) < cut]))
        self.k2_nyquist = self.dk[1] * n / 2.0

    def k2(self, s: float) -> np.ndarray:
        return self.k2base - self.k1 * s

    def kvec(self, s: float):
        return self.k1, self.k2(s), self.k3

    def k2sq_integral(self, s0: float, s1: float) -> np.ndarray:
        """``int_{s0}^{s1} |k(s)|^2 ds`` in closed form."""
        h = s1 - s0
        a = self.k2base
        b = self.k1
        quad = a * a - a * b * (s0 + s1) + b * b * (s0 * s0 + s0 * s1 + s1 * s1) / 3.0
        return h * (self.k1**2 + self.k3**2 + quad)


@dataclass
class SpectralField:
    """Half-spectrum velocity amplitudes at shear offset ``s`` and time ``t``.

    ``offset`` counts the accumulated remesh shifts: the mode that started at
    indices ``(m, n, l)`` now sits at ``(m, n - offset m, l)``.
    """

    uhat: np.ndarray
    s: float
    t: float
    lattice: Lattice
    offset: int = 0

    def copy(self) -> "SpectralField":
        return SpectralField(self.uhat.copy(), self.s, self.t, self.lattice, self.offset)

    def _sum(self, q: np.ndarray) -> float:
        return float(self.lattice.volume * np.sum(self.lattice.weight * q))

    def l2(self) -> float:
        return math.sqrt(self._sum(np.sum(np.abs(self.uhat) ** 2, axis=0)))

    def kinetic(self) -> float:
        return 0.5 * self.l2() ** 2

    def grad_sq(self) -> float:
        k1, k2, k3 = self.lattice.kvec(self.s)
        return self._sum((k1**2 + k2**2 + k3**2) * np.sum(np.abs(self.uhat) ** 2, axis=0))

    def h1(self) -> float:
        return math.sqrt(self.l2() ** 2 + self.grad_sq())

    def dissipation(self, nu: float) -> float:
        return nu * self.grad_sq()

    def production(self) -> float:
        """``-int u1 u2 dx``."""
        return -self._sum(np.real(self.uhat[0] * np.conj(self.uhat[1])))

    def divergence(self) -> float:
        """``max |k(s).v| / (max |k| * max |v|)``; zero for the zero field."""
        k1, k2, k3 = self.lattice.kvec(self.s)
        div = np.abs(k1 * self.uhat[0] + k2 * self.uhat[1] + k3 * self.uhat[2])
        scale = float(np.max(np.sqrt(k1**2 + k2**2 + k3**2) * self.lattice.mask)) * float(np.max(np.abs(self.uhat)))
        return float(np.max(div)) / scale if scale > 0 else 0.0

    def physical(self) -> np.ndarray:
        """Velocity on the sheared grid, shape ``(3, N, N, N)``."""
        n = self.lattice.n
        return np.fft.irfftn(self.uhat, s=(n, n, n), axes=(1, 2, 3)) * n**3

    def single_mode(self, m: int, nn: int, l: int) -> np.ndarray:
        """Amplitude of the mode that started at lattice indices ``(m, nn, l)``."""
        cur = nn - self.offset * m
        if abs(cur) >= self.lattice.cut:
            return np.zeros(3, dtype=complex)
        return self.uhat[:, m % self.lattice.n, cur % self.lattice.n, l].copy()


@dataclass
class EnergyBudget:
    t: float
    kinetic: float
    dissipation: float
    production: float
    residual: float
    dropped: float = 0.0


def _project(w: np.ndarray, k1, k2, k3) -> np.ndarray:
    k2sq = k1 * k1 + k2 * k2 + k3 * k3
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k2sq > 0, 1.0 / k2sq, 0.0)
    dot = (k1 * w[0] + k2 * w[1] + k3 * w[2]) * inv
    out = np.empty_like(w)
    out[0] = w[0] - k1 * dot
    out[1] = w[1] - k2 * dot
    out[2] = w[2] - k3 * dot
    return out


def _linear(v: np.ndarray, f: float, k1, k2, k3) -> np.ndarray:
    """Inviscid algebraic symbol applied to ``v`` (viscosity is in the integrating factor)."""
    r2 = k1 * k1 + k2 * k2 + k3 * k3
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(r2 > 0, 1.0 / r2, 0.0)
    g = 2.0 - f
    out = np.empty_like(v)
    out[0] = f * k1 * k2 * inv * v[0] + (f - 1.0 + g * k1 * k1 * inv) * v[1]
    out[1] = (-f + f * k2 * k2 * inv) * v[0] + g * k1 * k2 * inv * v[1]
    out[2] = f * k2 * k3 * inv * v[0] + g * k1 * k3 * inv * v[1]
    out[:, r2 == 0] = 0.0
    return out


def _nonlinear(v: np.ndarray, lat: Lattice, k1, k2, k3) -> tuple[np.ndarray, float]:
    """Projected, dealiased ``u x omega``; also returns ``max |u|``."""
    n = lat.n
    shape = (n, n, n)
    ax = (1, 2, 3)
    u = np.fft.irfftn(v, s=shape, axes=ax) * n**3
    om = np.empty_like(v)
    om[0] = 1j * (k2 * v[2] - k3 * v[1])
    om[1] = 1j * (k3 * v[0] - k1 * v[2])
    om[2] = 1j * (k1 * v[1] - k2 * v[0])
    w = np.fft.irfftn(om, s=shape, axes=ax) * n**3
    cross = np.stack([u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]])
    nl = np.fft.rfftn(cross, axes=ax) / n**3
    nl *= lat.mask
    return _project(nl, k1, k2, k3), float(np.max(np.sqrt(np.sum(u * u, axis=0))))


def _rhs(v, s, cfg: DnsConfig, lat: Lattice):
    k1, k2, k3 = lat.kvec(s)
    out = _linear(v, cfg.f, k1, k2, k3)
    umax = 0.0
    if cfg.nonlinear:
        nl, umax = _nonlinear(v, lat, k1, k2, k3)
        out += nl
    out *= lat.mask
    return out, umax


def remesh(state: SpectralField) -> tuple[SpectralField, float, int]:
    """Shift lattice indices ``n -> n - j m`` with ``j = round(s dk1/dk2)``.

    Modes pushed out of the retained band are dropped.  Returns the new
    field, the kinetic energy removed, and ``j``.
    """
    lat = state.lattice
    j = int(round(state.s * lat.dk[0] / lat.dk[1]))
    if j == 0:
        return state, 0.0, 0
    n = lat.n
    idx = np.fft.fftfreq(n, 1.0 / n).astype(int)
    inband = np.abs(idx) < lat.cut
    new = np.zeros_like(state.uhat)
    before = state.kinetic()
    for a, m in enumerate(idx):
        if not inband[a]:
            continue
        src = idx + j * m  # new index n' takes the old index n' + j m
        ok = inband & (np.abs(src) < lat.cut)
        new[:, a, ok, :] = state.uhat[:, a, src[ok] % n, :]
    out = SpectralField(new * lat.mask, state.s - j * lat.dk[1] / lat.dk[0], state.t, lat, state.offset + j)
    return out, before - out.kinetic(), j


def _needs_remesh(state: SpectralField, cfg: DnsConfig) -> bool:
    lat = state.lattice
    drift = abs(lat.dk[0] * lat.max_m * state.s)
    return drift > cfg.remesh_threshold * lat.k2_nyquist


def step(state: SpectralField, cfg: DnsConfig) -> SpectralField:
    """One integrating-factor RK4 step of size ``cfg.dt`` followed by re-projection."""
    lat = state.lattice
    h = cfg.dt
    s0, sh, s1 = state.s, state.s + 0.5 * h, state.s + h
    nu = cfg.nu
    E_half_a = np.exp(-nu * lat.k2sq_integral(s0, sh))
    E_half_b = np.exp(-nu * lat.k2sq_integral(sh, s1))
    E_full = E_half_a * E_half_b
    v = state.uhat
    k1, umax = _rhs(v, s0, cfg, lat)
    if umax * h > 0.5 * min(lat.dx):
        raise CFLError(f"max|u| dt = {umax * h:.3e} exceeds half a grid spacing at t={state.t:.6g}")
    v2 = E_half_a * (v + 0.5 * h * k1)
    k2, _ = _rhs(v2, sh, cfg, lat)
    v3 = E_half_a * v + 0.5 * h * k2
    k3, _ = _rhs(v3, sh, cfg, lat)
    v4 = E_full * v + h * E_half_b * k3
    k4, _ = _rhs(v4, s1, cfg, lat)
    vn = E_full * v + (h / 6.0) * (E_full * k1 + 2.0 * E_half_b * (k2 + k3) + k4)
    kk = lat.kvec(s1)
    vn = _project(vn, *kk) * lat.mask
    vn[:, 0, 0, 0] = 0.0
    return SpectralField(vn, s1, state.t + h, lat, state.offset)


def default_dns_spec() -> PseudoModeSpec:
    return PseudoModeSpec(0.0, 0.25, 0.2, 0.2)


def init_from_pseudomode(
    cfg: DnsConfig, spec: PseudoModeSpec, delta: float, mode_f: float | None = None, project: bool = True
) -> SpectralField:
    """Sample the pseudo-mode bumps on the lattice and rescale to H^1 size ``delta``.

    The eigenvector is taken at Coriolis coefficient ``mode_f`` (default
    ``cfg.f``), which must lie in ``(0, 1)``; this allows the same data to seed
    runs outside the unstable range.
    """
    mode_f = cfg.f if mode_f is None else mode_f
    if not 0.0 < mode_f < 1.0:
        raise DomainError(f"pseudo-mode vector needs 0 < f < 1, got {mode_f}")
    lat = Lattice(cfg)
    k1, k2, k3 = lat.kvec(0.0)
    for axis, (c, w, dk) in enumerate(
        [(0.0, spec.delta, lat.dk[0]), (spec.xi2s, spec.deltap, lat.dk[1]), (spec.xi3s, spec.delta, lat.dk[2])]
    ):
        pts = np.arange(-lat.n // 2, lat.n // 2) * dk
        count = int(np.sum(np.abs(pts - c) < w))
        if count < 3:
            raise ResolutionError(f"axis {axis + 1}: bump of width {w} holds {count} < 3 lattice points")
    vec = streak_eigenpairs(FlowParams(mode_f, cfg.nu), spec.xi2s, spec.xi3s)[0].vector
    md, mdp = Mollifier1D(spec.delta), Mollifier1D(spec.deltap)
    prof = np.zeros(lat.shape)
    centers = spec.centers
    for c in centers:
        prof += md(k1 - c[0]) * mdp(k2 - c[1]) * md(k3 - c[2])
    uhat = prof[None] * vec[:, None, None, None].astype(complex)
    uhat *= lat.mask
    if project:
        uhat = _project(uhat, k1, k2, k3)
    uhat[:, 0, 0, 0] = 0.0
    state = SpectralField(uhat, 0.0, 0.0, lat)
    size = state.h1()
    if size == 0:
        raise ResolutionError("pseudo-mode has no retained lattice modes")
    state.uhat *= delta / size
    return state


def init_single_mode(cfg: DnsConfig, m: int, nn: int, l: int, v) -> SpectralField:
    """A single lattice mode (plus its conjugate partner) with amplitude ``v``."""
    lat = Lattice(cfg)
    if l < 0:
        m, nn, l, v = -m, -nn, -l, np.conj(v)
    uhat = np.zeros((3,) + lat.shape, dtype=complex)
    uhat[:, m % lat.n, nn % lat.n, l] = v
    if l == 0:
        uhat[:, (-m) % lat.n, (-nn) % lat.n, 0] = np.conj(v)
    return SpectralField(uhat, 0.0, 0.0, lat)


@dataclass
class RunResult:
    series: GrowthSeries
    budgets: list
    max_divergence: float
    remesh_events: list
    energy_inequality_ok: bool
    final: SpectralField
    steps: int
    stopped_early: bool = False

    @property
    def max_budget_ratio(self) -> float:
        """Largest ``residual / kinetic`` over the sampled intervals."""
        vals = [b.residual / b.kinetic for b in self.budgets[1:] if b.kinetic > 0]
        return max(vals) if vals else 0.0


def run(
    cfg: DnsConfig,
    init: SpectralField,
    t_end: float,
    sample_every: int = 2,
    stop: Callable[[SpectralField], bool] | None = None,
) -> RunResult:
    """Advance ``init`` to ``t_end`` and record norms and energy budgets.

    ``sample_every`` (even) steps separate samples; the budget residual at a
    sample is ``|dK - int (P - D) dt + dropped| / dt`` over the preceding
    interval with a composite Simpson rule on the per-step diagnostics, where
    ``dropped`` is energy removed by remeshing.  ``stop`` ends the run early
    at the first sample where it returns True.
    """
    if sample_every < 2 or sample_every % 2:
        raise DomainError("sample_every must be an even integer >= 2")
    n_steps = t_end / cfg.dt
    if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
        raise DomainError(f"t_end={t_end} is not an integer multiple of dt={cfg.dt}")
    n_steps = int(round(n_steps))
    state = init.copy()
    nu = cfg.nu

    def diag(st):
        return st.kinetic(), st.dissipation(nu), st.production()

    times, l2s, h1s = [state.t], [state.l2()], [state.h1()]
    K0, D0, P0 = diag(state)
    budgets = [EnergyBudget(state.t, K0, D0, P0, 0.0)]
    window = [(K0, D0, P0)]
    dropped = 0.0
    max_div = state.divergence()
    remeshes = []
    ineq_ok = P0 <= 2.0 * K0 * (1 + 1e-12) + 1e-300
    stopped = False
    k = 0
    for k in range(1, n_steps + 1):
        if _needs_remesh(state, cfg):
            state, lost, j = remesh(state)
            dropped += lost
            remeshes.append({"t": state.t, "shift": j, "dropped_energy": lost, "kinetic": state.kinetic()})
        try:
            state = step(state, cfg)
        except CFLError as e:
            raise CFLError(f"step {k}: {e}") from e
        max_div = max(max_div, state.divergence())
        window.append(diag(state))
        if k % sample_every == 0:
            Ks, Ds, Ps = (np.array(c) for c in zip(*window))
            rate = Ps - Ds
            h = cfg.dt
            integral = h / 3.0 * (rate[0] + rate[-1] + 4.0 * rate[1:-1:2].sum() + 2.0 * rate[2:-1:2].sum())
            span = h * (len(window) - 1)
            res = abs(Ks[-1] - Ks[0] - integral + dropped) / span
            budgets.append(EnergyBudget(state.t, Ks[-1], Ds[-1], Ps[-1], res, dropped))
            ineq_ok = ineq_ok and Ps[-1] <= 2.0 * Ks[-1] * (1 + 1e-12) + 1e-300
            times.append(state.t)
            l2s.append(state.l2())
            h1s.append(state.h1())
            window = [window[-1]]
            dropped = 0.0
            if stop is not None and stop(state):
                stopped = True
                break
    series = GrowthSeries(np.array(times), np.array(l2s), h1=np.array(h1s))
    return RunResult(series, budgets, max_div, remeshes, bool(ineq_ok), state, k, stopped)


def write_run_csv(path, result: RunResult) -> None:
    s = result.series
    rows = np.column_stack(
        [
            s.times,
            s.norms,
            s.h1,
            [b.kinetic for b in result.budgets],
            [b.dissipation for b in result.budgets],
            [b.production for b in result.budgets],
            [b.residual for b in result.budgets],
        ]
    )
    np.savetxt(
        path,
        rows,
        fmt="%.16e",
        delimiter=",",
        header="t,l2,h1,kinetic,dissipation,production,energy_residual",
        comments="",
    )


@dataclass
class EscapeReport:
    delta: float
    eps0: float
    escape: float | None
    predicted: float
    t_star: float | None
    t_2star: float | None


def _first_crossing(times, vals, level):
    idx = np.flatnonzero(np.asarray(vals) > level)
    return float(times[idx[0]]) if idx.size else None


def escape_time(series: GrowthSeries, eps0: float, delta: float, lower_rate: float, bar_delta0: float = 1.0) -> EscapeReport:
    """First sampled time with ``|u| > eps0``, plus the monitors.

    ``predicted`` is ``ln(2 eps0/delta)/lower_rate``; ``t_star`` is the first
    time the H^1 size exceeds ``bar_delta0``; ``t_2star`` the first time
    ``|u| > 2 delta exp(lower_rate t)``.
    """
    t = series.times
    esc = _first_crossing(t, series.norms, eps0)
    t_star = _first_crossing(t, series.h1, bar_delta0) if series.h1 is not None else None
    t2 = _first_crossing(t, series.norms - 2.0 * delta * np.exp(lower_rate * t), 0.0)
    return EscapeReport(delta, eps0, esc, math.log(2.0 * eps0 / delta) / lower_rate, t_star, t2)


@dataclass
class EscapeScanResult:
    deltas: list
    escape_times: list
    fitted_slope: float | None
    expected_slope: float
    eps0: float
    reports: list = field(default_factory=list)
    bound_ok: bool = True

    @property
    def passed(self) -> bool:
        if self.fitted_slope is None:
            return False
        return abs(self.fitted_slope - self.expected_slope) <= 0.2 * self.expected_slope and self.bound_ok

    def to_dict(self) -> dict:
        return {
            "deltas": list(self.deltas),
            "escape_times": list(self.escape_times),
            "fitted_slope": self.fitted_slope,
            "expected_slope": self.expected_slope,
            "eps0": self.eps0,
            "bound_ok": self.bound_ok,
            "pass": self.passed,
            "reports": [asdict(r) for r in self.reports],
        }


def escape_scan(
    cfg: DnsConfig,
    spec: PseudoModeSpec,
    deltas,
    eps0: float,
    sample_every: int = 2,
) -> EscapeScanResult:
    """One run per ``delta``; fit escape time against ``ln(1/delta)``.

    Each run stops at the first sample above ``eps0`` and is allowed
    ``2 T^delta`` time units, after which :class:`ScanIncompleteError` is raised.
    """
    deltas = [float(d) for d in deltas]
    if not deltas or any(d >= eps0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise DomainError("deltas must be nonempty, strictly decreasing and below eps0")
    lower = cfg.params.lower_rate
    reports, times = [], []
    for d in deltas:
        init = init_from_pseudomode(cfg, spec, d)
        budget = 2.0 * math.log(2.0 * eps0 / d) / lower
        span = sample_every * cfg.dt
        t_end = span * math.ceil(budget / span)
        res = run(cfg, init, t_end, sample_every, stop=lambda st: st.l2() > eps0)
        rep = escape_time(res.series, eps0, d, lower)
        if rep.escape is None:
            raise ScanIncompleteError(f"delta={d}: no escape within {t_end:.3f}")
        reports.append(rep)
        times.append(rep.escape)
    slope = None
    if len(deltas) > 1:
        x = np.log(1.0 / np.array(deltas))
        slope = float(np.polyfit(x, np.array(times), 1)[0])
    bound_ok = all(r.t_2star is None or r.t_2star >= r.escape for r in reports)
    return EscapeScanResult(deltas, times, slope, 1.0 / lower, eps0, reports, bound_ok)


def save_checkpoint(path, state: SpectralField, cfg: DnsConfig) -> None:
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": {**asdict(cfg), "box": list(cfg.box)},
        "s": state.s,
        "t": state.t,
        "offset": state.offset,
    }
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), uhat=state.uhat)


def load_checkpoint(path) -> tuple[SpectralField, DnsConfig]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        uhat = data["uhat"]
    if header.get("format") != CHECKPOINT_FORMAT:
        raise DomainError(f"not a solver checkpoint: {header.get('format')!r}")
    if header.get("version") != CHECKPOINT_VERSION:
        raise DomainError(f"unsupported checkpoint version {header.get('version')}")
    c = header["config"]
    cfg = DnsConfig(**{**c, "box": tuple(c["box"])})
    lat = Lattice(cfg)
    if uhat.shape != (3,) + lat.shape:
        raise DomainError("checkpoint coefficient shape does not match its lattice")
    return SpectralField(uhat, header["s"], header["t"], lat, header.get("offset", 0)), cfg
