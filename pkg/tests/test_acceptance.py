"""Acceptance criteria 1-11; run with ``pytest tests/test_acceptance.py -v``."""
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from rotcouette.certify import certify_numerical_range, certify_routh_hurwitz, weighted_integral_bound_check
from rotcouette.kelvin import ModeEnsemble, envelope_series, propagate_field, propagate_mode, sobolev_ratio_check
from rotcouette.pseudomode import (
    PseudoModeSpec,
    build_pseudomode,
    certify_pseudomode,
    default_schedule,
    residual,
    residual_schedule,
    select_linear_params,
)
from rotcouette.sheardns import DnsConfig, default_dns_spec, escape_scan, init_from_pseudomode, run
from rotcouette.symbol import FlowParams, streak_eigenpairs, symbol_streak


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_criterion_01_streak_eigensystem():
    rng = np.random.default_rng(1)
    n = 10_000
    f = rng.uniform(0.001, 0.999, n)
    nu = rng.uniform(0.0, 0.1, n)
    x2 = rng.uniform(-5.0, 5.0, n)
    x3 = rng.choice([-1.0, 1.0], n) * rng.uniform(1e-3, 5.0, n)
    with Timer() as t:
        mats = np.empty((n, 3, 3))
        lams = np.empty((n, 3))
        worst = 0.0
        for i in range(n):
            p = FlowParams(f[i], nu[i])
            mats[i] = A = symbol_streak(p, x2[i], x3[i])
            pairs = streak_eigenpairs(p, x2[i], x3[i])
            for j, e in enumerate(pairs):
                lams[i, j] = e.lam
                worst = max(worst, np.linalg.norm(A @ e.vector - e.lam * e.vector) / np.linalg.norm(e.vector))
        oracle = np.sort(np.linalg.eigvals(mats).real, axis=1)
        gap = np.max(np.abs(np.sort(lams, axis=1) - oracle))
    print(f"max eigen-residual {worst:.2e}, eigenvalue mismatch {gap:.2e}, {t.elapsed:.2f}s")
    assert worst <= 1e-10
    assert gap <= 1e-9
    assert t.elapsed < 5.0


def test_criterion_02_numerical_range_certificate():
    with Timer() as t:
        cert = certify_numerical_range()
    print(f"min gap {cert.min:.3e} at {cert.argmin}, samples {cert.samples}, {t.elapsed:.1f}s")
    assert cert.samples == 201 * 201 * 99 + 10**6
    assert cert.passed and cert.margin >= -1e-12
    assert cert.notes["max_gap_at_diagonal_direction"] <= 1e-12
    assert t.elapsed < 60.0


def test_criterion_03_routh_hurwitz_chain():
    with Timer() as t:
        certs = {c.quantity: c for c in certify_routh_hurwitz()}
    for c in certs.values():
        print(f"{c.quantity}: min {c.min:.3e} pass={c.passed}")
    assert certs["b2"].passed and certs["b2"].strict
    assert certs["b1"].passed and certs["b1"].strict
    assert certs["b0"].passed and certs["b0"].notes["zero_set"] == [(-1.0, 1.0)]
    assert certs["b2*b1-b3*b0"].passed and certs["b2*b1-b3*b0"].strict
    assert certs["bpoly_consistency"].passed and certs["bpoly_consistency"].samples == 10**5
    assert all(c.passed for c in certs.values())
    assert t.elapsed < 60.0


def test_criterion_04_pseudomode_residual():
    p = FlowParams(0.5, 0.01)
    xi3, _ = select_linear_params(0.5, 0.01, 10.0, 0.1)
    with Timer() as t:
        sched = residual_schedule(p, 0.0, xi3, default_schedule(), stop_below=0.01)
        totals = [(d, r.total) for d, _, r in sched if r is not None]
        skipped = [d for d, _, r in sched if r is None]
        dp = math.sqrt(0.05)
        i2 = [residual(p, build_pseudomode(p, PseudoModeSpec(0.0, xi3, d, dp))).I2 for d in (0.05, 0.025, 0.0125)]
    print(f"xi3={xi3:.6f}, skipped {skipped}, residuals {[(d, round(r, 5)) for d, r in totals]}")
    print(f"I2 at fixed delta'={dp:.4f}: {i2}, {t.elapsed:.1f}s")
    vals = [r for _, r in totals]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert min(vals) < 0.01 and any(v < 0.1 for v in vals)
    for a, b in zip(i2, i2[1:]):
        assert abs(a / b - 2.0) <= 0.15 * 2.0
    assert t.elapsed < 120.0


def test_criterion_05_semigroup_upper_bound():
    rng = np.random.default_rng(5)
    times = np.linspace(0.0, 5.0, 51)
    worst = 0.0
    with Timer() as t:
        for _ in range(100):
            p = FlowParams(float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.0, 0.05)))
            ens = ModeEnsemble.random_band_limited(rng, 100)
            series, _ = propagate_field(p, ens, 5.0, sample_times=times)
            worst = max(worst, float(np.max(series.ratio / np.exp(times * p.upper_rate))))
    print(f"max ratio / exp(t upper) = {worst:.8f}, {t.elapsed:.1f}s")
    assert worst <= 1.0 + 1e-6
    assert t.elapsed < 60.0


@pytest.mark.parametrize("T, eps", [(5.0, 0.2), (10.0, 0.1)])
def test_criterion_06_linear_growth_envelope(T, eps):
    p = FlowParams(0.5, 0.01)
    with Timer() as t:
        cert = certify_pseudomode(p, T, eps)
        ens = ModeEnsemble.from_field(cert.field, radius=1.0)
        series, _ = propagate_field(p, ens, T, sample_times=np.linspace(0.0, T, 200))
        envelope_series(series, p.lower_rate, eps)
        sob = [sobolev_ratio_check(ens, k) for k in range(1, 7)]
    dev = float(np.max(np.abs(series.ratio - np.exp(series.times * p.lower_rate))))
    print(f"T={T}, eps={eps}: delta={cert.spec.delta:.3e}, residual {cert.report.total:.3e} < gamma {cert.gamma:.3e}")
    print(f"max |ratio - exp(t lower)| = {dev:.6f}; Sobolev ratios {[round(s[0], 6) for s in sob]}; {t.elapsed:.1f}s")
    assert series.times.size == 200
    assert np.all(series.norms >= series.env_lo) and np.all(series.norms <= series.env_hi)
    for k, (ratio, bound, ok) in zip(range(1, 7), sob):
        assert ok and bound == 2.0 ** (k / 2)
    assert t.elapsed < 120.0


def test_criterion_07_kelvin_oracle():
    p = FlowParams(0.5, 0.01)
    v0 = np.array([0.4, -0.3, 0.8])
    cases = [(0.0, 1.0), (0.7, 0.3), (-1.5, 2.0)]
    with Timer() as t:
        for x2, x3 in cases:
            exact = expm(2.0 * symbol_streak(p, x2, x3)) @ v0
            got = propagate_mode(p, (0.0, x2, x3), v0, 2.0, dt=0.01, record=False).states[-1]
            assert np.max(np.abs(got - exact)) <= 1e-8
        exact = expm(4.0 * symbol_streak(p, 0.4, 0.9)) @ v0
        errs = [np.linalg.norm(propagate_mode(p, (0, 0.4, 0.9), v0, 4.0, dt=dt, record=False).states[-1] - exact) for dt in (0.2, 0.1, 0.05)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    print(f"observed orders {orders}, {t.elapsed:.2f}s")
    assert np.all(np.abs(orders - 4.0) <= 0.2)
    assert t.elapsed < 10.0


@pytest.mark.slow
def test_criterion_08_solver_energy_identity():
    cfg = DnsConfig(f=0.5, nu=0.05, n=32)
    with Timer() as t:
        res = run(cfg, init_from_pseudomode(cfg, default_dns_spec(), 0.05), 5.0)
    print(
        f"budget ratio {res.max_budget_ratio:.3e}, divergence {res.max_divergence:.3e}, "
        f"remeshes {len(res.remesh_events)}, {t.elapsed:.1f}s"
    )
    assert res.max_budget_ratio <= 1e-6
    assert res.max_divergence <= 1e-12
    assert res.energy_inequality_ok
    assert t.elapsed < 300.0


@pytest.mark.slow
def test_criterion_09_hadamard_escape_scaling():
    cfg = DnsConfig(f=0.5, nu=0.01, n=32)
    with Timer() as t:
        res = escape_scan(cfg, default_dns_spec(), [1e-2, 1e-3, 1e-4, 1e-5], 0.05)
    print(f"escape times {res.escape_times}, slope {res.fitted_slope:.4f} vs {res.expected_slope}, {t.elapsed:.1f}s")
    assert abs(res.fitted_slope - 2.0) <= 0.2 * 2.0
    assert res.bound_ok and all(r.t_2star is None for r in res.reports)
    assert all(a < b for a, b in zip(res.escape_times, res.escape_times[1:]))
    assert t.elapsed < 1800.0


@pytest.mark.slow
def test_criterion_10_stability_contrast():
    cfg = DnsConfig(f=1.5, nu=0.01, n=32)
    with Timer() as t:
        init = init_from_pseudomode(cfg, default_dns_spec(), 1e-2, mode_f=0.5)
        res = run(cfg, init, 20.0, sample_every=10)
    times, norms = res.series.times, res.series.norms
    running = np.maximum.accumulate(norms)
    late = running[times >= 10.0]
    settle = float(late[-1] / late[0])
    print(f"running max at t=10: {late[0]:.5f}, at t=20: {late[-1]:.5f}, ratio {settle:.4f}, {t.elapsed:.1f}s")
    assert settle <= 1.1
    assert norms[-1] <= norms[0]
    assert t.elapsed < 600.0


def test_criterion_11_weighted_integral_lemma():
    with Timer() as t:
        reps = [weighted_integral_bound_check(a, b, K, 1000) for a, b, K in [(1.0, 0.5, 2.0), (2.0, 1.0, 1.0), (0.9, 0.6, 5.0)]]
    print(f"worst ratios {[round(r.worst_ratio, 6) for r in reps]}, {t.elapsed:.2f}s")
    assert all(r.passed and r.trials == 1000 and r.worst_ratio <= 1.0 + 1e-9 for r in reps)
    assert t.elapsed < 5.0
