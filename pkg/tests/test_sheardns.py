import math

import numpy as np
import pytest

from rotcouette.kelvin import GrowthSeries, propagate_mode
from rotcouette.pseudomode import PseudoModeSpec
from rotcouette.sheardns import (
    CFLError,
    DnsConfig,
    Lattice,
    ResolutionError,
    SpectralField,
    default_dns_spec,
    escape_scan,
    escape_time,
    init_from_pseudomode,
    init_single_mode,
    load_checkpoint,
    remesh,
    run,
    save_checkpoint,
    step,
    write_run_csv,
)
from rotcouette.symbol import DomainError, FlowParams

SMALL = DnsConfig(f=0.5, nu=0.05, n=16)


def test_config_validation():
    for bad in (dict(n=24), dict(n=8), dict(dealias=0.4), dict(dt=0.0), dict(nu=-1.0), dict(remesh_threshold=0.0)):
        with pytest.raises(DomainError):
            DnsConfig(**{"f": 0.5, "nu": 0.01, **bad})


def test_lattice_geometry():
    lat = Lattice(DnsConfig(f=0.5, nu=0.01))
    np.testing.assert_allclose(lat.dk, (0.125, 0.125, 0.125))
    assert math.isclose(lat.volume, (16 * math.pi) ** 3)
    s0, s1 = 0.3, 0.7
    ss = np.linspace(s0, s1, 2001)
    k1, k3 = lat.k1[3, 5, 2], lat.k3[3, 5, 2]
    vals = k1**2 + (lat.k2base[3, 5, 2] - k1 * ss) ** 2 + k3**2
    trap = np.trapezoid(vals, ss) if hasattr(np, "trapezoid") else np.trapz(vals, ss)
    assert math.isclose(lat.k2sq_integral(s0, s1)[3, 5, 2], trap, rel_tol=1e-6)


def test_zero_field_is_fixed_point():
    lat = Lattice(SMALL)
    z = SpectralField(np.zeros((3,) + lat.shape, dtype=complex), 0.0, 0.0, lat)
    out = step(z, SMALL)
    assert np.all(out.uhat == 0) and out.divergence() == 0.0


def test_init_from_pseudomode_properties():
    cfg = DnsConfig(f=0.5, nu=0.01, n=16)
    st = init_from_pseudomode(cfg, default_dns_spec(), 1e-3)
    assert math.isclose(st.h1(), 1e-3, rel_tol=1e-12)
    assert st.divergence() <= 1e-12
    u = st.physical()
    assert u.dtype == float and np.all(np.isfinite(u))
    with pytest.raises(ResolutionError):
        init_from_pseudomode(cfg, PseudoModeSpec(0.0, 0.25, 0.1, 0.1), 1e-3)
    with pytest.raises(DomainError):
        init_from_pseudomode(DnsConfig(f=1.5, nu=0.01, n=16), default_dns_spec(), 1e-3)
    init_from_pseudomode(DnsConfig(f=1.5, nu=0.01, n=16), default_dns_spec(), 1e-3, mode_f=0.5)


@pytest.mark.parametrize("mode", [(0, 2, 3), (1, -2, 2), (-2, 1, 1)])
def test_linear_solver_matches_kelvin(mode):
    cfg = DnsConfig(f=0.5, nu=0.05, n=16, nonlinear=False, dt=0.01)
    lat = Lattice(cfg)
    m, nn, l = mode
    xi0 = np.array([m, nn, l]) * lat.dk[0]
    v = np.cross(xi0, [0.3, -0.2, 0.9]).astype(complex) * 1e-3
    st = init_single_mode(cfg, m, nn, l, v)
    res = run(cfg, st, 1.0)
    kel = propagate_mode(FlowParams(0.5, 0.05), xi0, v, 1.0, dt=0.01, record=False).states[-1]
    got = res.final.single_mode(m, nn, l)
    assert np.linalg.norm(got - kel) <= 1e-6 * np.linalg.norm(kel)


def test_remesh_conserves_norm_and_tracks_offset():
    cfg = DnsConfig(f=0.5, nu=0.0, n=16, nonlinear=False, dt=0.05)
    st = init_single_mode(cfg, 1, 2, 1, np.array([0.0, 1e-3, -2e-3]))
    st = SpectralField(st.uhat, 1.2, 1.2, st.lattice)
    new, lost, j = remesh(st)
    assert j == 1 and new.offset == 1 and math.isclose(new.s, 0.2)
    assert abs(new.l2() - st.l2()) <= 1e-10 * st.l2() and lost == 0.0
    np.testing.assert_array_equal(new.single_mode(1, 2, 1), st.single_mode(1, 2, 1))
    same, lost0, j0 = remesh(SpectralField(st.uhat, 0.2, 0.0, st.lattice))
    assert j0 == 0 and lost0 == 0.0


def test_energy_budget_small_grid():
    st = init_from_pseudomode(SMALL, default_dns_spec(), 0.05)
    res = run(SMALL, st, 1.0)
    assert res.max_budget_ratio <= 1e-6
    assert res.max_divergence <= 1e-12
    assert res.energy_inequality_ok
    assert len(res.budgets) == len(res.series.times) == 26


def test_run_argument_checks():
    st = init_from_pseudomode(SMALL, default_dns_spec(), 0.01)
    with pytest.raises(DomainError):
        run(SMALL, st, 1.0, sample_every=3)
    with pytest.raises(DomainError):
        run(SMALL, st, 1.001)


def test_cfl_violation_is_reported():
    st = init_from_pseudomode(SMALL, default_dns_spec(), 1e4)
    with pytest.raises(CFLError):
        step(st, SMALL)


def test_escape_time_closed_form():
    lam, delta, eps0 = 0.5, 1e-4, 0.05
    t = np.arange(0.0, 20.0, 0.04)
    series = GrowthSeries(t, delta * np.exp(lam * t), h1=delta * np.exp(lam * t))
    rep = escape_time(series, eps0, delta, lam)
    assert abs(rep.escape - math.log(eps0 / delta) / lam) <= 0.04
    assert math.isclose(rep.predicted, 13.815510557964274, rel_tol=1e-12)
    assert rep.t_2star is None
    assert abs(rep.t_star - math.log(1.0 / delta) / lam) <= 0.04
    never = escape_time(GrowthSeries(t, np.full_like(t, delta), h1=np.full_like(t, delta)), eps0, delta, lam)
    assert never.escape is None


def test_escape_scan_single_delta_and_validation():
    cfg = DnsConfig(f=0.5, nu=0.01, n=16)
    res = escape_scan(cfg, default_dns_spec(), [1e-2], 0.05, sample_every=4)
    assert res.fitted_slope is None and not res.passed
    assert res.escape_times[0] > 0 and res.expected_slope == 2.0
    with pytest.raises(DomainError):
        escape_scan(cfg, default_dns_spec(), [1e-3, 1e-2], 0.05)
    with pytest.raises(DomainError):
        escape_scan(cfg, default_dns_spec(), [0.1], 0.05)


def test_checkpoint_roundtrip(tmp_path):
    st = init_from_pseudomode(SMALL, default_dns_spec(), 0.01)
    st = SpectralField(st.uhat, 0.3, 1.5, st.lattice, offset=2)
    path = tmp_path / "c.npz"
    save_checkpoint(path, st, SMALL)
    back, cfg = load_checkpoint(path)
    assert cfg == SMALL
    np.testing.assert_array_equal(back.uhat, st.uhat)
    assert (back.s, back.t, back.offset) == (0.3, 1.5, 2)
    bad = tmp_path / "bad.npz"
    np.savez(bad, header=np.array('{"format": "other", "version": 1}'), uhat=st.uhat)
    with pytest.raises(DomainError):
        load_checkpoint(bad)


def test_run_csv_is_reproducible(tmp_path):
    paths = []
    for name in ("a.csv", "b.csv"):
        st = init_from_pseudomode(SMALL, default_dns_spec(), 0.01)
        p = tmp_path / name
        write_run_csv(p, run(SMALL, st, 0.2))
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].read_text().splitlines()[0] == "t,l2,h1,kinetic,dissipation,production,energy_residual"
