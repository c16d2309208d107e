import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotcouette.symbol import (
    WINDOW_HI,
    WINDOW_LO,
    DomainError,
    FlowParams,
    WaveVector,
    algebraic_matrices,
    coupling_bound,
    coupling_matrix,
    growth_rates,
    instability_window,
    lambda1_range_scan,
    normalized,
    rayleigh_discriminant,
    streak_eigenpairs,
    streak_lambda1,
    sym_matrices,
    symbol_algebraic,
    symbol_streak,
    symbol_sym,
)

fs = st.floats(0.01, 0.99)
nus = st.floats(0.0, 0.1)
coord = st.floats(-5.0, 5.0)
nonzero = st.floats(0.05, 5.0) | st.floats(-5.0, -0.05)


def test_growth_rates_values():
    np.testing.assert_allclose(growth_rates(FlowParams(0.5)), (0.5, 0.75))
    np.testing.assert_allclose(growth_rates(FlowParams(0.9)), (0.3, 0.55))
    lo, hi = growth_rates(FlowParams(1e-12))
    assert lo < 1e-5 and abs(hi - 1.0) < 1e-11


@pytest.mark.parametrize("f", [0.0, 1.0, 1.5, -0.2])
def test_growth_rates_reject_outside_unit_interval(f):
    with pytest.raises(DomainError):
        growth_rates(FlowParams(f))


def test_flowparams_validation():
    with pytest.raises(DomainError):
        FlowParams(float("nan"))
    with pytest.raises(DomainError):
        FlowParams(0.5, -1.0)
    with pytest.raises(DomainError):
        FlowParams.unstable(1.5)
    p = FlowParams(0.5, 0.01)
    assert p.lower_rate == 0.5 and p.upper_rate == 0.75 and p.rayleigh == -0.25


def test_rayleigh_discriminant():
    assert rayleigh_discriminant(0.5) == -0.25
    assert rayleigh_discriminant(1.0) == 0.0
    assert rayleigh_discriminant(0.0) == 0.0
    assert rayleigh_discriminant(1.5) > 0


def test_window_endpoints_solve_rate_balance():
    # endpoints are the roots of 2 sqrt(f(1-f)) = (2-f)/2, i.e. 17 f^2 - 20 f + 4 = 0
    roots = np.sort(np.roots([17.0, -20.0, 4.0]))
    np.testing.assert_allclose([WINDOW_LO, WINDOW_HI], roots, rtol=1e-14)
    np.testing.assert_allclose([WINDOW_LO, WINDOW_HI], [0.255479, 0.920991], atol=1e-6)
    assert instability_window(0.5)[0]
    assert not instability_window(0.2)[0]
    assert not instability_window(1.5)[0]


@given(fs)
def test_window_matches_rate_comparison(f):
    lo, hi = growth_rates(FlowParams(f))
    if abs(2 * lo - hi) > 1e-9:
        assert instability_window(f)[0] == (2 * lo > hi)


def test_streak_symbol_example():
    A = symbol_streak(FlowParams(0.5), 0.0, 1.0)
    np.testing.assert_array_equal(A, [[0, -0.5, 0], [-0.5, 0, 0], [0, 0, 0]])


@given(fs, nus, coord, coord, nonzero)
def test_algebraic_reduces_to_streak(f, nu, x2, x3, x1):
    p = FlowParams(f, nu)
    if x2 * x2 + x3 * x3 == 0:
        return
    np.testing.assert_allclose(symbol_algebraic(p, (0.0, x2, x3)), symbol_streak(p, x2, x3), rtol=1e-15, atol=1e-15)
    A = symbol_streak(p, x2, x3)
    assert A[0, 2] == A[1, 2] == 0.0


@given(fs, nus, coord, coord, coord)
def test_sym_is_hermitian_part(f, nu, x1, x2, x3):
    if x1 * x1 + x2 * x2 + x3 * x3 == 0:
        return
    p = FlowParams(f, nu)
    A = symbol_algebraic(p, (x1, x2, x3))
    S = symbol_sym(p, (x1, x2, x3))
    np.testing.assert_allclose(S, 0.5 * (A + A.T), atol=1e-14)


@given(fs, st.floats(0.05, 5.0), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_production_identity_for_divergence_free_vectors(f, scale, a, b, c):
    # Re<A v, v> = -v1 v2 when v is orthogonal to xi and nu = 0
    rng = np.random.default_rng(abs(hash((f, a, b, c))) % 2**32)
    xi = np.array([a, b, c]) * scale
    if np.linalg.norm(xi) < 1e-3:
        return
    v = rng.standard_normal(3)
    v -= xi * (v @ xi) / (xi @ xi)
    A = symbol_algebraic(FlowParams(f), xi)
    assert abs(v @ A @ v + v[0] * v[1]) <= 1e-10 * (v @ v)


def test_origin_is_rejected():
    p = FlowParams(0.5)
    for fn in (lambda: symbol_streak(p, 0.0, 0.0), lambda: symbol_algebraic(p, (0, 0, 0)), lambda: symbol_sym(p, (0, 0, 0))):
        with pytest.raises(DomainError):
            fn()
    assert np.isnan(algebraic_matrices(0.5, 0.0, 0.0, 0.0, 0.0)).any()


def test_vectorised_stacks_match_pointwise():
    rng = np.random.default_rng(1)
    xi = rng.standard_normal((50, 3))
    A = algebraic_matrices(0.3, 0.02, *xi.T)
    S = sym_matrices(0.3, 0.02, *xi.T)
    p = FlowParams(0.3, 0.02)
    for i in range(50):
        np.testing.assert_array_equal(A[i], symbol_algebraic(p, xi[i]))
        np.testing.assert_array_equal(S[i], symbol_sym(p, xi[i]))


def test_eigenpair_example():
    p = FlowParams(0.5)
    e1, e2, e3 = streak_eigenpairs(p, 0.0, 1.0)
    assert (e1.lam, e2.lam, e3.lam) == (0.5, -0.5, 0.0)
    np.testing.assert_allclose(e1.vector, [1.0, -1.0, 0.0])
    np.testing.assert_allclose(e2.vector, [-1.0, -1.0, 0.0])
    np.testing.assert_allclose(e3.vector, [0.0, 0.0, 1.0])
    assert math.isclose(streak_eigenpairs(FlowParams(0.5, 0.01), 0.0, 1.0)[0].lam, 0.49)


@given(fs, nus, coord, nonzero)
def test_eigenpairs_against_dense_solver(f, nu, x2, x3):
    p = FlowParams(f, nu)
    A = symbol_streak(p, x2, x3)
    pairs = streak_eigenpairs(p, x2, x3)
    for e in pairs:
        assert np.linalg.norm(A @ e.vector - e.lam * e.vector) <= 1e-10 * np.linalg.norm(e.vector)
    np.testing.assert_allclose(sorted(e.lam for e in pairs), np.sort(np.linalg.eigvals(A).real), atol=1e-9)
    assert pairs[0].lam >= pairs[2].lam >= pairs[1].lam


def test_eigenpairs_degenerate_and_domain():
    pairs = streak_eigenpairs(FlowParams(0.5, 0.1), 2.0, 0.0)
    assert all(e.degenerate for e in pairs)
    assert all(e.lam == -0.4 for e in pairs)
    with pytest.raises(DomainError):
        streak_eigenpairs(FlowParams(1.5), 0.0, 1.0)
    with pytest.raises(DomainError):
        streak_eigenpairs(FlowParams(0.5), 0.0, 0.0)


@given(fs, nus, coord, nonzero)
def test_lambda1_vectorised_matches_pairs(f, nu, x2, x3):
    p = FlowParams(f, nu)
    assert math.isclose(float(streak_lambda1(p, x2, x3)), streak_eigenpairs(p, x2, x3)[0].lam, rel_tol=1e-12, abs_tol=1e-14)


def test_lambda1_scan_approaches_lower_rate():
    p = FlowParams(0.5, 0.01)
    sups = []
    for k in (4, 8, 16):
        scan = lambda1_range_scan(p, np.linspace(-1, 1, 21), 2.0 ** -np.arange(k))
        assert scan.below_bound and scan.hi <= scan.bound
        sups.append(scan.sup)
    assert sups[0] < sups[1] < sups[2] < 0.5
    assert 0.5 - sups[2] < 1e-9
    assert scan.argsup[0] == 0.0


def test_lambda1_scan_errors_and_origin():
    p = FlowParams(0.5, 0.01)
    scan = lambda1_range_scan(p, [0.0, 1.0], [0.0, 1.0])
    assert np.isnan(scan.values[0, 0])
    with pytest.raises(DomainError):
        lambda1_range_scan(p, [], [1.0])
    with pytest.raises(DomainError):
        lambda1_range_scan(FlowParams(0.5), [0.0], [1.0])
    with pytest.raises(DomainError):
        lambda1_range_scan(p, [0.0], [0.0])


def test_coupling_matrix_structure_and_bound():
    M = coupling_matrix(0.5, np.linspace(-3, 3, 7), 0.2, 0.3)
    assert M.shape == (7, 3, 3)
    assert np.all(M[..., :, 2] == 0.0)
    sup, arg = coupling_bound(0.5, 0.2, 0.3, np.linspace(-50, 50, 2001))
    assert np.isfinite(sup) and sup < 2.0
    with pytest.raises(DomainError):
        coupling_matrix(0.5, 0.0, 0.0, 0.0)


def test_wavevector_and_normalized():
    assert WaveVector(1.0, 2.0, 2.0).norm2 == 9.0
    np.testing.assert_allclose(np.linalg.norm(normalized([3.0, 4.0, 0.0])), 1.0)
    with pytest.raises(DomainError):
        normalized([0.0, 0.0, 0.0])
