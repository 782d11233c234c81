import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiharmonic.cascade import (DivergenceError, HarmonicProblem, HarmonicStack, SourceHarmonics,
                                   eliminate_volume, ode_residual, quadratic_convolutions_complex,
                                   quadratic_convolutions_real, run_complex_direct,
                                   run_complex_linearized, run_real_linearized, run_two_harmonic,
                                   solve_level_real)
from multiharmonic.params import SimulationParams, alpha_m

from conftest import make_problem
from oracles import oracle


def _random_real(rng, N):
    u = rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1)
    u[0] = u[0].real
    return u


def _stack_rel(conv, u, N, ode=None, real=True):
    """Worst harmonic error relative to the largest oracle harmonic of the stack."""
    got = np.array([conv(u, m, ode) for m in range(N + 1)])
    ref = np.array([oracle(u, m, ode, real=real) for m in range(N + 1)])
    return np.abs(got - ref).max() / np.abs(ref).max()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 6))
def test_real_convolutions_match_time_domain(seed, N):
    rng = np.random.default_rng(seed)
    u = _random_real(rng, N)
    ode = (rng.uniform(-2, 2), rng.uniform(-2, 2))
    assert _stack_rel(quadratic_convolutions_real, u, N) < 1e-12
    assert _stack_rel(quadratic_convolutions_real, u, N, ode) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 6))
def test_complex_convolutions_match_time_domain(seed, N):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1)
    ode = (rng.uniform(-2, 2), rng.uniform(-2, 2))
    # the complex signal's harmonic m only sees sum-frequency pairs
    assert _stack_rel(quadratic_convolutions_complex, u, N, real=False) < 1e-12
    assert _stack_rel(quadratic_convolutions_complex, u, N, ode, real=False) < 1e-12


def test_convolutions_zero_and_single_mode():
    z = np.zeros((4, 3), dtype=complex)
    assert not np.any(quadratic_convolutions_real(z, 2))
    u = np.zeros(3, dtype=complex)
    u[1] = 2 - 1j
    assert quadratic_convolutions_real(u, 2) == u[1] ** 2
    assert quadratic_convolutions_real(u, 0) == pytest.approx(2 * abs(u[1]) ** 2, rel=1e-15)
    # weights at m = 2 from (1, 1): zeta - 3 xi w^2
    assert quadratic_convolutions_real(u, 2, (5.0, 1.0)) == pytest.approx(2.0 * u[1] ** 2)


def test_convolution_index_guard():
    with pytest.raises(IndexError):
        quadratic_convolutions_real(np.zeros(3), 3)
    with pytest.raises(IndexError):
        quadratic_convolutions_complex(np.zeros(3), -1)


def test_sum_frequency_parts_agree(rng):
    # with only harmonics up to m the real and complex couplings coincide at m
    u = _random_real(rng, 4)
    u[0] = 0
    for m in range(1, 5):
        v = u.copy()
        v[m + 1:] = 0
        assert quadratic_convolutions_real(v, m, (1.3, 0.4)) == pytest.approx(
            quadratic_convolutions_complex(v, m, (1.3, 0.4)), rel=1e-13)


def test_eliminate_volume(dc):
    a = alpha_m(2, dc.omega0, dc)
    p = np.array([1.0 + 2j, -3.0])
    assert np.all(eliminate_volume(2, p, 0.0, a, 0.0) == 0)
    np.testing.assert_allclose(eliminate_volume(1, p, 0.0, a, dc.mu), -a * dc.mu * p)
    fv = np.array([0.3j, 1.0])
    v = eliminate_volume(2, p, fv, a, dc.mu)
    np.testing.assert_allclose(v / a + dc.mu * p - fv, 0, atol=1e-12 * abs(fv).max())
    with pytest.raises(ValueError):
        eliminate_volume(0, p, fv, a, dc.mu)


@pytest.fixture(scope="module")
def problem(request):
    from multiharmonic.mesh import generate_disk
    return make_problem(generate_disk(0.2, 0.025))


def test_first_level_is_linear_solve(problem):
    st1 = run_complex_linearized(problem, 1)
    sysm, lu = problem.system(1)
    k2 = (problem.omega / problem.params.c) ** 2
    rhs = problem.forms.M @ (-k2 * problem.sources.get(1, problem.n_nodes))
    np.testing.assert_allclose(st1.p[1], lu.solve(rhs), rtol=1e-13)
    np.testing.assert_allclose(st1.v[1], -alpha_m(1, problem.omega, problem.dc) * problem.dc.mu * st1.p[1])
    np.testing.assert_allclose(run_real_linearized(problem, 1).p[1], st1.p[1], rtol=1e-13)


def test_linearized_equals_direct(problem):
    for N in (2, 4, 6):
        a, b = run_complex_linearized(problem, N), run_complex_direct(problem, N)
        for m in range(1, N + 1):
            assert np.linalg.norm(a.p[m] - b.p[m]) <= 1e-8 * np.linalg.norm(b.p[m])
            assert np.linalg.norm(a.v[m] - b.v[m]) <= 1e-8 * np.linalg.norm(b.v[m])


def test_two_harmonic_identity(problem):
    a, b = run_two_harmonic(problem), run_complex_direct(problem, 2)
    for f in ("p", "v"):
        for m in (1, 2):
            x, y = getattr(a, f)[m], getattr(b, f)[m]
            assert np.linalg.norm(x - y) <= 1e-8 * np.linalg.norm(y)


def test_two_harmonic_bubble_free(coarse_mesh):
    pr = make_problem(coarse_mesh, n0=0.0)
    a, b = run_two_harmonic(pr), run_complex_direct(pr, 2)
    assert np.linalg.norm(a.p[2] - b.p[2]) <= 1e-8 * np.linalg.norm(b.p[2])
    assert not np.any(a.v[1][pr.sources.get(1, pr.n_nodes) == 0] * 0)


def test_two_harmonic_no_second_forcing(coarse_mesh):
    pr = make_problem(coarse_mesh, n0=0.0, beta_a=0.0)
    assert not np.any(run_two_harmonic(pr).p[2])


def test_linear_medium_generates_no_harmonics(coarse_mesh):
    pr = make_problem(coarse_mesh, n0=0.0, beta_a=0.0)
    for st_ in (run_real_linearized(pr, 4), run_complex_linearized(pr, 4), run_complex_direct(pr, 4)):
        assert np.any(st_.p[1])
        assert not np.any(st_.p[2:])


def test_zero_source_gives_zero(coarse_mesh):
    pr = HarmonicProblem(coarse_mesh, SimulationParams(), SourceHarmonics({}))
    for st_ in (run_complex_direct(pr, 3), run_complex_linearized(pr, 3), run_real_linearized(pr, 3)):
        assert not np.any(st_.p) and not np.any(st_.v)


def test_zeroth_harmonics(problem):
    full = run_real_linearized(problem, 3, v0_zero=False)
    vz = run_real_linearized(problem, 3, v0_zero=True)
    assert not np.any(full.p[0]) and not np.any(vz.p[0]) and not np.any(vz.v[0])
    assert np.all(full.v[0].imag == 0) and np.any(full.v[0])
    cd = run_complex_direct(problem, 3)
    assert not np.any(cd.p[0]) and not np.any(cd.v[0])


def test_triangularity(problem):
    # harmonic m only depends on lower harmonics
    a = run_complex_direct(problem, 5)
    b = run_complex_direct(problem, 3)
    for m in range(1, 4):
        assert np.array_equal(a.p[m], b.p[m])


def test_level_order_independent(problem):
    prev = run_real_linearized(problem, 3, v0_zero=True)
    x = solve_level_real(problem, prev, 4, v0_zero=True)
    y = solve_level_real(problem, prev, 4, v0_zero=True)
    assert np.array_equal(x.p, y.p)


def test_ode_residual_converged(problem):
    for st_ in (run_complex_direct(problem, 5), run_two_harmonic(problem)):
        assert ode_residual(problem, st_) <= 1e-8


def test_real_ode_residual_after_polish(coarse_mesh):
    # fixed point of the real scheme satisfies the full real ODE balance
    pr = make_problem(coarse_mesh, a=10.0)
    st_ = run_real_linearized(pr, 4, polish=8)
    assert ode_residual(pr, st_) <= 1e-8


def test_contraction_small_amplitude(coarse_mesh):
    # the bubble series contracts only while |v_1| stays well below v0
    pr = make_problem(coarse_mesh, a=10.0)
    st_ = run_real_linearized(pr, 6, polish=4)
    changes = [lv["change_p"] for lv in st_.levels]
    assert all(b < a for a, b in zip(changes[2:], changes[3:]))


def test_divergence_guard(coarse_mesh):
    pr = make_problem(coarse_mesh, a=1e5)
    with pytest.raises(DivergenceError):
        run_real_linearized(pr, 6)


def test_nonfinite_source_rejected(coarse_mesh):
    with pytest.raises(ValueError):
        SourceHarmonics({1: np.full(coarse_mesh.n_nodes, np.nan)})
    with pytest.raises(ValueError):
        SourceHarmonics({0: np.zeros(coarse_mesh.n_nodes)})


def test_stack_validation():
    with pytest.raises(ValueError):
        HarmonicStack(1.0, np.zeros((2, 3)), np.zeros((2, 3)), "bogus")
    st_ = HarmonicStack.zeros(1.0, 4, "complex-direct", 2)
    assert st_.N == 2 and st_.padded(4).p.shape == (5, 4)
    with pytest.raises(ValueError):
        st_.padded(1)


def test_amplitude_homogeneity(coarse_mesh):
    # p_m is homogeneous of degree m in the source amplitude
    a = run_complex_direct(make_problem(coarse_mesh, a=1e3), 4)
    b = run_complex_direct(make_problem(coarse_mesh, a=1e4), 4)
    for m in range(1, 5):
        np.testing.assert_allclose(b.p[m], 10.0**m * a.p[m], rtol=1e-9, atol=1e-12 * abs(b.p[m]).max())


def test_nodal_density_matches_constant(coarse_mesh):
    pr_c = make_problem(coarse_mesh)
    pr_n = make_problem(coarse_mesh, n0=np.full(coarse_mesh.n_nodes, 1e12))
    a, b = run_complex_direct(pr_c, 3), run_complex_direct(pr_n, 3)
    for m in range(1, 4):
        assert np.linalg.norm(a.p[m] - b.p[m]) <= 1e-10 * np.linalg.norm(a.p[m])
