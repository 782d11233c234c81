import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiharmonic.params import (N0_UNITS, SimulationParams, alpha_m, derive_constants,
                                  effective_two_harmonic, frak_coeffs, gas_volume_fraction)


def test_default_derived_values(dc):
    assert dc.omega0 == pytest.approx(3.2404e5, rel=1e-4)
    assert dc.delta == pytest.approx(27.47, rel=1e-3)
    assert dc.v0 == pytest.approx(3.351e-17, rel=1e-3)
    assert dc.mu == pytest.approx(2.513e-8, rel=1e-3)


def test_derived_formulas_recomputed(base_params, dc):
    p = base_params
    w0 = math.sqrt(3 * p.kappa * p.P0 / (p.rho0 * p.R0**2))
    v0 = 4 * math.pi * p.R0**3 / 3
    assert dc.omega0 == w0
    assert dc.delta == 4 * p.nu / (w0 * p.R0**2)
    assert dc.zeta == (p.kappa + 1) * w0**2 / (2 * v0)
    assert dc.xi == 1 / (6 * v0)
    assert dc.eta == p.beta_a / (p.rho0 * p.c**2)
    assert derive_constants(p) == dc


def test_defaults_resolve_frequency_and_boundary(base_params, dc):
    assert base_params.omega == dc.omega0
    assert base_params.beta_bc == 1 / base_params.c
    assert SimulationParams.contrast_imaging(n0=0.0).bubble_free


def test_inviscid_delta_zero():
    assert derive_constants(SimulationParams(nu=0.0)).delta == 0.0


@pytest.mark.parametrize("field,value", [("c", 0.0), ("b", -1.0), ("R0", 0.0), ("nu", -1e-6),
                                         ("gamma_bc", 0.0), ("omega", -1.0)])
def test_invalid_params(field, value):
    with pytest.raises(ValueError):
        SimulationParams(**{field: value})


def test_negative_nodal_density_rejected():
    with pytest.raises(ValueError):
        SimulationParams(n0=np.array([1.0, -1.0]))


def test_alpha_at_resonance(dc):
    a1 = alpha_m(1, dc.omega0, dc)
    assert a1 == pytest.approx(-1j / (dc.delta * dc.omega0**2), rel=1e-12)
    assert abs(a1.imag) == pytest.approx(3.468e-13, rel=1e-3)


def test_alpha_static_limit(dc):
    assert alpha_m(3, 1e-6, dc) == pytest.approx(1 / dc.omega0**2, rel=1e-9)


def test_alpha_errors(dc):
    with pytest.raises(ValueError):
        alpha_m(0, 1.0, dc)
    undamped = derive_constants(SimulationParams(nu=0.0))
    with pytest.raises(ZeroDivisionError):
        alpha_m(1, undamped.omega0, undamped)


def test_frak_resonance(base_params, dc):
    a, b = frak_coeffs(1, dc.omega0, base_params, dc)
    assert a == pytest.approx(0.0, abs=1e-9 * b)
    assert b == pytest.approx(dc.mu * base_params.rho0 * base_params.n0 / dc.delta, rel=1e-12)
    assert b == pytest.approx(9.15e5, rel=1e-3)


def test_frak_bubble_free(dc):
    assert frak_coeffs(2, dc.omega0, SimulationParams(n0=0.0), dc) == (0.0, 0.0)


def test_frak_nodal_density(base_params, dc):
    n0 = np.array([0.0, 1e12, 2e12])
    a, b = frak_coeffs(2, dc.omega0, base_params.with_(n0=n0), dc)
    a1, b1 = frak_coeffs(2, dc.omega0, base_params, dc)
    np.testing.assert_allclose(b, [0.0, b1, 2 * b1], rtol=1e-14)
    np.testing.assert_allclose(a, [0.0, a1, 2 * a1], rtol=1e-14)


@given(m=st.integers(1, 12), ratio=st.floats(0.05, 4.0))
def test_alpha_denominator_bound(m, ratio, ):
    p = SimulationParams()
    dc = derive_constants(p)
    w = ratio * dc.omega0
    assert 1 / abs(alpha_m(m, w, dc)) >= m * dc.delta * dc.omega0 * w * (1 - 1e-12)


@given(m=st.integers(1, 12), ratio=st.floats(0.05, 4.0))
def test_frak_signs(m, ratio):
    p = SimulationParams()
    dc = derive_constants(p)
    w = ratio * dc.omega0
    a, b = frak_coeffs(m, w, p, dc)
    assert b > 0
    detune = dc.omega0**2 - (m * w) ** 2
    if abs(detune) > 1e-9 * dc.omega0**2:
        assert np.sign(a) == np.sign(detune)


@given(m=st.integers(1, 8), ratio=st.floats(0.1, 3.0))
def test_frak_matches_alpha(m, ratio):
    # a - i b = rho0 n0 mu m^2 w^2 alpha_m
    p = SimulationParams()
    dc = derive_constants(p)
    w = ratio * dc.omega0
    a, b = frak_coeffs(m, w, p, dc)
    ref = p.rho0 * p.n0 * dc.mu * (m * w) ** 2 * alpha_m(m, w, dc)
    assert complex(a, -b) == pytest.approx(ref, rel=1e-12)


def test_effective_two_harmonic(base_params, dc):
    c1, c2, bt = effective_two_harmonic(base_params, dc)
    assert c1.imag != 0
    # the attenuating branch: k_eff^2 = w^2/c1^2 has negative imaginary part (i b damping)
    assert ((base_params.omega / c1) ** 2).imag < 0
    c1f, c2f, btf = effective_two_harmonic(base_params.with_(n0=0.0), dc)
    assert c1f == pytest.approx(base_params.c) and c2f == pytest.approx(base_params.c) and btf == 0


def test_beta_tilde_vanishes_when_ode_nonlinearity_cancels(base_params, dc):
    from dataclasses import replace
    dc3 = replace(dc, zeta=3 * dc.xi * base_params.omega**2)
    assert effective_two_harmonic(base_params, dc3)[2] == 0


def test_gas_volume_fraction(base_params, dc):
    assert gas_volume_fraction(base_params, dc) == pytest.approx(3.351e-5, rel=1e-3)
    assert gas_volume_fraction(base_params.with_(n0=0.0), dc) == 0
    assert gas_volume_fraction(base_params.with_(n0=1 / dc.v0), dc) == pytest.approx(1.0)


def test_units_table():
    assert N0_UNITS["1/mL"] == 1e6 and N0_UNITS["1/m3"] == 1.0
