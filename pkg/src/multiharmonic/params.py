"""Physical parameters of the bubbly medium and the harmonic coefficients.

Everything is in SI units. ``n0`` may be a scalar or a nodal array; every
coefficient function evaluates pointwise and returns an array of the same
shape when ``n0`` is an array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "SimulationParams",
    "DerivedConstants",
    "derive_constants",
    "alpha_m",
    "frak_coeffs",
    "effective_two_harmonic",
    "gas_volume_fraction",
    "N0_UNITS",
]

# Conversion factors to bubbles per cubic metre.
N0_UNITS = {"1/m3": 1.0, "1/cm3": 1e6, "1/mL": 1e6, "1/L": 1e3}


@dataclass(frozen=True)
class SimulationParams:
    """Physical constants of the Westervelt / bubble-volume system.

    Attributes
    ----------
    c, b, rho0, beta_a
        Speed of sound [m/s], sound diffusivity [m^2/s], mixture density
        [kg/m^3] and the nonlinearity parameter [-].
    R0, n0, P0, kappa, nu
        Bubble equilibrium radius [m], number density [1/m^3] (scalar or
        nodal field), ambient pressure [Pa], adiabatic exponent [-] and
        kinematic viscosity [m^2/s].
    beta_bc, gamma_bc
        Coefficients of the absorbing boundary condition
        ``beta p_t + gamma p + dp/dn = 0``.
    omega
        Driving angular frequency [rad/s].
    """

    c: float = 1500.0
    b: float = 1e-3
    rho0: float = 1000.0
    beta_a: float = 3.5
    R0: float = 2e-6
    n0: float | np.ndarray = 1e12
    P0: float = 100.0
    kappa: float = 1.4
    nu: float = 8.9e-6
    beta_bc: float | None = None
    gamma_bc: float = 1.0
    omega: float | None = None

    def __post_init__(self):
        for name in ("c", "rho0", "R0", "P0", "kappa"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        # unset boundary coefficient / frequency resolve to 1/c and resonance
        if self.beta_bc is None:
            object.__setattr__(self, "beta_bc", 1.0 / self.c)
        if self.omega is None:
            object.__setattr__(self, "omega", natural_frequency(self.kappa, self.P0, self.rho0, self.R0))
        for name in ("c", "b", "rho0", "R0", "P0", "beta_bc", "gamma_bc", "omega"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not (np.isfinite(self.nu) and self.nu >= 0):
            raise ValueError(f"nu must be non-negative, got {self.nu!r}")
        n0 = np.asarray(self.n0, dtype=float)
        if not np.all(np.isfinite(n0)) or np.any(n0 < 0):
            raise ValueError("n0 must be finite and non-negative pointwise")

    @classmethod
    def contrast_imaging(cls, **overrides) -> "SimulationParams":
        """Default contrast-imaging parameters, driven at the bubble resonance.

        ``omega`` defaults to the natural frequency and ``beta_bc`` to
        ``1/c`` unless given explicitly.
        """
        return cls(**overrides)

    def with_(self, **changes) -> "SimulationParams":
        return replace(self, **changes)

    @property
    def bubble_free(self) -> bool:
        return bool(np.all(np.asarray(self.n0) == 0))


def natural_frequency(kappa, P0, rho0, R0):
    radicand = 3.0 * kappa * P0 / (rho0 * R0**2)
    if not radicand > 0:
        raise ValueError(f"natural frequency radicand must be positive, got {radicand!r}")
    return math.sqrt(radicand)


@dataclass(frozen=True)
class DerivedConstants:
    """Equilibrium-derived coefficients of the bubble volume ODE."""

    omega0: float
    delta: float
    v0: float
    mu: float
    zeta: float
    xi: float
    eta: float


def derive_constants(params: SimulationParams) -> DerivedConstants:
    """Evaluate natural frequency, damping and ODE coefficients."""
    omega0 = natural_frequency(params.kappa, params.P0, params.rho0, params.R0)
    v0 = 4.0 * math.pi / 3.0 * params.R0**3
    return DerivedConstants(
        omega0=omega0,
        delta=4.0 * params.nu / (omega0 * params.R0**2),
        v0=v0,
        mu=4.0 * math.pi * params.R0 / params.rho0,
        zeta=(params.kappa + 1.0) * omega0**2 / (2.0 * v0),
        xi=1.0 / (6.0 * v0),
        eta=params.beta_a / (params.rho0 * params.c**2),
    )


def alpha_m(m: int, omega: float, dc: DerivedConstants) -> complex:
    """Transfer coefficient ``1/(-m^2 w^2 + i m delta w0 w + w0^2)``."""
    if m < 1:
        raise ValueError(f"alpha_m needs m >= 1, got {m}")
    den = complex(dc.omega0**2 - (m * omega) ** 2, m * dc.delta * dc.omega0 * omega)
    if den == 0:
        raise ZeroDivisionError(f"alpha_{m} is singular (undamped resonance)")
    return 1.0 / den


def frak_coeffs(m: int, omega: float, params: SimulationParams, dc: DerivedConstants):
    """Bubble-induced wavenumber shift and dissipation of harmonic ``m``.

    Returns ``(a, b)`` with the Helmholtz operator reading
    ``-(1 + i w m b/c^2) Lap u - (k^2 + a) u + i b u``.
    """
    if m < 1:
        raise ValueError(f"frak_coeffs needs m >= 1, got {m}")
    mw = m * omega
    detune = dc.omega0**2 - mw**2
    damp = m * dc.delta * dc.omega0 * omega
    den = detune**2 + damp**2
    scale = dc.mu * params.rho0 * np.asarray(params.n0, dtype=float)
    a = scale * mw**2 * detune / den
    b = scale * mw**3 * dc.delta * dc.omega0 / den
    if np.ndim(a) == 0:
        return float(a), float(b)
    return a, b


def effective_two_harmonic(params: SimulationParams, dc: DerivedConstants):
    """Effective speeds of sound for m = 1, 2 and the bubble nonlinearity.

    Returns ``(c_tilde_1, c_tilde_2, beta_tilde)``, complex scalars (or
    arrays for a nodal ``n0``), from ``1/c_m^2 = 1/c^2 + rho0 n0 mu alpha_m``.
    """
    omega = params.omega
    n0 = np.asarray(params.n0, dtype=float)
    a1 = alpha_m(1, omega, dc)
    a2 = alpha_m(2, omega, dc)
    speeds = []
    for am in (a1, a2):
        inv_c2 = 1.0 / params.c**2 + params.rho0 * n0 * dc.mu * am
        if np.any(inv_c2 == 0):
            raise ZeroDivisionError("effective wave speed is unbounded")
        speeds.append(1.0 / np.sqrt(inv_c2 + 0j))
    beta_tilde = (params.c**4 * params.rho0**2 * n0 * (dc.zeta - 3.0 * dc.xi * omega**2)
                  * dc.mu**2 * a1**2 * a2)
    if n0.ndim == 0:
        return complex(speeds[0]), complex(speeds[1]), complex(beta_tilde)
    return speeds[0], speeds[1], beta_tilde


def gas_volume_fraction(params: SimulationParams, dc: DerivedConstants):
    """Gas volume fraction ``v0 * n0``; should stay well below one."""
    frac = dc.v0 * np.asarray(params.n0, dtype=float)
    return float(frac) if frac.ndim == 0 else frac
