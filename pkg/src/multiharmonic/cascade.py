"""Multiharmonic cascades for the coupled pressure / bubble-volume system.

Harmonic ``m`` of the pressure solves the Helmholtz problem

    -(1 + i w m b/c^2) Lap p_m - (k^2 + a_m) p_m + i b_m p_m = -k^2 h_m - f_pv
    (i w m beta + gamma) p_m + dp_m/dn = 0

and the volume harmonic follows algebraically, ``v_m = alpha_m (f_v - mu p_m)``.
The quadratic terms ``f_p`` (from ``eta (p^2)_tt``) and ``f_v`` (from the
ODE right-hand side) enter through ``f_pv = alpha_m m^2 w^2 rho0 n0 f_v
+ k^2 eta f_p``.

Two harmonic conventions are used:

* complex formulations: ``p(t) = sum_{m>=0} p_m e^{i m w t}`` (half
  spectrum, sum-frequency couplings only);
* real formulations: ``p_m`` are the two-sided Fourier coefficients of the
  real signal, ``p(t) = sum_{|m|<=N} p_m e^{i m w t}`` with
  ``p_{-m} = conj(p_m)``. The source is read the same way. With this
  normalization the sum-frequency couplings coincide with the complex ones
  and the two formulations differ only by the difference-frequency terms.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .fem import (AssembledForms, assemble_forms, assemble_helmholtz, helmholtz_coefficients,
                  monopole, weighted_mass)
from .mesh import Mesh
from .params import (DerivedConstants, SimulationParams, alpha_m, derive_constants,
                     effective_two_harmonic)
from .sparse_linalg import factor, relative_residual

__all__ = [
    "FORMULATIONS",
    "DivergenceError",
    "HarmonicStack",
    "SourceHarmonics",
    "HarmonicProblem",
    "quadratic_convolutions_real",
    "quadratic_convolutions_complex",
    "eliminate_volume",
    "solve_level_real",
    "solve_level_complex",
    "run_real_linearized",
    "run_complex_direct",
    "run_complex_linearized",
    "run_two_harmonic",
    "ode_residual",
]

log = logging.getLogger(__name__)

FORMULATIONS = ("real-full", "real-v0zero", "complex-direct", "complex-linearized", "two-harmonic")
REAL_FORMULATIONS = ("real-full", "real-v0zero")

#: Nodal magnitude above which a cascade is declared divergent.
BLOWUP_THRESHOLD = 1e12


class DivergenceError(ArithmeticError):
    pass


@dataclass(eq=False)
class HarmonicStack:
    """Harmonics ``m = 0..N`` of pressure and volume, one row per ``m``."""

    omega: float
    p: np.ndarray
    v: np.ndarray
    formulation: str
    levels: list = field(default_factory=list)

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.p.shape != self.v.shape:
            raise ValueError("pressure and volume stacks differ in shape")

    @property
    def N(self) -> int:
        return self.p.shape[0] - 1

    @property
    def is_real(self) -> bool:
        return self.formulation in REAL_FORMULATIONS

    @classmethod
    def zeros(cls, omega, n_nodes, formulation, N=0):
        z = np.zeros((N + 1, n_nodes), dtype=complex)
        return cls(omega, z, z.copy(), formulation)

    def padded(self, N: int) -> "HarmonicStack":
        """Copy with harmonics above the current cutoff set to zero."""
        if N < self.N:
            raise ValueError("padding cannot truncate")
        extra = np.zeros((N - self.N, self.p.shape[1]), dtype=complex)
        return HarmonicStack(self.omega, np.vstack([self.p, extra]), np.vstack([self.v, extra]),
                             self.formulation)


@dataclass(eq=False)
class SourceHarmonics:
    """Harmonics ``h_m`` (m >= 1) of the source potential ``g``, nodal values."""

    h: dict

    def __post_init__(self):
        for m, field_ in self.h.items():
            if m < 1:
                raise ValueError("source harmonics start at m = 1")
            if not np.all(np.isfinite(field_)):
                raise ValueError(f"source harmonic {m} has non-finite entries")

    def get(self, m, n_nodes):
        return np.asarray(self.h.get(m, np.zeros(n_nodes)), dtype=complex)

    @classmethod
    def monopole(cls, mesh: Mesh, a: float, r_delta: float = 0.004, x0=(0.0, 0.0)):
        return cls({1: monopole(mesh.nodes, a, r_delta, x0).astype(complex)})


# -- quadratic couplings --------------------------------------------------------

def _pair_weight(ode, j1, j2):
    if ode is None:
        return 1.0
    zeta, xi_w2 = ode
    return zeta - xi_w2 * (j1 * j1 + j1 * j2 + j2 * j2)


def quadratic_convolutions_real(u, m: int, ode=None):
    """Harmonic ``m`` of a quadratic term of the real signal built from ``u``.

    ``u`` holds two-sided coefficients ``u_0..u_N`` (``u_0`` real). With
    ``ode=None`` this is the projection of ``u^2``; with ``ode=(zeta,
    xi*w^2)`` it is the projection of ``zeta u^2 + xi (2 u u_tt + u_t^2)``.
    The result is the sum-frequency part ``sum_l w u_l u_{m-l}`` plus the
    difference-frequency part ``2 sum_k w conj(u_{(k-m)/2}) u_{(k+m)/2}``
    over ``k = m+2, m+4, ..., 2N-m``.
    """
    u = np.asarray(u)
    N = len(u) - 1
    if not 0 <= m <= N:
        raise IndexError(f"harmonic {m} outside 0..{N}")
    out = np.zeros(u.shape[1:], dtype=complex)
    for l in range(m + 1):
        out += _pair_weight(ode, l, m - l) * u[l] * u[m - l]
    for k in range(m + 2, 2 * N - m + 1, 2):
        lo, hi = (k - m) // 2, (k + m) // 2
        if ode is None:
            w = 1.0
        else:
            zeta, xi_w2 = ode
            w = zeta - xi_w2 * (k * k + 3 * m * m) / 4.0
        out += 2.0 * w * np.conj(u[lo]) * u[hi]
    if m == 0:
        # mean of a real signal; drop the rounding residue of conj(u) u
        out = out.real + 0j
    return out


def quadratic_convolutions_complex(u, m: int, ode=None):
    """Harmonic ``m`` of a quadratic term of the half-spectrum signal ``sum u_m e^{imwt}``.

    Only sum-frequency pairs contribute; the ODE weight is
    ``zeta - xi w^2 (m-l)(2m-l)``.
    """
    u = np.asarray(u)
    N = len(u) - 1
    if not 0 <= m <= N:
        raise IndexError(f"harmonic {m} outside 0..{N}")
    out = np.zeros(u.shape[1:], dtype=complex)
    for l in range(m + 1):
        if ode is None:
            w = 1.0
        else:
            zeta, xi_w2 = ode
            w = zeta - xi_w2 * (m - l) * (2 * m - l)
        out += w * u[l] * u[m - l]
    return out


def eliminate_volume(m: int, p_m, f_v, alpha, mu):
    """Volume harmonic from the ODE balance ``v_m / alpha_m + mu p_m = f_v``."""
    if m < 1:
        raise ValueError("volume elimination needs m >= 1")
    return -alpha * mu * np.asarray(p_m) + alpha * np.asarray(f_v)


# -- problem setup ----------------------------------------------------------------

class HarmonicProblem:
    """Mesh, parameters and sources, with one cached LU factorization per harmonic."""

    def __init__(self, mesh: Mesh, params: SimulationParams, sources: SourceHarmonics,
                 forms: AssembledForms | None = None, blowup: float = BLOWUP_THRESHOLD,
                 keep_factors: bool = True):
        self.mesh = mesh
        self.params = params
        self.dc: DerivedConstants = derive_constants(params)
        self.sources = sources
        n0 = params.n0
        if forms is None:
            forms = assemble_forms(mesh, None if np.ndim(n0) == 0 else n0)
        self.forms = forms
        self.blowup = blowup
        # dropping factors trades refactorization for memory on very fine meshes
        self.keep_factors = keep_factors
        self._systems = {}
        self.stats = {"factorizations": 0, "solves": 0, "max_residual": 0.0, "factor_time": 0.0}

    @property
    def omega(self):
        return self.params.omega

    @property
    def n_nodes(self):
        return self.mesh.n_nodes

    @property
    def ode_weights(self):
        return self.dc.zeta, self.dc.xi * self.omega**2

    def system(self, m):
        if m in self._systems:
            return self._systems[m]
        t0 = time.perf_counter()
        sysm = assemble_helmholtz(m, self.omega, self.params, self.dc, self.forms)
        out = (sysm, factor(sysm.A))
        self.stats["factorizations"] += 1
        self.stats["factor_time"] += time.perf_counter() - t0
        if self.keep_factors:
            self._systems[m] = out
        return out

    def solve_nodal(self, m, f_nodal, check=True):
        """Solve harmonic ``m`` with load ``int f phi_i`` for the nodal field ``f``."""
        sysm, lu = self.system(m)
        rhs = self.forms.M @ f_nodal
        x = lu.solve(rhs)
        self.stats["solves"] += 1
        if check and np.any(rhs):
            res = relative_residual(sysm.A, x, rhs)
            self.stats["max_residual"] = max(self.stats["max_residual"], res)
        return x

    def solve_harmonic(self, m, f_p, f_v):
        """Pressure and volume harmonic ``m`` given the quadratic source terms."""
        p = self.params
        omega = self.omega
        am = alpha_m(m, omega, self.dc)
        _, k2, _ = helmholtz_coefficients(m, omega, p)
        h_m = self.sources.get(m, self.n_nodes)
        f_pv = am * (m * omega) ** 2 * p.rho0 * np.asarray(p.n0) * f_v + k2 * self.dc.eta * f_p
        p_m = self.solve_nodal(m, -k2 * h_m - f_pv)
        v_m = eliminate_volume(m, p_m, f_v, am, self.dc.mu)
        return p_m, v_m

    def guard(self, stack: HarmonicStack):
        for name, arr in (("p", stack.p), ("v", stack.v)):
            if not np.all(np.isfinite(arr)):
                raise DivergenceError(f"non-finite {name} harmonics at N = {stack.N}")
        peak = np.abs(stack.p).max(initial=0.0)
        if peak > self.blowup:
            raise DivergenceError(f"pressure harmonics reached {peak:.3e} at N = {stack.N}")


def _change(a: HarmonicStack, b: HarmonicStack, forms):
    """Mass-matrix norm of the difference of two stacks (zero-padded)."""
    N = max(a.N, b.N)
    a, b = a.padded(N), b.padded(N)
    dp, dv = a.p - b.p, a.v - b.v
    Mp = np.sqrt(abs(np.einsum("mi,mi->", dp.conj(), (forms.M @ dp.T).T)))
    Mv = np.sqrt(abs(np.einsum("mi,mi->", dv.conj(), (forms.M @ dv.T).T)))
    return float(Mp), float(Mv)


# -- real-valued cascades ------------------------------------------------------------

def solve_level_real(problem: HarmonicProblem, prev: HarmonicStack, N: int,
                     v0_zero: bool = False) -> HarmonicStack:
    """One level of the linearized real cascade: level ``N`` from level-(N-1) data."""
    form = "real-v0zero" if v0_zero else "real-full"
    old = prev.padded(max(N, prev.N))
    ode = problem.ode_weights
    out = HarmonicStack.zeros(problem.omega, problem.n_nodes, form, N)
    if not v0_zero:
        out.v[0] = quadratic_convolutions_real(old.v, 0, ode) / problem.dc.omega0**2
    for m in range(1, N + 1):
        f_p = quadratic_convolutions_real(old.p, m)
        f_v = quadratic_convolutions_real(old.v, m, ode)
        out.p[m], out.v[m] = problem.solve_harmonic(m, f_p, f_v)
    problem.guard(out)
    return out


def run_real_linearized(problem: HarmonicProblem, n_max: int, v0_zero: bool = False,
                        polish: int = 0) -> HarmonicStack:
    """Linearized multilevel method on real fields, from ``p^0 = v^0 = 0``.

    Runs levels ``N = 1..n_max``; ``polish`` extra fixed-point sweeps at
    ``N = n_max`` are optional.
    """
    form = "real-v0zero" if v0_zero else "real-full"
    stack = HarmonicStack.zeros(problem.omega, problem.n_nodes, form)
    levels = []
    for N in list(range(1, n_max + 1)) + [n_max] * polish:
        new = solve_level_real(problem, stack, N, v0_zero)
        levels.append(_level_record(N, new, stack, problem))
        stack = new
    stack.levels = levels
    return stack


def _level_record(N, new, old, problem):
    dp, dv = _change(new, old, problem.forms)
    return {"N": N, "change_p": dp, "change_v": dv}


# -- complex-valued cascades -----------------------------------------------------------

def _log_zero_root(problem):
    if problem.dc.zeta != 0:
        log.debug("zeroth volume harmonic: taking root 0, rejecting omega0^2/zeta = %.3e",
                  problem.dc.omega0**2 / problem.dc.zeta)


def run_complex_direct(problem: HarmonicProblem, N: int) -> HarmonicStack:
    """Lower-triangular complex system solved by forward substitution in ``m``."""
    _log_zero_root(problem)
    stack = HarmonicStack.zeros(problem.omega, problem.n_nodes, "complex-direct", N)
    ode = problem.ode_weights
    for m in range(1, N + 1):
        f_p = quadratic_convolutions_complex(stack.p, m)
        f_v = quadratic_convolutions_complex(stack.v, m, ode)
        stack.p[m], stack.v[m] = problem.solve_harmonic(m, f_p, f_v)
    problem.guard(stack)
    return stack


def solve_level_complex(problem: HarmonicProblem, prev: HarmonicStack, N: int) -> HarmonicStack:
    old = prev.padded(max(N, prev.N))
    ode = problem.ode_weights
    out = HarmonicStack.zeros(problem.omega, problem.n_nodes, "complex-linearized", N)
    for m in range(1, N + 1):
        f_p = quadratic_convolutions_complex(old.p, m)
        f_v = quadratic_convolutions_complex(old.v, m, ode)
        out.p[m], out.v[m] = problem.solve_harmonic(m, f_p, f_v)
    problem.guard(out)
    return out


def run_complex_linearized(problem: HarmonicProblem, n_max: int) -> HarmonicStack:
    """Linearized multilevel method on complex fields, levels ``N = 1..n_max``."""
    _log_zero_root(problem)
    stack = HarmonicStack.zeros(problem.omega, problem.n_nodes, "complex-linearized")
    levels = []
    for N in range(1, n_max + 1):
        new = solve_level_complex(problem, stack, N)
        levels.append(_level_record(N, new, stack, problem))
        stack = new
    stack.levels = levels
    return stack


def run_two_harmonic(problem: HarmonicProblem) -> HarmonicStack:
    """Two-harmonic scheme written with effective wave speeds and nonlinearity.

    Solves ``(m^2 w^2 / c_m^2) p_m + (1 + i m b w / c^2) Lap p_m = rhs_m``
    weakly for m = 1, 2, then recovers ``v_1, v_2`` in closed form.
    """
    params, dc, forms, mesh = problem.params, problem.dc, problem.forms, problem.mesh
    omega = problem.omega
    c1, c2, beta_t = effective_two_harmonic(params, dc)
    a1, a2 = alpha_m(1, omega, dc), alpha_m(2, omega, dc)
    n = problem.n_nodes
    stack = HarmonicStack.zeros(omega, n, "two-harmonic", 2)
    h1, h2 = problem.sources.get(1, n), problem.sources.get(2, n)

    def matrix(m, c_eff):
        s, _, z = helmholtz_coefficients(m, omega, params)
        keff = (m * omega) ** 2 / np.asarray(c_eff) ** 2
        Meff = keff * forms.M if np.ndim(keff) == 0 else weighted_mass(mesh, keff)
        # weak form of -(keff p + s Lap p) with the impedance boundary condition
        return s * forms.K + s * z * forms.B - Meff

    for m, c_eff in ((1, c1), (2, c2)):
        A = matrix(m, c_eff)
        if m == 1:
            rhs_nodal = (omega**2 / params.c**2) * h1
        else:
            rhs_nodal = (4 * omega**2 / params.c**2) * h2 + (
                4 * omega**2 / (params.rho0 * params.c**4)) * (params.beta_a + beta_t) * stack.p[1] ** 2
        b = -(forms.M @ rhs_nodal)
        lu = factor(A)
        stack.p[m] = lu.solve(b)
        problem.stats["max_residual"] = max(problem.stats["max_residual"], relative_residual(A, stack.p[m], b))
    stack.v[1] = -a1 * dc.mu * stack.p[1]
    stack.v[2] = a2 * (-dc.mu * stack.p[2]
                       + (dc.zeta - 3 * dc.xi * omega**2) * a1**2 * dc.mu**2 * stack.p[1] ** 2)
    problem.guard(stack)
    return stack


# -- residuals ---------------------------------------------------------------------------

def ode_residual(problem: HarmonicProblem, stack: HarmonicStack) -> float:
    """Largest relative residual of the (non-linearized) ODE harmonic balance.

    For each ``m >= 1`` evaluates ``v_m/alpha_m + mu p_m - F_m(v)`` with the
    quadratic term ``F_m`` of the stack's own formulation, normalized by
    ``max |v_m/alpha_m|``; for real formulations with a free ``v_0`` the
    zeroth balance ``w0^2 v_0 - F_0(v)`` is included.
    """
    ode = problem.ode_weights
    conv = quadratic_convolutions_real if stack.is_real else quadratic_convolutions_complex
    worst = 0.0
    for m in range(1, stack.N + 1):
        lhs = stack.v[m] / alpha_m(m, problem.omega, problem.dc)
        r = lhs + problem.dc.mu * stack.p[m] - conv(stack.v, m, ode)
        scale = np.abs(lhs).max()
        if scale > 0:
            worst = max(worst, float(np.abs(r).max() / scale))
    if stack.formulation == "real-full" and np.abs(stack.v[0]).max() > 0:
        lhs = problem.dc.omega0**2 * stack.v[0]
        r = lhs - conv(stack.v, 0, ode)
        worst = max(worst, float(np.abs(r).max() / np.abs(lhs).max()))
    return worst
