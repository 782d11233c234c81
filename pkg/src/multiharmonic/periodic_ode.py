"""Time-periodic solutions of the bubble volume ODE at a single point.

Used as an independent check of the harmonic algebra. The linear oscillator

    v_tt + delta w0 v_t + w0^2 v = f(t)

is solved exactly by variation of parameters with closed-form fundamental
matrices; the nonlinear equation

    (1 - 2 xi v) v_tt = -delta w0 v_t - w0^2 v + zeta v^2 + xi v_t^2 - mu p(t)

by Newton shooting on the period map.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "OscillatorSpec",
    "PeriodicOrbit",
    "ShootingError",
    "InvertibilityError",
    "damping_case",
    "fundamental_matrix",
    "floquet_periodic",
    "fourier_coefficient",
    "shooting_periodic_nonlinear",
    "trig_interpolant",
]

log = logging.getLogger(__name__)

#: Relative half-width of the band treated as critically damped.
CRITICAL_BAND = 1e-8


class ShootingError(RuntimeError):
    pass


class InvertibilityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class OscillatorSpec:
    """Damped oscillator with T-periodic forcing.

    ``zeta``, ``xi`` and ``mu`` are only used by the nonlinear shooting
    solver; ``forcing`` is the right-hand side ``f`` of the linear problem.
    """

    delta: float
    omega0: float
    T: float
    forcing: Callable = lambda t: np.zeros_like(np.asarray(t, float))
    zeta: float = 0.0
    xi: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.delta * self.omega0 > 0:
            raise ValueError("delta * omega0 must be positive")
        if not self.T > 0:
            raise ValueError("period must be positive")

    @property
    def omega(self):
        return 2.0 * np.pi / self.T


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    t: np.ndarray
    v: np.ndarray
    v_t: np.ndarray
    T: float
    residual: float = 0.0
    iterations: int = 0

    def coefficient(self, m, two_sided=False):
        return fourier_coefficient(self.v, m, two_sided)


def damping_case(delta, omega0):
    """'overdamped', 'critical' or 'underdamped' (critical within a 1e-8 band)."""
    d = delta * omega0
    if abs(d - 2.0 * omega0) <= CRITICAL_BAND * 2.0 * omega0:
        return "critical"
    return "overdamped" if d > 2.0 * omega0 else "underdamped"


def fundamental_matrix(t, delta, omega0, case=None):
    """``X(t) = exp(t A)`` for ``A = [[0, 1], [-w0^2, -delta w0]]``, shape ``t.shape + (2, 2)``.

    ``case`` forces a branch; by default it is chosen with :func:`damping_case`.
    """
    t = np.asarray(t, dtype=float)
    case = case or damping_case(delta, omega0)
    d = delta * omega0
    X = np.empty(t.shape + (2, 2))
    if case == "overdamped":
        s = np.sqrt(d * d - 4.0 * omega0**2)
        r1, r2 = (-d + s) / 2.0, (-d - s) / 2.0
        e1, e2 = np.exp(r1 * t), np.exp(r2 * t)
        X[..., 0, 0] = (r1 * e2 - r2 * e1) / (r1 - r2)
        X[..., 0, 1] = (e1 - e2) / (r1 - r2)
        X[..., 1, 0] = r1 * r2 * (e2 - e1) / (r1 - r2)
        X[..., 1, 1] = (r1 * e1 - r2 * e2) / (r1 - r2)
    elif case == "critical":
        r = -d / 2.0
        e = np.exp(r * t)
        X[..., 0, 0] = e * (1.0 - r * t)
        X[..., 0, 1] = e * t
        X[..., 1, 0] = -e * r * r * t
        X[..., 1, 1] = e * (1.0 + r * t)
    elif case == "underdamped":
        sig = -d / 2.0
        beta = np.sqrt(omega0**2 - sig * sig)
        e, c, sn = np.exp(sig * t), np.cos(beta * t), np.sin(beta * t)
        X[..., 0, 0] = e * (c - sig / beta * sn)
        X[..., 0, 1] = e * sn / beta
        X[..., 1, 0] = -e * omega0**2 / beta * sn
        X[..., 1, 1] = e * (c + sig / beta * sn)
    else:
        raise ValueError(f"unknown damping case {case!r}")
    return X


def floquet_periodic(spec: OscillatorSpec, n: int = 4096, case=None) -> PeriodicOrbit:
    """Periodic solution of the linear forced oscillator on ``n`` uniform samples.

    The particular solution is accumulated interval by interval,
    ``W_{j+1} = X(dt) W_j + int_0^dt X(dt - s) F(t_j + s) ds``, which keeps
    every exponential decaying; then ``V(0) = (I - X(T))^{-1} W_n`` and
    ``V(t_j) = X(t_j) V(0) + W_j``. Interval integrals use composite Simpson
    with enough sub-steps to resolve the fastest decay rate.
    """
    if n < 2048:
        raise ValueError("use at least 2048 samples")
    T, d, w0 = spec.T, spec.delta * spec.omega0, spec.omega0
    dt = T / n
    # fastest eigenvalue magnitude bounded by d + w0 (covers all cases)
    lam = d + w0
    q = max(2, int(np.ceil(dt * lam / 0.01)))
    q += q % 2
    s = np.linspace(0.0, dt, q + 1)
    w = np.ones(q + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= (dt / q) / 3.0
    kern = fundamental_matrix(dt - s, spec.delta, w0, case)[:, :, 1]  # (q+1, 2)

    t = np.arange(n) * dt
    f = np.asarray(spec.forcing(t[:, None] + s[None, :]), dtype=float)  # (n, q+1)
    I = (f * w) @ kern  # (n, 2)

    Xd = fundamental_matrix(dt, spec.delta, w0, case)
    W = np.zeros((n + 1, 2))
    for j in range(n):
        W[j + 1] = Xd @ W[j] + I[j]
    XT = fundamental_matrix(T, spec.delta, w0, case)
    G = np.eye(2) - XT
    det = np.linalg.det(G)
    if abs(det) < 1e-14:
        raise np.linalg.LinAlgError(f"I - X(T) is singular (det {det:.3e})")
    V0 = np.linalg.solve(G, W[n])
    V = np.einsum("jab,b->ja", fundamental_matrix(t, spec.delta, w0, case), V0) + W[:n]
    scale = max(np.abs(V[:, 0]).max(), np.finfo(float).tiny)
    closure = abs(Xd @ V[-1] + I[-1] - V[0])[0] / scale  # v(T) vs v(0)
    return PeriodicOrbit(t, V[:, 0], V[:, 1], T, residual=float(closure))


def fourier_coefficient(samples, m: int, two_sided: bool = False):
    """Harmonic ``m`` of uniformly sampled periodic data (trapezoidal rule).

    By default returns ``a_m`` with ``u(t) = Re sum_m a_m e^{i m w t}``
    (``a_0`` the mean); ``two_sided=True`` gives ``c_m`` with
    ``u = sum_{|m|} c_m e^{i m w t}``.
    """
    u = np.asarray(samples)
    n = u.shape[0]
    j = np.arange(n)
    c = np.exp(-2j * np.pi * m * j / n) @ u / n
    if two_sided or m == 0:
        return c
    return 2.0 * c


def trig_interpolant(samples, T):
    """Trigonometric interpolant of uniformly sampled T-periodic data."""
    u = np.asarray(samples, dtype=float)
    n = u.size
    c = np.fft.rfft(u) / n
    ks = np.arange(c.size)
    wgt = np.full(c.size, 2.0)
    wgt[0] = 1.0
    if n % 2 == 0:
        wgt[-1] = 1.0

    def p(t):
        t = np.asarray(t, dtype=float)
        ph = np.exp(2j * np.pi * np.multiply.outer(t, ks) / T)
        return (ph @ (wgt * c)).real

    return p


def _rhs(spec, p):
    d, w0, zeta, xi, mu = spec.delta * spec.omega0, spec.omega0, spec.zeta, spec.xi, spec.mu

    def f(t, y):
        v, vt = y[0], y[1]
        den = 1.0 - 2.0 * xi * v
        if den < 1e-6:
            raise InvertibilityError(f"1 - 2 xi v = {den:.3e} at t = {t:.6e}")
        acc = (-d * vt - w0 * w0 * v + zeta * v * v + xi * vt * vt - mu * p(t)) / den
        # variational equations for the monodromy matrix
        da_dv = (-w0 * w0 + 2.0 * zeta * v) / den + 2.0 * xi * acc / den
        da_dvt = (-d + 2.0 * xi * vt) / den
        Phi = y[2:].reshape(2, 2)
        J = np.array([[0.0, 1.0], [da_dv, da_dvt]])
        return np.concatenate([[vt, acc], (J @ Phi).ravel()])

    return f


def shooting_periodic_nonlinear(spec: OscillatorSpec, p_signal, n: int = 4096,
                                tol: float = 1e-10, max_iter: int = 50) -> PeriodicOrbit:
    """Periodic orbit of the nonlinear volume ODE driven by the pressure ``p``.

    ``p_signal`` is a callable or ``n`` uniform samples over one period.
    Starts from the linear periodic solution for ``f = -mu p`` and applies
    Newton to ``phi_T(V0) - V0``, with the monodromy from the variational
    equations (DOP853, rtol 1e-12).
    """
    p = p_signal if callable(p_signal) else trig_interpolant(p_signal, spec.T)
    T = spec.T
    lin = OscillatorSpec(spec.delta, spec.omega0, T, lambda t: -spec.mu * p(t))
    guess = floquet_periodic(lin, n=max(n, 2048))
    V0 = np.array([guess.v[0], guess.v_t[0]])
    sv = max(np.abs(guess.v).max(), 1e-300)
    svt = max(np.abs(guess.v_t).max(), 1e-300)
    t_eval = np.arange(n) * (T / n)
    f = _rhs(spec, p)
    atol = np.array([sv, svt, 1.0, T, 1.0 / T, 1.0]) * 1e-16

    def flow(V, dense=False):
        y0 = np.concatenate([V, np.eye(2).ravel()])
        sol = solve_ivp(f, (0.0, T), y0, method="DOP853", rtol=1e-12, atol=atol,
                        t_eval=t_eval if dense else None)
        if not sol.success:
            raise ShootingError(sol.message)
        return sol

    if sv <= 1e-300:
        z = np.zeros(n)
        return PeriodicOrbit(t_eval, z, z.copy(), T)

    scale = np.array([sv, svt])
    for it in range(1, max_iter + 1):
        sol = flow(V0)
        yT = sol.y[:, -1]
        G = yT[:2] - V0
        res = float(np.max(np.abs(G) / scale))
        log.debug("shooting iteration %d: residual %.3e", it, res)
        if res <= tol:
            break
        J = yT[2:].reshape(2, 2) - np.eye(2)
        V0 = V0 - np.linalg.solve(J, G)
    else:
        raise ShootingError(f"no convergence after {max_iter} Newton steps (residual {res:.3e})")
    sol = flow(V0, dense=True)
    return PeriodicOrbit(t_eval, sol.y[0], sol.y[1], T, residual=res, iterations=it)
