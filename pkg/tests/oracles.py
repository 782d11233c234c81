"""Time-domain multiply-and-project oracles for the quadratic couplings."""
import numpy as np


def _samples(N):
    n = 4 * N + 1
    return n, 2 * np.pi * np.arange(n) / n


def real_stack_signal(u, theta):
    """u(theta) and its theta-derivatives from two-sided coefficients u_0..u_N."""
    N = len(u) - 1
    m = np.arange(-N, N + 1)
    full = np.concatenate([np.conj(u[:0:-1]), u])
    ph = np.exp(1j * np.outer(theta, m))
    return ph @ full, ph @ (1j * m * full), ph @ (-(m**2) * full)


def complex_stack_signal(u, theta):
    m = np.arange(len(u))
    ph = np.exp(1j * np.outer(theta, m))
    return ph @ u, ph @ (1j * m * u), ph @ (-(m**2) * u)


def project(signal, theta, m):
    return np.exp(-1j * m * theta) @ signal / len(theta)


def oracle(u, m, ode=None, real=True, omega=1.0):
    """Harmonic m of u^2 (ode=None) or of zeta u^2 + xi (2 u u_tt + u_t^2)."""
    N = len(u) - 1
    n, theta = _samples(N)
    sig = real_stack_signal if real else complex_stack_signal
    x, xt, xtt = sig(np.asarray(u), theta)
    if ode is None:
        w = x * x
    else:
        zeta, xi_w2 = ode
        # derivatives in t carry omega; xi w^2 absorbs omega^2
        w = zeta * x * x + xi_w2 * (2 * x * xtt + xt * xt)
    return project(w, theta, m)
