"""P1 finite-element assembly for the harmonic Helmholtz problems.

All element integrals are exact for piecewise-linear data: stiffness and
mass by their closed forms, the weighted mass ``int w phi_i phi_j`` for a
nodal (P1) weight by the barycentric moment formula, and the boundary mass
by the 1D linear-element formula.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .params import DerivedConstants, SimulationParams, frak_coeffs

__all__ = [
    "AssembledForms",
    "HelmholtzSystem",
    "DegenerateElementError",
    "element_stiffness",
    "element_mass",
    "assemble_forms",
    "weighted_mass",
    "assemble_helmholtz",
    "helmholtz_coefficients",
    "assemble_source",
    "monopole",
]

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class DegenerateElementError(ValueError):
    pass


def _geometry(mesh: Mesh):
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    # gradients of barycentric coordinates times 2A
    bx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    by = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (bx[:, 0] * by[:, 1] - bx[:, 1] * by[:, 0])
    if np.any(area < 1e-14 * mesh.scale() ** 2):
        bad = int(np.argmin(area))
        raise DegenerateElementError(f"triangle {bad} is degenerate (area {area[bad]:.3e})")
    return area, bx, by


def element_stiffness(coords) -> np.ndarray:
    """Stiffness matrix of one P1 triangle with vertex ``coords`` (3, 2)."""
    mesh = Mesh(np.asarray(coords, float), np.array([[0, 1, 2]]), np.empty((0, 2), int))
    area, bx, by = _geometry(mesh)
    return ((bx[0, :, None] * bx[0, None, :] + by[0, :, None] * by[0, None, :])
            / (4.0 * area[0]))


def element_mass(coords) -> np.ndarray:
    mesh = Mesh(np.asarray(coords, float), np.array([[0, 1, 2]]), np.empty((0, 2), int))
    area, _, _ = _geometry(mesh)
    return area[0] * _MASS_REF


def _scatter(mesh, local, n=None):
    n = mesh.n_nodes if n is None else n
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def weighted_mass(mesh: Mesh, weight) -> sp.csr_matrix:
    """Assemble ``int w phi_i phi_j`` for a nodal weight ``w`` (real or complex).

    Uses ``int l1^a l2^b l3^c = 2A a! b! c! / (a+b+c+2)!`` so the result is
    exact for the piecewise-linear interpolant of ``w``.
    """
    area, _, _ = _geometry(mesh)
    w = np.broadcast_to(np.asarray(weight), (mesh.n_nodes,))[mesh.triangles]  # (t, 3)
    wsum = w.sum(axis=1)
    local = np.empty((mesh.n_triangles, 3, 3), dtype=np.result_type(w, float))
    for i in range(3):
        for j in range(3):
            if i == j:
                # A/30 * (3 w_i + w_j + w_k)
                local[:, i, i] = area * (wsum + 2.0 * w[:, i]) / 30.0
            else:
                # A/60 * (2 w_i + 2 w_j + w_k)
                local[:, i, j] = area * (wsum + w[:, i] + w[:, j]) / 60.0
    return _scatter(mesh, local)


@dataclass(frozen=True, eq=False)
class AssembledForms:
    """Real symmetric P1 matrices on one mesh.

    ``M_w`` is the mass matrix weighted by the nodal bubble density (or
    ``None`` when the density is spatially constant).
    """

    mesh: Mesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    M_w: sp.csr_matrix | None = None


def assemble_forms(mesh: Mesh, weight=None) -> AssembledForms:
    """Stiffness, mass, boundary mass and (optionally) weighted mass."""
    area, bx, by = _geometry(mesh)
    k_loc = (bx[:, :, None] * bx[:, None, :] + by[:, :, None] * by[:, None, :]) / (4.0 * area[:, None, None])
    m_loc = area[:, None, None] * _MASS_REF[None]
    K = _scatter(mesh, k_loc)
    M = _scatter(mesh, m_loc)

    e = mesh.boundary_edges
    d = mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]]
    length = np.hypot(d[:, 0], d[:, 1])
    b_loc = length[:, None, None] * (np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)[None]
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    B = sp.coo_matrix((b_loc.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    B.sum_duplicates()
    B.sort_indices()

    M_w = None if weight is None else weighted_mass(mesh, weight)
    return AssembledForms(mesh, K, M, B, M_w)


@dataclass(frozen=True, eq=False)
class HelmholtzSystem:
    A: sp.csr_matrix
    m: int
    omega: float
    rhs: np.ndarray | None = None


def helmholtz_coefficients(m: int, omega: float, params: SimulationParams):
    """Scalar factors of the harmonic-``m`` operator.

    Returns ``(s, k2, z)``: the strong-damping factor ``1 + i w m b / c^2``,
    the squared wavenumber and the boundary impedance ``i w m beta + gamma``.
    """
    s = 1.0 + 1j * omega * m * params.b / params.c**2
    k2 = (m * omega / params.c) ** 2
    z = 1j * omega * m * params.beta_bc + params.gamma_bc
    return s, k2, z


def _bubble_mass(forms, params):
    """Mass matrix weighted by n0, and the per-unit-density factor for frak_coeffs."""
    if np.ndim(params.n0) == 0:
        return forms.M, float(params.n0)
    if forms.M_w is None:
        raise ValueError("nodal n0 requires forms assembled with the n0 weight")
    return forms.M_w, 1.0


def assemble_helmholtz(m: int, omega: float, params: SimulationParams, dc: DerivedConstants,
                       forms: AssembledForms) -> HelmholtzSystem:
    """System matrix ``s K - k^2 M - M_a + i M_b + s z B`` for harmonic ``m``."""
    s, k2, z = helmholtz_coefficients(m, omega, params)
    A = s * forms.K - k2 * forms.M + s * z * forms.B
    if not params.bubble_free:
        Mn, n0_scale = _bubble_mass(forms, params)
        # frak coefficients are linear in n0: evaluate per unit density
        fa, fb = frak_coeffs(m, omega, params.with_(n0=1.0), dc)
        A = A + (n0_scale * (-fa + 1j * fb)) * Mn
    A = sp.csr_matrix(A, dtype=complex)
    A.sort_indices()
    return HelmholtzSystem(A, m, omega)


def monopole(points, a: float, r_delta: float, x0=(0.0, 0.0)):
    """Raised-cosine monopole of amplitude ``a/(2 r_delta)`` supported on ``|x-x0| <= 2 r_delta``."""
    r = np.hypot(*(np.asarray(points, float) - np.asarray(x0, float)).T)
    val = a / (4.0 * r_delta) * (1.0 + np.cos(np.pi * r / (2.0 * r_delta)))
    return np.where(r <= 2.0 * r_delta, val, 0.0)


def assemble_source(mesh_or_forms, profile, scale: complex = 1.0) -> np.ndarray:
    """Load vector ``int f phi_i`` for the nodal interpolant of ``profile``.

    ``profile`` is either a callable on node coordinates or a nodal array.
    """
    forms = (mesh_or_forms if isinstance(mesh_or_forms, AssembledForms)
             else assemble_forms(mesh_or_forms))
    vals = profile(forms.mesh.nodes) if callable(profile) else np.asarray(profile)
    return forms.M @ (scale * vals)
