"""Time reconstruction, norms, harmonic ratios and file output."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .cascade import HarmonicStack
from .mesh import Mesh

__all__ = [
    "Diagnostics",
    "reconstruct_time",
    "real_signal",
    "l2_norm",
    "linf_l2",
    "relative_difference",
    "harmonic_norms",
    "harmonic_ratios",
    "pointwise_difference",
    "diagnostics",
    "CSV_COLUMNS",
    "format_float",
    "write_csv",
    "write_vtk",
]

CSV_COLUMNS = ["run_id", "formulation", "N", "a", "h_fem", "bubble_free", "qoi",
               "r_2", "r_3", "r_4", "r_5", "r_6", "wall_time_s"]


def _mass(mesh_or_M):
    if isinstance(mesh_or_M, Mesh):
        from .fem import assemble_forms
        return assemble_forms(mesh_or_M).M
    if hasattr(mesh_or_M, "M"):
        return mesh_or_M.M
    return mesh_or_M


def reconstruct_time(stack: HarmonicStack, t, field_name: str = "p") -> np.ndarray:
    """Nodal values of ``Re sum_m e^{i m w t} u_m`` at time(s) ``t``.

    A scalar ``t`` gives shape ``(n_nodes,)``, an array ``(len(t), n_nodes)``.
    """
    u = getattr(stack, field_name)
    t = np.asarray(t, dtype=float)
    m = np.arange(u.shape[0])
    ph = np.exp(1j * stack.omega * np.multiply.outer(t, m))
    return (ph @ u).real


def real_signal(stack: HarmonicStack, t, field_name: str = "p") -> np.ndarray:
    """Complex-valued two-sided sum ``sum_{|m|<=N} u_m e^{i m w t}`` with ``u_{-m} = conj(u_m)``.

    For the real formulations this is the physical signal; its imaginary
    part vanishes up to rounding and is returned so callers can check that.
    """
    u = getattr(stack, field_name)
    t = np.asarray(t, dtype=float)
    m = np.arange(1, u.shape[0])
    ph = np.exp(1j * stack.omega * np.multiply.outer(t, m))
    return u[0] + ph @ u[1:] + np.conj(ph) @ np.conj(u[1:])


def l2_norm(u, M) -> float:
    """Finite-element ``L^2`` norm ``sqrt(u^H M u)``."""
    return float(np.sqrt(abs(np.vdot(u, M @ u))))


def linf_l2(stack: HarmonicStack, mesh_or_M, n_samples: int = 128, field_name: str = "p") -> float:
    """Maximum over ``n_samples`` uniform times in one period of the ``L^2`` norm."""
    if n_samples < 4 * stack.N + 1:
        raise ValueError(f"n_samples must be at least 4N+1 = {4 * stack.N + 1}")
    M = _mass(mesh_or_M)
    t = np.arange(n_samples) * (2.0 * np.pi / stack.omega / n_samples)
    U = reconstruct_time(stack, t, field_name)
    sq = np.einsum("ti,ti->t", U, (M @ U.T).T)
    return float(np.sqrt(max(sq.max(), 0.0)))


def relative_difference(qoi_a: float, qoi_b: float) -> float:
    if qoi_b == 0:
        raise ZeroDivisionError("reference quantity is zero")
    return abs(qoi_a - qoi_b) / abs(qoi_b)


def harmonic_norms(stack: HarmonicStack, mesh_or_M, field_name: str = "p") -> np.ndarray:
    M = _mass(mesh_or_M)
    u = getattr(stack, field_name)
    return np.array([l2_norm(u[m], M) for m in range(u.shape[0])])


def harmonic_ratios(stack: HarmonicStack, mesh_or_M) -> np.ndarray:
    """``r_m = ||p_m|| / ||p_1||`` for ``m = 0..N`` (so ``r[1] = 1``)."""
    norms = harmonic_norms(stack, mesh_or_M)
    if norms.size < 2 or norms[1] == 0:
        raise ZeroDivisionError("fundamental harmonic vanishes")
    return norms / norms[1]


def pointwise_difference(a: HarmonicStack, b: HarmonicStack, t0: float = 0.0) -> np.ndarray:
    """``|p_a(x, t0) - p_b(x, t0)|`` at the nodes."""
    return np.abs(reconstruct_time(a, t0) - reconstruct_time(b, t0))


@dataclass
class Diagnostics:
    qoi: float
    ratios: np.ndarray
    norms: np.ndarray
    v_norms: np.ndarray
    formulation: str
    N: int
    wall_time: float | None = None
    solver: dict = field(default_factory=dict)

    def r(self, m):
        return float(self.ratios[m]) if m < self.ratios.size else 0.0


def diagnostics(stack: HarmonicStack, mesh_or_M, n_samples: int = 128, wall_time=None,
                solver=None) -> Diagnostics:
    M = _mass(mesh_or_M)
    norms = harmonic_norms(stack, M)
    ratios = norms / norms[1] if norms.size > 1 and norms[1] > 0 else np.zeros_like(norms)
    return Diagnostics(linf_l2(stack, M, max(n_samples, 4 * stack.N + 1)), ratios, norms,
                       harmonic_norms(stack, M, "v"), stack.formulation, stack.N, wall_time,
                       dict(solver or {}))


def format_float(x) -> str:
    """17 significant digits, '.' decimal, locale independent."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return f"{x:.17g}"


def write_csv(path_or_buf, rows, columns=CSV_COLUMNS, header_lines=()):
    """Write dict rows with ``#``-prefixed header comments and LF line endings."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            val = row.get(c, "")
            if isinstance(val, (bool, np.bool_)):
                out.append("true" if val else "false")
            elif isinstance(val, (float, np.floating)) or (val is None):
                out.append(format_float(val))
            else:
                out.append(str(val))
        w.writerow(out)
    text = buf.getvalue()
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    return text


def write_vtk(path, mesh: Mesh, point_data: dict, title: str = "multiharmonic"):
    """Legacy ASCII VTK unstructured grid with nodal scalar fields."""
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{format_float(x)} {format_float(y)} 0" for x, y in mesh.nodes]
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    for name, values in point_data.items():
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_nodes,):
            raise ValueError(f"field {name!r} has shape {values.shape}")
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [format_float(v) for v in values]
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
