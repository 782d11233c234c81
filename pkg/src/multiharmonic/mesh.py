"""Triangulations of the disk and mesh file I/O.

Meshes are plain arrays: ``nodes`` (n, 2) in metres, ``triangles`` (t, 3)
counter-clockwise node indices and ``boundary_edges`` (e, 2). Two file
formats are supported, the ASCII MSH 2.2 subset written by Gmsh (line and
triangle elements only) and a small plain-text format::

    <n_nodes> <n_triangles> <n_boundary_edges>
    x y            (n_nodes lines)
    i j k          (n_triangles lines)
    i j            (n_boundary_edges lines)
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

__all__ = [
    "Mesh",
    "MeshError",
    "MeshStats",
    "generate_disk",
    "read_msh",
    "write_msh",
    "read_mesh_txt",
    "write_mesh_txt",
    "mesh_statistics",
    "check_resolution",
    "DUPLICATE_TOL",
]

log = logging.getLogger(__name__)

#: Absolute tolerance [m] below which two nodes count as duplicates.
DUPLICATE_TOL = 1e-12


class MeshError(ValueError):
    """Raised for malformed mesh files or meshes violating an invariant."""


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def areas(self) -> np.ndarray:
        """Signed triangle areas."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def scale(self) -> float:
        """Diameter of the bounding box."""
        span = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        return float(np.hypot(*span))

    def validate(self) -> "Mesh":
        """Check the invariants; raise :class:`MeshError` naming the first violated one."""
        n = self.n_nodes
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise MeshError("triangle node index out of range")
        if self.boundary_edges.size and (self.boundary_edges.min() < 0
                                         or self.boundary_edges.max() >= n):
            raise MeshError("boundary edge node index out of range")
        if np.any(self.areas() <= 0):
            raise MeshError("triangle with non-positive signed area")
        _check_duplicates(self.nodes)
        _check_boundary(self)
        return self


def _check_duplicates(nodes):
    order = np.lexsort((nodes[:, 1], nodes[:, 0]))
    srt = nodes[order]
    gaps = np.abs(np.diff(srt, axis=0)).max(axis=1) if len(srt) > 1 else np.array([])
    # lexsort neighbours catch exact-x duplicates; a KD query catches the rest
    if np.any(gaps <= DUPLICATE_TOL):
        raise MeshError("duplicate nodes within tolerance")
    from scipy.spatial import cKDTree

    pairs = cKDTree(nodes).query_pairs(DUPLICATE_TOL)
    if pairs:
        raise MeshError("duplicate nodes within tolerance")


def _edge_counts(triangles):
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq, counts


def _check_boundary(mesh):
    uniq, counts = _edge_counts(mesh.triangles)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    free = {tuple(e) for e in uniq[counts == 1]}
    given = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    if given != free:
        raise MeshError("boundary edges do not match the free edges of the triangulation")
    # one closed loop: every boundary node has degree two and the loop is connected
    bnodes, deg = np.unique(mesh.boundary_edges, return_counts=True)
    if np.any(deg != 2):
        raise MeshError("boundary edges do not form a closed loop")
    adj = {}
    for i, j in mesh.boundary_edges.tolist():
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    start = int(bnodes[0])
    prev, cur, visited = None, start, 1
    while True:
        nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
        prev, cur = cur, nxt
        if cur == start:
            break
        visited += 1
    if visited != len(bnodes):
        raise MeshError("boundary edges form more than one loop")


def _free_edges(triangles):
    uniq, counts = _edge_counts(triangles)
    return uniq[counts == 1]


def _orient(nodes, triangles):
    """Make every triangle counter-clockwise; return (triangles, n_flipped)."""
    mesh = Mesh(nodes, triangles, np.empty((0, 2), dtype=np.int64))
    neg = mesh.areas() < 0
    if np.any(neg):
        triangles = triangles.copy()
        triangles[neg] = triangles[neg][:, [0, 2, 1]]
    return triangles, int(neg.sum())


def generate_disk(radius: float, h_target: float, center=(0.0, 0.0)) -> Mesh:
    """Triangulate the disk of given radius with elements of size ~``h_target``.

    Nodes are placed on concentric rings spaced ``sqrt(3)/2 * h`` apart with
    roughly ``h`` between neighbours on each ring, then triangulated by
    Delaunay. The outer ring lies exactly on the circle.
    """
    if not (radius > 0 and h_target > 0):
        raise ValueError("radius and h_target must be positive")
    if h_target >= radius:
        raise ValueError("h_target must be smaller than the radius")
    n_rings = max(1, math.ceil(radius / (math.sqrt(3.0) / 2.0 * h_target)))
    pts = [np.zeros((1, 2))]
    for i in range(1, n_rings + 1):
        r = radius * i / n_rings
        n_i = max(6, round(2.0 * math.pi * r / h_target))
        # stagger alternate rings to avoid stacked (right-angled) triangles
        theta = 2.0 * math.pi * (np.arange(n_i) + 0.5 * (i % 2)) / n_i
        ring = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        pts.append(ring)
    nodes = np.concatenate(pts) + np.asarray(center, dtype=float)
    tri = Delaunay(nodes, qhull_options="Qbb Qc Qz Q12")
    triangles = tri.simplices.astype(np.int64)
    mesh0 = Mesh(nodes, triangles, np.empty((0, 2), dtype=np.int64))
    keep = np.abs(mesh0.areas()) > 1e-14 * mesh0.scale() ** 2
    triangles, _ = _orient(nodes, triangles[keep])
    boundary = _free_edges(triangles)
    return Mesh(nodes, triangles, boundary).validate()


@dataclass(frozen=True)
class MeshStats:
    h_max: float
    h_min: float
    n_nodes: int
    n_triangles: int


def _edge_lengths(mesh):
    uniq, _ = _edge_counts(mesh.triangles)
    d = mesh.nodes[uniq[:, 0]] - mesh.nodes[uniq[:, 1]]
    return np.hypot(d[:, 0], d[:, 1])


def mesh_statistics(mesh: Mesh) -> MeshStats:
    """Longest/shortest edge and entity counts."""
    lengths = _edge_lengths(mesh)
    return MeshStats(float(lengths.max()), float(lengths.min()), mesh.n_nodes, mesh.n_triangles)


def circumradii(mesh: Mesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    return a * b * c / (4.0 * np.abs(mesh.areas()))


def check_resolution(mesh: Mesh, wavenumber: float, per_wavelength: int = 10) -> bool:
    """Warn if fewer than ``per_wavelength`` elements resolve ``2 pi / k``.

    Returns True when the resolution is adequate.
    """
    h_max = mesh_statistics(mesh).h_max
    wavelength = 2.0 * math.pi / wavenumber
    ok = h_max * per_wavelength <= wavelength
    if not ok:
        warnings.warn(
            f"mesh under-resolves wavelength {wavelength:.4g} m with h_max={h_max:.4g} m "
            f"(fewer than {per_wavelength} elements per wavelength)",
            RuntimeWarning, stacklevel=2)
    return ok


# -- MSH 2.2 -----------------------------------------------------------------

class _Lines:
    def __init__(self, path):
        self.lines = Path(path).read_text().splitlines()
        self.pos = 0

    def next(self, what):
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise MeshError(f"unexpected end of file while reading {what} (line {self.pos})")

    def lineno(self):
        return self.pos

    def ints(self, what):
        line = self.next(what)
        try:
            return [int(t) for t in line.split()]
        except ValueError:
            raise MeshError(f"line {self.pos}: expected integers in {what}, got {line!r}") from None


def read_msh(path) -> Mesh:
    """Read an ASCII MSH 2.2 file with 2-node line and 3-node triangle elements.

    Clockwise triangles are re-oriented (and logged) instead of rejected.
    Boundary edges are taken from the triangulation's free edges; line
    elements in the file are checked against them when present.
    """
    src = _Lines(path)
    nodes = tris = lines = None
    while src.pos < len(src.lines):
        try:
            tag = src.next("section header")
        except MeshError:
            break
        if tag == "$MeshFormat":
            fmt = src.next("$MeshFormat").split()
            if len(fmt) < 3 or not fmt[0].startswith("2"):
                raise MeshError(f"line {src.lineno()}: unsupported mesh format {fmt!r}")
            if fmt[1] != "0":
                raise MeshError(f"line {src.lineno()}: binary MSH files are not supported")
            _expect(src, "$EndMeshFormat")
        elif tag == "$Nodes":
            (count,) = src.ints("$Nodes count")
            ids = np.empty(count, dtype=np.int64)
            nodes = np.empty((count, 2))
            for i in range(count):
                row = src.next("$Nodes").split()
                if len(row) < 3:
                    raise MeshError(f"line {src.lineno()}: malformed node record")
                try:
                    ids[i] = int(row[0])
                    nodes[i] = float(row[1]), float(row[2])
                except ValueError:
                    raise MeshError(f"line {src.lineno()}: malformed node record") from None
            _expect(src, "$EndNodes")
            index = {int(t): k for k, t in enumerate(ids)}
        elif tag == "$Elements":
            if nodes is None:
                raise MeshError(f"line {src.lineno()}: $Elements before $Nodes")
            (count,) = src.ints("$Elements count")
            tris, lines = [], []
            for _ in range(count):
                row = src.ints("$Elements")
                if len(row) < 3:
                    raise MeshError(f"line {src.lineno()}: malformed element record")
                etype, ntags = row[1], row[2]
                conn = row[3 + ntags:]
                try:
                    conn = [index[t] for t in conn]
                except KeyError as exc:
                    raise MeshError(f"line {src.lineno()}: unknown node id {exc.args[0]}") from None
                if etype == 2 and len(conn) == 3:
                    tris.append(conn)
                elif etype == 1 and len(conn) == 2:
                    lines.append(conn)
                elif etype == 15:
                    continue  # point elements
                else:
                    raise MeshError(f"line {src.lineno()}: unsupported element type {etype}")
            _expect(src, "$EndElements")
        else:
            # skip unknown sections such as $PhysicalNames
            if not tag.startswith("$"):
                raise MeshError(f"line {src.lineno()}: unexpected content {tag!r}")
            end = "$End" + tag[1:]
            while src.next(end) != end:
                pass
    if nodes is None or not tris:
        raise MeshError("file contains no nodes or no triangles")
    triangles = np.asarray(tris, dtype=np.int64)
    triangles, flipped = _orient(nodes, triangles)
    if flipped:
        log.info("re-oriented %d clockwise triangles from %s", flipped, path)
    boundary = _free_edges(triangles)
    if lines:
        given = {tuple(sorted(e)) for e in lines}
        if not given <= {tuple(e) for e in boundary.tolist()}:
            raise MeshError("line elements are not boundary edges of the triangulation")
    return Mesh(nodes, triangles, boundary).validate()


def _expect(src, token):
    line = src.next(token)
    if line != token:
        raise MeshError(f"line {src.lineno()}: expected {token}, got {line!r}")


def write_msh(mesh: Mesh, path) -> None:
    """Write ASCII MSH 2.2 with boundary lines (type 1) and triangles (type 2)."""
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_nodes)]
    out += [f"{i + 1} {x!r} {y!r} 0" for i, (x, y) in enumerate(mesh.nodes.tolist())]
    out += ["$EndNodes", "$Elements", str(len(mesh.boundary_edges) + mesh.n_triangles)]
    k = 1
    for i, j in mesh.boundary_edges.tolist():
        out.append(f"{k} 1 2 1 1 {i + 1} {j + 1}")
        k += 1
    for i, j, l in mesh.triangles.tolist():
        out.append(f"{k} 2 2 2 1 {i + 1} {j + 1} {l + 1}")
        k += 1
    out.append("$EndElements")
    Path(path).write_text("\n".join(out) + "\n")


# -- plain text ----------------------------------------------------------------

def write_mesh_txt(mesh: Mesh, path) -> None:
    out = [f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    out += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    out += [f"{i} {j}" for i, j in mesh.boundary_edges.tolist()]
    Path(path).write_text("\n".join(out) + "\n")


def read_mesh_txt(path) -> Mesh:
    src = _Lines(path)
    header = src.ints("header")
    if len(header) != 3:
        raise MeshError("line 1: header must hold three counts")
    n, t, e = header
    try:
        nodes = np.array([[float(v) for v in src.next("nodes").split()] for _ in range(n)])
    except ValueError:
        raise MeshError(f"line {src.lineno()}: malformed node record") from None
    tris = np.array([src.ints("triangles") for _ in range(t)], dtype=np.int64).reshape(t, 3)
    edges = np.array([src.ints("boundary edges") for _ in range(e)], dtype=np.int64).reshape(e, 2)
    tris, flipped = _orient(nodes.reshape(n, 2), tris)
    if flipped:
        log.info("re-oriented %d clockwise triangles from %s", flipped, path)
    return Mesh(nodes.reshape(n, 2), tris, edges).validate()
