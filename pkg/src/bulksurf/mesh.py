"""Two-dimensional triangular meshes with labeled boundary components.

A :class:`Mesh` carries vertices, counterclockwise triangles and boundary
edges labeled ``Gamma0`` (pinned, Dirichlet) or ``Gamma1`` (dynamic, with the
Laplace-Beltrami boundary operator). Meshes are immutable; every operation
returns a new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GAMMA0 = "Gamma0"
GAMMA1 = "Gamma1"
LABELS = (GAMMA0, GAMMA1)

_FILE_LABELS = {"g0": GAMMA0, "g1": GAMMA1}
_LABEL_TOKENS = {GAMMA0: "g0", GAMMA1: "g1"}
_HEADER = "bse-mesh 1"


class MeshError(ValueError):
    """Raised when a mesh violates one of its structural invariants."""


class MeshFormatError(MeshError):
    """Raised when a mesh file does not follow the text schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class AnnulusParams:
    r_inner: float = 1.0
    r_outer: float = 2.0
    n_radial: int = 16
    n_angular: int = 64

    def __post_init__(self):
        if not (self.r_inner > 0):
            raise ValueError(f"r_inner must be positive, got {self.r_inner}")
        if not (self.r_outer > 0):
            raise ValueError(f"r_outer must be positive, got {self.r_outer}")
        if not self.r_inner < self.r_outer:
            raise ValueError(
                f"r_inner < r_outer violated: {self.r_inner} >= {self.r_outer}"
            )
        if int(self.n_radial) != self.n_radial or self.n_radial < 2:
            raise ValueError(f"n_radial must be an integer >= 2, got {self.n_radial}")
        if int(self.n_angular) != self.n_angular or self.n_angular < 8:
            raise ValueError(f"n_angular must be an integer >= 8, got {self.n_angular}")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    boundary_edges : (nb, 2) int array
    boundary_labels : tuple of str, one of ``LABELS`` per boundary edge
    circles : tuple of (label, radius) pairs
        Boundary components known to lie on origin-centered circles. Used
        by :func:`refine_uniform` to project new boundary vertices.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_labels: tuple
    circles: tuple = field(default=())

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        b = np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        for arr in (v, t, b):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "boundary_edges", b)
        object.__setattr__(self, "boundary_labels", tuple(self.boundary_labels))
        object.__setattr__(self, "circles", tuple((str(l), float(r)) for l, r in self.circles))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges_with_label(self, label: str) -> np.ndarray:
        mask = np.array([l == label for l in self.boundary_labels], dtype=bool)
        return self.boundary_edges[mask] if len(mask) else self.boundary_edges[:0]

    def label_vertices(self, label: str) -> np.ndarray:
        """Sorted unique vertex indices touched by edges carrying ``label``."""
        return np.unique(self.edges_with_label(label))

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def circle_radius(self, label: str) -> float | None:
        for l, r in self.circles:
            if l == label:
                return r
        return None

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and self.boundary_labels == other.boundary_labels
        )

    __hash__ = None


def _edge_keys(edges: np.ndarray, nv: int) -> np.ndarray:
    e = np.sort(edges, axis=1)
    return e[:, 0] * nv + e[:, 1]


def triangle_edges(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges of the triangulation and their triangle counts."""
    t = mesh.triangles
    all_edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    keys = _edge_keys(all_edges, mesh.n_vertices)
    uniq, counts = np.unique(keys, return_counts=True)
    nv = mesh.n_vertices
    return np.stack([uniq // nv, uniq % nv], axis=1), counts


def validate(mesh: Mesh) -> Mesh:
    """Check every mesh invariant and return the mesh unchanged.

    Raises :class:`MeshError` naming the first offending entity.
    """
    nv = mesh.n_vertices
    if not np.all(np.isfinite(mesh.vertices)):
        raise MeshError("vertex coordinates must be finite")
    if mesh.n_triangles == 0:
        raise MeshError("mesh has no triangles")
    for name, arr in (("triangle", mesh.triangles), ("boundary edge", mesh.boundary_edges)):
        bad = np.nonzero((arr < 0).any(axis=1) | (arr >= nv).any(axis=1))[0]
        if len(bad):
            raise MeshError(f"{name} {bad[0]} references a vertex outside 0..{nv - 1}")
    if len(mesh.boundary_labels) != len(mesh.boundary_edges):
        raise MeshError("one label per boundary edge required")
    for i, lab in enumerate(mesh.boundary_labels):
        if lab not in LABELS:
            raise MeshError(f"boundary edge {i} has unknown label {lab!r}")

    areas = mesh.signed_areas()
    bad = np.nonzero(~(areas > 0))[0]
    if len(bad):
        raise MeshError(
            f"triangle {bad[0]} has non-positive signed area {areas[bad[0]]:.6g}"
        )

    edges, counts = triangle_edges(mesh)
    if np.any(counts > 2):
        i = int(np.nonzero(counts > 2)[0][0])
        raise MeshError(f"edge {tuple(edges[i])} is shared by more than two triangles")
    edge_count = dict(zip(_edge_keys(edges, nv).tolist(), counts.tolist()))
    bkeys = _edge_keys(mesh.boundary_edges, nv)
    if len(np.unique(bkeys)) != len(bkeys):
        raise MeshError("duplicate boundary edge")
    for i, key in enumerate(bkeys.tolist()):
        if edge_count.get(key) != 1:
            raise MeshError(
                f"boundary edge {i} {tuple(mesh.boundary_edges[i])} is not on the boundary"
            )
    n_open = int(np.sum(counts == 1))
    if n_open != len(bkeys):
        raise MeshError(
            f"{n_open - len(bkeys)} boundary edge(s) of the triangulation carry no label"
        )

    g0 = mesh.label_vertices(GAMMA0)
    g1 = mesh.label_vertices(GAMMA1)
    if len(g0) == 0:
        raise MeshError("Gamma0 edge set is empty")
    if len(g1) == 0:
        raise MeshError("Gamma1 edge set is empty")
    shared = np.intersect1d(g0, g1)
    if len(shared):
        raise MeshError(
            f"vertex {shared[0]} touches both Gamma0 and Gamma1 (closures must be disjoint)"
        )
    return mesh


def ring_radii(params: AnnulusParams) -> np.ndarray:
    k = np.arange(params.n_radial + 1)
    return params.r_inner + k * (params.r_outer - params.r_inner) / params.n_radial


def generate_annulus(params: AnnulusParams) -> Mesh:
    """Structured annulus mesh; ring 0 is the inner circle (Gamma1).

    Vertex ``ring * n_angular + j`` sits at radius ``ring_radii[ring]`` and
    angle ``2*pi*j/n_angular``.
    """
    if not isinstance(params, AnnulusParams):
        params = AnnulusParams(*params)
    nr, na = params.n_radial, params.n_angular
    radii = ring_radii(params)
    theta = 2.0 * np.pi * np.arange(na) / na
    c, s = np.cos(theta), np.sin(theta)
    vertices = np.concatenate([np.stack([r * c, r * s], axis=1) for r in radii])

    ring = np.arange(nr)[:, None]
    j = np.arange(na)[None, :]
    a = ring * na + j
    b = ring * na + (j + 1) % na
    d = a + na
    cc = b + na
    tri1 = np.stack([a, d, cc], axis=-1).reshape(-1, 3)
    tri2 = np.stack([a, cc, b], axis=-1).reshape(-1, 3)
    triangles = np.stack([tri1, tri2], axis=1).reshape(-1, 3)

    jj = np.arange(na)
    inner = np.stack([(jj + 1) % na, jj], axis=1)
    outer = np.stack([nr * na + jj, nr * na + (jj + 1) % na], axis=1)
    boundary = np.concatenate([inner, outer])
    labels = (GAMMA1,) * na + (GAMMA0,) * na
    mesh = Mesh(
        vertices, triangles, boundary, labels,
        circles=((GAMMA1, params.r_inner), (GAMMA0, params.r_outer)),
    )
    return validate(mesh)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    Midpoints of boundary edges inherit the parent label. On components
    recorded in ``mesh.circles`` the new boundary vertices are projected
    radially onto the circle.
    """
    nv = mesh.n_vertices
    edges, _ = triangle_edges(mesh)
    keys = _edge_keys(edges, nv)
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    new_vertices = np.concatenate([mesh.vertices, mid])

    def midpoint(e0, e1):
        k = np.minimum(e0, e1) * nv + np.maximum(e0, e1)
        return nv + np.searchsorted(keys, k)

    t = mesh.triangles
    m01 = midpoint(t[:, 0], t[:, 1])
    m12 = midpoint(t[:, 1], t[:, 2])
    m20 = midpoint(t[:, 2], t[:, 0])
    children = np.stack(
        [
            np.stack([t[:, 0], m01, m20], axis=1),
            np.stack([m01, t[:, 1], m12], axis=1),
            np.stack([m20, m12, t[:, 2]], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)

    b = mesh.boundary_edges
    bm = midpoint(b[:, 0], b[:, 1])
    new_boundary = np.stack(
        [np.stack([b[:, 0], bm], axis=1), np.stack([bm, b[:, 1]], axis=1)], axis=1
    ).reshape(-1, 2)
    new_labels = tuple(l for l in mesh.boundary_labels for _ in range(2))

    for label, radius in mesh.circles:
        sel = bm[np.array([l == label for l in mesh.boundary_labels], dtype=bool)]
        p = new_vertices[sel]
        new_vertices[sel] = p * (radius / np.hypot(p[:, 0], p[:, 1]))[:, None]

    return validate(Mesh(new_vertices, children, new_boundary, new_labels, mesh.circles))


def rotate(mesh: Mesh, angle: float) -> Mesh:
    c, s = math.cos(angle), math.sin(angle)
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    rotated = np.stack([c * x - s * y, s * x + c * y], axis=1)
    return Mesh(rotated, mesh.triangles, mesh.boundary_edges, mesh.boundary_labels, mesh.circles)


def scale(mesh: Mesh, factor: float) -> Mesh:
    circles = tuple((l, r * factor) for l, r in mesh.circles)
    return Mesh(mesh.vertices * factor, mesh.triangles, mesh.boundary_edges,
                mesh.boundary_labels, circles)


def connected_components(mesh: Mesh) -> int:
    """Number of components of the triangle adjacency graph (union-find)."""
    nt = mesh.n_triangles
    parent = list(range(nt))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    t = mesh.triangles
    owner = {}
    for ti in range(nt):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(t[ti, a], t[ti, b]), max(t[ti, a], t[ti, b]))
            other = owner.setdefault(key, ti)
            if other != ti:
                ra, rb = find(ti), find(other)
                if ra != rb:
                    parent[ra] = rb
    return len({find(i) for i in range(nt)})


def euler_characteristic(mesh: Mesh) -> int:
    edges, _ = triangle_edges(mesh)
    return mesh.n_vertices - len(edges) + mesh.n_triangles


def detect_circles(mesh: Mesh, rtol: float = 1e-12) -> tuple:
    """Boundary labels whose vertices all lie on one origin-centered circle."""
    found = []
    for label in LABELS:
        idx = mesh.label_vertices(label)
        if len(idx) < 3:
            continue
        r = np.hypot(mesh.vertices[idx, 0], mesh.vertices[idx, 1])
        if r.max() - r.min() <= rtol * r.max():
            found.append((label, float(r.mean())))
    return tuple(found)


def save_mesh(mesh: Mesh, path) -> None:
    lines = [_HEADER, f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    lines += [
        f"{i} {j} {_LABEL_TOKENS[l]}"
        for (i, j), l in zip(mesh.boundary_edges.tolist(), mesh.boundary_labels)
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_mesh(text: str) -> Mesh:
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise MeshFormatError("unexpected end of file", pos + 1)
        pos += 1
        return pos, lines[pos - 1].split()

    def section(name):
        lineno, tok = next_line()
        if len(tok) != 2 or tok[0] != name:
            raise MeshFormatError(f"expected '{name} <count>', got {' '.join(tok)!r}", lineno)
        try:
            n = int(tok[1])
        except ValueError:
            raise MeshFormatError(f"{name} count is not an integer: {tok[1]!r}", lineno) from None
        if n < 0:
            raise MeshFormatError(f"{name} count is negative", lineno)
        return n

    lineno, tok = next_line()
    if " ".join(tok) != _HEADER:
        raise MeshFormatError(f"bad header {' '.join(tok)!r}, expected {_HEADER!r}", lineno)

    nv = section("vertices")
    verts = []
    for i in range(nv):
        lineno, tok = next_line()
        if len(tok) != 2:
            raise MeshFormatError(f"vertex {i}: expected 'x y'", lineno)
        try:
            verts.append((float(tok[0]), float(tok[1])))
        except ValueError:
            raise MeshFormatError(f"vertex {i}: coordinates must be decimal numbers", lineno) from None

    nt = section("triangles")
    tris = []
    for i in range(nt):
        lineno, tok = next_line()
        if len(tok) != 3:
            raise MeshFormatError(f"triangle {i}: expected 'i j k'", lineno)
        try:
            tris.append(tuple(int(x) for x in tok))
        except ValueError:
            raise MeshFormatError(f"triangle {i}: indices must be integers", lineno) from None

    nb = section("boundary")
    edges, labels = [], []
    for i in range(nb):
        lineno, tok = next_line()
        if len(tok) != 3:
            raise MeshFormatError(f"boundary edge {i}: expected 'i j label'", lineno)
        try:
            edges.append((int(tok[0]), int(tok[1])))
        except ValueError:
            raise MeshFormatError(f"boundary edge {i}: indices must be integers", lineno) from None
        if tok[2] not in _FILE_LABELS:
            raise MeshFormatError(
                f"boundary edge {i}: label must be g0 or g1, got {tok[2]!r}", lineno
            )
        labels.append(_FILE_LABELS[tok[2]])

    for rest in range(pos, len(lines)):
        if lines[rest].strip():
            raise MeshFormatError(f"unexpected trailing content {lines[rest].strip()!r}", rest + 1)

    mesh = Mesh(verts, tris, edges, labels)
    validate(mesh)
    return Mesh(mesh.vertices, mesh.triangles, mesh.boundary_edges, mesh.boundary_labels,
                detect_circles(mesh))


def load_mesh(path) -> Mesh:
    text = Path(path).read_text(encoding="utf-8")
    return _parse_mesh(text)
