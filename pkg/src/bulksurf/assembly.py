"""P1 finite element assembly of the coupled bulk/surface pencil.

The stiffness matrix discretizes the bulk Dirichlet form plus the
tangential-gradient form on Gamma1; the mass matrix discretizes the bulk
L2 product plus the L2 product on Gamma1. Gamma0 vertices are removed
afterwards, which keeps both matrices symmetric positive definite.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .mesh import GAMMA0, GAMMA1, Mesh

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class AssemblyError(ValueError):
    pass


def _symmetric_csr(rows, cols, vals, n) -> sp.csr_matrix:
    """Sum duplicates, then mirror the upper triangle so values match bitwise."""
    m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    m.sum_duplicates()
    upper = sp.triu(m, format="csr")
    strict = sp.triu(m, k=1, format="csr")
    out = (upper + strict.T).tocsr()
    out.sort_indices()
    return out


def local_stiffness(p: np.ndarray) -> np.ndarray:
    """Local P1 stiffness blocks for triangles ``p`` of shape (nt, 3, 2)."""
    # edge vectors opposite each vertex; grad(phi_i) = rot90(e_i) / (2 area)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    area = 0.5 * (e[:, 2, 0] * (-e[:, 1, 1]) - e[:, 2, 1] * (-e[:, 1, 0]))
    return np.einsum("tid,tjd->tij", e, e) / (4.0 * area)[:, None, None]


def local_mass(p: np.ndarray) -> np.ndarray:
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    return area[:, None, None] * _MASS_REF[None]


def _check_triangles(mesh: Mesh) -> None:
    span = np.ptp(mesh.vertices, axis=0).max()
    areas = mesh.signed_areas()
    bad = np.nonzero(areas <= 1e-14 * span**2)[0]
    if len(bad):
        raise AssemblyError(f"degenerate triangle {bad[0]} (area {areas[bad[0]]:.3g})")


def _scatter_triangles(mesh: Mesh, blocks: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return _symmetric_csr(rows, cols, blocks.ravel(), mesh.n_vertices)


def assemble_bulk_stiffness(mesh: Mesh) -> sp.csr_matrix:
    _check_triangles(mesh)
    return _scatter_triangles(mesh, local_stiffness(mesh.vertices[mesh.triangles]))


def assemble_bulk_mass(mesh: Mesh) -> sp.csr_matrix:
    _check_triangles(mesh)
    return _scatter_triangles(mesh, local_mass(mesh.vertices[mesh.triangles]))


def _gamma1_lengths(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    e = mesh.edges_with_label(GAMMA1)
    d = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
    length = np.hypot(d[:, 0], d[:, 1])
    bad = np.nonzero(~(length > 0))[0]
    if len(bad):
        raise AssemblyError(f"Gamma1 edge {tuple(e[bad[0]])} has zero length")
    return e, length


def _scatter_edges(mesh: Mesh, e: np.ndarray, blocks: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    return _symmetric_csr(rows, cols, blocks.ravel(), mesh.n_vertices)


def assemble_surface_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Arc-length derivative form on Gamma1, chord length standing in for arc length."""
    e, length = _gamma1_lengths(mesh)
    ref = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return _scatter_edges(mesh, e, ref[None] / length[:, None, None])


def assemble_surface_mass(mesh: Mesh) -> sp.csr_matrix:
    e, length = _gamma1_lengths(mesh)
    ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    return _scatter_edges(mesh, e, ref[None] * length[:, None, None])


def mesh_fingerprint(mesh: Mesh) -> str:
    h = hashlib.sha256()
    for arr in (mesh.vertices, mesh.triangles, mesh.boundary_edges):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(",".join(mesh.boundary_labels).encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """Symmetric pencil ``(A, M)`` on the free degrees of freedom.

    ``free_dofs[i]`` is the mesh vertex carried by row ``i``. Systems built
    directly from matrices (no mesh) use the identity map.
    """

    A: sp.csr_matrix
    M: sp.csr_matrix
    free_dofs: np.ndarray
    n_vertices: int
    mesh_ref: str | None = None

    @classmethod
    def from_matrices(cls, A, M, mesh_ref=None) -> "DiscreteSystem":
        A = sp.csr_matrix(A, dtype=float)
        M = sp.csr_matrix(M, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n) or M.shape != (n, n):
            raise ValueError("A and M must be square matrices of equal size")
        return cls(A, M, np.arange(n), n, mesh_ref)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def to_vertices(self, v: np.ndarray) -> np.ndarray:
        """Scatter free-dof values to all vertices; pinned vertices get exact zeros."""
        v = np.asarray(v)
        out = np.zeros((self.n_vertices,) + v.shape[1:], dtype=v.dtype)
        out[self.free_dofs] = v
        return out

    def from_vertices(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[self.free_dofs]


def build_system(mesh: Mesh) -> DiscreteSystem:
    A = assemble_bulk_stiffness(mesh) + assemble_surface_stiffness(mesh)
    M = assemble_bulk_mass(mesh) + assemble_surface_mass(mesh)
    pinned = mesh.label_vertices(GAMMA0)
    keep = np.ones(mesh.n_vertices, dtype=bool)
    keep[pinned] = False
    free = np.nonzero(keep)[0]
    if len(free) == 0:
        raise AssemblyError("no free degrees of freedom remain after removing Gamma0")
    A = A[free][:, free].tocsr()
    M = M[free][:, free].tocsr()
    A.sort_indices()
    M.sort_indices()
    return DiscreteSystem(A, M, free, mesh.n_vertices, mesh_fingerprint(mesh))


def dump_matrix(matrix: sp.spmatrix, path) -> None:
    """Write the upper triangle as ``i j value`` lines under a ``%%sym n nnz`` header."""
    upper = sp.triu(matrix, format="coo")
    order = np.lexsort((upper.col, upper.row))
    lines = [f"%%sym {matrix.shape[0]} {upper.nnz}"]
    lines += [
        f"{i} {j} {v!r}"
        for i, j, v in zip(upper.row[order].tolist(), upper.col[order].tolist(),
                           upper.data[order].tolist())
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
