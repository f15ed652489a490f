"""Generalized symmetric-definite eigensolver for ``A u = lam M u``.

The smallest eigenvalues are found by shift-invert at zero: the operator
``A^{-1} M`` is self-adjoint in the M-inner product and its largest
eigenvalues ``mu`` give ``lam = 1/mu``. A block Lanczos process with full
reorthogonalization builds the Krylov space; explicit Rayleigh-Ritz and
thick restarts keep the basis small.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .assembly import DiscreteSystem

DEFAULT_SEED = 0x5EED
CLUSTER_RTOL = 1e-8
DENSE_MAX_DIM = 2000


class DefinitenessError(ValueError):
    """The matrix handed to :func:`factorize` is not positive definite."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = np.asarray(residuals)


class Factorization:
    """Cholesky factor of ``P A P^T`` in band storage, P the reverse Cuthill-McKee order."""

    def __init__(self, A):
        A = sp.csr_matrix(A, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("matrix must be square")
        perm = reverse_cuthill_mckee(A, symmetric_mode=True).astype(np.int64)
        Ap = A[perm][:, perm].tocoo()
        upper = Ap.row <= Ap.col
        rows, cols, vals = Ap.row[upper], Ap.col[upper], Ap.data[upper]
        bw = int((cols - rows).max()) if len(rows) else 0
        band = np.zeros((bw + 1, n))
        np.add.at(band, (bw + rows - cols, cols), vals)
        try:
            self._factor = la.cholesky_banded(band, lower=False, check_finite=True)
        except la.LinAlgError as exc:
            raise DefinitenessError(f"matrix is not positive definite ({exc})") from None
        self.perm = perm
        self.bandwidth = bw
        self.n = n
        self.fill = int((bw + 1) * n - bw * (bw + 1) // 2)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        x = la.cho_solve_banded((self._factor, False), b[self.perm], check_finite=False)
        out = np.empty_like(x)
        out[self.perm] = x
        return out


def factorize(A) -> Factorization:
    return Factorization(A)


@dataclass(frozen=True)
class EigenPair:
    lam: float
    vector: np.ndarray
    residual: float


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenpairs with M-orthonormal eigenvectors (columns of ``vectors``)."""

    lambdas: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    k_requested: int
    diagnostics: dict = field(default_factory=dict)
    mesh_ref: str | None = None

    def __len__(self):
        return len(self.lambdas)

    @property
    def pairs(self) -> list[EigenPair]:
        return [
            EigenPair(float(l), self.vectors[:, i], float(r))
            for i, (l, r) in enumerate(zip(self.lambdas, self.residuals))
        ]

    def to_dict(self, system: DiscreteSystem | None = None, include_vectors=False) -> dict:
        out = {
            "lambda": [float(x) for x in self.lambdas],
            "residual": [float(x) for x in self.residuals],
            "k_requested": int(self.k_requested),
            "mesh_ref": self.mesh_ref,
            "diagnostics": dict(self.diagnostics),
        }
        if include_vectors:
            vecs = self.vectors if system is None else system.to_vertices(self.vectors)
            out["vectors"] = vecs.T.tolist()
        return out


def _m_norm(system, v):
    return float(np.sqrt(v @ (system.M @ v)))


def rayleigh_quotient(system: DiscreteSystem, v) -> float:
    v = np.asarray(v, dtype=float)
    den = float(v @ (system.M @ v))
    if not np.any(v) or den == 0.0:
        raise ValueError("Rayleigh quotient of the zero vector is undefined")
    return float(v @ (system.A @ v)) / den


def residual_norm(system: DiscreteSystem, pair: EigenPair) -> float:
    """``||A u - lam M u||_2 / ||u||_M``."""
    u = np.asarray(pair.vector, dtype=float)
    if not np.any(u):
        raise ValueError("residual of the zero vector is undefined")
    r = system.A @ u - pair.lam * (system.M @ u)
    return float(np.linalg.norm(r)) / _m_norm(system, u)


def _sign_normalize(vectors):
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _orthonormalize_block(W, V, MV, M, rng, drop_tol=1e-10):
    """M-orthonormalize ``W`` against ``V`` and internally; refill lost directions randomly."""
    n, b = W.shape
    for _ in range(3):
        for _ in range(2):
            if V.shape[1]:
                W = W - V @ (MV.T @ W)
        MW = M @ W
        G = W.T @ MW
        G = 0.5 * (G + G.T)
        s, U = np.linalg.eigh(G)
        scale = max(s.max(), 1e-300)
        good = s > (drop_tol**2) * scale
        if good.all() or V.shape[1] + b >= n:
            keep = s > 1e-28 * scale
            W = (W @ U[:, keep]) / np.sqrt(s[keep])
            # second pass restores orthogonality lost in the eigen-rescaling
            if V.shape[1]:
                W = W - V @ (MV.T @ W)
            MW = M @ W
            G = W.T @ MW
            C = np.linalg.cholesky(0.5 * (G + G.T))
            W = la.solve_triangular(C, W.T, lower=True).T
            return W, M @ W
        W = np.concatenate(
            [(W @ U[:, good]) / np.sqrt(s[good]), rng.standard_normal((n, int((~good).sum())))],
            axis=1,
        )
    raise ConvergenceError("could not build an M-orthonormal block", [])


def solve_smallest(
    system: DiscreteSystem,
    k: int,
    tol: float = 1e-10,
    *,
    block_size: int = 4,
    max_basis: int | None = None,
    max_matvecs: int | None = None,
    seed: int = DEFAULT_SEED,
    factor: Factorization | None = None,
) -> Spectrum:
    """The ``k`` smallest eigenpairs of the pencil, each with residual <= ``tol``.

    ``max_matvecs`` caps the number of operator applications (default
    ``50*k``, raised if needed to fill one Krylov basis).
    """
    n = system.dim
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    A, M = system.A, system.M
    factor = factor or factorize(A)
    rng = np.random.default_rng(seed)

    b = min(block_size, n)
    m = max_basis or max(2 * k + 2 * b, k + 16)
    keep = b * -(-(k + b) // b)
    m = min(n, keep + b * max(1, -(-(m - keep) // b)))
    cap = max_matvecs or max(50 * k, m)

    V = np.zeros((n, 0))
    MV = np.zeros((n, 0))
    OpV = np.zeros((n, 0))
    block, Mblock = _orthonormalize_block(rng.standard_normal((n, b)), V, MV, M, rng)
    matvecs = 0
    restarts = 0
    while True:
        while block.shape[1] and V.shape[1] < m:
            room = m - V.shape[1]
            block, Mblock = block[:, :room], Mblock[:, :room]
            W = factor.solve(Mblock)
            matvecs += block.shape[1]
            V = np.concatenate([V, block], axis=1)
            MV = np.concatenate([MV, Mblock], axis=1)
            OpV = np.concatenate([OpV, W], axis=1)
            if V.shape[1] >= n:
                block = np.zeros((n, 0))
                break
            block, Mblock = _orthonormalize_block(W, V, MV, M, rng)

        T = MV.T @ OpV
        theta, Y = np.linalg.eigh(0.5 * (T + T.T))
        theta, Y = theta[::-1], Y[:, ::-1]
        X = V @ Y[:, :k]
        lam = 1.0 / theta[:k]
        R = A @ X - (M @ X) * lam
        xnorm = np.sqrt(np.einsum("ij,ij->j", X, M @ X))
        res = np.linalg.norm(R, axis=0) / xnorm
        if np.all(res <= tol) or V.shape[1] >= n:
            break
        if matvecs >= cap:
            raise ConvergenceError(
                f"no convergence after {matvecs} operator applications; "
                f"worst residual {res.max():.3e} > tol {tol:.1e}",
                res,
            )
        V, MV, OpV = V @ Y[:, :keep], MV @ Y[:, :keep], OpV @ Y[:, :keep]
        if block.shape[1]:
            block, Mblock = _orthonormalize_block(block, V, MV, M, rng)
        else:
            block, Mblock = _orthonormalize_block(rng.standard_normal((n, b)), V, MV, M, rng)
        restarts += 1

    X = X / xnorm
    order = np.argsort(lam, kind="stable")
    X = _sign_normalize(X[:, order])
    lam = lam[order]
    res = res[order]
    diagnostics = {
        "matvecs": int(matvecs),
        "restarts": int(restarts),
        "basis_size": int(m),
        "block_size": int(b),
        "bandwidth": int(factor.bandwidth),
        "factor_fill": int(factor.fill),
        "seed": int(seed),
        "tol": float(tol),
    }
    return Spectrum(lam, X, res, k, diagnostics, system.mesh_ref)


def dense_eigh(system: DiscreteSystem):
    """Full dense decomposition; returns ascending eigenvalues and M-orthonormal vectors."""
    if system.dim > DENSE_MAX_DIM:
        raise ValueError(f"dense path limited to dimension {DENSE_MAX_DIM}, got {system.dim}")
    lam, U = la.eigh(system.A.toarray(), system.M.toarray())
    return lam, U


def dense_spectrum(system: DiscreteSystem, k: int | None = None) -> Spectrum:
    lam, U = dense_eigh(system)
    k = len(lam) if k is None else k
    lam, U = lam[:k], _sign_normalize(U[:, :k])
    R = system.A @ U - (system.M @ U) * lam
    res = np.linalg.norm(R, axis=0)
    return Spectrum(lam, U, res, k, {"method": "dense"}, system.mesh_ref)


def clusters(values, rtol: float = CLUSTER_RTOL) -> list[list[int]]:
    """Group indices of sorted ``values`` whose consecutive relative gap is below ``rtol``."""
    values = np.asarray(values)
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups and abs(v - values[groups[-1][-1]]) <= rtol * max(abs(v), 1e-300):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups
