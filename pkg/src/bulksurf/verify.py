"""Property checks on discrete spectra and the FEM/oracle comparison.

Each ``check_*`` function returns a :class:`CheckRecord`; failures are
records, not exceptions. Exceptions are reserved for violated
preconditions (wrong mesh type, disconnected domain, too large for the
dense path).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as la

from .assembly import DiscreteSystem, build_system
from .eigen import (DEFAULT_SEED, DENSE_MAX_DIM, Spectrum, clusters, dense_eigh,
                    rayleigh_quotient, solve_smallest)
from .mesh import GAMMA0, GAMMA1, AnnulusParams, Mesh, connected_components, \
    generate_annulus, refine_uniform, rotate
from .oracle import OracleSpectrum, check_monotone, integrate

PASS, FAIL, WARN = "pass", "fail", "warn"

ANCHOR_BASIS = "spectral decomposition: eigenfunctions form a Hilbert basis"
ANCHOR_POSITIVE = "spectral decomposition: eigenvalues are positive"
ANCHOR_RAYLEIGH = "variational characterization: generalized Rayleigh formula"
ANCHOR_MINMAX = "variational characterization: Courant-Fischer-Weyl min-max"
ANCHOR_GROUND = "first eigenfunction: simple eigenvalue, constant sign"
ANCHOR_RADIAL = "radial case: radial symmetry, strictly decreasing in radius"
ANCHOR_ROTATION = "radial case: rotation invariance of both norms"
ANCHOR_PLUMBING = "plumbing"


class PreconditionError(ValueError):
    pass


@dataclass
class CheckRecord:
    name: str
    anchor: str
    status: str
    measured: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL


def _record(name, anchor, ok, measured, tol, detail="", warn_only=False):
    status = PASS if ok else (WARN if warn_only else FAIL)
    return CheckRecord(name, anchor, status, float(measured), float(tol), detail)


@dataclass
class VerificationReport:
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, rec):
        if isinstance(rec, CheckRecord):
            self.records.append(rec)
        else:
            self.records.extend(rec)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def sorted_records(self):
        return sorted(self.records, key=lambda r: r.name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "metadata": self.metadata,
            "checks": [asdict(r) for r in self.sorted_records()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        rows = [("check", "status", "measured", "tolerance", "anchor")]
        rows += [(r.name, r.status.upper(), f"{r.measured:.3e}", f"{r.tolerance:.1e}", r.anchor)
                 for r in self.sorted_records()]
        widths = [max(len(row[i]) for row in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(row[:4], widths)) + "  " + row[4]
                 for row in rows]
        lines.insert(1, "-" * len(lines[0]))
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Theorem-level checks


def check_positive(spectrum: Spectrum) -> CheckRecord:
    lo = float(np.min(spectrum.lambdas))
    return _record("eigenvalues_positive", ANCHOR_POSITIVE, lo > 0, lo, 0.0,
                   "smallest eigenvalue must be strictly positive")


def check_basis(spectrum: Spectrum, system: DiscreteSystem,
                tol_m: float = 1e-10, tol_a: float = 1e-8) -> list[CheckRecord]:
    """M-orthonormality and A-diagonalization of the returned block."""
    U = spectrum.vectors
    lam = spectrum.lambdas
    dm = float(np.abs(U.T @ (system.M @ U) - np.eye(len(lam))).max())
    da = float(np.abs(U.T @ (system.A @ U) - np.diag(lam)).max())
    scale = float(lam.max())
    norm_identity = float(np.max(np.abs(np.einsum("ij,ij->j", U, system.A @ U) - lam) / lam))
    return [
        _record("basis_M_orthonormal", ANCHOR_BASIS, dm <= tol_m, dm, tol_m),
        _record("basis_A_diagonal", ANCHOR_BASIS, da <= tol_a * scale, da / scale, tol_a,
                "max |U^T A U - diag(lam)| / lam_max"),
        _record("h1_norm_identity", ANCHOR_BASIS, norm_identity <= 1e-9, norm_identity, 1e-9,
                "max |u_n^T A u_n - lam_n| / lam_n"),
    ]


def check_rayleigh(system: DiscreteSystem, spectrum: Spectrum, trials: int = 1000,
                   seed: int = DEFAULT_SEED, rtol: float = 1e-10) -> list[CheckRecord]:
    lam1 = float(spectrum.lambdas[0])
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((system.dim, trials))
    q = np.einsum("ij,ij->j", X, system.A @ X) / np.einsum("ij,ij->j", X, system.M @ X)
    violations = int(np.sum(q < lam1 * (1 - rtol)))
    margin = float((q.min() - lam1) / lam1)
    eq = abs(rayleigh_quotient(system, spectrum.vectors[:, 0]) - lam1) / lam1
    return [
        _record("rayleigh_lower_bound", ANCHOR_RAYLEIGH, violations == 0, margin, -rtol,
                f"{trials} random vectors, {violations} below lam_1; measured = min(q)/lam_1 - 1"),
        _record("rayleigh_equality", ANCHOR_RAYLEIGH, eq <= rtol, eq, rtol,
                "quotient of u_1 equals lam_1"),
    ]


def _min_on_complement(A, M, V):
    """Smallest pencil eigenvalue on the M-orthogonal complement of span(V)."""
    if V.shape[1] == 0:
        return float(la.eigh(A, M, eigvals_only=True, subset_by_index=[0, 0])[0])
    Q = la.null_space((M @ V).T)
    return float(la.eigh(Q.T @ A @ Q, Q.T @ M @ Q, eigvals_only=True,
                         subset_by_index=[0, 0])[0])


def check_courant_fischer(system: DiscreteSystem, n: int, trials: int = 50,
                          seed: int = DEFAULT_SEED, rtol: float = 1e-9) -> list[CheckRecord]:
    """Min-max characterization of the ``n``-th eigenvalue (1-based) on the dense path."""
    if system.dim > DENSE_MAX_DIM:
        raise PreconditionError(f"dense path limited to dimension {DENSE_MAX_DIM}")
    if not 1 <= n <= system.dim:
        raise PreconditionError(f"index n={n} out of range")
    A, M = system.A.toarray(), system.M.toarray()
    lam, U = dense_eigh(system)
    target = lam[n - 1]
    attained = _min_on_complement(A, M, U[:, : n - 1])
    dev = abs(attained - target) / target
    recs = [_record(f"minmax_n{n}_attained", ANCHOR_MINMAX, dev <= rtol, dev, rtol,
                    "min over complement of the first n-1 eigenvectors equals lam_n")]
    if n > 1:
        rng = np.random.default_rng(seed + n)
        worst = -np.inf
        for _ in range(trials):
            V = rng.standard_normal((system.dim, n - 1))
            worst = max(worst, (_min_on_complement(A, M, V) - target) / target)
        recs.append(_record(f"minmax_n{n}_random", ANCHOR_MINMAX, worst <= rtol, worst, rtol,
                            f"{trials} random subspaces; measured = max(min/lam_n) - 1"))
    return recs


def check_ground_state(spectrum: Spectrum, system: DiscreteSystem, mesh: Mesh,
                       vector: np.ndarray | None = None, gap_tol: float = 1e-6,
                       ) -> list[CheckRecord]:
    """Simplicity of lam_1 and strict one-signedness of the ground vector.

    ``vector`` overrides u_1 (used for negative controls).
    """
    if len(spectrum) < 2:
        raise PreconditionError("need at least two eigenpairs")
    if connected_components(mesh) != 1:
        raise PreconditionError("domain must be connected (one triangle-adjacency component)")
    lam = spectrum.lambdas
    gap = float((lam[1] - lam[0]) / lam[0])
    u = spectrum.vectors[:, 0] if vector is None else np.asarray(vector)
    u = u * np.sign(u[np.argmax(np.abs(u))])
    n_bad = int(np.sum(~(u > 0)))
    g1 = np.isin(system.free_dofs, mesh.label_vertices(GAMMA1))
    structured = bool(mesh.circles)
    pinned = system.to_vertices(u)[mesh.label_vertices(GAMMA0)]
    return [
        _record("ground_simple", ANCHOR_GROUND, gap > gap_tol, gap, gap_tol,
                "(lam_2 - lam_1) / lam_1"),
        _record("ground_one_signed", ANCHOR_GROUND, n_bad == 0 and not np.any(pinned),
                float(u.min() / np.abs(u).max()), 0.0,
                f"{n_bad} of {len(u)} free dofs ({int(g1.sum())} on Gamma1) not strictly positive",
                warn_only=not structured),
    ]


def annulus_rings(mesh: Mesh, rtol: float = 1e-9):
    """Vertex indices grouped by distance to the origin, innermost first."""
    if mesh.circle_radius(GAMMA1) is None or mesh.circle_radius(GAMMA0) is None:
        raise PreconditionError("check requires an annulus mesh with circular boundaries")
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    order = np.argsort(r, kind="stable")
    rings, start = [], 0
    for i in range(1, len(order) + 1):
        if i == len(order) or r[order[i]] - r[order[start]] > rtol * r[order[i]]:
            rings.append(np.sort(order[start:i]))
            start = i
    radii = np.array([r[g].mean() for g in rings])
    return radii, rings


def check_radial(spectrum: Spectrum, system: DiscreteSystem, mesh: Mesh,
                 oracle: OracleSpectrum | None = None, vector: np.ndarray | None = None,
                 flat_tol: float = 1e-6, profile_tol: float = 1e-4) -> list[CheckRecord]:
    radii, rings = annulus_rings(mesh)
    u = spectrum.vectors[:, 0] if vector is None else np.asarray(vector)
    u = system.to_vertices(u * np.sign(u[np.argmax(np.abs(u))]))
    umax = float(np.abs(u).max())
    spread = max(float(np.ptp(u[g])) for g in rings) / umax
    avg = np.array([u[g].mean() for g in rings])
    steps = np.diff(avg)
    recs = [
        _record("radial_flatness", ANCHOR_RADIAL, spread <= flat_tol, spread, flat_tol,
                "max over rings of (max - min) / max|u|"),
        _record("radial_decreasing", ANCHOR_RADIAL, bool(np.all(steps < 0)),
                float(steps.max() / umax), 0.0, "largest consecutive ring-average increment"),
    ]
    if oracle is not None:
        ground = oracle.ground()
        if ground.m != 0:
            recs.append(_record("radial_oracle_profile", ANCHOR_RADIAL, False, math.inf,
                                profile_tol, "oracle ground mode is not radial"))
            return recs
        w = integrate(ground.problem, ground.lam, dense=True).sol(radii)[0]
        dev = float(np.abs(avg / avg[0] - w).max())
        recs.append(_record("radial_oracle_profile", ANCHOR_RADIAL, dev <= profile_tol, dev,
                            profile_tol, "ring averages vs oracle profile, both 1 at the hole"))
    return recs


def check_rotation(mesh: Mesh, angle: float, k: int = 10, tol: float = 1e-10,
                   solver_tol: float = 1e-10) -> CheckRecord:
    lam = solve_smallest(build_system(mesh), k, solver_tol).lambdas
    lam_rot = solve_smallest(build_system(rotate(mesh, angle)), k, solver_tol).lambdas
    dev = float(np.max(np.abs(lam_rot - lam) / lam))
    return _record("rotation_invariance", ANCHOR_ROTATION, dev <= tol, dev, tol,
                   f"sorted spectra of the mesh and its rotation by {angle!r} rad")


def check_oracle_identity(oracle: OracleSpectrum, tol: float = 1e-9) -> list[CheckRecord]:
    ground = oracle.ground()
    rep = check_monotone(ground, tol)
    return [
        _record("oracle_ground_decreasing", ANCHOR_RADIAL, rep.max_derivative < 0,
                rep.max_derivative, 0.0, "max w' over interior profile samples"),
        _record("oracle_integrated_identity", ANCHOR_RADIAL, rep.identity_residual <= tol,
                rep.identity_residual, tol, "integrated radial equation residual"),
    ]


def cluster_errors(values, reference, rtol_cluster: float = 1e-8) -> np.ndarray:
    """Relative deviations with degenerate clusters of ``reference`` matched jointly.

    Inside each reference cluster the candidate values are compared as a
    sorted set against the cluster value, never pairwise by position in
    the solver output.
    """
    values = np.sort(np.asarray(values, dtype=float))
    reference = np.sort(np.asarray(reference, dtype=float))
    n = min(len(values), len(reference))
    out = np.empty(n)
    for group in clusters(reference[:n], rtol_cluster):
        ref = reference[group].mean()
        out[group] = np.abs(np.sort(values[group]) - ref) / abs(ref)
    return out


def check_dense_agreement(system: DiscreteSystem, spectrum: Spectrum, tol: float = 1e-9,
                          name: str = "solver_vs_dense") -> CheckRecord:
    lam, _ = dense_eigh(system)
    err = cluster_errors(spectrum.lambdas, lam[: len(spectrum)])
    return _record(name, ANCHOR_PLUMBING, float(err.max()) <= tol, float(err.max()), tol,
                   f"dimension {system.dim}, k = {len(spectrum)}")


# ---------------------------------------------------------------------------
# Convergence


def richardson(values: np.ndarray, ratio: float = 2.0, order: float = 2.0) -> np.ndarray:
    """Extrapolate a sequence of mesh levels, removing error terms h^order, h^(2 order), ...

    ``values`` has shape (levels, k); level ``i+1`` uses mesh size ``h / ratio``.
    Returns the fully extrapolated row.
    """
    table = np.asarray(values, dtype=float)
    p = order
    while len(table) > 1:
        f = ratio**p
        table = (f * table[1:] - table[:-1]) / (f - 1.0)
        p += order
    return table[0]


def fit_order(h: np.ndarray, errors: np.ndarray) -> np.ndarray:
    """Least-squares slope of log|error| against log h, per column."""
    x = np.log(np.asarray(h))
    y = np.log(np.abs(errors))
    x0 = x - x.mean()
    return (x0 @ (y - y.mean(axis=0))) / (x0 @ x0)


@dataclass
class ConvergenceTable:
    h: np.ndarray
    lambdas: np.ndarray
    reference: np.ndarray
    errors: np.ndarray
    orders: np.ndarray
    extrapolated: np.ndarray
    extrapolated_errors: np.ndarray
    dims: list

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in asdict(self).items()}

    def to_text(self) -> str:
        k = self.lambdas.shape[1]
        lines = ["n  oracle            " + "  ".join(f"err(h={h:.4f})" for h in self.h)
                 + "  order   extrapolated      rel.err"]
        for j in range(k):
            lines.append(
                f"{j + 1:<2} {self.reference[j]:<17.12f} "
                + "  ".join(f"{e:<13.4e}" for e in self.errors[:, j])
                + f"  {self.orders[j]:<6.3f}  {self.extrapolated[j]:<17.12f} "
                f"{self.extrapolated_errors[j]:.2e}"
            )
        return "\n".join(lines)


def convergence_study(params: AnnulusParams, levels: int, k: int, oracle: OracleSpectrum,
                      tol: float = 1e-10) -> ConvergenceTable:
    """Eigenvalues on ``levels`` uniform refinements compared with the oracle."""
    if levels < 3:
        raise PreconditionError("convergence study needs at least 3 refinement levels")
    mesh = generate_annulus(params)
    h0 = (params.r_outer - params.r_inner) / params.n_radial
    lams, dims = [], []
    for level in range(levels):
        if level:
            mesh = refine_uniform(mesh)
        system = build_system(mesh)
        dims.append(system.dim)
        lams.append(solve_smallest(system, k, tol).lambdas)
    lams = np.array(lams)
    ref = oracle.lowest(k)
    h = h0 / 2.0 ** np.arange(levels)
    errors = np.array([cluster_errors(row, ref) for row in lams])
    extrap = richardson(lams)
    return ConvergenceTable(h, lams, ref, errors, fit_order(h, errors), extrap,
                            cluster_errors(extrap, ref), dims)


def check_convergence(table: ConvergenceTable, n_orders: int = 5, lo: float = 1.8,
                      hi: float = 2.3, agree_tol: float = 1e-5) -> list[CheckRecord]:
    p = table.orders[:n_orders]
    in_range = bool(np.all((p >= lo) & (p <= hi)))
    worst = p[np.argmax(np.abs(p - 0.5 * (lo + hi)))]
    monotone = bool(np.all(np.diff(table.errors, axis=0) < 0))
    agree = float(table.extrapolated_errors.max())
    return [
        _record("convergence_order", ANCHOR_PLUMBING, in_range, worst, lo,
                f"fitted orders {np.round(p, 4).tolist()} must lie in [{lo}, {hi}]"),
        _record("convergence_monotone", ANCHOR_PLUMBING, monotone,
                float(np.diff(table.errors, axis=0).max()), 0.0,
                "errors decrease with every refinement"),
        _record("oracle_agreement", ANCHOR_PLUMBING, agree <= agree_tol, agree, agree_tol,
                f"{table.lambdas.shape[1]} extrapolated eigenvalues vs oracle multiset"),
    ]


# ---------------------------------------------------------------------------
# Wave synthesis


def check_wave(system: DiscreteSystem, spectrum: Spectrum, n_mix: int = 5,
               periodicity_tol: float = 1e-12, drift_tol: float = 1e-9,
               samples: int = 201) -> list[CheckRecord]:
    from .wave import WaveState, energy, evaluate, mode_state, omegas_of

    om = omegas_of(spectrum)
    worst = 0.0
    for n in range(len(spectrum)):
        state = mode_state(spectrum, n)
        d0, _ = evaluate(state, spectrum, 0.0)
        d1, _ = evaluate(state, spectrum, 2 * np.pi / om[n])
        worst = max(worst, float(np.abs(d1 - d0).max() / np.abs(d0).max()))

    n_mix = min(n_mix, len(spectrum))
    coeffs = np.zeros(len(spectrum))
    coeffs[:n_mix] = 1.0 / np.arange(1, n_mix + 1)
    sin = np.zeros(len(spectrum))
    sin[:n_mix] = 0.5 * np.cos(np.arange(n_mix))
    state = WaveState(coeffs, sin, om, 0.0, spectrum.mesh_ref)
    times = np.linspace(0.0, 100.0 / om[0], samples)
    e = np.array([energy(system, spectrum, state, t) for t in times])
    drift = float(np.abs(e - e[0]).max() / e[0])
    return [
        _record("wave_periodicity", ANCHOR_PLUMBING, worst <= periodicity_tol, worst,
                periodicity_tol, "single-mode displacement after one period"),
        _record("wave_energy_drift", ANCHOR_PLUMBING, drift <= drift_tol, drift, drift_tol,
                f"{n_mix}-mode state, t in [0, 100/omega_1], {samples} samples"),
    ]


# ---------------------------------------------------------------------------
# Full suite


@dataclass
class SuiteConfig:
    r_inner: float = 1.0
    r_outer: float = 2.0
    n_radial: int = 16
    n_angular: int = 64
    k: int = 10
    tol: float = 1e-10
    seed: int = DEFAULT_SEED
    rayleigh_trials: int = 1000
    rotation_angle: float = 0.7390851332151607
    small_n_radial: int = 5
    small_n_angular: int = 40
    minmax_indices: tuple = (1, 2, 3, 4)
    conv_n_radial: int = 8
    conv_n_angular: int = 32
    conv_levels: int = 3


PRESETS = {"annulus-default": SuiteConfig()}


def run_suite(cfg: SuiteConfig, oracle: OracleSpectrum | None = None) -> VerificationReport:
    from .oracle import lowest_modes

    report = VerificationReport(metadata={"config": asdict(cfg)})
    params = AnnulusParams(cfg.r_inner, cfg.r_outer, cfg.n_radial, cfg.n_angular)
    mesh = generate_annulus(params)
    system = build_system(mesh)
    spectrum = solve_smallest(system, cfg.k, cfg.tol, seed=cfg.seed)
    if oracle is None:
        oracle = lowest_modes(cfg.r_inner, cfg.r_outer, cfg.k)
    report.metadata["mesh_ref"] = system.mesh_ref
    report.metadata["lambda"] = spectrum.lambdas.tolist()
    report.metadata["oracle_lambda"] = oracle.lowest(cfg.k).tolist()

    report.add(check_positive(spectrum))
    report.add(check_basis(spectrum, system))
    report.add(check_rayleigh(system, spectrum, cfg.rayleigh_trials, cfg.seed))
    report.add(check_ground_state(spectrum, system, mesh))
    report.add(check_radial(spectrum, system, mesh, oracle))
    report.add(check_rotation(mesh, cfg.rotation_angle, cfg.k, solver_tol=cfg.tol))
    report.add(check_oracle_identity(oracle))
    report.add(check_wave(system, spectrum))

    small = build_system(generate_annulus(
        AnnulusParams(cfg.r_inner, cfg.r_outer, cfg.small_n_radial, cfg.small_n_angular)))
    for n in cfg.minmax_indices:
        report.add(check_courant_fischer(small, n, seed=cfg.seed))
    report.add(check_dense_agreement(small, solve_smallest(small, cfg.k, cfg.tol, seed=cfg.seed)))

    table = convergence_study(
        AnnulusParams(cfg.r_inner, cfg.r_outer, cfg.conv_n_radial, cfg.conv_n_angular),
        cfg.conv_levels, cfg.k, oracle, cfg.tol)
    report.metadata["convergence"] = table.to_dict()
    report.add(check_convergence(table))
    return report
