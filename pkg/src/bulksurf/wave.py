"""Standing waves and Fourier superpositions for the wave equation with
hyperbolic dynamic boundary conditions.

Given M-orthonormal eigenpairs ``(lam_n, u_n)`` of the pencil, the
semi-discrete problem ``M d'' + A d = 0`` is solved exactly by

    d(t) = sum_n (a_n cos(w_n t) + b_n sin(w_n t)) u_n,   w_n = sqrt(lam_n).

No time stepping is involved.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .assembly import DiscreteSystem
from .eigen import Spectrum


class WaveError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WaveState:
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    omegas: np.ndarray
    time: float = 0.0
    basis_ref: str | None = None
    truncation_residual: float = 0.0

    def __post_init__(self):
        om = np.asarray(self.omegas)
        if np.any(om <= 0) or np.any(np.diff(om) < 0):
            raise WaveError("frequencies must be positive and ascending")

    def __add__(self, other: "WaveState") -> "WaveState":
        if not np.array_equal(self.omegas, other.omegas):
            raise WaveError("states live on different eigenbases")
        return WaveState(self.cos_coeffs + other.cos_coeffs, self.sin_coeffs + other.sin_coeffs,
                         self.omegas, self.time, self.basis_ref)


def omegas_of(spectrum: Spectrum) -> np.ndarray:
    return np.sqrt(spectrum.lambdas)


def mode_state(spectrum: Spectrum, n: int, cos=1.0, sin=0.0) -> WaveState:
    """Single standing wave in mode ``n`` (0-based)."""
    k = len(spectrum)
    a, b = np.zeros(k), np.zeros(k)
    a[n], b[n] = cos, sin
    return WaveState(a, b, omegas_of(spectrum), 0.0, spectrum.mesh_ref)


def _free(system: DiscreteSystem, values, name) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape == (system.dim,):
        return values
    if values.shape != (system.n_vertices,):
        raise WaveError(f"{name} must have one value per vertex or per free dof")
    pinned = np.ones(system.n_vertices, dtype=bool)
    pinned[system.free_dofs] = False
    if np.any(values[pinned] != 0.0):
        raise WaveError(f"{name} must vanish on Gamma0 vertices")
    return values[system.free_dofs]


def project_initial_data(system: DiscreteSystem, spectrum: Spectrum, w0, w1) -> WaveState:
    """Expand displacement ``w0`` and velocity ``w1`` in the truncated eigenbasis.

    Vertex-indexed data must vanish on Gamma0; free-dof vectors are accepted
    as is. The M-norm of the part of ``w0`` the basis misses is stored in
    ``truncation_residual``.
    """
    d0 = _free(system, w0, "w0")
    v0 = _free(system, w1, "w1")
    U = spectrum.vectors
    om = omegas_of(spectrum)
    a = U.T @ (system.M @ d0)
    b = (U.T @ (system.M @ v0)) / om
    rest = d0 - U @ a
    trunc = float(np.sqrt(max(rest @ (system.M @ rest), 0.0)))
    return WaveState(a, b, om, 0.0, spectrum.mesh_ref, trunc)


def evaluate(state: WaveState, spectrum: Spectrum, t: float):
    """Displacement and velocity (free dofs) at time ``t``."""
    wt = state.omegas * t
    c, s = np.cos(wt), np.sin(wt)
    disp = spectrum.vectors @ (state.cos_coeffs * c + state.sin_coeffs * s)
    vel = spectrum.vectors @ (state.omegas * (state.sin_coeffs * c - state.cos_coeffs * s))
    return disp, vel


def energy(system: DiscreteSystem, spectrum: Spectrum, state: WaveState, t: float) -> float:
    """``E(t) = (v^T M v + d^T A d) / 2``."""
    d, v = evaluate(state, spectrum, t)
    return 0.5 * float(v @ (system.M @ v) + d @ (system.A @ d))


def modal_energy(spectrum: Spectrum, state: WaveState) -> float:
    return 0.5 * float(np.sum(spectrum.lambdas * (state.cos_coeffs**2 + state.sin_coeffs**2)))


def energy_series(system, spectrum, state, times, probes=()):
    rows = []
    for t in times:
        d, _ = evaluate(state, spectrum, t)
        vals = system.to_vertices(d)
        rows.append([float(t), energy(system, spectrum, state, t)]
                    + [float(vals[p]) for p in probes])
    return rows


def write_energy_csv(path, rows, probes=()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "E"] + [f"d{p}" for p in probes])
        for row in rows:
            writer.writerow([repr(x) for x in row])
