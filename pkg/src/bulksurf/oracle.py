"""Shooting oracle for the annulus with a dynamic inner boundary.

Separating variables ``u = w(rho) cos(m theta)`` on the annulus
``R1 < rho < R2`` (dimension N, ``m = 0`` for N > 2) turns the coupled
problem into the radial equation

    -w'' - (N-1)/rho w' + m^2/rho^2 w = lam w,      R1 < rho < R2,
    -w'(R1) + m^2/R1^2 w(R1) = lam w(R1),           w(R2) = 0.

The inner condition comes from the outward normal at the hole pointing
toward the origin (so the normal derivative is ``-w'``) and the circle's
Laplace-Beltrami operator acting on ``cos(m theta)``. Integrating from R1
with ``w(R1) = 1`` makes ``w(R2; lam)`` a continuous function of ``lam``
whose zeros are exactly the eigenvalues of the mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

RK_METHOD = "DOP853"
RK_RTOL = 1e-12
RK_ATOL = 1e-14


class OracleError(RuntimeError):
    pass


class ResolutionError(OracleError):
    """The root scan could not isolate the sign changes of the mismatch."""


@dataclass(frozen=True)
class RadialProblem:
    r_inner: float = 1.0
    r_outer: float = 2.0
    dim: int = 2
    m: int = 0

    def __post_init__(self):
        if not 0 < self.r_inner < self.r_outer:
            raise ValueError(f"need 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.m < 0:
            raise ValueError("angular mode must be >= 0")
        if self.m > 0 and self.dim != 2:
            raise ValueError("angular modes m > 0 are only supported for dim = 2")


@dataclass(frozen=True, eq=False)
class RadialMode:
    """One eigenvalue of a single angular mode with its sampled profile.

    ``rho``, ``w`` and ``dw`` sample the profile and its derivative on a
    uniform grid from R1 to R2, normalized so that ``w[0] == 1``.
    """

    problem: RadialProblem
    lam: float
    index: int
    rho: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    dw: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.problem.m

    @property
    def multiplicity(self) -> int:
        return 1 if self.m == 0 else 2

    def interior_zeros(self) -> int:
        s = np.sign(self.w[1:-1])
        s = s[s != 0]
        return int(np.count_nonzero(s[1:] != s[:-1]))

    def to_dict(self, with_profile=True) -> dict:
        out = {"m": self.m, "lambda": self.lam, "multiplicity": self.multiplicity,
               "index": self.index}
        if with_profile:
            out["profile"] = {"rho": self.rho.tolist(), "w": self.w.tolist()}
        return out


@dataclass(frozen=True, eq=False)
class OracleSpectrum:
    r_inner: float
    r_outer: float
    dim: int
    lambda_max: float
    modes: tuple

    def values(self) -> np.ndarray:
        """Merged eigenvalue multiset, ascending, each repeated by multiplicity."""
        vals = [mode.lam for mode in self.modes for _ in range(mode.multiplicity)]
        return np.array(sorted(vals))

    def lowest(self, k: int) -> np.ndarray:
        vals = self.values()
        if len(vals) < k:
            raise OracleError(f"oracle holds only {len(vals)} values below {self.lambda_max}")
        return vals[:k]

    def ground(self) -> RadialMode:
        return min(self.modes, key=lambda md: (md.lam, md.m))

    def to_dict(self, with_profile=True) -> dict:
        return {
            "r_inner": self.r_inner,
            "r_outer": self.r_outer,
            "dim": self.dim,
            "lambda_max": self.lambda_max,
            "modes": [md.to_dict(with_profile) for md in self.modes],
        }


def _rhs(rho, y, lam, m, dim):
    w, dw = y
    return [dw, -(dim - 1) / rho * dw + (m * m / (rho * rho) - lam) * w]


def integrate(problem: RadialProblem, lam: float, rtol=RK_RTOL, dense=False,
              initial=None):
    """Integrate the radial ODE from R1 to R2 with adaptive Dormand-Prince 8(5,3)."""
    p = problem
    if initial is None:
        initial = (1.0, p.m * p.m / p.r_inner**2 - lam)
    sol = solve_ivp(
        _rhs, (p.r_inner, p.r_outer), list(initial), method=RK_METHOD,
        rtol=rtol, atol=RK_ATOL * rtol / RK_RTOL, args=(lam, p.m, p.dim),
        dense_output=dense,
    )
    if not sol.success:
        raise OracleError(f"integration failed at lam={lam}: {sol.message}")
    return sol


def shoot(problem: RadialProblem, lam: float, rtol: float = RK_RTOL) -> float:
    """Mismatch ``w(R2)`` for the profile started at R1 with the dynamic condition."""
    return float(integrate(problem, lam, rtol).y[0, -1])


def bisect(f, lo: float, hi: float, flo: float, fhi: float, rel_width: float = 1e-12) -> float:
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError("bracket does not contain a sign change")
    while hi - lo > rel_width * abs(hi):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return 0.5 * (lo + hi)


def _scan_roots(f, lambda_max, n0=200, max_halvings=8):
    """Brackets of sign changes of ``f`` on (0, lambda_max].

    The grid doubles until two successive grids report the same root count.
    """
    cache = {}

    def g(x):
        if x not in cache:
            cache[x] = f(x)
        return cache[x]

    def brackets(n):
        xs = lambda_max * np.arange(n + 1) / n
        fs = np.array([g(x) for x in xs])
        out = []
        for i in range(n):
            if fs[i] == 0.0 and i > 0:
                continue
            if fs[i] == 0.0 or fs[i + 1] == 0.0 or np.sign(fs[i]) != np.sign(fs[i + 1]):
                out.append((xs[i], xs[i + 1], fs[i], fs[i + 1]))
        return out

    n = n0
    prev = brackets(n)
    for _ in range(max_halvings):
        n *= 2
        cur = brackets(n)
        if len(cur) == len(prev):
            return cur
        prev = cur
    raise ResolutionError(
        f"root count on (0, {lambda_max}] did not stabilize after {max_halvings} grid halvings"
    )


def sample_profile(problem: RadialProblem, lam: float, n_samples: int = 2001,
                   rtol: float = RK_RTOL):
    sol = integrate(problem, lam, rtol, dense=True)
    rho = np.linspace(problem.r_inner, problem.r_outer, n_samples)
    y = sol.sol(rho)
    return rho, y[0], y[1]


def modes_of(problem: RadialProblem, lambda_max: float, rtol: float = RK_RTOL,
             n_samples: int = 2001) -> list[RadialMode]:
    """All eigenvalues of one angular mode in (0, lambda_max], ascending."""
    f = lambda lam: shoot(problem, lam, rtol)
    out = []
    for i, (lo, hi, flo, fhi) in enumerate(_scan_roots(f, lambda_max)):
        lam = bisect(f, lo, hi, flo, fhi)
        rho, w, dw = sample_profile(problem, lam, n_samples, rtol)
        out.append(RadialMode(problem, lam, i + 1, rho, w, dw))
    return out


def find_modes(r_inner: float, r_outer: float, dim: int = 2, m_max: int = 6,
               lambda_max: float = 20.0, rtol: float = RK_RTOL,
               n_samples: int = 2001) -> OracleSpectrum:
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    if dim != 2:
        m_max = 0
    modes = []
    for m in range(m_max + 1):
        modes += modes_of(RadialProblem(r_inner, r_outer, dim, m), lambda_max, rtol, n_samples)
    modes.sort(key=lambda md: (md.lam, md.m))
    return OracleSpectrum(r_inner, r_outer, dim, lambda_max, tuple(modes))


def lowest_modes(r_inner: float, r_outer: float, count: int, rtol: float = RK_RTOL,
                 n_samples: int = 2001) -> OracleSpectrum:
    """Oracle spectrum guaranteed to contain the ``count`` smallest values (dim 2).

    The cutoff doubles until enough values are found; angular modes are added
    until one has no eigenvalue below the cutoff, which bounds all higher
    modes too because the lowest value of a mode increases with ``m``.
    """
    # Weyl leading term N(lam) ~ area * lam / (4 pi), with a 25% margin
    area = np.pi * (r_outer**2 - r_inner**2)
    lambda_max = 1.25 * 4.0 * np.pi * count / area
    while True:
        modes, m = [], 0
        while True:
            found = modes_of(RadialProblem(r_inner, r_outer, 2, m), lambda_max, rtol, n_samples)
            if not found:
                break
            modes += found
            m += 1
        total = sum(md.multiplicity for md in modes)
        if total >= count:
            modes.sort(key=lambda md: (md.lam, md.m))
            return OracleSpectrum(r_inner, r_outer, 2, lambda_max, tuple(modes))
        lambda_max *= 2.0


@dataclass
class MonotoneReport:
    passed: bool
    max_derivative: float
    identity_residual: float
    offending_rho: float | None = None
    message: str = ""


def identity_residual(mode: RadialMode) -> np.ndarray:
    """Pointwise residual of the integrated radial equation on the profile grid.

    ``rho^(N-1) w'(rho) + lam * int_{R1}^{rho} t^(N-1) w dt + lam R1^(N-1) w(R1)``
    vanishes identically for the ground mode with m = 0.
    """
    n1 = mode.problem.dim - 1
    rho = mode.rho
    integral = cumulative_simpson(rho**n1 * mode.w, x=rho, initial=0.0)
    return (rho**n1 * mode.dw + mode.lam * integral
            + mode.lam * mode.rho[0] ** n1 * mode.w[0])


def check_monotone(mode: RadialMode, tol: float = 1e-9) -> MonotoneReport:
    """Strict decrease of the ground profile and the integrated-equation identity."""
    if mode.m != 0:
        raise ValueError("monotonicity is asserted for the m = 0 ground mode only")
    interior = mode.dw[1:-1]
    resid = identity_residual(mode)
    max_dw = float(interior.max())
    max_res = float(np.abs(resid).max())
    if max_dw >= 0.0:
        i = int(np.argmax(interior)) + 1
        return MonotoneReport(False, max_dw, max_res, float(mode.rho[i]),
                              f"w' = {mode.dw[i]:.3e} >= 0 at rho = {mode.rho[i]:.6f}")
    if max_res > tol:
        i = int(np.argmax(np.abs(resid)))
        return MonotoneReport(False, max_dw, max_res, float(mode.rho[i]),
                              f"identity residual {resid[i]:.3e} at rho = {mode.rho[i]:.6f}")
    return MonotoneReport(True, max_dw, max_res)
