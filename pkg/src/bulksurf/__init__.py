"""Finite elements for the bulk/surface eigenproblem with a dynamic boundary.

    -Laplace u = lam u in the domain, u = 0 on Gamma0,
    -LaplaceBeltrami u + du/dn = lam u on Gamma1.
"""

__version__ = "0.1.0"

from .assembly import DiscreteSystem, build_system
from .eigen import Spectrum, dense_eigh, factorize, rayleigh_quotient, solve_smallest
from .mesh import (GAMMA0, GAMMA1, AnnulusParams, Mesh, generate_annulus, load_mesh,
                   refine_uniform, rotate, save_mesh)
from .oracle import RadialProblem, find_modes, lowest_modes, shoot

__all__ = [
    "GAMMA0", "GAMMA1", "AnnulusParams", "DiscreteSystem", "Mesh", "RadialProblem",
    "Spectrum", "build_system", "dense_eigh", "factorize", "find_modes", "generate_annulus",
    "load_mesh", "lowest_modes", "rayleigh_quotient", "refine_uniform", "rotate", "save_mesh",
    "shoot", "solve_smallest",
]
