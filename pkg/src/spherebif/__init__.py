"""Equilibria, bifurcation and particle simulation for the entropy + attraction
free energy on spheres and products of spheres."""

__version__ = "0.1.0"

from .equilibrium import EquilibriumSolution, Kind, ModelParams, find_eta, solve_equilibria  # noqa: E402
from .energy import classify_uniform, energy_gap, energy_of  # noqa: E402

__all__ = [
    "__version__",
    "EquilibriumSolution",
    "Kind",
    "ModelParams",
    "find_eta",
    "solve_equilibria",
    "classify_uniform",
    "energy_gap",
    "energy_of",
]
