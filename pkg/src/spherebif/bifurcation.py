"""kappa sweeps of the equilibrium branches (bifurcation diagram data)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .energy import Verdict, classify_uniform, gap_function
from .equilibrium import ModelParams, asymptotic_root, fixed_point_residuals, localized_solution, solve_eta

__all__ = [
    "Spacing",
    "SweepSpec",
    "BifurcationSample",
    "BifurcationCurve",
    "SweepError",
    "sweep",
    "sweep_grid",
    "asymptotic_eta",
    "eta_upper_bound",
]

RESIDUAL_TOL = 1e-10


class SweepError(RuntimeError):
    pass


class Spacing(enum.Enum):
    LINEAR = "linear"
    LOG_ABOVE_THRESHOLD = "log"


@dataclass(frozen=True)
class SweepSpec:
    d: int
    kappa_min: float
    kappa_max: float
    points: int
    spacing: Spacing = Spacing.LINEAR

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if not 0 < self.kappa_min < self.kappa_max:
            raise ValueError("need 0 < kappa_min < kappa_max")
        if self.points < 2:
            raise ValueError("a sweep needs at least 2 points")


@dataclass(frozen=True)
class BifurcationSample:
    kappa: float
    com_norm_uniform: float
    com_norm_localized: Optional[float]
    eta: Optional[float]
    energy_gap: Optional[float]
    uniform_stability: Verdict


@dataclass(frozen=True)
class BifurcationCurve:
    d: int
    threshold: float
    samples: tuple

    def localized(self):
        """(kappa, com_norm) pairs on the non-uniform branch."""
        return [(s.kappa, s.com_norm_localized) for s in self.samples if s.com_norm_localized is not None]


def sweep_grid(spec):
    """kappa values of a sweep, ascending.

    LOG_ABOVE_THRESHOLD puts half of the points at geometrically spaced
    offsets inside (d+1, d+1 + 0.1 (kappa_max - d - 1)] and spreads the rest
    linearly over [kappa_min, kappa_max].
    """
    thr = spec.d + 1
    if spec.spacing is Spacing.LINEAR or not spec.kappa_min < thr < spec.kappa_max:
        return np.linspace(spec.kappa_min, spec.kappa_max, spec.points)
    n_near = spec.points // 2
    span = spec.kappa_max - thr
    near = thr + np.geomspace(1e-4 * span, 0.1 * span, n_near)
    rest = np.linspace(spec.kappa_min, spec.kappa_max, spec.points - n_near)
    return np.unique(np.concatenate([near, rest]))


def sweep(spec, bracket_tol=1e-12):
    """Solve both branches at every grid kappa.

    Points are solved in ascending kappa so each root seeds the next bracket
    (eta_kappa increases with kappa).  Any per-point failure aborts with the
    offending kappa.
    """
    samples = []
    warm = None
    for kappa in sweep_grid(spec):
        kappa = float(kappa)
        params = ModelParams(spec.d, kappa)
        try:
            if warm is None and params.supercritical:
                guess = asymptotic_eta(params)
                lower = 0.5 * guess if guess is not None else None
            else:
                lower = warm
            found = solve_eta(params, bracket_tol, lower=lower)
            stability = classify_uniform(params).verdict
            if found is None:
                samples.append(BifurcationSample(kappa, 0.0, None, None, None, stability))
                continue
            eta = found[0]
            sol = localized_solution(params, eta, asymptotic=found[2])
            res = fixed_point_residuals(sol)
            if max(abs(res[0]), abs(res[1])) > RESIDUAL_TOL:
                raise SweepError(f"fixed-point residuals {res} exceed {RESIDUAL_TOL}")
            gap = gap_function(eta, params)
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            raise SweepError(f"sweep failed at kappa={kappa}: {exc}") from exc
        warm = eta
        samples.append(BifurcationSample(kappa, 0.0, sol.com_norm, eta, gap, stability))

    branch = [s.com_norm_localized for s in samples if s.com_norm_localized is not None]
    if any(b <= a for a, b in zip(branch, branch[1:])):
        raise SweepError("localized branch is not strictly increasing in kappa")
    if any(not 0.0 < c < 1.0 for c in branch):
        raise SweepError("localized centre-of-mass norm left (0, 1)")
    return BifurcationCurve(spec.d, float(spec.d + 1), tuple(samples))


def asymptotic_eta(params):
    """sqrt((d+3)(kappa-(d+1))) above threshold, ``None`` otherwise."""
    if not params.kappa > params.d + 1:
        return None
    return asymptotic_root(params)


def eta_upper_bound(params):
    """sqrt(2(d+3)(kappa-(d+1)) / (d+3-kappa)), valid for d+1 < kappa < d+3."""
    d, kappa = params.d, params.kappa
    if not d + 1 < kappa < d + 3:
        raise ValueError(f"bound needs {d + 1} < kappa < {d + 3}, got {kappa}")
    return math.sqrt(2 * (d + 3) * (kappa - (d + 1)) / (d + 3 - kappa))
