"""Critical points of the entropy + quadratic-attraction energy on S^d.

A critical point has the form rho(x) = A exp(eta <n, x>) with centre-of-mass
norm eta / kappa, where eta is a zero of

    g(eta) = (eta / kappa) I_0(eta, d) - I_1(eta, d).

g has the trivial zero eta = 0 for every kappa, and exactly one more zero
eta_kappa in (0, kappa) once kappa > d + 1.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .rootfind import brentq
from .special_math import (
    DEFAULT_QUADRATURE,
    DEFAULT_SERIES,
    ball_volume,
    moment_integral,
    scaled_moments,
    sine_moment,
    sphere_area,
)

__all__ = [
    "Kind",
    "ModelParams",
    "EquilibriumSolution",
    "RootBracket",
    "SeriesConvergenceWarning",
    "ThresholdInconsistencyError",
    "g_series",
    "g_quadrature",
    "g_scaled",
    "root_ratio",
    "find_eta",
    "solve_eta",
    "solve_equilibria",
    "uniform_solution",
    "localized_solution",
    "density_at",
    "fixed_point_residuals",
]

NEAR_THRESHOLD = 1e-8


class Kind(enum.Enum):
    UNIFORM = "Uniform"
    LOCALIZED = "Localized"

    def __str__(self):
        return self.value


class SeriesConvergenceWarning(RuntimeWarning):
    """Truncated power series still had a non-negligible tail."""


class ThresholdInconsistencyError(RuntimeError):
    """g failed to go negative near zero although kappa > d + 1."""


@dataclass(frozen=True)
class ModelParams:
    """Sphere dimension ``d`` and interaction strength ``kappa``.

    ``kappa = 0`` (pure diffusion) is admitted so the particle simulator can
    run without attraction; every equilibrium routine treats it as subcritical.
    """

    d: int
    kappa: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError(f"kappa must be finite and nonnegative, got {self.kappa!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def threshold(self):
        return self.d + 1

    @property
    def supercritical(self):
        return self.kappa > self.d + 1


@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float
    tol: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty bracket [{self.lo}, {self.hi}]")
        if self.lo < 0 or self.tol <= 0:
            raise ValueError("bracket needs lo >= 0 and tol > 0")

    @property
    def width(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class EquilibriumSolution:
    """One critical point rho(x) = A exp(eta <axis, x>).

    The normalisation is held as ``log_norm_scaled = log A + eta`` so that the
    density ``exp(log_norm_scaled + eta (<axis, x> - 1))`` never overflows.
    """

    kind: Kind
    eta: float
    log_norm_scaled: float
    params: ModelParams
    axis: np.ndarray = field(repr=False, default=None)
    asymptotic: bool = False

    def __post_init__(self):
        if self.axis is None:
            axis = np.zeros(self.params.d + 1)
            axis[0] = 1.0
            object.__setattr__(self, "axis", axis)
        if (self.kind is Kind.UNIFORM) != (self.eta == 0.0):
            raise ValueError("eta must be zero exactly for the uniform equilibrium")

    @property
    def d(self):
        return self.params.d

    @property
    def kappa(self):
        return self.params.kappa

    @property
    def log_norm_const(self):
        return self.log_norm_scaled - self.eta

    @property
    def norm_const(self):
        return math.exp(self.log_norm_const)

    @property
    def com_norm(self):
        if self.kind is Kind.UNIFORM:
            return 0.0
        return self.eta / self.params.kappa


def _require_positive_kappa(params):
    if params.kappa <= 0:
        raise ValueError("g is undefined for kappa = 0")


def g_series(eta, params, scfg=DEFAULT_SERIES):
    """Power series of g in eta, truncated at ``scfg.max_terms`` terms.

    Emits :class:`SeriesConvergenceWarning` when the last retained term is
    still larger than ``tail_tol`` relative to the accumulated magnitude.
    """
    _require_positive_kappa(params)
    eta = float(eta)
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    d, kappa = params.d, params.kappa
    if eta == 0.0:
        return 0.0
    smom = sine_moment(d)
    eta2 = eta * eta
    # base_m = eta^(2m+1) / (2m)! * A(m)
    base = eta
    total = 0.0
    magnitude = 0.0
    converged = False
    for m in range(scfg.max_terms):
        total += base * (1.0 / kappa - 1.0 / (d + 2 * m + 1))
        magnitude += base
        if 2 * m + 1 > eta and base <= scfg.tail_tol * magnitude:
            converged = True
            break
        base *= eta2 / ((2 * m + 1) * (2 * m + 2)) * (2 * m + 1) / (d + 2 * m + 1)
    if not converged and base > scfg.tail_tol * magnitude:
        warnings.warn(
            f"g series truncated at {scfg.max_terms} terms with relative tail "
            f"{base / magnitude:.2e} at eta={eta}",
            SeriesConvergenceWarning,
            stacklevel=2,
        )
    return total * smom


def g_quadrature(eta, params, qcfg=DEFAULT_QUADRATURE):
    """g(eta) from the moment integrals I_0 and I_1 directly."""
    _require_positive_kappa(params)
    if eta == 0:
        # odd in eta; skip the quadrature's roundoff in I_1(0)
        return 0.0
    i0 = moment_integral(0, eta, params.d, qcfg)
    i1 = moment_integral(1, eta, params.d, qcfg)
    return eta / params.kappa * i0 - i1


def g_scaled(eta, params, qcfg=DEFAULT_QUADRATURE):
    """exp(-eta) * g(eta); same sign as g and finite for every eta."""
    _require_positive_kappa(params)
    if eta == 0:
        return 0.0
    i0, i1 = scaled_moments(eta, params.d, (0, 1), qcfg)
    return eta / params.kappa * i0 - i1


def root_ratio(eta, d, scfg=DEFAULT_SERIES):
    """h(eta) = h1(eta) / h2(eta); the positive root of g solves h(eta) = kappa.

    h1 = sum eta^(2m) A(m) / (2m)!,  h2 = sum eta^(2m) A(m) / ((2m)! (d+2m+1)).
    """
    eta2 = float(eta) ** 2
    term = 1.0
    h1 = h2 = 0.0
    for m in range(scfg.max_terms):
        h1 += term
        h2 += term / (d + 2 * m + 1)
        if 2 * m > eta and term <= scfg.tail_tol * h1:
            break
        term *= eta2 / ((2 * m + 1) * (2 * m + 2)) * (2 * m + 1) / (d + 2 * m + 1)
    return h1 / h2


def asymptotic_root(params):
    """Leading-order root sqrt((d+3)(kappa-(d+1))) just above threshold."""
    return math.sqrt((params.d + 3) * (params.kappa - (params.d + 1)))


def solve_eta(params, bracket_tol=1e-12, lower=None, qcfg=DEFAULT_QUADRATURE):
    """Locate the positive zero of g.

    Returns ``(eta, bracket, asymptotic)`` or ``None`` when kappa <= d + 1.
    ``lower`` may supply a point already known to satisfy g < 0 (warm start).
    """
    if not params.kappa > params.d + 1:
        return None
    excess = params.kappa - (params.d + 1)
    if excess < NEAR_THRESHOLD:
        eta = asymptotic_root(params)
        return eta, RootBracket(eta, eta + bracket_tol, bracket_tol), True

    def g(x):
        return g_scaled(x, params, qcfg)

    delta = None
    if lower is not None and 0 < lower < params.kappa and g(lower) < 0:
        delta = float(lower)
    else:
        trial = bracket_tol * params.kappa
        for _ in range(7):
            if g(trial) < 0:
                delta = trial
                break
            trial *= 10.0
    if delta is None:
        raise ThresholdInconsistencyError(
            f"g stayed nonnegative near 0 for d={params.d}, kappa={params.kappa} > d+1"
        )
    eta, lo, hi = brentq(g, delta, params.kappa, xtol=bracket_tol)
    if not lo < hi:
        hi = lo + bracket_tol
    return eta, RootBracket(lo, hi, bracket_tol), False


def find_eta(params, bracket_tol=1e-12, qcfg=DEFAULT_QUADRATURE):
    """Positive zero eta_kappa of g, or ``None`` when kappa <= d + 1."""
    found = solve_eta(params, bracket_tol, qcfg=qcfg)
    return None if found is None else found[0]


def uniform_solution(params):
    return EquilibriumSolution(Kind.UNIFORM, 0.0, -math.log(sphere_area(params.d)), params)


def localized_solution(params, eta, qcfg=DEFAULT_QUADRATURE, asymptotic=False):
    """Package the vMF critical point with normalisation A = 1 / (d w_d I_0)."""
    d = params.d
    i0 = scaled_moments(eta, d, (0,), qcfg)[0]
    log_scaled = -math.log(d * ball_volume(d)) - math.log(i0)
    return EquilibriumSolution(Kind.LOCALIZED, float(eta), log_scaled, params, asymptotic=asymptotic)


def solve_equilibria(params, bracket_tol=1e-12, qcfg=DEFAULT_QUADRATURE):
    """All critical points for (d, kappa): [Uniform] or [Uniform, Localized]."""
    out = [uniform_solution(params)]
    found = solve_eta(params, bracket_tol, qcfg=qcfg)
    if found is not None:
        eta, _, asym = found
        out.append(localized_solution(params, eta, qcfg, asymptotic=asym))
    return out


def density_at(sol, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (sol.d + 1,):
        raise ValueError(f"expected a point in R^{sol.d + 1}, got shape {x.shape}")
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValueError("density_at needs a unit vector")
    return math.exp(sol.log_norm_scaled + sol.eta * (float(sol.axis @ x) - 1.0))


def fixed_point_residuals(sol, qcfg=DEFAULT_QUADRATURE):
    """Residuals of the normalisation and centre-of-mass equations.

    Returns ``(A d w_d I_0 - 1, A d w_d I_1 - eta / kappa)``.
    """
    d = sol.d
    i0, i1 = scaled_moments(sol.eta, d, (0, 1), qcfg)
    pref = math.exp(sol.log_norm_scaled) * d * ball_volume(d)
    return pref * i0 - 1.0, pref * i1 - sol.com_norm
