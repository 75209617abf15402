"""Free energy of equilibria and of the von Mises-Fisher trial path.

All energies use the centre-of-mass form

    E[rho] = int rho log rho dS - (kappa / 2) |c_rho|^2 + kappa / 2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp, roots_jacobi

from .equilibrium import Kind, g_scaled, solve_eta
from .special_math import DEFAULT_QUADRATURE, ball_volume, scaled_moments, sphere_area

__all__ = [
    "EnergyReport",
    "StabilityReport",
    "Verdict",
    "VMFMixture",
    "energy_of",
    "energy_gap",
    "gap_function",
    "gap_derivative",
    "path_energy",
    "path_energy_derivatives",
    "classify_uniform",
    "entropy_inequality_residual",
    "sphere_rule",
    "MARGINAL_TOL",
]

MARGINAL_TOL = 1e-10
CONSISTENCY_TOL = 1e-8


class Verdict(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EnergyReport:
    value: float
    entropy_part: float
    interaction_part: float
    com_norm: float


@dataclass(frozen=True)
class StabilityReport:
    first_derivative: float
    second_derivative: float
    verdict: Verdict


def _log_dwd(d):
    return math.log(d * ball_volume(d))


def energy_of(sol, params, qcfg=DEFAULT_QUADRATURE):
    """Energy of a critical point returned by the equilibrium solver."""
    if sol.params.d != params.d or sol.params.kappa != params.kappa:
        raise ValueError("equilibrium was solved for different parameters")
    d, kappa = params.d, params.kappa
    if sol.kind is Kind.UNIFORM:
        entropy = -math.log(sphere_area(d))
        return EnergyReport(entropy + kappa / 2, entropy, kappa / 2, 0.0)
    eta = sol.eta
    i0, i1 = scaled_moments(eta, d, (0, 1), qcfg)
    # g(eta)/I_0 is the centre-of-mass mismatch; a true critical point has none
    if abs(g_scaled(eta, params, qcfg) / i0) > CONSISTENCY_TOL:
        raise ValueError(f"eta={eta} is not a critical point for d={d}, kappa={kappa}")
    log_a = sol.log_norm_const
    # A d w_d I_1 with the exp(eta) factors cancelled
    mean_cos = math.exp(sol.log_norm_scaled + _log_dwd(d)) * i1
    entropy = log_a + eta * mean_cos
    interaction = -eta * eta / (2 * kappa) + kappa / 2
    return EnergyReport(entropy + interaction, entropy, interaction, sol.com_norm)


def gap_function(eta, params, qcfg=DEFAULT_QUADRATURE):
    """f(eta) = -log I_0 - log(d w_d) + eta^2 / (2 kappa) + log|S^d|."""
    d = params.d
    log_i0 = math.log(scaled_moments(eta, d, (0,), qcfg)[0]) + eta
    return -log_i0 - _log_dwd(d) + eta * eta / (2 * params.kappa) + math.log(sphere_area(d))


def gap_derivative(eta, params, qcfg=DEFAULT_QUADRATURE):
    """f'(eta) = -I_1 / I_0 + eta / kappa."""
    i0, i1 = scaled_moments(eta, params.d, (0, 1), qcfg)
    return -i1 / i0 + eta / params.kappa


def energy_gap(params, bracket_tol=1e-12, qcfg=DEFAULT_QUADRATURE):
    """E[localized] - E[uniform] = f(eta_kappa), or ``None`` if subcritical."""
    found = solve_eta(params, bracket_tol, qcfg=qcfg)
    if found is None:
        return None
    return gap_function(found[0], params, qcfg)


def _weighted_moments(eta, d, qcfg):
    i0, i1, i2, i3 = scaled_moments(eta, d, (0, 1, 2, 3), qcfg)
    return i0, i1 / i0, i2 / i0, i3 / i0


def path_energy(eta, params, qcfg=DEFAULT_QUADRATURE):
    """Energy of rho^eta = A_eta exp(eta <x, n>) for any eta >= 0."""
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    d, kappa = params.d, params.kappa
    i0, m1, _, _ = _weighted_moments(eta, d, qcfg)
    log_norm = _log_dwd(d) + math.log(i0) + eta
    return -log_norm + eta * m1 - 0.5 * kappa * m1 * m1 + 0.5 * kappa


def path_energy_derivatives(eta, params, qcfg=DEFAULT_QUADRATURE):
    """First and second eta-derivatives of :func:`path_energy`."""
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    kappa = params.kappa
    _, m1, m2, m3 = _weighted_moments(eta, params.d, qcfg)
    var = m2 - m1 * m1
    drive = eta - kappa * m1
    first = drive * var
    second = (1.0 - kappa * var) * var + drive * (m3 - 3.0 * m2 * m1 + 2.0 * m1**3)
    return first, second


def classify_uniform(params):
    d1 = params.d + 1
    second = (1.0 - params.kappa / d1) / d1
    if params.kappa == d1 or abs(second) <= MARGINAL_TOL:
        verdict = Verdict.MARGINAL
    elif second > 0:
        verdict = Verdict.STABLE
    else:
        verdict = Verdict.UNSTABLE
    return StabilityReport(0.0, second, verdict)


# --- functional inequality -------------------------------------------------


@dataclass(frozen=True)
class VMFMixture:
    """Finite mixture sum_k w_k vMF(mu_k, eta_k) on S^d."""

    weights: np.ndarray
    concentrations: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        eta = np.atleast_1d(np.asarray(self.concentrations, dtype=float))
        mu = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if not (len(w) == len(eta) == len(mu)):
            raise ValueError("weights, concentrations and directions must have equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(eta < 0) or not np.all(np.isfinite(eta)):
            raise ValueError("concentrations must be finite and nonnegative")
        if np.any(np.abs(np.linalg.norm(mu, axis=1) - 1.0) > 1e-9):
            raise ValueError("mixture directions must be unit vectors")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "concentrations", eta)
        object.__setattr__(self, "directions", mu)

    @property
    def dim(self):
        return self.directions.shape[1] - 1

    @classmethod
    def uniform(cls, d):
        axis = np.zeros(d + 1)
        axis[0] = 1.0
        return cls([1.0], [0.0], [axis])

    def log_norms(self, qcfg=DEFAULT_QUADRATURE):
        """log A_k for every component."""
        d = self.dim
        return np.array(
            [-_log_dwd(d) - math.log(scaled_moments(e, d, (0,), qcfg)[0]) - e for e in self.concentrations]
        )

    def centre_of_mass(self, qcfg=DEFAULT_QUADRATURE):
        d = self.dim
        mean_cos = np.array(
            [np.divide(*scaled_moments(e, d, (1, 0), qcfg)) for e in self.concentrations]
        )
        return (self.weights * mean_cos) @ self.directions

    def log_density(self, x, qcfg=DEFAULT_QUADRATURE):
        x = np.atleast_2d(x)
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        terms = log_w + self.log_norms(qcfg) + (x @ self.directions.T) * self.concentrations
        return logsumexp(terms, axis=1)


@lru_cache(maxsize=16)
def sphere_rule(d, n):
    """Product quadrature on S^d, exact for polynomials of degree < ~2n.

    S^1 uses 2n equispaced angles.  S^d splits x = (t, sqrt(1-t^2) y) with
    y in S^(d-1) and integrates t against (1-t^2)^((d-2)/2) by Gauss-Jacobi.
    Returns ``(points, weights)``; the weights sum to |S^d|.
    """
    if d == 1:
        phi = 2 * math.pi * np.arange(2 * n) / (2 * n)
        pts = np.column_stack([np.cos(phi), np.sin(phi)])
        wts = np.full(2 * n, 2 * math.pi / (2 * n))
    else:
        t, wt = roots_jacobi(n, 0.5 * (d - 2), 0.5 * (d - 2))
        sub_pts, sub_wts = sphere_rule(d - 1, n)
        radial = np.sqrt(1.0 - t * t)
        pts = np.concatenate(
            [np.column_stack([np.full(len(sub_pts), ti), ri * sub_pts]) for ti, ri in zip(t, radial)]
        )
        wts = np.outer(wt, sub_wts).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def _coaxial_axis(mix):
    ref = mix.directions[0]
    dots = mix.directions @ ref
    if np.all(np.abs(np.abs(dots) - 1.0) <= 1e-12):
        return ref, np.sign(dots)
    return None, None


def _entropy_coaxial(mix, ref, signs, qcfg):
    d = mix.dim
    n = max(qcfg.node_count, 256)
    x, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * math.pi * (x + 1.0)
    w = 0.5 * math.pi * w * d * ball_volume(d) * np.sin(theta) ** (d - 1)
    c = np.cos(theta)
    with np.errstate(divide="ignore"):
        log_w = np.log(mix.weights)
    terms = log_w + mix.log_norms(qcfg) + np.outer(c, signs * mix.concentrations)
    log_rho = logsumexp(terms, axis=1)
    return float(np.sum(w * np.exp(log_rho) * log_rho))


def entropy_inequality_residual(mix, d=None, nodes=None, qcfg=DEFAULT_QUADRATURE):
    """int rho log rho + log|S^d| - ((d+1)/2) |c_rho|^2 for a vMF mixture.

    Nonnegative for every density, zero only for the uniform one.
    Co-axial mixtures reduce to one polar-angle integral; general mixtures
    use :func:`sphere_rule`.
    """
    if d is None:
        d = mix.dim
    if mix.dim != d:
        raise ValueError(f"mixture lives on S^{mix.dim}, not S^{d}")
    ref, signs = _coaxial_axis(mix)
    if ref is not None:
        entropy = _entropy_coaxial(mix, ref, signs, qcfg)
    else:
        if nodes is None:
            nodes = min(256, 32 + 2 * math.ceil(float(mix.concentrations.max())))
        pts, wts = sphere_rule(d, nodes)
        log_rho = mix.log_density(pts, qcfg)
        entropy = float(np.sum(wts * np.exp(log_rho) * log_rho))
    if not math.isfinite(entropy):
        raise ArithmeticError("entropy quadrature produced a non-finite value")
    com = mix.centre_of_mass(qcfg)
    return entropy + math.log(sphere_area(d)) - 0.5 * (d + 1) * float(com @ com)
