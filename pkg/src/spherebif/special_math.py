"""Sphere-geometry constants, moment integrals and series coefficients.

Every angular integral in the package has the form

    I_k(eta, d) = int_0^pi cos^k(t) exp(eta cos t) sin^(d-1)(t) dt

and is evaluated here with a fixed Gauss-Legendre rule on [0, pi].  Large
concentrations overflow double precision, so the workhorse is the *scaled*
integral ``exp(-eta) * I_k`` which stays O(1); callers carry the offset
``eta`` separately and only exponentiate cancelled exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureConfig",
    "SeriesConfig",
    "QuadratureError",
    "ball_volume",
    "sphere_area",
    "sine_moment",
    "moment_integral",
    "scaled_moments",
    "log_moment0",
    "series_coefficient",
    "series_coefficients",
]

_MAX_NODES = 8192


class QuadratureError(ArithmeticError):
    """Gauss-Legendre refinement failed to reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    node_count: int = 128
    abs_tol: float = 0.0
    rel_tol: float = 1e-12

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError(f"node_count must be >= 2, got {self.node_count}")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("quadrature tolerances must be nonnegative")


@dataclass(frozen=True)
class SeriesConfig:
    max_terms: int = 40
    tail_tol: float = 1e-14

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be >= 1, got {self.max_terms}")
        if self.tail_tol < 0:
            raise ValueError("tail_tol must be nonnegative")


DEFAULT_QUADRATURE = QuadratureConfig()
DEFAULT_SERIES = SeriesConfig()


def _check_dim(d):
    if int(d) != d or d < 1:
        raise ValueError(f"sphere dimension must be a positive integer, got {d!r}")
    return int(d)


def ball_volume(m):
    """Volume of the unit ball in R^m, pi^(m/2) / Gamma(m/2 + 1)."""
    if int(m) != m or m < 0:
        raise ValueError(f"ball dimension must be a nonnegative integer, got {m!r}")
    return math.exp(0.5 * m * math.log(math.pi) - math.lgamma(0.5 * m + 1.0))


def sphere_area(d):
    """Surface area of S^d in R^(d+1)."""
    d = _check_dim(d)
    return (d + 1) * ball_volume(d + 1)


def sine_moment(d):
    """int_0^pi sin^(d-1) t dt = sqrt(pi) Gamma(d/2) / Gamma((d+1)/2)."""
    d = _check_dim(d)
    return math.exp(0.5 * math.log(math.pi) + math.lgamma(0.5 * d) - math.lgamma(0.5 * (d + 1)))


@lru_cache(maxsize=64)
def _legendre_on_half_circle(n):
    x, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * math.pi * (x + 1.0)
    weights = 0.5 * math.pi * w
    theta.setflags(write=False)
    weights.setflags(write=False)
    return theta, weights


def _scaled_rule(eta, d, ks, n):
    theta, w = _legendre_on_half_circle(n)
    c = np.cos(theta)
    base = w * np.exp(eta * (c - 1.0))
    if d > 1:
        base = base * np.sin(theta) ** (d - 1)
    powers = c[None, :] ** np.asarray(ks, dtype=float)[:, None]
    vals = powers @ base
    scale = np.abs(powers) @ np.abs(base)
    return vals, scale


def scaled_moments(eta, d, ks=(0, 1, 2, 3), cfg=DEFAULT_QUADRATURE):
    """Return ``exp(-eta) * I_k(eta, d)`` for every k in ``ks``.

    The node count starts at ``cfg.node_count`` and doubles until two
    successive rules agree to ``abs_tol + rel_tol * int|integrand|``.
    """
    d = _check_dim(d)
    eta = float(eta)
    if not eta >= 0 or not math.isfinite(eta):
        raise ValueError(f"eta must be finite and nonnegative, got {eta!r}")
    ks = tuple(int(k) for k in ks)
    n = cfg.node_count
    prev, _ = _scaled_rule(eta, d, ks, n)
    while True:
        n *= 2
        cur, scale = _scaled_rule(eta, d, ks, n)
        err = np.abs(cur - prev)
        if np.all(err <= cfg.abs_tol + cfg.rel_tol * scale):
            return cur
        if n >= _MAX_NODES:
            raise QuadratureError(
                f"moment quadrature did not converge at eta={eta}, d={d} "
                f"(max error {err.max():.3e} with {n} nodes)"
            )
        prev = cur


def moment_integral(k, eta, d, cfg=DEFAULT_QUADRATURE):
    """I_k(eta, d) = int_0^pi cos^k t exp(eta cos t) sin^(d-1) t dt.

    Raises OverflowError when the unscaled value is not representable.
    """
    if int(k) != k or k < 0:
        raise ValueError(f"moment order must be a nonnegative integer, got {k!r}")
    scaled = scaled_moments(eta, d, (int(k),), cfg)[0]
    with np.errstate(over="ignore"):
        value = float(scaled * np.exp(float(eta)))
    if not math.isfinite(value):
        raise OverflowError(f"I_{k}(eta={eta}, d={d}) overflows double precision")
    return value


def log_moment0(eta, d, cfg=DEFAULT_QUADRATURE):
    """log I_0(eta, d), finite for any finite eta."""
    return math.log(scaled_moments(eta, d, (0,), cfg)[0]) + float(eta)


def series_coefficient(m, d):
    """A(m) = prod_{k=1..m} (2k-1)/(d+2k-1), with A(0) = 1.

    Equals the ratio I_{2m}(0, d) / I_0(0, d).
    """
    if int(m) != m or m < 0:
        raise ValueError(f"series index must be a nonnegative integer, got {m!r}")
    d = _check_dim(d)
    a = 1.0
    for k in range(1, int(m) + 1):
        a *= (2 * k - 1) / (d + 2 * k - 1)
    return a


def series_coefficients(count, d):
    """Array of A(0), ..., A(count-1) built by the two-term recurrence."""
    d = _check_dim(d)
    out = np.empty(count)
    a = 1.0
    for m in range(count):
        out[m] = a
        a *= (2 * m + 1) / (d + 2 * m + 1)
    return out
