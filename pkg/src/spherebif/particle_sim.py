"""Interacting particle system on S^d and a direct vMF sampler.

Each particle follows

    dx_i = kappa P_i(xbar - x_i) dt + sqrt(2) P_i(dB_i),    P_i(v) = v - (v.x_i) x_i,

where xbar is the ensemble mean (the pairwise sum (kappa/N) sum_j P_i(x_j - x_i)
collapses to this because P_i(x_i) = 0).  The stationary order parameter
|xbar| estimates the centre-of-mass norm of the equilibrium density.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Scheme",
    "SimConfig",
    "ParticleEnsemble",
    "SimStats",
    "SimulationError",
    "tangent_project",
    "make_rng",
    "uniform_on_sphere",
    "initial_ensemble",
    "step",
    "run",
    "run_product",
    "sample_vmf",
]


class SimulationError(ArithmeticError):
    pass


class Scheme(enum.Enum):
    PROJECT_RENORMALIZE = "project"
    GEODESIC_STEP = "geodesic"


@dataclass(frozen=True)
class SimConfig:
    particle_count: int = 2000
    dt: float = 1e-3
    t_end: float = 30.0
    burn_in: float = 10.0
    seed: int = 0
    scheme: Scheme = Scheme.PROJECT_RENORMALIZE
    batches: int = 20

    def __post_init__(self):
        if self.particle_count < 1:
            raise ValueError("particle_count must be positive")
        if not 0 < self.dt < self.t_end:
            raise ValueError("need 0 < dt < t_end")
        if not 0 <= self.burn_in < self.t_end:
            raise ValueError("need 0 <= burn_in < t_end")
        if self.batches < 2:
            raise ValueError("need at least 2 batches for the error estimate")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def check_stability(self, kappa):
        if self.dt * kappa >= 0.1:
            raise ValueError(f"dt * kappa = {self.dt * kappa:g} violates the drift guard dt * kappa < 0.1")


@dataclass
class ParticleEnsemble:
    positions: np.ndarray
    time: float = 0.0
    rng: np.random.Generator = field(default=None, repr=False)
    steps: int = 0

    @property
    def order_parameter(self):
        return float(np.linalg.norm(self.positions.mean(axis=0)))


@dataclass(frozen=True)
class SimStats:
    times: np.ndarray
    com_norm_series: np.ndarray
    mean_com_norm: float
    stderr: float


def tangent_project(v, x):
    """Remove the component of ``v`` along the unit vector ``x`` (row-wise for arrays)."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    return v - np.sum(v * x, axis=-1, keepdims=True) * x


def make_rng(seed):
    """Counter-based generator; identical streams on every platform and thread count."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def uniform_on_sphere(rng, count, d):
    z = rng.standard_normal((count, d + 1))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def initial_ensemble(d, cfg, seed=None):
    rng = make_rng(cfg.seed if seed is None else seed)
    return ParticleEnsemble(uniform_on_sphere(rng, cfg.particle_count, d), 0.0, rng, 0)


def _advance(x, kappa, dt, xi, scheme):
    xbar = x.mean(axis=0)
    drift = kappa * tangent_project(xbar[None, :], x)
    move = drift * dt + math.sqrt(2.0 * dt) * tangent_project(xi, x)
    if scheme is Scheme.PROJECT_RENORMALIZE:
        y = x + move
        return y / np.linalg.norm(y, axis=1, keepdims=True)
    r = np.linalg.norm(move, axis=1, keepdims=True)
    safe = np.where(r > 0, r, 1.0)
    return np.cos(r) * x + np.sin(r) * (move / safe)


def step(ens, params, cfg, noise=None):
    """Advance the ensemble by one time step ``cfg.dt``.

    ``noise`` overrides the standard normal increments drawn from ``ens.rng``
    (shape ``(N, d+1)``); pass zeros for the deterministic flow.
    """
    x = ens.positions
    if noise is None:
        noise = ens.rng.standard_normal(x.shape)
    new = _advance(x, params.kappa, cfg.dt, np.asarray(noise, dtype=float), cfg.scheme)
    if not np.all(np.isfinite(new)):
        raise SimulationError(f"non-finite particle position at step {ens.steps + 1}")
    return replace(ens, positions=new, time=ens.time + cfg.dt, steps=ens.steps + 1)


def _batch_stderr(values, batches):
    batches = min(batches, len(values))
    if batches < 2:
        return float("nan")
    means = np.array([chunk.mean() for chunk in np.array_split(values, batches)])
    return float(means.std(ddof=1) / math.sqrt(batches))


def run(params, cfg, seed=None):
    """Simulate from i.i.d. uniform initial positions and summarise |xbar|.

    The mean and its batch-means standard error use samples with
    t >= ``cfg.burn_in``.
    """
    cfg.check_stability(params.kappa)
    ens = initial_ensemble(params.d, cfg, seed)
    x, rng = ens.positions, ens.rng
    n = cfg.n_steps
    series = np.empty(n + 1)
    series[0] = np.linalg.norm(x.mean(axis=0))
    for k in range(1, n + 1):
        x = _advance(x, params.kappa, cfg.dt, rng.standard_normal(x.shape), cfg.scheme)
        xbar = x.mean(axis=0)
        series[k] = math.sqrt(float(xbar @ xbar))
        if not math.isfinite(series[k]):
            raise SimulationError(f"non-finite particle position at step {k}")
    times = cfg.dt * np.arange(n + 1)
    tail = series[times >= cfg.burn_in - 1e-12 * cfg.t_end]
    return SimStats(times, series, float(tail.mean()), _batch_stderr(tail, cfg.batches))


def run_product(spec, cfg, threads=1):
    """Independent single-sphere runs for every block of a product space.

    Returns ``[((d_i, j), SimStats), ...]`` in block order.  Block seeds are
    spawned from ``cfg.seed`` so results do not depend on ``threads``.
    """
    from .equilibrium import ModelParams

    blocks = [(d, j) for d, n in spec.factors for j in range(n)]
    seeds = np.random.SeedSequence(int(cfg.seed)).spawn(len(blocks))

    def one(args):
        (d, _), ss = args
        return run(ModelParams(d, spec.kappa), cfg, seed=ss)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(one, zip(blocks, seeds)))
    else:
        stats = [one(a) for a in zip(blocks, seeds)]
    return list(zip(blocks, stats))


def _sample_cosines(rng, eta, d, count):
    # Wood (1994) rejection sampler for t = <n, x>, density ~ exp(eta t) (1-t^2)^((d-2)/2)
    b = d / (2.0 * eta + math.sqrt(4.0 * eta * eta + d * d))
    x0 = (1.0 - b) / (1.0 + b)
    c = eta * x0 + d * math.log(1.0 - x0 * x0)
    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        z = rng.beta(0.5 * d, 0.5 * d, size=need)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(need)
        ok = eta * w + d * np.log1p(-x0 * w) - c >= np.log(u)
        acc = w[ok]
        out[filled:filled + len(acc)] = acc
        filled += len(acc)
    return out


def sample_vmf(eta, d, count, seed, axis=None):
    """``count`` i.i.d. draws from the density proportional to exp(eta <axis, x>) on S^d."""
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    rng = make_rng(seed)
    t = _sample_cosines(rng, float(eta), int(d), int(count))
    v = rng.standard_normal((count, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    pts = np.column_stack([t, np.sqrt(np.clip(1.0 - t * t, 0.0, None))[:, None] * v])
    if axis is not None:
        axis = np.asarray(axis, dtype=float)
        e1 = np.zeros(d + 1)
        e1[0] = 1.0
        h = e1 - axis
        hn = h @ h
        if hn > 1e-24:
            # Householder reflection mapping e1 onto axis
            pts = pts - 2.0 * np.outer(pts @ h, h) / hn
    return pts
