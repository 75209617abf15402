"""Equilibria on products of spheres (S^d1)^n1 x ... x (S^dm)^nm.

The energy splits into one single-sphere energy per block and every critical
point is a product of single-sphere critical points, so an equilibrium is
fully described by how many blocks of each factor are localized.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass

import numpy as np

from .energy import Verdict, classify_uniform, energy_of, path_energy_derivatives
from .equilibrium import Kind, ModelParams, solve_equilibria

__all__ = [
    "ProductSpaceSpec",
    "ProductEquilibrium",
    "EnumerationCapError",
    "parse_product_spec",
    "count_equilibria",
    "enumerate_equilibria",
    "global_minimizer",
    "product_energy",
    "product_distance_sq",
]

DEFAULT_CAP = 2**16
GRAMMAR = "factors S<d>[^<n>] joined by 'x', e.g. S1^2xS2 (case-insensitive, d >= 1, n >= 1)"


class EnumerationCapError(ValueError):
    pass


@dataclass(frozen=True)
class ProductSpaceSpec:
    """Factors ``((d_1, n_1), ..., (d_m, n_m))`` with strictly increasing d_i.

    Unsorted input and repeated dimensions are normalised on construction.
    """

    factors: tuple
    kappa: float

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a product space needs at least one factor")
        merged = {}
        for d, n in self.factors:
            if int(d) != d or d < 1 or int(n) != n or n < 1:
                raise ValueError(f"invalid factor (d={d}, n={n})")
            merged[int(d)] = merged.get(int(d), 0) + int(n)
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        object.__setattr__(self, "factors", tuple(sorted(merged.items())))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def dims(self):
        return tuple(d for d, _ in self.factors)

    @property
    def counts(self):
        return tuple(n for _, n in self.factors)

    @property
    def ambient_dim(self):
        return sum(n * (d + 1) for d, n in self.factors)

    def supercritical(self, i):
        return self.kappa > self.factors[i][0] + 1

    def label(self):
        return "x".join(f"S{d}" + (f"^{n}" if n > 1 else "") for d, n in self.factors)


@dataclass(frozen=True)
class ProductEquilibrium:
    """Canonical class of product critical points.

    ``localized_counts[i]`` of the ``n_i`` blocks of factor i are localized;
    ``assignment`` lists the representative with uniform blocks first.
    ``multiplicity`` is the number of raw assignments in the class.
    """

    localized_counts: tuple
    assignment: tuple
    multiplicity: int
    factor_solutions: tuple
    total_energy: float
    com: np.ndarray
    slot_verdicts: tuple

    @property
    def stable(self):
        return all(v is Verdict.STABLE for block in self.slot_verdicts for v in block)

    def short_label(self):
        flat = ("L" if k is Kind.LOCALIZED else "U" for block in self.assignment for k in block)
        return "(" + ",".join(flat) + ")"


def parse_product_spec(text, kappa):
    """Parse strings such as ``"S1^2xS2"`` into a :class:`ProductSpaceSpec`."""
    parts = text.strip().lower().split("x")
    factors = []
    for part in parts:
        m = re.fullmatch(r"s(\d+)(?:\^(\d+))?", part.strip())
        if m is None:
            raise ValueError(f"cannot parse factor {part!r}; expected {GRAMMAR}")
        d = int(m.group(1))
        n = int(m.group(2)) if m.group(2) else 1
        if d < 1 or n < 1:
            raise ValueError(f"factor {part!r} out of range; expected {GRAMMAR}")
        factors.append((d, n))
    return ProductSpaceSpec(tuple(factors), kappa)


def count_equilibria(spec):
    """Number of raw critical points, 2 ** (blocks whose factor is supercritical)."""
    free = sum(n for i, (_, n) in enumerate(spec.factors) if spec.supercritical(i))
    return 2**free


class _FactorTable:
    """Single-sphere solutions and energies shared across all assignments."""

    def __init__(self, spec):
        self.uniform = []
        self.localized = []
        self.e_uniform = []
        self.e_localized = []
        self.verdict_uniform = []
        self.verdict_localized = []
        for d, _ in spec.factors:
            params = ModelParams(d, spec.kappa)
            sols = solve_equilibria(params)
            self.uniform.append(sols[0])
            self.e_uniform.append(energy_of(sols[0], params).value)
            self.verdict_uniform.append(classify_uniform(params).verdict)
            if len(sols) == 2:
                loc = sols[1]
                self.localized.append(loc)
                self.e_localized.append(energy_of(loc, params).value)
                second = path_energy_derivatives(loc.eta, params)[1]
                self.verdict_localized.append(Verdict.STABLE if second > 0 else Verdict.UNSTABLE)
            else:
                self.localized.append(None)
                self.e_localized.append(None)
                self.verdict_localized.append(None)


def _energy_from_counts(spec, table, counts):
    total = 0.0
    for i, ((_, n), k) in enumerate(zip(spec.factors, counts)):
        if k < 0 or k > n:
            raise ValueError(f"factor {i} has {k} localized blocks out of {n}")
        if k and table.localized[i] is None:
            raise ValueError(f"factor S^{spec.factors[i][0]} cannot localize at kappa={spec.kappa}")
        total += (n - k) * table.e_uniform[i]
        if k:
            total += k * table.e_localized[i]
    return total


def _build(spec, table, counts):
    assignment = []
    com_blocks = []
    verdicts = []
    solutions = []
    multiplicity = 1
    for i, ((d, n), k) in enumerate(zip(spec.factors, counts)):
        kinds = (Kind.UNIFORM,) * (n - k) + (Kind.LOCALIZED,) * k
        assignment.append(kinds)
        multiplicity *= math.comb(n, k)
        loc = table.localized[i]
        solutions.append(loc if k else None)
        block_verdicts = []
        for kind in kinds:
            block = np.zeros(d + 1)
            if kind is Kind.LOCALIZED:
                block[0] = loc.com_norm
                block_verdicts.append(table.verdict_localized[i])
            else:
                block_verdicts.append(table.verdict_uniform[i])
            com_blocks.append(block)
        verdicts.append(tuple(block_verdicts))
    return ProductEquilibrium(
        localized_counts=tuple(counts),
        assignment=tuple(assignment),
        multiplicity=multiplicity,
        factor_solutions=tuple(solutions),
        total_energy=_energy_from_counts(spec, table, counts),
        com=np.concatenate(com_blocks),
        slot_verdicts=tuple(verdicts),
    )


def enumerate_equilibria(spec, cap=DEFAULT_CAP):
    """All critical points, collapsed to classes of equal localized counts."""
    raw = count_equilibria(spec)
    if raw > cap:
        raise EnumerationCapError(
            f"{raw} raw critical points exceed the enumeration cap {cap}; use count_equilibria"
        )
    table = _FactorTable(spec)
    ranges = [range(n + 1) if spec.supercritical(i) else range(1) for i, (_, n) in enumerate(spec.factors)]
    return [_build(spec, table, counts) for counts in itertools.product(*ranges)]


def global_minimizer(spec):
    """Localize every block whose factor is supercritical, keep the rest uniform."""
    table = _FactorTable(spec)
    counts = tuple(n if spec.supercritical(i) else 0 for i, (_, n) in enumerate(spec.factors))
    return _build(spec, table, counts)


def product_energy(eq, spec):
    """Sum of single-sphere energies over all blocks of the product."""
    if len(eq.localized_counts) != len(spec.factors):
        raise ValueError("equilibrium and product space have different factor counts")
    return _energy_from_counts(spec, _FactorTable(spec), eq.localized_counts)


def _blocks(point):
    blocks = [np.asarray(b, dtype=float) for b in point]
    for b in blocks:
        if b.ndim != 1 or abs(np.linalg.norm(b) - 1.0) > 1e-9:
            raise ValueError("every block of a product-space point must be a unit vector")
    return blocks


def product_distance_sq(x, y):
    """Squared extrinsic distance 2 sum n_i - 2 sum <x_ij, y_ij> between block lists."""
    xb, yb = _blocks(x), _blocks(y)
    if [b.shape for b in xb] != [b.shape for b in yb]:
        raise ValueError("points belong to different product spaces")
    return max(0.0, 2.0 * len(xb) - 2.0 * sum(float(a @ b) for a, b in zip(xb, yb)))
