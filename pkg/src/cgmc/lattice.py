"""Microscopic lattice geometry, interaction kernels, and the lattice Hamiltonian.

Conventions (fixed throughout the package):
  * 1D periodic lattice of N sites; site indices mod N; pair distances are
    minimal-image on the torus and each unordered pair is counted once.
  * H(sigma) = -sum_{x<y} J(d(x,y)) sigma(x) sigma(y) + sum_x h(x) sigma(x).
    Note the plus sign on the field term; the textbook nearest-neighbor
    magnetization curve is recovered under the mapping h -> -h
    (see oracles.ising_nn_exact_m).
  * Production configurations require N > 2L so that every in-range pair is
    reachable through exactly one displacement; smaller N (enumeration
    instances, Curie-Weiss) fall back to an explicit pair sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from cgmc.errors import ValidationError


# ---------------------------------------------------------------------------
# Access counting (used by the bench harness only; hot paths never count)
# ---------------------------------------------------------------------------

class AccessCounter:
    """Tallies displacement-indexed interaction-table reads.

    One count = one read of a table record indexed by lattice displacement
    (J, Jbar, or a fused correction-coefficient record). Scalar self-terms
    and per-occupancy lookup tables are not kernel accesses.
    """

    def __init__(self):
        self.counts: dict[str, int] = {}

    def add(self, key: str, n: int = 1):
        self.counts[key] = self.counts.get(key, 0) + n

    def total(self) -> int:
        return sum(self.counts.values())


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MicroLattice:
    """Periodic 1D lattice of n_sites spins."""

    n_sites: int

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValidationError(f"need at least 2 sites, got {self.n_sites}")

    def distance(self, x: int, y: int) -> int:
        d = abs(x - y) % self.n_sites
        return min(d, self.n_sites - d)


@dataclass(frozen=True)
class Kernel:
    """Tabulated symmetric two-body potential J(r), r = 1..range_l.

    values[r-1] holds J(r); J(-r) = J(r) is implicit, J(r) = 0 beyond range_l.
    """

    values: np.ndarray
    profile_name: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ValidationError("kernel table must be one-dimensional")

    @property
    def range_l(self) -> int:
        return len(self.values)

    @property
    def norm(self) -> float:
        """sum_{r != 0} |J(r)| over both half-axes."""
        return 2.0 * float(np.abs(self.values).sum())

    def at(self, r: int) -> float:
        """J at displacement r (any sign); zero beyond range."""
        r = abs(int(r))
        if r == 0 or r > self.range_l:
            return 0.0
        return float(self.values[r - 1])

    def table(self, n_sites: int) -> np.ndarray:
        """Dense lookup jt[d] for torus distances d = 0..n_sites//2."""
        half = n_sites // 2
        jt = np.zeros(half + 1)
        upto = min(self.range_l, half)
        jt[1:upto + 1] = self.values[:upto]
        return jt


@dataclass(frozen=True)
class FieldSpec:
    """External field: uniform value or per-site table (energy per spin)."""

    kind: str
    h0: float = 0.0
    values: np.ndarray | None = field(default=None)

    @staticmethod
    def uniform(h0: float) -> "FieldSpec":
        return FieldSpec(kind="uniform", h0=float(h0))

    @staticmethod
    def per_site(values) -> "FieldSpec":
        return FieldSpec(kind="per_site", values=np.asarray(values, dtype=float))

    def site_array(self, n_sites: int) -> np.ndarray:
        if self.kind == "uniform":
            return np.full(n_sites, self.h0)
        if len(self.values) != n_sites:
            raise ValidationError(
                f"per-site field has {len(self.values)} entries, lattice has {n_sites}")
        return self.values

    def is_uniform(self) -> bool:
        return self.kind == "uniform"


def as_field(h) -> FieldSpec:
    """Coerce a float or array into a FieldSpec."""
    if isinstance(h, FieldSpec):
        return h
    if np.isscalar(h):
        return FieldSpec.uniform(float(h))
    return FieldSpec.per_site(h)


# ---------------------------------------------------------------------------
# Kernel constructors
# ---------------------------------------------------------------------------

def kernel_from_profile(v: Callable[[float], float], range_l: int, j0: float = 1.0,
                        profile_name: str | None = None) -> Kernel:
    """Build J(r) = (j0/L) V(r/L) for r = 1..L from a profile V on [0, 1).

    The 1/L factor keeps the kernel strength essentially independent of L
    (norm ~ j0 * integral of |V| over both half-axes).
    """
    if range_l < 1:
        raise ValidationError(f"kernel range must be positive, got {range_l}")
    vals = np.array([(j0 / range_l) * v(r / range_l) for r in range(1, range_l + 1)])
    return Kernel(vals, profile_name=profile_name)


def constant_kernel(j0: float, range_l: int) -> Kernel:
    """Constant-profile kernel J(r) = j0 / (2L) on 1 <= r <= L (support inclusive)."""
    if range_l < 1:
        raise ValidationError(f"kernel range must be positive, got {range_l}")
    return Kernel(np.full(range_l, j0 / (2 * range_l)), profile_name="constant")


def triangle_kernel(j0: float, range_l: int) -> Kernel:
    """C^1-profile kernel from V(r) = 1 - r, i.e. J(r) = (j0/L)(1 - r/L)."""
    return kernel_from_profile(lambda u: 1.0 - u, range_l, j0, profile_name="triangle")


def curie_weiss_kernel(j0: float, n_sites: int) -> Kernel:
    """Mean-field kernel J(x-y) = j0/N for every distinct pair on the N-torus."""
    return Kernel(np.full(n_sites // 2, j0 / n_sites), profile_name="curie_weiss")


def truncate_kernel(values, delta: float) -> tuple[Kernel, int]:
    """Truncate a summable half-axis table to the smallest effective range.

    Returns (kernel, l_eff) where l_eff is minimal with per-half-axis tail
    sum_{r > l_eff} |J(r)| <= delta/2, so the discarded two-sided mass is at
    most delta and the per-site energy discrepancy is O(delta).
    """
    if delta <= 0:
        raise ValidationError(f"truncation tolerance must be positive, got {delta}")
    vals = np.asarray(values, dtype=float)
    tail = np.concatenate([np.cumsum(np.abs(vals)[::-1])[::-1], [0.0]])
    # tail[r] = sum_{r' > r} |J(r')| with table index shift: tail[k] over values[k:]
    l_eff = int(np.argmax(tail <= delta / 2.0))
    return Kernel(vals[:l_eff].copy()), l_eff


# ---------------------------------------------------------------------------
# Spin configurations
# ---------------------------------------------------------------------------

def validate_spins(spins: np.ndarray):
    if not np.all(np.abs(spins) == 1):
        raise ValidationError("spin configuration must contain only +1/-1")


def random_spins(n_sites: int, rng: np.random.Generator) -> np.ndarray:
    return (2 * rng.integers(0, 2, size=n_sites) - 1).astype(np.int8)


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def micro_energy(spins: np.ndarray, kernel: Kernel, h=0.0,
                 counter: AccessCounter | None = None) -> float:
    """H(sigma) = -sum_{x<y} J(d(x,y)) s(x) s(y) + sum_x h(x) s(x).

    Uses the O(N L) displacement loop when N > 2L (each unordered pair is
    reachable one way); otherwise an explicit minimal-image pair sum.
    """
    spins = np.asarray(spins)
    n = len(spins)
    hx = as_field(h).site_array(n)
    s = spins.astype(np.float64)
    pair = 0.0
    l = kernel.range_l
    if n > 2 * l:
        for r in range(1, l + 1):
            pair += kernel.values[r - 1] * float(np.dot(s, np.roll(s, -r)))
        if counter is not None:
            counter.add("micro_j", n * l)
    else:
        jt = kernel.table(n)
        reads = 0
        for x in range(n):
            for y in range(x + 1, n):
                d = min(y - x, n - (y - x))
                pair += jt[d] * s[x] * s[y]
                reads += 1
        if counter is not None:
            counter.add("micro_j", reads)
    return float(-pair + np.dot(hx, s))


def micro_energy_delta_flip(spins: np.ndarray, x: int, kernel: Kernel, h=0.0) -> float:
    """Energy change for flipping site x, in O(L) neighbor lookups."""
    n = len(spins)
    if not 0 <= x < n:
        raise ValidationError(f"site {x} out of range for {n} sites")
    hx = as_field(h).site_array(n)
    l = kernel.range_l
    s = 0.0
    if n > 2 * l:
        for r in range(1, l + 1):
            s += kernel.values[r - 1] * (spins[(x + r) % n] + spins[(x - r) % n])
    else:
        jt = kernel.table(n)
        for y in range(n):
            if y != x:
                d = abs(y - x)
                s += jt[min(d, n - d)] * spins[y]
    return float(2.0 * spins[x] * s - 2.0 * hx[x] * spins[x])
