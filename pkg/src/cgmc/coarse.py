"""Block-spin coarse graining: cell occupancies, binomial prior, conditional
moments, the cell-averaged kernel, and the 2nd-order coarse Hamiltonian.

Coarse variables: each cell of q consecutive sites carries the occupancy
alpha(k) = #{x in cell k : sigma(x) = +1} in {0..q}; the spin-sum variable is
eta = 2*alpha - q. Occupancy is the internal representation (birth-death
proposal weights are occupancy counts); eta is derived.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from cgmc.errors import UndefinedMomentError, ValidationError
from cgmc.lattice import AccessCounter, FieldSpec, Kernel, as_field


@dataclass(frozen=True)
class CoarsePartition:
    """N = m_cells * q periodic sites split into m_cells blocks of q."""

    n_sites: int
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValidationError(f"cell size must be >= 1, got {self.q}")
        if self.n_sites % self.q != 0:
            raise ValidationError(
                f"cell size {self.q} does not divide lattice size {self.n_sites}")
        if self.m_cells < 2:
            raise ValidationError("need at least 2 coarse cells")

    @property
    def m_cells(self) -> int:
        return self.n_sites // self.q


def coarsen(spins: np.ndarray, part: CoarsePartition) -> np.ndarray:
    """Cell occupancies alpha(k) of a microscopic configuration."""
    spins = np.asarray(spins)
    if len(spins) != part.n_sites:
        raise ValidationError(
            f"configuration has {len(spins)} sites, partition expects {part.n_sites}")
    up = (spins > 0).astype(np.int64).reshape(part.m_cells, part.q)
    return up.sum(axis=1)


def eta_of(alpha: np.ndarray, q: int) -> np.ndarray:
    return 2 * np.asarray(alpha, dtype=np.int64) - q


# ---------------------------------------------------------------------------
# Coarse prior (pushforward of fair Bernoulli spins)
# ---------------------------------------------------------------------------

def coarse_prior_logweight(eta: int, q: int) -> float:
    """log of binom(q, (eta+q)/2) / 2^q for a single cell value."""
    if (eta + q) % 2 != 0 or abs(eta) > q:
        raise ValidationError(f"eta={eta} violates parity/bounds for q={q}")
    k = (eta + q) // 2
    return math.lgamma(q + 1) - math.lgamma(k + 1) - math.lgamma(q - k + 1) \
        - q * math.log(2.0)


def log_prior_alpha(alpha: np.ndarray, q: int) -> float:
    """log prior weight of a full coarse configuration (product over cells)."""
    return float(sum(coarse_prior_logweight(2 * int(a) - q, q) for a in alpha))


def log_prior_table(q: int) -> np.ndarray:
    """Per-cell log prior indexed by occupancy, shape (q+1,)."""
    return np.array([coarse_prior_logweight(2 * a - q, q) for a in range(q + 1)])


# ---------------------------------------------------------------------------
# Conditional moments of 1..4 distinct in-cell spins given the occupancy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellMoments:
    """E_p = E[sigma(x1)...sigma(xp) | alpha] for p distinct in-cell sites."""

    e1: float
    e2: float
    _e3: float | None
    _e4: float | None

    @property
    def e3(self) -> float:
        if self._e3 is None:
            raise UndefinedMomentError("E3 needs cells of at least 3 sites")
        return self._e3

    @property
    def e4(self) -> float:
        if self._e4 is None:
            raise UndefinedMomentError("E4 needs cells of at least 4 sites")
        return self._e4


def conditional_moments(alpha: int, q: int) -> CellMoments:
    """Closed-form moments; denominators q(q-1)...(q-p+1) restrict the order."""
    if not 0 <= alpha <= q:
        raise ValidationError(f"occupancy {alpha} outside 0..{q}")
    if q < 2:
        raise UndefinedMomentError("E2 needs cells of at least 2 sites")
    a, w = float(alpha), float(q - alpha)
    e1 = (2 * a - q) / q
    e2 = (a * (a - 1) - 2 * a * w + w * (w - 1)) / (q * (q - 1))
    e3 = None
    e4 = None
    if q >= 3:
        e3 = (a * (a - 1) * (a - 2) - 3 * a * (a - 1) * w + 3 * a * (w - 1) * w
              - (w - 2) * (w - 1) * w) / (q * (q - 1) * (q - 2))
    if q >= 4:
        e4 = (a * (a - 1) * (a - 2) * (a - 3) - 4 * a * (a - 1) * (a - 2) * w
              + 6 * a * (a - 1) * (w - 1) * w - 4 * a * (w - 2) * (w - 1) * w
              + w * (w - 1) * (w - 2) * (w - 3)) / (q * (q - 1) * (q - 2) * (q - 3))
    return CellMoments(e1, e2, e3, e4)


def moment_tables(q: int) -> np.ndarray:
    """Rows 1..4 are E1..E4 indexed by occupancy; undefined orders are NaN."""
    t = np.full((5, q + 1), np.nan)
    t[0] = 1.0
    for a in range(q + 1):
        cm = conditional_moments(a, q)
        t[1, a] = cm.e1
        t[2, a] = cm.e2
        if q >= 3:
            t[3, a] = cm.e3
        if q >= 4:
            t[4, a] = cm.e4
    return t


# ---------------------------------------------------------------------------
# Cell-averaged kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoarseKernel:
    """Cell averages of J on the (n_sites, q) torus.

    jbar[rho] for coarse displacements rho = 1..m_cells//2 (index 0 unused);
    jbar0 is the same-cell average over distinct site pairs (0.0 when q == 1,
    where the self-interaction term (eta^2 - q) vanishes identically).
    reach bounds the nonzero coarse displacements: ceil(L/q) clipped to the
    coarse half-torus, at least 1 for a nonempty kernel.
    """

    jbar: np.ndarray
    jbar0: float
    q: int
    range_l: int
    n_sites: int
    m_cells: int
    reach: int

    def self_coupling(self) -> float:
        if self.q == 1:
            raise ValidationError("same-cell average is undefined for q = 1")
        return self.jbar0


def coarse_kernel(kernel: Kernel, part: CoarsePartition) -> CoarseKernel:
    """Average J over cell pairs: (1/q^2) between cells, ordered-pair mean within."""
    n, q, m = part.n_sites, part.q, part.m_cells
    jt = kernel.table(n)
    half = len(jt) - 1

    def dist(x, y):
        d = abs(x - y) % n
        return min(d, n - d)

    if q >= 2:
        tot = 0.0
        for x in range(q):
            for y in range(q):
                if x != y:
                    tot += jt[dist(x, y)]
        jbar0 = tot / (q * (q - 1))
    else:
        jbar0 = 0.0

    jbar = np.zeros(m // 2 + 1)
    for rho in range(1, m // 2 + 1):
        tot = 0.0
        for x in range(q):
            for y in range(rho * q, rho * q + q):
                tot += jt[dist(x, y)]
        jbar[rho] = tot / q ** 2

    l_geom = min(kernel.range_l, half)
    reach = 0 if l_geom == 0 else min(m // 2, max(1, -(-l_geom // q)))
    return CoarseKernel(jbar=jbar, jbar0=jbar0, q=q, range_l=kernel.range_l,
                        n_sites=n, m_cells=m, reach=reach)


def coarse_pairs(m_cells: int, reach: int) -> list[tuple[int, int, int]]:
    """Unordered in-reach cell pairs as (k, l, rho) with rho the torus distance."""
    out = []
    for k in range(m_cells):
        for l in range(k + 1, m_cells):
            d = min(l - k, m_cells - (l - k))
            if 1 <= d <= reach:
                out.append((k, l, d))
    return out


# ---------------------------------------------------------------------------
# Effective external field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveField:
    """Per-cell field energies table[k, alpha]; exact for cell-constant fields."""

    table: np.ndarray  # (m_cells, q+1)
    exact: bool


def effective_field(h, part: CoarsePartition, beta: float = 1.0,
                    q_cap: int = 20) -> EffectiveField:
    """Coarse-grain the field term to a per-cell function of the occupancy.

    Cell-constant fields give sum_{x in C_k} h sigma(x) = h_k eta(k) exactly.
    Spatially varying sub-cell fields use the in-cell Kadanoff average
    hbar = -(1/beta) log E[exp(-beta sum h sigma) | alpha] by enumeration of
    the binom(q, alpha) placements (requires q <= q_cap and beta > 0).
    """
    field = as_field(h)
    m, q = part.m_cells, part.q
    table = np.zeros((m, q + 1))
    eta_vals = 2 * np.arange(q + 1) - q

    hx = field.site_array(part.n_sites)
    cells = hx.reshape(m, q)
    for k in range(m):
        hk = cells[k]
        if np.ptp(hk) == 0.0:
            table[k] = hk[0] * eta_vals
            continue
        if q > q_cap:
            raise ValidationError(
                f"per-site field with sub-cell variation needs q <= {q_cap}")
        if beta <= 0:
            raise ValidationError("effective field for varying h needs beta > 0")
        for a in range(q + 1):
            vals = []
            for ups in itertools.combinations(range(q), a):
                sig = -np.ones(q)
                sig[list(ups)] = 1.0
                vals.append(-beta * float(np.dot(hk, sig)))
            vals = np.array(vals)
            mx = vals.max()
            table[k, a] = -(mx + math.log(np.exp(vals - mx).mean())) / beta
    exact = all(np.ptp(cells[k]) == 0.0 for k in range(m))
    return EffectiveField(table=table, exact=exact)


def field_table(h, part: CoarsePartition, beta: float = 1.0) -> np.ndarray:
    """(m_cells, q+1) field-energy table from any accepted field input.

    Accepts an EffectiveField, a scalar (uniform), a per-cell array (M,),
    a per-site array (N,), or a precomputed (M, q+1) table.
    """
    if isinstance(h, EffectiveField):
        return h.table
    eta_vals = (2 * np.arange(part.q + 1) - part.q).astype(float)
    if isinstance(h, FieldSpec):
        if h.is_uniform():
            return h.h0 * np.tile(eta_vals, (part.m_cells, 1))
        h = h.values
    if np.isscalar(h):
        return float(h) * np.tile(eta_vals, (part.m_cells, 1))
    arr = np.asarray(h, dtype=float)
    if arr.ndim == 2:
        if arr.shape != (part.m_cells, part.q + 1):
            raise ValidationError(f"field table shape {arr.shape} does not match partition")
        return arr
    if arr.shape == (part.m_cells,):
        return arr[:, None] * eta_vals[None, :]
    if arr.shape == (part.n_sites,):
        return effective_field(FieldSpec.per_site(arr), part, beta).table
    raise ValidationError(f"cannot interpret field of shape {arr.shape}")


# ---------------------------------------------------------------------------
# 2nd-order coarse Hamiltonian
# ---------------------------------------------------------------------------

def h0_energy_batch(alphas: np.ndarray, ck: CoarseKernel, htab: np.ndarray) -> np.ndarray:
    """Vectorized coarse Hamiltonian over a batch of occupancy rows (S, M)."""
    alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
    m, q = ck.m_cells, ck.q
    eta = (2 * alphas - q).astype(np.float64)
    out = np.zeros(len(alphas))
    # each unordered pair once: full weight below the half-torus, half at m/2
    for rho in range(1, min(ck.reach, m // 2) + 1):
        w = 0.5 if 2 * rho == m else 1.0
        out -= w * ck.jbar[rho] * (eta * np.roll(eta, -rho, axis=1)).sum(axis=1)
    if q > 1:
        out -= 0.5 * ck.jbar0 * (eta ** 2 - q).sum(axis=1)
    out += htab[np.arange(m)[None, :], alphas].sum(axis=1)
    return out


def h0_energy(alpha: np.ndarray, ck: CoarseKernel, h=0.0,
              counter: AccessCounter | None = None) -> float:
    """H0(alpha) = -sum_{k<l} Jbar(k-l) eta_k eta_l
    - (1/2) Jbar(0) sum_k (eta_k^2 - q) + field term."""
    alpha = np.asarray(alpha, dtype=np.int64)
    if len(alpha) != ck.m_cells:
        raise ValidationError(
            f"coarse configuration has {len(alpha)} cells, kernel expects {ck.m_cells}")
    if alpha.min() < 0 or alpha.max() > ck.q:
        raise ValidationError("occupancies must lie in 0..q")
    htab = field_table(h, CoarsePartition(ck.n_sites, ck.q))
    if counter is not None:
        counter.add("coarse_jbar", ck.m_cells * max(ck.reach, 0))
    return float(h0_energy_batch(alpha, ck, htab)[0])


def h0_energy_delta(alpha: np.ndarray, k: int, direction: int, ck: CoarseKernel,
                    h=0.0) -> float:
    """Energy change for alpha(k) -> alpha(k) + direction, in O(reach) lookups."""
    m, q = ck.m_cells, ck.q
    if direction not in (-1, 1):
        raise ValidationError("direction must be +1 or -1")
    a = int(alpha[k])
    if not 0 <= a + direction <= q:
        raise ValidationError(f"move leaves occupancy range at cell {k}")
    eta = 2 * np.asarray(alpha, dtype=np.int64) - q
    deta = 2 * direction
    s = 0.0
    for rho in range(1, min(ck.reach, m // 2) + 1):
        if 2 * rho == m:
            s += ck.jbar[rho] * eta[(k + rho) % m]
        else:
            s += ck.jbar[rho] * (eta[(k + rho) % m] + eta[(k - rho) % m])
    d = -deta * s
    if q > 1:
        d -= 0.5 * ck.jbar0 * (2 * eta[k] * deta + deta * deta)
    htab = field_table(h, CoarsePartition(ck.n_sites, ck.q))
    d += htab[k, a + direction] - htab[k, a]
    return float(d)


# ---------------------------------------------------------------------------
# Conditional reconstruction
# ---------------------------------------------------------------------------

def sample_conditional(alpha: np.ndarray, part: CoarsePartition,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw sigma with coarsen(sigma) = alpha, uniform over in-cell placements."""
    alpha = np.asarray(alpha, dtype=np.int64)
    spins = -np.ones(part.n_sites, dtype=np.int8)
    for k in range(part.m_cells):
        ups = rng.permutation(part.q)[:alpha[k]]
        spins[k * part.q + ups] = 1
    return spins
