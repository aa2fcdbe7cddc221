"""Ground-truth engines: exhaustive enumeration of microscopic and coarse Gibbs
measures, the exact block-averaged Hamiltonian, conditional-integral identities
for the correction terms, and closed-form 1D magnetization curves.

Enumeration orders are fixed so golden files stay stable: microscopic states
are integer bit patterns (bit i set = spin +1 at site i); coarse states are
mixed-radix occupancy words with cell 0 least significant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from cgmc.errors import EnumerationCapError, ValidationError
from cgmc.lattice import Kernel, as_field
from cgmc.coarse import (
    CoarseKernel,
    CoarsePartition,
    coarse_kernel,
    conditional_moments,
    field_table,
    h0_energy_batch,
    log_prior_table,
)
from cgmc.corrections import (
    KernelMoments,
    correction_weight_multiplier,
    h1_energy_batch,
    h2_energy_batch,
    kernel_moments,
)

MICRO_ENUM_CAP = 20
KADANOFF_BETA_FLOOR = 1e-8


# ---------------------------------------------------------------------------
# State enumeration
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4)
def all_spin_states(n_sites: int) -> np.ndarray:
    """(2^N, N) int8 matrix of spins; row s has bit i of s mapped to +/-1."""
    if n_sites > MICRO_ENUM_CAP:
        raise EnumerationCapError(f"2^{n_sites} states exceed the enumeration cap")
    ids = np.arange(2 ** n_sites, dtype=np.int64)
    bits = ((ids[:, None] >> np.arange(n_sites)) & 1).astype(np.int8)
    return (2 * bits - 1).astype(np.int8)


def coarse_state_list(m_cells: int, q: int) -> np.ndarray:
    """(S, M) occupancy rows in mixed-radix id order, cell 0 least significant."""
    n_states = (q + 1) ** m_cells
    if n_states > 4_000_000:
        raise EnumerationCapError(f"{n_states} coarse states exceed the enumeration cap")
    ids = np.arange(n_states, dtype=np.int64)
    return (ids[:, None] // (q + 1) ** np.arange(m_cells)) % (q + 1)


def coarse_index(alphas: np.ndarray, q: int) -> np.ndarray:
    """Mixed-radix id of occupancy rows."""
    alphas = np.atleast_2d(alphas)
    return (alphas * (q + 1) ** np.arange(alphas.shape[1])).sum(axis=1)


def micro_energies(kernel: Kernel, n_sites: int, h=0.0) -> np.ndarray:
    """Hamiltonian of every spin state, vectorized per torus distance."""
    s = all_spin_states(n_sites).astype(np.float64)
    jt = kernel.table(n_sites)
    out = np.zeros(len(s))
    for d in range(1, (n_sites - 1) // 2 + 1):
        if jt[d] != 0.0:
            out -= jt[d] * (s * np.roll(s, -d, axis=1)).sum(axis=1)
    if n_sites % 2 == 0 and jt[n_sites // 2] != 0.0:
        out -= 0.5 * jt[n_sites // 2] * (s * np.roll(s, -(n_sites // 2), axis=1)).sum(axis=1)
    hx = as_field(h).site_array(n_sites)
    out += s @ hx
    return out


# ---------------------------------------------------------------------------
# Enumerated measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnumeratedMeasure:
    """A finite measure: support (state ids or occupancy rows), normalized
    log-probabilities, and the log partition function (with the prior)."""

    kind: str
    support: np.ndarray
    log_weights: np.ndarray
    log_z: float


def enumerate_micro(kernel: Kernel, n_sites: int, beta: float, h=0.0) -> EnumeratedMeasure:
    """Exact Gibbs measure over all 2^N spin states (fair Bernoulli prior)."""
    energies = micro_energies(kernel, n_sites, h)
    x = -beta * energies
    log_z = float(logsumexp(x)) - n_sites * math.log(2.0)
    return EnumeratedMeasure(
        kind="micro",
        support=np.arange(2 ** n_sites, dtype=np.int64),
        log_weights=x - logsumexp(x),
        log_z=log_z,
    )


def _micro_coarse_groups(kernel: Kernel, part: CoarsePartition, h=0.0):
    """Sorted micro energies grouped by the coarse index of each state."""
    n, q, m = part.n_sites, part.q, part.m_cells
    energies = micro_energies(kernel, n, h)
    s = all_spin_states(n)
    occ = (s > 0).astype(np.int64).reshape(-1, m, q).sum(axis=2)
    cidx = coarse_index(occ, q)
    order = np.argsort(cidx, kind="stable")
    return energies[order], cidx[order]


def exact_kadanoff_hamiltonian(kernel: Kernel, part: CoarsePartition, beta: float,
                               h=0.0) -> tuple[np.ndarray, np.ndarray]:
    """Hbar over all coarse states: exp(-beta Hbar) = E[exp(-beta H) | eta].

    The formula degenerates at beta = 0; below KADANOFF_BETA_FLOOR the leading
    (conditional-mean) term E[H | eta] is returned instead.
    """
    q, m = part.q, part.m_cells
    states = coarse_state_list(m, q)
    energies, cidx = _micro_coarse_groups(kernel, part, h)
    bounds = np.searchsorted(cidx, np.arange(len(states) + 1))
    hbar = np.zeros(len(states))
    for g in range(len(states)):
        lo, hi = bounds[g], bounds[g + 1]
        grp = energies[lo:hi]
        if abs(beta) < KADANOFF_BETA_FLOOR:
            hbar[g] = grp.mean()
        else:
            hbar[g] = -(logsumexp(-beta * grp) - math.log(hi - lo)) / beta
    return states, hbar


def pushforward_log_weights(kernel: Kernel, part: CoarsePartition, beta: float,
                            h=0.0) -> np.ndarray:
    """Normalized log weights of the micro Gibbs measure pushed through coarsening."""
    states = coarse_state_list(part.m_cells, part.q)
    energies, cidx = _micro_coarse_groups(kernel, part, h)
    bounds = np.searchsorted(cidx, np.arange(len(states) + 1))
    out = np.full(len(states), -np.inf)
    for g in range(len(states)):
        lo, hi = bounds[g], bounds[g + 1]
        out[g] = logsumexp(-beta * energies[lo:hi])
    return out - logsumexp(out)


# ---------------------------------------------------------------------------
# Scheme measures on the coarse space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchemeParams:
    """What coarse Gibbs measure to build: geometry, kernel, temperature, field."""

    kernel: Kernel
    n_sites: int
    q: int
    beta: float
    h: float = 0.0
    beta_mode: str = "paper_scheme2"

    @property
    def partition(self) -> CoarsePartition:
        return CoarsePartition(self.n_sites, self.q)


def scheme_log_unnormalized(params: SchemeParams, scheme: str,
                            ck: CoarseKernel | None = None,
                            km: KernelMoments | None = None):
    """(states, log weights incl. prior, scheme Hamiltonian) before normalization."""
    part = params.partition
    if ck is None:
        ck = coarse_kernel(params.kernel, part)
    states = coarse_state_list(part.m_cells, part.q)
    lp = log_prior_table(part.q)[states].sum(axis=1)
    htab = field_table(params.h, part, params.beta)
    if scheme == "cg0":
        ham = h0_energy_batch(states, ck, htab)
        expo = -params.beta * ham
    elif scheme == "cg2":
        if km is None:
            km = kernel_moments(params.kernel, part, ck)
        h0 = h0_energy_batch(states, ck, htab)
        corr = (h1_energy_batch(states, km, params.beta)
                + h2_energy_batch(states, km, params.beta))
        ham = h0 + corr
        mult = correction_weight_multiplier(params.beta, params.beta_mode)
        expo = -params.beta * h0 - mult * corr
    elif scheme == "exact":
        states, ham = exact_kadanoff_hamiltonian(params.kernel, part, params.beta, params.h)
        expo = -params.beta * ham
    else:
        raise ValidationError(f"unknown scheme {scheme!r}")
    return states, expo + lp, ham


def enumerate_coarse(params: SchemeParams, scheme: str,
                     ck: CoarseKernel | None = None,
                     km: KernelMoments | None = None) -> EnumeratedMeasure:
    """Exact coarse Gibbs measure of a scheme (or of the exact transform)."""
    if params.n_sites > MICRO_ENUM_CAP and scheme == "exact":
        raise EnumerationCapError("exact transform needs an enumerable micro space")
    states, raw, _ = scheme_log_unnormalized(params, scheme, ck, km)
    log_z = float(logsumexp(raw))
    return EnumeratedMeasure(kind=f"coarse:{scheme}", support=states,
                             log_weights=raw - log_z, log_z=log_z)


# ---------------------------------------------------------------------------
# Conditional-integral identities (correction-term oracle)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _placements(q: int, alpha: int) -> np.ndarray:
    """(C(q,alpha), q) matrix of +/-1 rows, one per in-cell placement."""
    rows = []
    for ups in itertools.combinations(range(q), alpha):
        s = -np.ones(q)
        s[list(ups)] = 1.0
        rows.append(s)
    return np.array(rows)


def _placement_mean(q: int, alpha: int) -> np.ndarray:
    return _placements(q, alpha).mean(axis=0)


def _placement_second(q: int, alpha: int) -> np.ndarray:
    v = _placements(q, alpha)
    return v.T @ v / len(v)


_GEOMETRY_MEMO: dict = {}


def _oracle_geometry(kernel: Kernel, q: int, n_sites: int | None):
    if n_sites is None:
        m = max(4, 2 * (-(-min(kernel.range_l, 64) // q)) + 2)
        n_sites = q * m
    key = (kernel.values.tobytes(), q, n_sites)
    if key in _GEOMETRY_MEMO:
        return _GEOMETRY_MEMO[key]
    part = CoarsePartition(n_sites, q)
    ck = coarse_kernel(kernel, part)
    km = kernel_moments(kernel, part, ck)
    jt = kernel.table(n_sites)

    def e_mat(cell_a: int, cell_b: int) -> np.ndarray:
        """E matrix rows = sites of cell_a, cols = sites of cell_b."""
        m_cells = part.m_cells
        d = abs(cell_a - cell_b) % m_cells
        d = min(d, m_cells - d)
        jb = ck.jbar0 if d == 0 else ck.jbar[d]
        out = np.zeros((q, q))
        for i in range(q):
            for j in range(q):
                x, y = cell_a * q + i, cell_b * q + j
                if x == y:
                    continue
                dd = abs(x - y) % n_sites
                out[i, j] = jt[min(dd, n_sites - dd)] - jb
        return out

    if len(_GEOMETRY_MEMO) > 256:
        _GEOMETRY_MEMO.clear()
    _GEOMETRY_MEMO[key] = (part, ck, km, e_mat)
    return part, ck, km, e_mat


def appendixA_oracle(kind: str, kernel: Kernel, q: int, alphas, rhos=(1, 2),
                     n_sites: int | None = None) -> tuple[float, float]:
    """(enumeration value, closed-form value) of a conditional integral.

    Kinds (first index is always "the" cell, quantities are raw quadruple sums
    of kernel fluctuations against spin products):
      kk2    E[(sum_{x!=y in C} E sx sy)^2 | alpha]           alphas=(a,)
      kl2    E[(sum_{x in Ck, y in Cl} E sx sy)^2 | ak, al]   alphas=(ak, al)
      kkkl   E[(in-cell sum)(cross sum) | ak, al]             alphas=(ak, al)
      triple E[(chain sum a-b)(chain sum b-c) | a1, a2, a3]   alphas=(a1, a2, a3)
    For pair kinds rhos[0] is the cell displacement; for triple, rhos are the
    signed displacements of the two end cells from the middle one.
    """
    if q > 10:
        raise ValidationError("conditional-integral enumeration capped at q <= 10")
    part, ck, km, e_mat = _oracle_geometry(kernel, q, n_sites)
    m = part.m_cells

    if kind == "kk2":
        (a,) = alphas
        e = e_mat(0, 0)
        v = _placements(q, a)
        quad = np.einsum("si,ij,sj->s", v, e, v)
        enum = float((quad ** 2).mean())
        cm = conditional_moments(a, q)
        closed = 4 * km.j2[0] * (-cm.e4 + cm.e2) + 2 * km.j1[0] * (cm.e4 + 1 - 2 * cm.e2)
        return enum, float(closed)

    if kind == "kl2":
        ak, al = alphas
        rho = rhos[0] if np.iterable(rhos) else rhos
        e = e_mat(0, rho % m)
        p = _placement_second(q, ak)
        qq = _placement_second(q, al)
        enum = float(np.sum(p * (e @ qq @ e.T)))
        cmk, cml = conditional_moments(ak, q), conditional_moments(al, q)
        d = min(rho % m, m - rho % m)
        closed = (km.j2[d] * (-2 * cmk.e2 * cml.e2 + cmk.e2 + cml.e2)
                  + km.j1[d] * (cmk.e2 * cml.e2 - cml.e2 - cmk.e2 + 1))
        return enum, float(closed)

    if kind == "kkkl":
        ak, al = alphas
        rho = rhos[0] if np.iterable(rhos) else rhos
        e0 = e_mat(0, 0)
        ex = e_mat(0, rho % m)
        vk = _placements(q, ak)
        ml = _placement_mean(q, al)
        quad_in = np.einsum("si,ij,sj->s", vk, e0, vk)
        cross = vk @ (ex @ ml)
        enum = float((quad_in * cross).mean())
        cmk, cml = conditional_moments(ak, q), conditional_moments(al, q)
        closed = -2 * km.j2t[0, rho % m] * (cmk.e3 * cml.e1 - cmk.e1 * cml.e1)
        return enum, float(closed)

    if kind == "triple":
        a1, a2, a3 = alphas
        d1, d2 = rhos
        c1, c2 = d1 % m, d2 % m
        if c1 == c2 or c1 == 0 or c2 == 0:
            raise ValidationError("triple oracle needs three distinct cells")
        ea = e_mat(c1, 0)
        ec = e_mat(0, c2)
        u = ea.T @ _placement_mean(q, a1)
        w = ec @ _placement_mean(q, a3)
        enum = float(u @ _placement_second(q, a2) @ w)
        cm1, cm2, cm3 = (conditional_moments(a, q) for a in (a1, a2, a3))
        closed = km.j2t[c1, c2] * (-cm1.e1 * cm2.e2 * cm3.e1 + cm1.e1 * cm3.e1)
        return enum, float(closed)

    raise ValidationError(f"unknown oracle kind {kind!r}")


# ---------------------------------------------------------------------------
# Closed-form 1D magnetization curves
# ---------------------------------------------------------------------------

def ising_nn_exact_m(beta: float, h: float, j0: float) -> float:
    """Textbook nearest-neighbor chain magnetization (thermodynamic limit).

    Stated for the standard-convention Hamiltonian; this package's field sign
    is reversed, so simulations are compared via m_sim(h) = m_exact(-h).
    """
    sh = math.sinh(beta * h)
    return sh / math.sqrt(sh * sh + math.exp(-2.0 * beta * j0))


def ising_nn_transfer_m(beta: float, h: float, j0: float, n_sites: int) -> float:
    """Finite-N transfer-matrix magnetization for this package's Hamiltonian
    H = -(j0/2) sum_nn s s' + h sum s on the periodic chain."""
    jt = j0 / 2.0
    t = np.empty((2, 2))
    spins = (1.0, -1.0)
    for i, s in enumerate(spins):
        for j, sp in enumerate(spins):
            t[i, j] = math.exp(beta * (jt * s * sp - h * (s + sp) / 2.0))
    t /= t.max()
    tn = np.linalg.matrix_power(t, n_sites)
    d = np.diag([1.0, -1.0])
    return float(np.trace(d @ tn) / np.trace(tn))


@dataclass(frozen=True)
class CWSolution:
    m: float
    n_roots: int

    @property
    def unique(self) -> bool:
        return self.n_roots == 1


def curie_weiss_m(beta: float, h: float, j0: float, branch: str = "upper") -> CWSolution:
    """Root(s) of the +/-1-spin mean-field consistency m = tanh(beta(j0 m + h)).

    Above the critical coupling beta*j0 = 1 and for small |h| there are two
    stable branches; "upper"/"lower" select the largest/smallest root. When a
    single root exists it is returned regardless of the requested branch.
    """
    if branch not in ("upper", "lower"):
        raise ValidationError(f"unknown branch {branch!r}")

    def f(m):
        return math.tanh(beta * (j0 * m + h)) - m

    grid = np.linspace(-1.0, 1.0, 4001)
    vals = np.array([f(m) for m in grid])
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-13))
    if vals[-1] == 0.0:
        roots.append(grid[-1])
    dedup = []
    for r in sorted(roots):
        if not dedup or abs(r - dedup[-1]) > 1e-9:
            dedup.append(r)
    if not dedup:
        raise ValidationError("no mean-field root bracketed")
    m = max(dedup) if branch == "upper" else min(dedup)
    return CWSolution(m=float(m), n_roots=len(dedup))


# ---------------------------------------------------------------------------
# Golden-file CSV dumps
# ---------------------------------------------------------------------------

def measure_to_csv(measure: EnumeratedMeasure, path: str):
    """state-id,log-weight rows in enumeration order (stable golden format)."""
    support = measure.support
    if support.ndim == 2:
        # coarse rows are generated in mixed-radix id order already
        ids = np.arange(len(support), dtype=np.int64)
    else:
        ids = support
    with open(path, "w") as fh:
        fh.write("# schema_version=1\n")
        fh.write("state_id,log_weight\n")
        for sid, lw in zip(ids, measure.log_weights):
            fh.write(f"{int(sid)},{lw:.17g}\n")


def measure_from_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    ids = []
    lws = []
    with open(path) as fh:
        header = fh.readline()
        if "schema_version=1" not in header:
            raise ValidationError(f"{path}: missing schema_version=1 marker")
        fh.readline()
        for line in fh:
            if not line.strip():
                continue
            sid, lw = line.split(",")
            ids.append(int(sid))
            lws.append(float(lw))
    return np.array(ids, dtype=np.int64), np.array(lws)
