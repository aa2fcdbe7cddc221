"""Seeded Markov chain Monte Carlo samplers.

Microscopic chain: single-spin-flip proposals at a uniformly random site.
Coarse chain: birth-death occupancy moves; a cell is picked uniformly and a
birth is proposed with probability (q - alpha)/q, a death with alpha/q, which
reproduces the binomial prior in the stationary law.

Acceptance uses a rate function G with G(r) = G(-r) exp(-r). For rate kinds
bounded by one (metropolis, glauber) the acceptance is G(beta * dH) verbatim;
the symmetric kind exp(-r/2) is unbounded, so acceptance is G/kappa with a
precomputed constant kappa >= sup G (uniformization), which preserves detailed
balance exactly and only thins the chain.

These are discrete-time embedded chains of the continuous-time dynamics; they
share the stationary measure, which is all equilibrium sampling needs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from cgmc import _mcmc_kernels as mk
from cgmc.errors import EnumerationCapError, ValidationError
from cgmc.lattice import Kernel, as_field, micro_energy_delta_flip
from cgmc.coarse import (
    CoarseKernel,
    CoarsePartition,
    coarse_kernel,
    field_table,
    h0_energy_batch,
    h0_energy_delta,
)
from cgmc.corrections import (
    KernelMoments,
    correction_weight_multiplier,
    h1_energy_batch,
    h2_energy_batch,
    kernel_moments,
)
from cgmc.oracles import all_spin_states, coarse_state_list, micro_energies

RATE_KINDS = {"metropolis": 0, "glauber": 1, "symmetric": 2}
MATRIX_STATE_CAP = 4096
_BURNIN_SEGMENT_SWEEPS = 256
# test hook: force the pure-python proposal loop even where the jitted
# fast path applies (both consume the stream identically)
_FORCE_PYTHON = False


@dataclass(frozen=True)
class RateFunction:
    """Acceptance-rate profile G satisfying G(r) = G(-r) exp(-r)."""

    kind: str

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise ValidationError(f"unknown rate kind {self.kind!r}")

    def g(self, r: float) -> float:
        if self.kind == "metropolis":
            return math.exp(-max(r, 0.0))
        if self.kind == "glauber":
            return 0.0 if r > 700.0 else 1.0 / (1.0 + math.exp(r))
        return math.exp(-0.5 * r)


@dataclass(frozen=True)
class ChainSpec:
    """Everything needed to reproduce one chain bit-for-bit."""

    scheme: str  # micro | cg0 | cg2
    n_sites: int
    kernel: Kernel
    beta: float
    h: float = 0.0
    q: int = 1
    rate_kind: str = "metropolis"
    n_burnin: int = 0
    n_samples: int = 0
    thinning: int = 1
    seed: int = 0
    stream_key: tuple = ()
    beta_mode: str = "paper_scheme2"
    match_paper_appendixB: bool = False
    record_configs: bool = False
    init: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.scheme not in ("micro", "cg0", "cg2"):
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.n_burnin < 0 or self.n_samples < 0 or self.thinning < 1:
            raise ValidationError("chain lengths must be nonnegative, thinning >= 1")
        if self.scheme != "micro" and self.n_sites % self.q != 0:
            raise ValidationError("cell size must divide the lattice size")

    def spec_hash(self) -> str:
        parts = [self.scheme, self.n_sites, self.kernel.values.tobytes(),
                 self.beta, repr(self.h), self.q, self.rate_kind, self.n_burnin,
                 self.n_samples, self.thinning, self.seed, self.stream_key,
                 self.beta_mode, self.match_paper_appendixB]
        return hashlib.sha256(repr(parts).encode()).hexdigest()[:16]


@dataclass
class SampleBatch:
    """Thinned chain records: magnetization always, configurations on request."""

    scheme: str
    n_sites: int
    q: int
    m: np.ndarray
    configs: np.ndarray | None
    acceptance_rate: float
    n_proposals: int
    spec_hash: str
    final_config: np.ndarray | None = None


def _rng_for(spec: ChainSpec) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=spec.seed, spawn_key=tuple(spec.stream_key))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Reference single-proposal steps (pure python; any system size)
# ---------------------------------------------------------------------------

def micro_step(spins: np.ndarray, spec: ChainSpec, rng: np.random.Generator,
               kappa: float = 1.0) -> bool:
    """One proposal of the fine chain; mutates spins, returns acceptance."""
    x = int(rng.integers(0, len(spins)))
    dh = micro_energy_delta_flip(spins, x, spec.kernel, spec.h)
    g = RateFunction(spec.rate_kind).g(spec.beta * dh) / kappa
    if rng.random() < g:
        spins[x] = -spins[x]
        return True
    return False


def _coarse_scheme_delta(alpha, k, d, ck, km, htab, spec: ChainSpec) -> float:
    """Exponent-argument change for alpha(k) -> alpha(k)+d (full recompute for
    corrections; reference path for small systems and tests)."""
    rate_beta = 1.0 if spec.match_paper_appendixB else spec.beta
    dh0 = h0_energy_delta(alpha, k, d, ck, htab)
    arg = rate_beta * dh0
    if spec.scheme == "cg2":
        mult = 1.0 if spec.match_paper_appendixB else \
            correction_weight_multiplier(spec.beta, spec.beta_mode)
        before = float(h1_energy_batch(alpha, km, spec.beta)[0]
                       + h2_energy_batch(alpha, km, spec.beta)[0])
        alpha2 = alpha.copy()
        alpha2[k] += d
        after = float(h1_energy_batch(alpha2, km, spec.beta)[0]
                      + h2_energy_batch(alpha2, km, spec.beta)[0])
        arg += mult * (after - before)
    return arg


def coarse_step(alpha: np.ndarray, spec: ChainSpec, rng: np.random.Generator,
                ck: CoarseKernel | None = None, km: KernelMoments | None = None,
                kappa: float = 1.0) -> bool:
    """One birth-death proposal of the coarse chain; mutates alpha."""
    part = CoarsePartition(spec.n_sites, spec.q)
    if ck is None:
        ck = coarse_kernel(spec.kernel, part)
    if km is None and spec.scheme == "cg2":
        km = kernel_moments(spec.kernel, part, ck)
    htab = field_table(spec.h, part, spec.beta)
    k = int(rng.integers(0, part.m_cells))
    a = int(alpha[k])
    d = 1 if rng.random() * spec.q < (spec.q - a) else -1
    arg = _coarse_scheme_delta(alpha, k, d, ck, km, htab, spec)
    if rng.random() < RateFunction(spec.rate_kind).g(arg) / kappa:
        alpha[k] = a + d
        return True
    return False


# ---------------------------------------------------------------------------
# Acceptance normalization bounds (symmetric rate kind only)
# ---------------------------------------------------------------------------

def _micro_kappa(spec: ChainSpec) -> float:
    if spec.rate_kind != "symmetric":
        return 1.0
    hmax = float(np.abs(as_field(spec.h).site_array(spec.n_sites)).max())
    bound = 2.0 * spec.kernel.norm + 2.0 * hmax
    return math.exp(0.5 * spec.beta * bound)


def _coarse_kappa(spec: ChainSpec, ck: CoarseKernel, km: KernelMoments | None,
                  htab: np.ndarray) -> float:
    if spec.rate_kind != "symmetric":
        return 1.0
    q = spec.q
    b0 = 4.0 * q * float(np.abs(ck.jbar).sum()) + 0.5 * abs(ck.jbar0) * (8 * q + 4)
    if htab.shape[1] > 1:
        b0 += 2.0 * float(np.abs(np.diff(htab, axis=1)).max())
    rate_beta = 1.0 if spec.match_paper_appendixB else spec.beta
    bound = rate_beta * b0
    if spec.scheme == "cg2" and km is not None:
        # crude: all moment brackets bounded by 4, each local term counted twice
        j1s = float(np.abs(km.j1).sum())
        j2s = float(np.abs(km.j2).sum())
        jts = float(np.abs(km.j2t).sum())
        loc = spec.beta * (4.0 * (j1s + j2s) + 12.0 * jts)
        mult = 1.0 if spec.match_paper_appendixB else \
            correction_weight_multiplier(spec.beta, spec.beta_mode)
        bound += mult * 2.0 * loc
    return math.exp(0.5 * bound)


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------

def run_chain(spec: ChainSpec) -> SampleBatch:
    """Burn in, then record every `thinning` sweeps until n_samples records.

    Fully deterministic given (seed, stream_key): randomness comes from one
    Philox stream consumed in a fixed layout.
    """
    if spec.scheme == "micro":
        return _run_micro(spec)
    return _run_coarse(spec)


def _run_micro(spec: ChainSpec) -> SampleBatch:
    n = spec.n_sites
    rng = _rng_for(spec)
    if spec.init is not None:
        spins = np.asarray(spec.init, dtype=np.int8).copy()
        if len(spins) != n:
            raise ValidationError("initial configuration has wrong size")
    else:
        spins = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
    jvals = spec.kernel.values.astype(np.float64)
    # clip to the geometric half-torus so the fast path never wraps
    l_geom = min(spec.kernel.range_l, (n - 1) // 2)
    fast = spec.kernel.range_l <= (n - 1) // 2 and not _FORCE_PYTHON
    hx = as_field(spec.h).site_array(n).astype(np.float64)
    kind = RATE_KINDS[spec.rate_kind]
    kappa_inv = 1.0 / _micro_kappa(spec)
    gf = RateFunction(spec.rate_kind)

    acc_rec = 0
    n_props = 0
    m_out = np.empty(spec.n_samples)
    cfg_out = np.empty((spec.n_samples, n), dtype=np.int8) if spec.record_configs else None

    def run_props(n_prop: int) -> int:
        nonlocal n_props
        sites = rng.integers(0, n, size=n_prop, dtype=np.int64)
        us = rng.random(n_prop)
        n_props += n_prop
        if fast:
            return int(mk.micro_segment(spins, jvals[:l_geom], hx, spec.beta,
                                        kind, kappa_inv, sites, us))
        acc = 0
        for i in range(n_prop):
            x = int(sites[i])
            dh = micro_energy_delta_flip(spins, x, spec.kernel, spec.h)
            if us[i] < gf.g(spec.beta * dh) * kappa_inv:
                spins[x] = -spins[x]
                acc += 1
        return acc

    sweeps_left = spec.n_burnin
    while sweeps_left > 0:
        chunk = min(sweeps_left, _BURNIN_SEGMENT_SWEEPS)
        run_props(chunk * n)
        sweeps_left -= chunk
    for rec in range(spec.n_samples):
        acc_rec += run_props(spec.thinning * n)
        m_out[rec] = spins.mean()
        if cfg_out is not None:
            cfg_out[rec] = spins
    rec_props = spec.n_samples * spec.thinning * n
    return SampleBatch(scheme="micro", n_sites=n, q=1, m=m_out, configs=cfg_out,
                       acceptance_rate=acc_rec / rec_props if rec_props else 0.0,
                       n_proposals=n_props, spec_hash=spec.spec_hash(),
                       final_config=spins.copy())


def _run_coarse(spec: ChainSpec) -> SampleBatch:
    part = CoarsePartition(spec.n_sites, spec.q)
    m_cells, q = part.m_cells, spec.q
    if spec.scheme == "cg2" and q < 4:
        raise ValidationError("the 3rd-order scheme needs cells of at least 4 sites")
    rng = _rng_for(spec)
    if spec.init is not None:
        alpha = np.asarray(spec.init, dtype=np.int64).copy()
        if len(alpha) != m_cells or alpha.min() < 0 or alpha.max() > q:
            raise ValidationError("initial coarse configuration invalid")
    else:
        alpha = rng.binomial(q, 0.5, size=m_cells).astype(np.int64)
    ck = coarse_kernel(spec.kernel, part)
    km = kernel_moments(spec.kernel, part, ck) if spec.scheme == "cg2" else None
    htab = field_table(spec.h, part, spec.beta)
    kind = RATE_KINDS[spec.rate_kind]
    kappa = _coarse_kappa(spec, ck, km, htab)
    kappa_inv = 1.0 / kappa
    rate_beta = 1.0 if spec.match_paper_appendixB else spec.beta
    corr_mult = (1.0 if spec.match_paper_appendixB else
                 correction_weight_multiplier(spec.beta, spec.beta_mode))
    reach = max(ck.reach, 0)
    fast = m_cells > 2 * max(reach, 1) and not _FORCE_PYTHON
    if spec.scheme == "cg2":
        mom = km.moments
        e1, e2 = mom[1].copy(), mom[2].copy()
        e3, e4 = mom[3].copy(), mom[4].copy()
        j1, j2, j2t = km.j1, km.j2, km.j2t
    else:
        e1 = e2 = e3 = e4 = np.zeros(q + 1)
        j1 = j2 = np.zeros(1)
        j2t = np.zeros((1, 1))
    gf = RateFunction(spec.rate_kind)

    acc_rec = 0
    n_props = 0
    m_out = np.empty(spec.n_samples)
    cfg_out = np.empty((spec.n_samples, m_cells), dtype=np.int64) if spec.record_configs else None

    def run_props(n_prop: int) -> int:
        nonlocal n_props
        cells = rng.integers(0, m_cells, size=n_prop, dtype=np.int64)
        u1 = rng.random(n_prop)
        u2 = rng.random(n_prop)
        n_props += n_prop
        if fast:
            return int(mk.coarse_segment(alpha, q, ck.jbar, ck.jbar0, reach, htab,
                                         e1, e2, e3, e4, j1, j2, j2t,
                                         spec.scheme == "cg2", spec.beta,
                                         rate_beta, corr_mult, kind, kappa_inv,
                                         cells, u1, u2))
        acc = 0
        for i in range(n_prop):
            k = int(cells[i])
            a = int(alpha[k])
            d = 1 if u1[i] * q < (q - a) else -1
            arg = _coarse_scheme_delta(alpha, k, d, ck, km, htab, spec)
            if u2[i] < gf.g(arg) * kappa_inv:
                alpha[k] = a + d
                acc += 1
        return acc

    sweeps_left = spec.n_burnin
    while sweeps_left > 0:
        chunk = min(sweeps_left, _BURNIN_SEGMENT_SWEEPS)
        run_props(chunk * m_cells)
        sweeps_left -= chunk
    for rec in range(spec.n_samples):
        acc_rec += run_props(spec.thinning * m_cells)
        m_out[rec] = (2.0 * alpha - q).sum() / spec.n_sites
        if cfg_out is not None:
            cfg_out[rec] = alpha
    rec_props = spec.n_samples * spec.thinning * m_cells
    return SampleBatch(scheme=spec.scheme, n_sites=spec.n_sites, q=q, m=m_out,
                       configs=cfg_out,
                       acceptance_rate=acc_rec / rec_props if rec_props else 0.0,
                       n_proposals=n_props, spec_hash=spec.spec_hash(),
                       final_config=alpha.copy())


# ---------------------------------------------------------------------------
# Exact one-step transition matrix on enumerable state spaces
# ---------------------------------------------------------------------------

def transition_matrix(spec: ChainSpec) -> tuple[np.ndarray, np.ndarray]:
    """(states, T) for the chain on an enumerable instance.

    Rows sum to one; acceptance is G(arg)/kappa with kappa = max(1, sup G)
    over all enumerated transitions (exact uniformization), so detailed
    balance with respect to the scheme's Gibbs measure holds entrywise.
    """
    gf = RateFunction(spec.rate_kind)
    if spec.scheme == "micro":
        n = spec.n_sites
        n_states = 2 ** n
        if n_states > MATRIX_STATE_CAP:
            raise EnumerationCapError(f"{n_states} states exceed the matrix cap")
        states = all_spin_states(n)
        energies = micro_energies(spec.kernel, n, spec.h)
        moves = []
        for s in range(n_states):
            for x in range(n):
                t = s ^ (1 << x)
                moves.append((s, t, spec.beta * (energies[t] - energies[s]), 1.0 / n))
    else:
        part = CoarsePartition(spec.n_sites, spec.q)
        m_cells, q = part.m_cells, spec.q
        n_states = (q + 1) ** m_cells
        if n_states > MATRIX_STATE_CAP:
            raise EnumerationCapError(f"{n_states} states exceed the matrix cap")
        states = coarse_state_list(m_cells, q)
        ck = coarse_kernel(spec.kernel, part)
        htab = field_table(spec.h, part, spec.beta)
        h0v = h0_energy_batch(states, ck, htab)
        rate_beta = 1.0 if spec.match_paper_appendixB else spec.beta
        if spec.scheme == "cg2":
            km = kernel_moments(spec.kernel, part, ck)
            corrv = (h1_energy_batch(states, km, spec.beta)
                     + h2_energy_batch(states, km, spec.beta))
            corr_mult = (1.0 if spec.match_paper_appendixB else
                         correction_weight_multiplier(spec.beta, spec.beta_mode))
        else:
            corrv = np.zeros(n_states)
            corr_mult = 0.0
        argv = rate_beta * h0v + corr_mult * corrv
        radix = (q + 1) ** np.arange(m_cells)
        moves = []
        for s in range(n_states):
            a = states[s]
            for k in range(m_cells):
                if a[k] < q:
                    t = s + radix[k]
                    moves.append((s, t, argv[t] - argv[s],
                                  (q - a[k]) / (q * m_cells)))
                if a[k] > 0:
                    t = s - radix[k]
                    moves.append((s, t, argv[t] - argv[s],
                                  a[k] / (q * m_cells)))

    kappa = 1.0
    for (_, _, arg, _) in moves:
        kappa = max(kappa, gf.g(arg))
    t_mat = np.zeros((n_states, n_states))
    for (s, t, arg, prop) in moves:
        t_mat[s, t] += prop * gf.g(arg) / kappa
    np.fill_diagonal(t_mat, np.diag(t_mat) + 1.0 - t_mat.sum(axis=1))
    return states, t_mat


def is_irreducible_aperiodic(t_mat: np.ndarray) -> bool:
    """Reachability of the positive-entry graph plus a positive diagonal."""
    n = len(t_mat)
    adj = t_mat > 0
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        for w in np.nonzero(adj[v])[0]:
            if not seen[w]:
                seen[w] = True
                stack.append(int(w))
    return bool(seen.all() and (np.diag(t_mat) > 0).any())
