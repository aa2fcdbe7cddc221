import itertools
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from cgmc.errors import UndefinedMomentError, ValidationError
from cgmc.lattice import (
    Kernel,
    constant_kernel,
    curie_weiss_kernel,
    kernel_from_profile,
    micro_energy,
    random_spins,
    triangle_kernel,
)
from cgmc.coarse import (
    CoarseKernel,
    CoarsePartition,
    coarse_kernel,
    coarse_prior_logweight,
    coarsen,
    conditional_moments,
    effective_field,
    field_table,
    h0_energy,
    h0_energy_batch,
    h0_energy_delta,
    log_prior_table,
    sample_conditional,
)
from cgmc.oracles import all_spin_states, coarse_index, coarse_state_list, micro_energies


def torus_dist(a, b, n):
    d = abs(a - b) % n
    return min(d, n - d)


# ---------------------------------------------------------------------------
# coarsen
# ---------------------------------------------------------------------------

def test_coarsen_all_up():
    part = CoarsePartition(16, 4)
    assert np.array_equal(coarsen(np.ones(16, dtype=np.int8), part), [4, 4, 4, 4])


def test_coarsen_alternating():
    part = CoarsePartition(8, 2)
    s = np.array([1, -1] * 4, dtype=np.int8)
    assert np.array_equal(coarsen(s, part), [1, 1, 1, 1])


def test_coarsen_conserves_total_spin():
    rng = np.random.default_rng(0)
    part = CoarsePartition(24, 4)
    for _ in range(20):
        s = random_spins(24, rng)
        eta = 2 * coarsen(s, part) - 4
        assert eta.sum() == s.sum()


def test_coarsen_size_mismatch():
    with pytest.raises(ValidationError):
        coarsen(np.ones(10, dtype=np.int8), CoarsePartition(8, 2))


# ---------------------------------------------------------------------------
# prior
# ---------------------------------------------------------------------------

def test_prior_small_cells():
    # q=2: weights 1/4, 1/2, 1/4 at eta = -2, 0, 2
    assert abs(math.exp(coarse_prior_logweight(-2, 2)) - 0.25) < 1e-15
    assert abs(math.exp(coarse_prior_logweight(0, 2)) - 0.5) < 1e-15
    assert abs(math.exp(coarse_prior_logweight(2, 2)) - 0.25) < 1e-15
    assert abs(math.exp(coarse_prior_logweight(1, 1)) - 0.5) < 1e-15


def test_prior_normalizes_up_to_q64():
    for q in range(1, 65):
        assert abs(np.exp(log_prior_table(q)).sum() - 1.0) < 1e-12


def test_prior_parity_violation():
    with pytest.raises(ValidationError):
        coarse_prior_logweight(1, 2)
    with pytest.raises(ValidationError):
        coarse_prior_logweight(4, 2)


def test_prior_pushforward_of_fair_coins():
    # histogram of coarsened iid spins follows the binomial prior (chi^2)
    rng = np.random.default_rng(42)
    q, m, n_draw = 4, 2, 100_000
    part = CoarsePartition(q * m, q)
    counts = np.zeros((q + 1) ** m)
    for _ in range(n_draw):
        alpha = coarsen(random_spins(q * m, rng), part)
        counts[int(coarse_index(alpha, q)[0])] += 1
    probs = np.exp(log_prior_table(q)[coarse_state_list(m, q)].sum(axis=1))
    stat, p = chisquare(counts, n_draw * probs)
    assert p > 1e-3


# ---------------------------------------------------------------------------
# conditional moments
# ---------------------------------------------------------------------------

def test_moment_examples():
    assert abs(conditional_moments(3, 4).e1 - 0.5) < 1e-15
    assert abs(conditional_moments(2, 4).e2 - (-1.0 / 3.0)) < 1e-15
    cm = conditional_moments(4, 4)
    assert cm.e1 == cm.e2 == cm.e3 == cm.e4 == 1.0


def test_moments_match_exhaustive_average():
    # every moment equals the brute-force average over all placements
    for q in range(2, 9):
        for a in range(q + 1):
            cm = conditional_moments(a, q)
            rows = []
            for ups in itertools.combinations(range(q), a):
                s = -np.ones(q)
                s[list(ups)] = 1.0
                rows.append(s)
            v = np.array(rows)
            assert abs(cm.e1 - v[:, 0].mean()) < 1e-12
            assert abs(cm.e2 - (v[:, 0] * v[:, 1]).mean()) < 1e-12
            if q >= 3:
                assert abs(cm.e3 - (v[:, 0] * v[:, 1] * v[:, 2]).mean()) < 1e-12
            if q >= 4:
                assert abs(cm.e4 - (v[:, :4].prod(axis=1)).mean()) < 1e-12


def test_moment_order_errors():
    with pytest.raises(UndefinedMomentError):
        _ = conditional_moments(1, 2).e3
    with pytest.raises(UndefinedMomentError):
        _ = conditional_moments(2, 3).e4
    with pytest.raises(UndefinedMomentError):
        conditional_moments(0, 1)


def test_moments_bounded():
    for q in (2, 3, 5, 8):
        for a in range(q + 1):
            cm = conditional_moments(a, q)
            vals = [cm.e1, cm.e2] + ([cm.e3] if q >= 3 else []) + ([cm.e4] if q >= 4 else [])
            assert all(-1 - 1e-12 <= v <= 1 + 1e-12 for v in vals)


# ---------------------------------------------------------------------------
# coarse kernel
# ---------------------------------------------------------------------------

def test_coarse_kernel_constant_plateau():
    # J(r) = c on r <= L with L a multiple of q: interior averages equal c
    q, l, n = 4, 8, 64
    c = 0.05
    k = Kernel(np.full(l, c))
    ck = coarse_kernel(k, CoarsePartition(n, q))
    assert abs(ck.jbar0 - c) < 1e-14
    assert abs(ck.jbar[1] - c) < 1e-14  # all pairs of adjacent cells in range


def test_coarse_kernel_curie_weiss_constant():
    n, q = 16, 4
    ck = coarse_kernel(curie_weiss_kernel(1.0, n), CoarsePartition(n, q))
    assert abs(ck.jbar0 - 1.0 / n) < 1e-15
    assert np.allclose(ck.jbar[1:], 1.0 / n)


def test_coarse_kernel_zero():
    ck = coarse_kernel(Kernel(np.zeros(3)), CoarsePartition(16, 4))
    assert ck.jbar0 == 0.0 and np.all(ck.jbar == 0.0)


def test_coarse_kernel_recompute_invariant():
    # jbar tables equal the defining sums, recomputed independently here
    rng = np.random.default_rng(7)
    n, q = 24, 4
    k = Kernel(rng.normal(size=7) * 0.2)
    jt = k.table(n)
    ck = coarse_kernel(k, CoarsePartition(n, q))
    acc = 0.0
    for x in range(q):
        for y in range(q):
            if x != y:
                acc += jt[torus_dist(x, y, n)]
    assert abs(ck.jbar0 - acc / (q * (q - 1))) < 1e-14
    for rho in range(1, n // q // 2 + 1):
        acc = 0.0
        for x in range(q):
            for y in range(rho * q, rho * q + q):
                acc += jt[torus_dist(x, y, n)]
        assert abs(ck.jbar[rho] - acc / q ** 2) < 1e-14


def test_self_coupling_requires_q2():
    ck = coarse_kernel(constant_kernel(1.0, 1), CoarsePartition(8, 1))
    with pytest.raises(ValidationError):
        ck.self_coupling()


def test_averaging_error_bound_c1_profile():
    # |J(x-y) - Jbar(k,l)| <= 2 (q/L^2) sup|V'| for V(r) = 1 - r
    for q, l in [(2, 8), (4, 8), (4, 16), (8, 16), (8, 32)]:
        n = 8 * l
        k = kernel_from_profile(lambda u: 1.0 - u, l, 1.0)
        jt = k.table(n)
        ck = coarse_kernel(k, CoarsePartition(n, q))
        bound = 2.0 * q / l ** 2
        worst = 0.0
        for rho in range(0, ck.reach + 1):
            jb = ck.jbar0 if rho == 0 else ck.jbar[rho]
            for x in range(q):
                for y in range(rho * q, rho * q + q):
                    if rho == 0 and x == y:
                        continue
                    worst = max(worst, abs(jt[torus_dist(x, y, n)] - jb))
        assert worst <= bound + 1e-12, (q, l, worst, bound)


# ---------------------------------------------------------------------------
# H0
# ---------------------------------------------------------------------------

def test_h0_two_cell_example():
    # M=2, q=2, jbar(1)=j, jbar(0)=j0, alpha=(2,2): H0 = -4j - 2*j0
    j, j0 = 0.3, 0.17
    ck = CoarseKernel(jbar=np.array([0.0, j]), jbar0=j0, q=2, range_l=2,
                      n_sites=4, m_cells=2, reach=1)
    val = h0_energy(np.array([2, 2]), ck, 0.0)
    assert abs(val - (-4 * j - 2 * j0)) < 1e-14


def test_h0_half_filled_cells():
    j0 = 0.11
    m, q = 4, 2
    ck = CoarseKernel(jbar=np.zeros(3), jbar0=j0, q=q, range_l=1,
                      n_sites=8, m_cells=m, reach=1)
    val = h0_energy(np.full(m, q // 2), ck, 0.0)
    assert abs(val - m * q * j0 / 2.0) < 1e-14


@pytest.mark.parametrize("n,q", [(8, 2), (12, 4), (16, 4), (16, 2)])
def test_h0_equals_conditional_mean(n, q):
    # defining identity: H0(eta) = E[H | eta], checked by full enumeration
    rng = np.random.default_rng(n + q)
    part = CoarsePartition(n, q)
    kern = kernel_from_profile(lambda u: 1.0 - u, max(2, n // 3), rng.uniform(0.5, 2))
    h0f = rng.normal() * 0.3
    energies = micro_energies(kern, n, h0f)
    s = all_spin_states(n)
    occ = (s > 0).astype(np.int64).reshape(-1, part.m_cells, q).sum(axis=2)
    cidx = coarse_index(occ, q)
    cond = np.zeros((q + 1) ** part.m_cells)
    cnt = np.zeros_like(cond)
    np.add.at(cond, cidx, energies)
    np.add.at(cnt, cidx, 1.0)
    cond /= cnt
    states = coarse_state_list(part.m_cells, q)
    ck = coarse_kernel(kern, part)
    vals = h0_energy_batch(states, ck, field_table(h0f, part))
    assert np.abs(vals - cond).max() < 1e-10


def test_h0_curie_weiss_exact_per_configuration():
    # constant kernel: H0(F(sigma)) == H(sigma) exactly
    rng = np.random.default_rng(9)
    n, q = 16, 4
    part = CoarsePartition(n, q)
    kern = curie_weiss_kernel(1.3, n)
    ck = coarse_kernel(kern, part)
    for _ in range(40):
        s = random_spins(n, rng)
        assert abs(h0_energy(coarsen(s, part), ck, 0.2)
                   - micro_energy(s, kern, 0.2)) < 1e-12


def test_h0_delta_matches_full():
    rng = np.random.default_rng(11)
    n, q = 48, 4
    part = CoarsePartition(n, q)
    kern = triangle_kernel(1.0, 10)
    ck = coarse_kernel(kern, part)
    htab = field_table(0.23, part)
    for _ in range(100):
        alpha = rng.integers(0, q + 1, size=part.m_cells)
        k = int(rng.integers(0, part.m_cells))
        d = 1 if alpha[k] == 0 else (-1 if alpha[k] == q else (1 if rng.random() < 0.5 else -1))
        a2 = alpha.copy()
        a2[k] += d
        delta = h0_energy_delta(alpha, k, d, ck, htab)
        full = (h0_energy_batch(a2, ck, htab) - h0_energy_batch(alpha, ck, htab))[0]
        assert abs(delta - full) < 1e-10


def test_h0_delta_zero_kernel_uniform_field():
    part = CoarsePartition(8, 2)
    ck = coarse_kernel(Kernel(np.zeros(1)), part)
    alpha = np.array([1, 1, 2, 0])
    # birth: eta increases by 2 -> dH = +2 h0
    assert abs(h0_energy_delta(alpha, 0, 1, ck, 0.4) - 0.8) < 1e-14
    assert abs(h0_energy_delta(alpha, 2, -1, ck, 0.4) + 0.8) < 1e-14


def test_h0_delta_curie_weiss_against_oracle_difference():
    rng = np.random.default_rng(13)
    n, q = 16, 4
    part = CoarsePartition(n, q)
    ck = coarse_kernel(curie_weiss_kernel(0.9, n), part)
    htab = field_table(0.1, part)
    for _ in range(50):
        alpha = rng.integers(0, q + 1, size=part.m_cells)
        k = int(rng.integers(0, part.m_cells))
        d = 1 if alpha[k] == 0 else (-1 if alpha[k] == q else 1)
        a2 = alpha.copy()
        a2[k] += d
        assert abs(h0_energy_delta(alpha, k, d, ck, htab)
                   - (h0_energy_batch(a2, ck, htab)[0]
                      - h0_energy_batch(alpha, ck, htab)[0])) < 1e-10


def test_h0_delta_boundary_violation():
    part = CoarsePartition(8, 2)
    ck = coarse_kernel(constant_kernel(1.0, 1), part)
    with pytest.raises(ValidationError):
        h0_energy_delta(np.array([2, 0, 1, 1]), 0, 1, ck)
    with pytest.raises(ValidationError):
        h0_energy_delta(np.array([2, 0, 1, 1]), 1, -1, ck)


# ---------------------------------------------------------------------------
# conditional sampling
# ---------------------------------------------------------------------------

def test_sample_conditional_deterministic_cells():
    part = CoarsePartition(12, 4)
    rng = np.random.default_rng(0)
    s = sample_conditional(np.array([4, 4, 4]), part, rng)
    assert np.all(s == 1)
    s = sample_conditional(np.array([0, 0, 0]), part, rng)
    assert np.all(s == -1)


def test_sample_conditional_site_marginal():
    # P(sigma(x) = 1) = alpha/q within 4 sigma binomial
    part = CoarsePartition(8, 4)
    rng = np.random.default_rng(21)
    alpha = np.array([1, 3])
    n_draw = 100_000
    up = np.zeros(8)
    for _ in range(n_draw):
        up += sample_conditional(alpha, part, rng) > 0
    for x in range(8):
        p = alpha[x // 4] / 4
        se = math.sqrt(p * (1 - p) / n_draw)
        assert abs(up[x] / n_draw - p) < 4 * se + 1e-12


def test_sample_conditional_pair_moment():
    part = CoarsePartition(6, 3)
    rng = np.random.default_rng(22)
    alpha = np.array([1, 2])
    n_draw = 60_000
    acc = 0.0
    for _ in range(n_draw):
        s = sample_conditional(alpha, part, rng)
        acc += s[0] * s[1]
    e2 = conditional_moments(1, 3).e2
    se = math.sqrt((1 - e2 ** 2) / n_draw)
    assert abs(acc / n_draw - e2) < 4 * se


def test_sample_conditional_inverts_coarsen():
    part = CoarsePartition(20, 5)
    rng = np.random.default_rng(23)
    for _ in range(20):
        alpha = rng.integers(0, 6, size=4)
        s = sample_conditional(alpha, part, rng)
        assert np.array_equal(coarsen(s, part), alpha)


# ---------------------------------------------------------------------------
# effective field
# ---------------------------------------------------------------------------

def test_effective_field_uniform_exact():
    part = CoarsePartition(8, 4)
    eff = effective_field(0.7, part, beta=2.0)
    assert eff.exact
    eta = 2 * np.arange(5) - 4
    assert np.allclose(eff.table, 0.7 * np.tile(eta, (2, 1)))


def test_effective_field_zero():
    part = CoarsePartition(8, 2)
    eff = effective_field(0.0, part, beta=1.0)
    assert np.all(eff.table == 0.0)


def test_effective_field_two_site_cell_enumeration():
    # q=2 cell with fields (a, b): compare to the in-cell average computed here
    a, b, beta = 0.4, -0.9, 1.3
    part = CoarsePartition(4, 2)
    hx = np.array([a, b, 0.0, 0.0])
    eff = effective_field(hx, part, beta=beta)
    assert not eff.exact
    # alpha = 1: two placements (+-), (-+), equal weight
    vals = [-beta * (a - b), -beta * (b - a)]
    expect = -(math.log(0.5 * (math.exp(vals[0]) + math.exp(vals[1])))) / beta
    assert abs(eff.table[0, 1] - expect) < 1e-12
    # deterministic extremes
    assert abs(eff.table[0, 2] - (a + b)) < 1e-12
    assert abs(eff.table[0, 0] + (a + b)) < 1e-12


def test_effective_field_cap():
    part = CoarsePartition(44, 22)
    hx = np.zeros(44)
    hx[0] = 1.0  # sub-cell variation in the first cell
    with pytest.raises(ValidationError):
        effective_field(hx, part, beta=1.0)
