import itertools
import math

import numpy as np
import pytest

from cgmc.errors import UndefinedMomentError, ValidationError
from cgmc.lattice import Kernel, constant_kernel, curie_weiss_kernel, triangle_kernel
from cgmc.coarse import CoarsePartition, coarse_kernel, sample_conditional
from cgmc.corrections import (
    corrected_energy,
    corrected_energy_batch,
    epsilon_diag,
    h1_energy,
    h1_energy_batch,
    h2_energy,
    h2_energy_batch,
    kernel_moments,
    residuum,
)
from cgmc.oracles import appendixA_oracle


def torus_dist(a, b, n):
    d = abs(a - b) % n
    return min(d, n - d)


def brute_moments(kern, n, q):
    """j-moment tables straight from the definitions (independent loops)."""
    m = n // q
    jt = kern.table(n)
    ck = coarse_kernel(kern, CoarsePartition(n, q))

    def e(ca, x, cb, y):
        d = torus_dist(ca, cb, m)
        jb = ck.jbar0 if d == 0 else ck.jbar[d]
        return jt[torus_dist(x, y, n)] - jb

    def sites(c):
        return range(c * q, c * q + q)

    j1 = np.zeros(m // 2 + 1)
    j2 = np.zeros(m // 2 + 1)
    for rho in range(m // 2 + 1):
        for x in sites(0):
            for y in sites(rho):
                if rho == 0 and x == y:
                    continue
                j1[rho] += e(0, x, rho, y) ** 2
                for yp in sites(rho):
                    if rho == 0 and yp == x:
                        continue
                    j2[rho] += e(0, x, rho, y) * e(0, x, rho, yp)
    j2t = {}
    for r1 in range(-(m // 2), m // 2 + 1):
        for r2 in range(-(m // 2), m // 2 + 1):
            c1, c2 = r1 % m, r2 % m
            tot = 0.0
            for x in sites(c1):
                for y in sites(0):
                    if c1 == 0 and x == y:
                        continue
                    for z in sites(c2):
                        if c2 == 0 and z == y:
                            continue
                        tot += e(c1, x, 0, y) * e(0, y, c2, z)
            j2t[(c1, c2)] = tot
    return j1, j2, j2t


def test_moment_tables_match_definition_loops():
    rng = np.random.default_rng(17)
    for q, l, n in [(2, 3, 12), (4, 8, 24), (3, 5, 18)]:
        kern = Kernel(rng.normal(size=l) * 0.2)
        km = kernel_moments(kern, CoarsePartition(n, q))
        j1, j2, j2t = brute_moments(kern, n, q)
        assert np.abs(km.j1 - j1).max() < 1e-13
        assert np.abs(km.j2 - j2).max() < 1e-13
        for (c1, c2), v in j2t.items():
            assert abs(km.j2t[c1, c2] - v) < 1e-13


def test_moments_vanish_for_curie_weiss():
    n, q = 16, 4
    km = kernel_moments(curie_weiss_kernel(1.0, n), CoarsePartition(n, q))
    assert np.abs(km.j1).max() == 0.0
    assert np.abs(km.j2).max() == 0.0
    assert np.abs(km.j2t).max() == 0.0


def test_within_cell_j1_zero_when_all_pairs_equidistant():
    # q=2: both ordered in-cell pairs sit at distance 1, so E00 == 0
    kern = Kernel(np.array([0.4, 0.1]))
    km = kernel_moments(kern, CoarsePartition(8, 2))
    assert abs(km.j1[0]) < 1e-15


def test_j1_nonnegative_and_symmetries():
    rng = np.random.default_rng(18)
    kern = Kernel(rng.normal(size=6) * 0.3)
    km = kernel_moments(kern, CoarsePartition(24, 4))
    assert (km.j1 >= -1e-15).all()
    m = km.m_cells
    for r1 in range(-2, 3):
        for r2 in range(-2, 3):
            a, b = r1 % m, r2 % m
            assert abs(km.j2t[a, b] - km.j2t[b, a]) < 1e-13
            assert abs(km.j2t[a, b] - km.j2t[(-r1) % m, (-r2) % m]) < 1e-13


def test_kernel_moments_reject_single_site_cells():
    with pytest.raises(ValidationError):
        kernel_moments(constant_kernel(1.0, 1), CoarsePartition(8, 1))


# ---------------------------------------------------------------------------
# correction energies against the conditional-integral oracle
# ---------------------------------------------------------------------------

def h1_from_enumeration(alpha, kern, n, q, beta):
    """-H1 = (beta/2) sum_k E[Dkk^2] + sum_{k<l} [(beta/2) E[Dkl^2]
    + beta (E[Dkl Dkk] + E[Dkl Dll])], all conditional integrals enumerated.

    The raw oracle sums relate to the D terms by the prefactors of the
    fluctuation sums: Dkk = -(1/2) (raw kk), Dkl = -(raw kl)."""
    m = n // q
    acc = 0.0
    for k in range(m):
        enum, _ = appendixA_oracle("kk2", kern, q, (int(alpha[k]),), n_sites=n)
        acc += (beta / 2.0) * 0.25 * enum
    for k in range(m):
        for l in range(k + 1, m):
            rho = l - k
            e_kl, _ = appendixA_oracle("kl2", kern, q, (int(alpha[k]), int(alpha[l])),
                                       (rho,), n_sites=n)
            acc += (beta / 2.0) * e_kl
            e_kkl, _ = appendixA_oracle("kkkl", kern, q, (int(alpha[k]), int(alpha[l])),
                                        (rho,), n_sites=n)
            e_llk, _ = appendixA_oracle("kkkl", kern, q, (int(alpha[l]), int(alpha[k])),
                                        (-rho,), n_sites=n)
            acc += beta * 0.5 * (e_kkl + e_llk)
    return -acc


def h2_from_enumeration(alpha, kern, n, q, beta):
    """-H2 = beta sum over cell triples of the three chain integrals."""
    m = n // q
    acc = 0.0
    for a, b, c in itertools.combinations(range(m), 3):
        for (end1, mid, end2) in ((a, b, c), (b, c, a), (c, a, b)):
            enum, _ = appendixA_oracle(
                "triple", kern, q,
                (int(alpha[end1]), int(alpha[mid]), int(alpha[end2])),
                (end1 - mid, end2 - mid), n_sites=n)
            acc += beta * enum
    return -acc


def test_h1_matches_cluster_term_enumeration():
    rng = np.random.default_rng(31)
    n, q = 16, 4
    kern = Kernel(rng.normal(size=5) * 0.25)
    km = kernel_moments(kern, CoarsePartition(n, q))
    for _ in range(6):
        alpha = rng.integers(0, q + 1, size=n // q)
        want = h1_from_enumeration(alpha, kern, n, q, 0.7)
        got = h1_energy(alpha, km, 0.7)
        assert abs(want - got) < 1e-12, (alpha, want, got)


def test_h2_matches_cluster_term_enumeration():
    rng = np.random.default_rng(32)
    n, q = 12, 4
    kern = Kernel(rng.normal(size=4) * 0.25)
    km = kernel_moments(kern, CoarsePartition(n, q))
    for _ in range(6):
        alpha = rng.integers(0, q + 1, size=n // q)
        want = h2_from_enumeration(alpha, kern, n, q, 0.9)
        got = h2_energy(alpha, km, 0.9)
        assert abs(want - got) < 1e-12, (alpha, want, got)


def test_h2_minimal_three_cell_case_brute_force():
    # direct triple-loop evaluation on M=3 against the table implementation
    rng = np.random.default_rng(33)
    n, q = 12, 4
    kern = Kernel(rng.normal(size=6) * 0.2)
    part = CoarsePartition(n, q)
    km = kernel_moments(kern, part)
    j1, j2, j2t = brute_moments(kern, n, q)
    from cgmc.coarse import moment_tables
    mom = moment_tables(q)
    for _ in range(10):
        alpha = rng.integers(0, q + 1, size=3)
        e1 = mom[1][alpha]
        e2 = mom[2][alpha]
        tot = 0.0
        m = 3
        for a, b, c in itertools.combinations(range(3), 3):
            for (x, mid, z) in ((a, b, c), (b, c, a), (c, a, b)):
                tot += j2t[((x - mid) % m, (z - mid) % m)] * (
                    -e1[x] * e2[mid] * e1[z] + e1[x] * e1[z])
        assert abs(h2_energy(alpha, km, 1.1) - (-1.1 * tot)) < 1e-13


def test_corrections_zero_for_curie_weiss():
    n, q = 16, 4
    km = kernel_moments(curie_weiss_kernel(1.0, n), CoarsePartition(n, q))
    rng = np.random.default_rng(34)
    for _ in range(10):
        alpha = rng.integers(0, q + 1, size=4)
        assert h1_energy(alpha, km, 2.0) == 0.0
        assert h2_energy(alpha, km, 2.0) == 0.0
        assert residuum(alpha, km, 2.0) == 0.0


def test_h2_zero_at_half_filling():
    # E1 = 0 in every cell kills every chain term
    n, q = 24, 4
    km = kernel_moments(triangle_kernel(1.0, 8), CoarsePartition(n, q))
    alpha = np.full(6, 2)
    assert abs(h2_energy(alpha, km, 1.7)) < 1e-15


def test_corrected_energy_additivity_and_cw_identity():
    rng = np.random.default_rng(35)
    n, q = 16, 4
    part = CoarsePartition(n, q)
    kern = triangle_kernel(1.0, 6)
    ck = coarse_kernel(kern, part)
    km = kernel_moments(kern, part, ck)
    from cgmc.coarse import field_table, h0_energy_batch
    htab = field_table(0.2, part)
    for _ in range(5):
        alpha = rng.integers(0, q + 1, size=4)
        tot = corrected_energy(alpha, ck, km, 0.2, 0.8)
        parts = (h0_energy_batch(alpha, ck, htab)[0]
                 + h1_energy(alpha, km, 0.8) + h2_energy(alpha, km, 0.8))
        assert abs(tot - parts) < 1e-12
    cwk = curie_weiss_kernel(1.0, n)
    ck2 = coarse_kernel(cwk, part)
    km2 = kernel_moments(cwk, part, ck2)
    for _ in range(5):
        alpha = rng.integers(0, q + 1, size=4)
        assert abs(corrected_energy(alpha, ck2, km2, 0.1, 1.5)
                   - h0_energy_batch(alpha, ck2, field_table(0.1, part))[0]) < 1e-13


def test_residuum_convention():
    rng = np.random.default_rng(36)
    n, q = 16, 4
    km = kernel_moments(triangle_kernel(1.0, 6), CoarsePartition(n, q))
    alpha = rng.integers(0, q + 1, size=4)
    beta = 0.6
    s = h1_energy(alpha, km, beta) + h2_energy(alpha, km, beta)
    assert abs(residuum(alpha, km, beta, "uniform_beta") - beta * s) < 1e-14
    assert abs(residuum(alpha, km, beta, "paper_scheme2") - s) < 1e-14
    with pytest.raises(ValidationError):
        residuum(alpha, km, beta, "bogus")


def test_h1_requires_fourth_moment():
    n, q = 12, 3
    km = kernel_moments(triangle_kernel(1.0, 4), CoarsePartition(n, q))
    with pytest.raises(UndefinedMomentError):
        h1_energy(np.array([1, 2, 0, 3]), km, 1.0)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

def test_fluctuation_sum_cancellation_exact():
    # E[sum E_kl s s | alpha] = 0 by construction of the cell averages
    rng = np.random.default_rng(37)
    n, q = 18, 3
    kern = Kernel(rng.normal(size=5) * 0.3)
    jt = kern.table(n)
    ck = coarse_kernel(kern, CoarsePartition(n, q))
    m = n // q
    from cgmc.oracles import _placement_mean, _placement_second
    for rho in range(0, 3):
        jb = ck.jbar0 if rho == 0 else ck.jbar[rho]
        e = np.zeros((q, q))
        for i in range(q):
            for j in range(q):
                x, y = i, rho * q + j
                if x == y:
                    continue
                e[i, j] = jt[torus_dist(x, y, n)] - jb
        for ak in range(q + 1):
            for al in range(q + 1):
                if rho == 0:
                    if ak != al:
                        continue
                    val = float(np.sum(_placement_second(q, ak) * e))
                else:
                    val = float(_placement_mean(q, ak) @ e @ _placement_mean(q, al))
                assert abs(val) < 1e-14, (rho, ak, al, val)


def test_fluctuation_cancellation_statistical_large_q():
    # 4-sigma check via conditional sampling at q too large to enumerate
    rng = np.random.default_rng(38)
    n, q = 64, 16
    part = CoarsePartition(n, q)
    kern = triangle_kernel(1.0, 24)
    jt = kern.table(n)
    ck = coarse_kernel(kern, part)
    alpha = np.array([5, 12, 3, 9])
    k, l = 0, 1
    e = np.zeros((q, q))
    for i in range(q):
        for j in range(q):
            e[i, j] = jt[torus_dist(k * q + i, l * q + j, n)] - ck.jbar[1]
    n_draw = 4000
    vals = np.empty(n_draw)
    for t in range(n_draw):
        s = sample_conditional(alpha, part, rng)
        vals[t] = s[k * q:(k + 1) * q] @ e @ s[l * q:(l + 1) * q]
    se = vals.std(ddof=1) / math.sqrt(n_draw)
    assert abs(vals.mean()) < 4 * se + 1e-12


def test_correction_symmetries():
    # cyclic shifts and the global up-down flip leave H1, H2 unchanged
    rng = np.random.default_rng(39)
    n, q = 24, 4
    km = kernel_moments(triangle_kernel(1.0, 8), CoarsePartition(n, q))
    for _ in range(10):
        alpha = rng.integers(0, q + 1, size=6)
        h1 = h1_energy(alpha, km, 0.9)
        h2 = h2_energy(alpha, km, 0.9)
        for shift in (1, 2, 5):
            assert abs(h1_energy(np.roll(alpha, shift), km, 0.9) - h1) < 1e-12
            assert abs(h2_energy(np.roll(alpha, shift), km, 0.9) - h2) < 1e-12
        assert abs(h1_energy(q - alpha, km, 0.9) - h1) < 1e-12
        assert abs(h2_energy(q - alpha, km, 0.9) - h2) < 1e-12


def test_h1_magnitude_scaling_with_range():
    # max|H1|/N shrinks like eps^2 (q/L) ~ L^-3 at fixed beta, q
    q, beta = 4, 0.5
    maxima = []
    for l in (8, 16, 32):
        n = 8 * l
        part = CoarsePartition(n, q)
        km = kernel_moments(triangle_kernel(1.0, l), part)
        states = np.stack([np.full(part.m_cells, a) for a in range(q + 1)])
        vals = np.abs(h1_energy_batch(states, km, beta)) / n
        maxima.append(vals.max())
    r1 = maxima[0] / maxima[1]
    r2 = maxima[1] / maxima[2]
    assert 4.0 < r1 < 16.0, maxima
    assert 4.0 < r2 < 16.0, maxima


def test_epsilon_diag():
    d = epsilon_diag(2.0, 8, 8, 1.0, c=1.0)
    assert d.epsilon == 2.0 and d.delta == 16.0
    assert epsilon_diag(2.0, 8, 8, 0.0).epsilon == 0.0
    assert abs(epsilon_diag(1.0, 4, 16, 1.0).epsilon
               - epsilon_diag(1.0, 4, 8, 1.0).epsilon / 2) < 1e-15
    with pytest.raises(ValidationError):
        epsilon_diag(-1.0, 4, 8, 1.0)
