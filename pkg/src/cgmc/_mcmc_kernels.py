"""Jitted Markov-chain inner loops.

All randomness is consumed from pre-drawn arrays produced by a counter-based
numpy generator, so trajectories are reproducible and independent of the JIT.
The fast paths assume every in-range pair is reachable one way (N > 2L on the
fine lattice, M > 2*reach on the coarse one); tiny systems use the pure-python
reference steps in samplers.py instead.
"""

import numpy as np
from numba import njit

# rate kinds: 0 = metropolis exp(-[r]+), 1 = glauber 1/(1+e^r), 2 = symmetric e^(-r/2)


@njit(cache=True, nogil=True)
def g_accept(r, kind):
    if kind == 0:
        return np.exp(-r) if r > 0.0 else 1.0
    if kind == 1:
        if r > 700.0:
            return 0.0
        return 1.0 / (1.0 + np.exp(r))
    return np.exp(-0.5 * r)


@njit(cache=True, nogil=True)
def micro_segment(spins, jvals, h, beta, kind, kappa_inv, sites, us):
    """Run len(sites) single-flip proposals in place; returns acceptances."""
    n = spins.shape[0]
    l = jvals.shape[0]
    acc = 0
    for i in range(sites.shape[0]):
        x = sites[i]
        s = 0.0
        for r in range(1, l + 1):
            xp = x + r
            if xp >= n:
                xp -= n
            xm = x - r
            if xm < 0:
                xm += n
            s += jvals[r - 1] * (spins[xp] + spins[xm])
        dh = 2.0 * spins[x] * s - 2.0 * h[x] * spins[x]
        if us[i] < g_accept(beta * dh, kind) * kappa_inv:
            spins[x] = -spins[x]
            acc += 1
    return acc


@njit(cache=True, nogil=True)
def corr_local(alpha, k, reach, e1, e2, e3, e4, j1, j2, j2t, beta):
    """Sum of all correction terms (H1+H2) whose value depends on cell k.

    Deltas of H1+H2 under a move at k equal deltas of this local sum.
    Requires m_cells > 2*reach so displaced cells never alias.
    """
    m = alpha.shape[0]
    a = alpha[k]
    disp = (beta / 8.0) * (4.0 * j2[0] * (-e4[a] + e2[a])
                           + 2.0 * j1[0] * (e4[a] + 1.0 - 2.0 * e2[a]))
    for rho in range(1, reach + 1):
        for t in range(2):
            l = k + rho if t == 0 else k - rho
            if l >= m:
                l -= m
            if l < 0:
                l += m
            al = alpha[l]
            disp += (beta / 2.0) * (j1[rho] * (e2[a] * e2[al] - e2[a] - e2[al] + 1.0)
                                    + j2[rho] * (-2.0 * e2[a] * e2[al] + e2[a] + e2[al]))
            disp += beta * j2t[0, (l - k) % m] * (-e3[a] * e1[al]
                                                  + 2.0 * e1[a] * e1[al]
                                                  - e3[al] * e1[a])
    val = -disp
    t2 = 0.0
    for r1 in range(-reach, reach + 1):
        if r1 == 0:
            continue
        for r2 in range(r1 + 1, reach + 1):
            if r2 == 0:
                continue
            ca = (k + r1) % m
            cb = (k + r2) % m
            t2 += j2t[(ca - k) % m, (cb - k) % m] * (
                -e1[alpha[ca]] * e2[a] * e1[alpha[cb]] + e1[alpha[ca]] * e1[alpha[cb]])
    for rm in range(-reach, reach + 1):
        if rm == 0:
            continue
        mid = (k + rm) % m
        am = alpha[mid]
        for r2 in range(-reach, reach + 1):
            if r2 == 0:
                continue
            cc = (mid + r2) % m
            if cc == k:
                continue
            t2 += j2t[(k - mid) % m, (cc - mid) % m] * (
                -e1[a] * e2[am] * e1[alpha[cc]] + e1[a] * e1[alpha[cc]])
    return val - beta * t2


@njit(cache=True, nogil=True)
def coarse_segment(alpha, q, jbar, jbar0, reach, htab,
                   e1, e2, e3, e4, j1, j2, j2t, use_corr, beta_corr,
                   rate_beta, corr_mult, kind, kappa_inv, cells, u1, u2):
    """Run len(cells) birth-death proposals in place; returns acceptances."""
    m = alpha.shape[0]
    acc = 0
    for i in range(cells.shape[0]):
        k = cells[i]
        a = alpha[k]
        d = 1 if u1[i] * q < (q - a) else -1
        eta_k = 2.0 * a - q
        deta = 2.0 * d
        s = 0.0
        for rho in range(1, reach + 1):
            kp = k + rho
            if kp >= m:
                kp -= m
            km = k - rho
            if km < 0:
                km += m
            if 2 * rho == m:
                s += jbar[rho] * (2.0 * alpha[kp] - q)
            else:
                s += jbar[rho] * ((2.0 * alpha[kp] - q) + (2.0 * alpha[km] - q))
        dh0 = -deta * s
        if q > 1:
            dh0 -= 0.5 * jbar0 * (2.0 * eta_k * deta + deta * deta)
        dh0 += htab[k, a + d] - htab[k, a]
        arg = rate_beta * dh0
        if use_corr:
            before = corr_local(alpha, k, reach, e1, e2, e3, e4, j1, j2, j2t, beta_corr)
            alpha[k] = a + d
            after = corr_local(alpha, k, reach, e1, e2, e3, e4, j1, j2, j2t, beta_corr)
            alpha[k] = a
            arg += corr_mult * (after - before)
        if u2[i] < g_accept(arg, kind) * kappa_inv:
            alpha[k] = a + d
            acc += 1
    return acc
