"""Batch experiment drivers: continuation sweeps, verification suites,
operation-count benchmarks, entropy-scaling grids, and CSV emission.

CSV files start with a "# schema_version=1" line followed by the column
header. Sweep outputs are byte-deterministic for a fixed config and seed in
every column except wall_time_s.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from cgmc.errors import ValidationError
from cgmc.config import ExperimentConfig, build_kernel
from cgmc.lattice import AccessCounter, micro_energy
from cgmc.coarse import CoarsePartition, coarse_kernel, conditional_moments, h0_energy
from cgmc.corrections import (
    corrected_energy_batch,
    epsilon_diag,
    kernel_moments,
)
from cgmc.estimators import a_posteriori_mc, magnetization, scheme_entropy_exact
from cgmc.oracles import (
    SchemeParams,
    appendixA_oracle,
    curie_weiss_m,
    enumerate_coarse,
    ising_nn_exact_m,
    pushforward_log_weights,
    scheme_log_unnormalized,
    _placements,
)
from cgmc.samplers import ChainSpec, is_irreducible_aperiodic, run_chain, transition_matrix

SCHEMA_LINE = "# schema_version=1"
SWEEP_COLUMNS = "scheme,h,branch,m_mean,m_stderr,acceptance_rate,energy_evals,wall_time_s"
ENTROPY_COLUMNS = "scheme,epsilon,r_per_site,sup_residual_per_site,beta,range_l,q,n_sites"
CURVE_COLUMNS = "curve,beta,j0,h,m"


def _fmt(x: float) -> str:
    return f"{x:.10g}"


# ---------------------------------------------------------------------------
# Continuation sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepRecord:
    scheme: str
    h: float
    branch: str
    m_mean: float
    m_stderr: float
    acceptance_rate: float
    energy_evals: int
    wall_time_s: float


def _branch_task(cfg: ExperimentConfig, scheme: str, branch: str,
                 scheme_idx: int) -> list[SweepRecord]:
    """One (scheme, branch) continuation run, warm-started point to point."""
    kernel = cfg.build_kernel()
    h_grid = cfg.h_grid()
    if branch == "down":
        h_grid = h_grid[::-1]
    if scheme == "micro":
        init = np.full(cfg.n_sites, -1 if branch == "up" else 1, dtype=np.int8)
        q = 1
    else:
        m_cells = cfg.n_sites // cfg.q
        init = np.full(m_cells, 0 if branch == "up" else cfg.q, dtype=np.int64)
        q = cfg.q
    records = []
    b_idx = 0 if branch == "up" else 1
    for h_idx, h in enumerate(h_grid):
        spec = ChainSpec(
            scheme=scheme, n_sites=cfg.n_sites, kernel=kernel, beta=cfg.beta,
            h=float(h), q=q, rate_kind=cfg.rate, n_burnin=cfg.n_burnin,
            n_samples=cfg.n_samples, thinning=cfg.thinning, seed=cfg.seed,
            stream_key=(scheme_idx, b_idx, h_idx), beta_mode=cfg.beta_mode,
            init=init,
        )
        t0 = time.perf_counter()
        batch = run_chain(spec)
        wall = time.perf_counter() - t0
        m, se = magnetization(batch)
        records.append(SweepRecord(scheme=scheme, h=float(h), branch=branch,
                                   m_mean=m, m_stderr=se,
                                   acceptance_rate=batch.acceptance_rate,
                                   energy_evals=batch.n_proposals,
                                   wall_time_s=wall))
        init = batch.final_config
    return records


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[SweepRecord]:
    """Hysteresis-style isotherm: for each scheme, trace the up branch from
    h_min (seeded all-down) and the down branch from h_max (seeded all-up),
    warm-starting each field point from the previous one."""
    tasks = [(scheme, branch, si)
             for si, scheme in enumerate(cfg.schemes)
             for branch in ("up", "down")]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(_branch_task, cfg, s, b, si) for (s, b, si) in tasks]
            results = [f.result() for f in futs]
    else:
        results = [_branch_task(cfg, s, b, si) for (s, b, si) in tasks]
    return list(itertools.chain.from_iterable(results))


def write_sweep_csv(records: list[SweepRecord], path: str):
    with open(path, "w") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(SWEEP_COLUMNS + "\n")
        for r in records:
            fh.write(",".join([r.scheme, _fmt(r.h), r.branch, _fmt(r.m_mean),
                               _fmt(r.m_stderr), _fmt(r.acceptance_rate),
                               str(r.energy_evals), _fmt(r.wall_time_s)]) + "\n")


def read_sweep_csv(path: str) -> list[SweepRecord]:
    records = []
    with open(path) as fh:
        if SCHEMA_LINE not in fh.readline():
            raise ValidationError(f"{path}: missing {SCHEMA_LINE!r}")
        header = fh.readline().strip()
        if header != SWEEP_COLUMNS:
            raise ValidationError(f"{path}: unexpected sweep header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            f = line.strip().split(",")
            records.append(SweepRecord(f[0], float(f[1]), f[2], float(f[3]),
                                       float(f[4]), float(f[5]), int(f[6]),
                                       float(f[7])))
    return records


def loop_area(records: list[SweepRecord], scheme: str,
              n_boot: int = 500, seed: int = 0) -> tuple[float, float, float]:
    """Trapezoid area between up and down branches with a bootstrap CI.

    Returns (area, lo95, hi95); resampling is parametric in the per-point
    standard errors.
    """
    ups = sorted([r for r in records if r.scheme == scheme and r.branch == "up"],
                 key=lambda r: r.h)
    downs = sorted([r for r in records if r.scheme == scheme and r.branch == "down"],
                   key=lambda r: r.h)
    if len(ups) != len(downs) or not ups:
        raise ValidationError(f"branches of scheme {scheme} do not align")
    h = np.array([r.h for r in ups])
    if not np.allclose(h, [r.h for r in downs]):
        raise ValidationError("up/down branches sample different field grids")
    mu = np.array([r.m_mean for r in ups])
    md = np.array([r.m_mean for r in downs])
    su = np.array([r.m_stderr for r in ups])
    sd = np.array([r.m_stderr for r in downs])
    area = float(np.trapezoid(mu - md, h))
    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    for i in range(n_boot):
        du = mu + su * rng.standard_normal(len(h))
        dd = md + sd * rng.standard_normal(len(h))
        boots[i] = np.trapezoid(du - dd, h)
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return area, float(lo), float(hi)


# ---------------------------------------------------------------------------
# Exact-curve dump (overlay cross-check for the plotting layer)
# ---------------------------------------------------------------------------

def write_exact_curves_csv(path: str, beta: float, j0: float, h_values) -> None:
    with open(path, "w") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(CURVE_COLUMNS + "\n")
        for h in h_values:
            fh.write(f"ising_nn,{_fmt(beta)},{_fmt(j0)},{_fmt(h)},"
                     f"{ising_nn_exact_m(beta, h, j0):.17g}\n")
        for h in h_values:
            up = curie_weiss_m(beta, h, j0, "upper").m
            fh.write(f"cw_upper,{_fmt(beta)},{_fmt(j0)},{_fmt(h)},{up:.17g}\n")
        for h in h_values:
            lo = curie_weiss_m(beta, h, j0, "lower").m
            fh.write(f"cw_lower,{_fmt(beta)},{_fmt(j0)},{_fmt(h)},{lo:.17g}\n")


# ---------------------------------------------------------------------------
# Entropy-scaling grid
# ---------------------------------------------------------------------------

def fit_loglog(x, y) -> tuple[float, float]:
    """Least-squares slope of log y vs log x and its standard error."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if len(lx) < 3:
        raise ValidationError("slope fit needs at least 3 points")
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(a, ly, rcond=None)
    dof = len(lx) - 2
    sse = float(res[0]) if len(res) else float(((ly - a @ coef) ** 2).sum())
    var = sse / dof if dof > 0 else 0.0
    slope_se = math.sqrt(var / ((lx - lx.mean()) ** 2).sum())
    return float(coef[0]), slope_se


def run_entropy_grid(cfg: ExperimentConfig) -> dict:
    """Exact relative entropies and sup-norm residuals over the (L, beta) grid.

    Always evaluates the uniform-beta measures (the ones the a priori error
    bounds are stated for), independent of the sampling beta_mode.
    """
    rows = []
    n, q = cfg.entropy_n_sites, cfg.entropy_q
    for range_l in cfg.entropy_l_values:
        kernel = build_kernel(cfg.entropy_profile, range_l, cfg.entropy_j0, n)
        sup_dv = {"triangle": 1.0, "constant": 0.0, "curie_weiss": 0.0}[cfg.entropy_profile]
        for beta in cfg.entropy_beta_values:
            eps = epsilon_diag(beta, q, range_l, sup_dv).epsilon
            params = SchemeParams(kernel=kernel, n_sites=n, q=q, beta=beta,
                                  h=0.0, beta_mode="uniform_beta")
            _, _, ham_exact = scheme_log_unnormalized(params, "exact")
            for scheme in ("cg0", "cg2"):
                rep = scheme_entropy_exact(scheme, params, epsilon=eps)
                _, _, ham = scheme_log_unnormalized(params, scheme)
                sup = beta / n * float(np.abs(ham_exact - ham).max())
                rows.append({"scheme": scheme, "epsilon": eps,
                             "r_per_site": rep.r_per_site,
                             "sup_residual_per_site": sup,
                             "beta": beta, "range_l": range_l, "q": q, "n_sites": n})
    report = {"rows": rows, "fits": {}}
    for scheme in ("cg0", "cg2"):
        sub = [r for r in rows if r["scheme"] == scheme]
        eps = [r["epsilon"] for r in sub]
        for key in ("r_per_site", "sup_residual_per_site"):
            vals = [r[key] for r in sub]
            if min(eps) <= 0.0 or min(vals) <= 0.0:
                # degenerate grid (e.g. constant kernel: zero errors at zero eps)
                report["fits"][f"{scheme}:{key}"] = None
                continue
            slope, se = fit_loglog(eps, vals)
            report["fits"][f"{scheme}:{key}"] = {"slope": slope, "stderr": se}
    return report


def write_entropy_csv(report: dict, path: str):
    with open(path, "w") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(ENTROPY_COLUMNS + "\n")
        for r in report["rows"]:
            fh.write(",".join([r["scheme"], _fmt(r["epsilon"]), _fmt(r["r_per_site"]),
                               _fmt(r["sup_residual_per_site"]), _fmt(r["beta"]),
                               str(r["range_l"]), str(r["q"]), str(r["n_sites"])]) + "\n")


# ---------------------------------------------------------------------------
# A posteriori runner
# ---------------------------------------------------------------------------

def run_aposteriori(cfg: ExperimentConfig) -> dict:
    """Run a 2nd-order chain, estimate its error, compare to enumeration."""
    kernel = cfg.build_kernel()
    part = CoarsePartition(cfg.n_sites, cfg.q)
    km = kernel_moments(kernel, part)
    spec = ChainSpec(scheme="cg0", n_sites=cfg.n_sites, kernel=kernel,
                     beta=cfg.beta, h=0.0, q=cfg.q, rate_kind=cfg.rate,
                     n_burnin=cfg.n_burnin, n_samples=cfg.n_samples,
                     thinning=cfg.thinning, seed=cfg.seed, record_configs=True)
    batch = run_chain(spec)
    # the residuum convention is the theorem's (uniform beta), independent of
    # how a 3rd-order chain would weight its corrections
    rep = a_posteriori_mc(batch, km, cfg.beta, "uniform_beta")
    out = {"estimate_total": rep.total, "stderr": rep.stderr,
           "r_per_site": rep.r_per_site, "components": rep.components,
           "n_samples": cfg.n_samples}
    if cfg.n_sites <= 20:
        params = SchemeParams(kernel=kernel, n_sites=cfg.n_sites, q=cfg.q,
                              beta=cfg.beta, h=0.0, beta_mode="uniform_beta")
        exact = scheme_entropy_exact("cg0", params)
        out["exact_total"] = exact.total
        if rep.stderr:
            out["sigma_distance"] = abs(rep.total - exact.total) / rep.stderr
    return out


# ---------------------------------------------------------------------------
# Operation-count benchmark
# ---------------------------------------------------------------------------

def run_bench(cfg: ExperimentConfig) -> dict:
    """Count displacement-indexed table reads per full Hamiltonian evaluation.

    Counting convention: one read = one displacement-indexed record; the
    3rd-order pair record bundles (Jbar, j1, j2, j2-chain) coefficients for
    its displacement, and per-occupancy scalars are not kernel accesses.
    """
    kernel = cfg.build_kernel()
    n, q = cfg.n_sites, cfg.q
    part = CoarsePartition(n, q)
    ck = coarse_kernel(kernel, part)
    rng = np.random.default_rng(cfg.seed)
    spins = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
    alpha = coarsen_for_bench(spins, part)

    c_micro = AccessCounter()
    micro_energy(spins, kernel, 0.0, counter=c_micro)
    micro_reads = c_micro.counts.get("micro_j", 0)

    c_cg0 = AccessCounter()
    h0_energy(alpha, ck, 0.0, counter=c_cg0)
    cg0_reads = c_cg0.counts.get("coarse_jbar", 0)

    report = {
        "n_sites": n, "q": q, "range_l": kernel.range_l,
        "micro_reads_per_eval": micro_reads,
        "cg0_reads_per_eval": cg0_reads,
        "ratio_micro_cg0": micro_reads / cg0_reads if cg0_reads else float("inf"),
        "predicted_ratio_micro_cg0": predicted_cg0_speedup(n, q, kernel.range_l),
    }
    if q >= 4:
        km = kernel_moments(kernel, part, ck)
        c_cg2 = AccessCounter()
        corrected_energy_batch(alpha, ck, km, 0.0, cfg.beta, counter=c_cg2)
        cg2_reads = (c_cg2.counts.get("cg2_pair", 0)
                     + c_cg2.counts.get("cg2_triple", 0))
        report["cg2_reads_per_eval"] = cg2_reads
        report["ratio_cg2_cg0"] = cg2_reads / cg0_reads if cg0_reads else float("inf")
        report["predicted_ratio_micro_cg2"] = predicted_cg2_speedup(n, q, kernel.range_l)
    # per-sweep delta costs (proposals x per-proposal reads)
    lc = max(1, -(-min(kernel.range_l, n // 2) // q))
    report["micro_reads_per_sweep"] = n * kernel.range_l
    report["cg0_reads_per_sweep"] = (n // q) * lc
    return report


def predicted_cg0_speedup(n: int, q: int, range_l: int) -> float:
    lc = max(1, -(-range_l // q))
    return n * range_l / ((n // q) * lc)


def predicted_cg2_speedup(n: int, q: int, range_l: int) -> float:
    lc = max(1, -(-range_l // q))
    return n * range_l / ((n // q) * lc * lc)


def coarsen_for_bench(spins, part):
    from cgmc.coarse import coarsen
    return coarsen(spins, part)


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------

def _check(checks: list, name: str, ok: bool, detail: str = ""):
    checks.append({"name": name, "passed": bool(ok), "detail": detail})


def _verify_moments() -> list:
    checks = []
    worst = 0.0
    for q in range(2, 9):
        for a in range(q + 1):
            cm = conditional_moments(a, q)
            v = _placements(q, a)
            pairs = [(cm.e1, v[:, 0].mean()), (cm.e2, (v[:, 0] * v[:, 1]).mean())]
            if q >= 3:
                pairs.append((cm.e3, (v[:, 0] * v[:, 1] * v[:, 2]).mean()))
            if q >= 4:
                pairs.append((cm.e4, (v[:, 0] * v[:, 1] * v[:, 2] * v[:, 3]).mean()))
            worst = max(worst, max(abs(x - y) for x, y in pairs))
    _check(checks, "closed-form moments match placement enumeration (q<=8)",
           worst < 1e-12, f"max err {worst:.3e}")
    from cgmc.coarse import log_prior_table
    worst_norm = max(abs(np.exp(log_prior_table(q)).sum() - 1.0) for q in range(1, 65))
    _check(checks, "cell prior normalizes (q<=64)", worst_norm < 1e-12,
           f"max err {worst_norm:.3e}")
    return checks


def _verify_appendix_a(seed: int = 0) -> list:
    checks = []
    rng = np.random.default_rng(seed)
    worst = 0.0
    from cgmc.lattice import Kernel
    for q in (4, 5, 6):
        for _ in range(20):
            kern = Kernel(rng.normal(size=int(rng.integers(2, 9))) * 0.2)
            for a in range(q + 1):
                en, cl = appendixA_oracle("kk2", kern, q, (a,))
                worst = max(worst, abs(en - cl))
            for ak in range(q + 1):
                for al in range(q + 1):
                    for kind in ("kl2", "kkkl"):
                        en, cl = appendixA_oracle(kind, kern, q, (ak, al), (1,))
                        worst = max(worst, abs(en - cl))
            for a1 in range(0, q + 1, 2):
                for a2 in range(0, q + 1, 2):
                    for a3 in range(0, q + 1, 2):
                        en, cl = appendixA_oracle("triple", kern, q, (a1, a2, a3), (1, 2))
                        worst = max(worst, abs(en - cl))
    _check(checks, "conditional integral identities (4 kinds, q in 4..6)",
           worst < 1e-12, f"max err {worst:.3e}")
    return checks


def _verify_detailed_balance() -> list:
    from cgmc.lattice import constant_kernel
    from cgmc.oracles import enumerate_micro
    checks = []
    worst_db, worst_stat, worst_row = 0.0, 0.0, 0.0
    all_ergodic = True
    for kind in ("metropolis", "glauber", "symmetric"):
        for n in (2, 3, 4):
            for l in (1, 2):
                kern = constant_kernel(1.0, l)
                spec = ChainSpec(scheme="micro", n_sites=n, kernel=kern,
                                 beta=0.8, h=0.3, rate_kind=kind)
                states, t = transition_matrix(spec)
                pi = np.exp(enumerate_micro(kern, n, 0.8, 0.3).log_weights)
                f = pi[:, None] * t
                worst_db = max(worst_db, float(np.abs(f - f.T).max()))
                worst_stat = max(worst_stat, float(np.abs(pi @ t - pi).max()))
                worst_row = max(worst_row, float(np.abs(t.sum(1) - 1).max()))
                all_ergodic &= is_irreducible_aperiodic(t)
        for m_cells in (2, 3):
            for scheme in ("cg0", "cg2"):
                q = 4
                kern = constant_kernel(1.0, 3)
                n = m_cells * q
                spec = ChainSpec(scheme=scheme, n_sites=n, kernel=kern,
                                 beta=0.6, h=0.1, q=q, rate_kind=kind)
                states, t = transition_matrix(spec)
                params = SchemeParams(kernel=kern, n_sites=n, q=q, beta=0.6, h=0.1)
                pi = np.exp(enumerate_coarse(params, scheme).log_weights)
                f = pi[:, None] * t
                worst_db = max(worst_db, float(np.abs(f - f.T).max()))
                worst_stat = max(worst_stat, float(np.abs(pi @ t - pi).max()))
                worst_row = max(worst_row, float(np.abs(t.sum(1) - 1).max()))
                all_ergodic &= is_irreducible_aperiodic(t)
    _check(checks, "detailed balance entrywise", worst_db < 1e-12, f"max {worst_db:.3e}")
    _check(checks, "stationarity pi T = pi", worst_stat < 1e-12, f"max {worst_stat:.3e}")
    _check(checks, "rows sum to one", worst_row < 1e-14, f"max {worst_row:.3e}")
    _check(checks, "irreducible and aperiodic", all_ergodic)
    return checks


def _verify_kadanoff() -> list:
    from cgmc.lattice import curie_weiss_kernel, triangle_kernel
    from cgmc.oracles import enumerate_micro
    checks = []
    worst_push, worst_z, worst_r = 0.0, 0.0, 0.0
    for kern_name, kern in (("triangle(L=8)", triangle_kernel(1.0, 8)),
                            ("curie_weiss", curie_weiss_kernel(1.0, 16))):
        for q in (2, 4):
            for beta in (0.5, 1.0):
                params = SchemeParams(kernel=kern, n_sites=16, q=q, beta=beta, h=0.2)
                meas = enumerate_coarse(params, "exact")
                push = pushforward_log_weights(kern, params.partition, beta, 0.2)
                worst_push = max(worst_push, float(
                    np.abs(np.exp(meas.log_weights) - np.exp(push)).max()))
                z_micro = enumerate_micro(kern, 16, beta, 0.2).log_z
                worst_z = max(worst_z, abs(meas.log_z - z_micro))
                p = np.exp(meas.log_weights)
                r = float((p * (meas.log_weights - push)).sum()) / 16
                worst_r = max(worst_r, abs(r))
    _check(checks, "pushforward equals exact coarse Gibbs", worst_push < 1e-12,
           f"max {worst_push:.3e}")
    _check(checks, "coarse partition function equals fine one", worst_z < 1e-10,
           f"max {worst_z:.3e}")
    _check(checks, "specific relative entropy of the exact transform is zero",
           worst_r < 1e-12, f"max {worst_r:.3e}")
    return checks


def _verify_entropy_scaling() -> list:
    checks = []
    cfg = ExperimentConfig()
    cfg.entropy_n_sites, cfg.entropy_q = 16, 4
    cfg.entropy_profile, cfg.entropy_j0 = "triangle", 1.0
    cfg.entropy_l_values = [4, 8]
    cfg.entropy_beta_values = [0.25, 0.5, 0.75]
    report = run_entropy_grid(cfg)
    s0 = report["fits"]["cg0:sup_residual_per_site"]
    s2 = report["fits"]["cg2:sup_residual_per_site"]
    _check(checks, "sup-norm residual slope of the 2nd-order scheme is ~2",
           abs(s0["slope"] - 2.0) <= 0.5,
           f"slope {s0['slope']:.3f} +- {s0['stderr']:.3f}")
    _check(checks, "sup-norm residual slope of the 3rd-order scheme is ~3",
           abs(s2["slope"] - 3.0) <= 0.8,
           f"slope {s2['slope']:.3f} +- {s2['stderr']:.3f}")
    rows = report["rows"]
    by_pt = {}
    for r in rows:
        by_pt.setdefault((r["beta"], r["range_l"]), {})[r["scheme"]] = r["r_per_site"]
    ordered = all(v["cg2"] < v["cg0"] for v in by_pt.values())
    _check(checks, "3rd-order relative entropy below 2nd-order pointwise", ordered)
    k0 = report["fits"]["cg0:r_per_site"]
    k2 = report["fits"]["cg2:r_per_site"]
    _check(checks, "relative-entropy slopes reported", True,
           f"cg0 {k0['slope']:.3f} +- {k0['stderr']:.3f}, "
           f"cg2 {k2['slope']:.3f} +- {k2['stderr']:.3f}")
    return checks


VERIFY_SUITES = {
    "moments": _verify_moments,
    "appendixA": _verify_appendix_a,
    "detailed_balance": _verify_detailed_balance,
    "kadanoff": _verify_kadanoff,
    "entropy_scaling": _verify_entropy_scaling,
}


def run_verify(suite: str) -> dict:
    if suite not in VERIFY_SUITES:
        raise ValidationError(
            f"unknown suite {suite!r}; choose from {sorted(VERIFY_SUITES)}")
    checks = VERIFY_SUITES[suite]()
    return {"suite": suite, "passed": all(c["passed"] for c in checks),
            "checks": checks}
