#!/usr/bin/env python3
"""Regenerate the golden CSV fixtures consumed by the figure package.

Outputs are deterministic for fixed seeds, so reruns are byte-identical.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from cgmc.config import ExperimentConfig
from cgmc.harness import (
    run_entropy_grid,
    run_sweep,
    write_entropy_csv,
    write_exact_curves_csv,
    write_sweep_csv,
)

OUT = pathlib.Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures"


def sweep_fixture():
    cfg = ExperimentConfig()
    cfg.n_sites, cfg.profile, cfg.range_l, cfg.j0 = 512, "constant", 1, 1.0
    cfg.q, cfg.beta = 8, 3.0
    cfg.h_min, cfg.h_max, cfg.n_points = -0.49, 0.49, 14
    cfg.seed = 424242
    cfg.schemes = ["cg0", "cg2"]
    cfg.n_burnin, cfg.n_samples, cfg.thinning = 10_000, 60, 100
    records = run_sweep(cfg, threads=2)
    cfg_micro = ExperimentConfig(**{**cfg.__dict__})
    cfg_micro.schemes = ["micro"]
    cfg_micro.n_burnin, cfg_micro.n_samples, cfg_micro.thinning = 3000, 60, 40
    records += run_sweep(cfg_micro, threads=2)
    # strip wall time for byte-stable fixtures
    for r in records:
        r.wall_time_s = 0.0
    write_sweep_csv(records, str(OUT / "sweep_tc1.csv"))


def entropy_fixtures():
    cfg = ExperimentConfig()
    cfg.entropy_n_sites, cfg.entropy_q = 16, 4
    cfg.entropy_profile, cfg.entropy_j0 = "triangle", 1.0
    cfg.entropy_l_values = [4, 8]
    cfg.entropy_beta_values = [0.25, 0.5, 0.75]
    write_entropy_csv(run_entropy_grid(cfg), str(OUT / "entropy_grid.csv"))
    cfg.entropy_profile = "curie_weiss"
    write_entropy_csv(run_entropy_grid(cfg), str(OUT / "entropy_zero.csv"))


def curve_fixture():
    write_exact_curves_csv(str(OUT / "oracle_curves.csv"), 2.0, 1.0,
                           np.linspace(-0.49, 0.49, 14))


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    sweep_fixture()
    entropy_fixtures()
    curve_fixture()
    print(f"fixtures written to {OUT}")
