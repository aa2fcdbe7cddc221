"""Flat key=value experiment configuration with [section] headers.

Unknown sections or keys are errors; messages carry the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cgmc.errors import ConfigError
from cgmc.lattice import Kernel, constant_kernel, curie_weiss_kernel, triangle_kernel

_PROFILES = ("constant", "triangle", "curie_weiss")
_SCHEMES = ("micro", "cg0", "cg2")
_RATES = ("metropolis", "glauber", "symmetric")
_BETA_MODES = ("uniform_beta", "paper_scheme2")


def _parse_int(v, line):
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"expected integer, got {v!r}", line)


def _parse_float(v, line):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"expected number, got {v!r}", line)


def _parse_list(v, line, conv):
    try:
        return [conv(x.strip()) for x in v.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated list, got {v!r}", line)


# (section, key) -> parser tag
_SCHEMA = {
    ("lattice", "n_sites"): "int",
    ("kernel", "profile"): "str",
    ("kernel", "range_l"): "int",
    ("kernel", "j0"): "float",
    ("coarse", "q"): "int",
    ("chain", "beta"): "float",
    ("chain", "n_burnin"): "int",
    ("chain", "n_samples"): "int",
    ("chain", "thinning"): "int",
    ("chain", "rate"): "str",
    ("chain", "seed"): "int",
    ("chain", "beta_mode"): "str",
    ("sweep", "h_min"): "float",
    ("sweep", "h_max"): "float",
    ("sweep", "n_points"): "int",
    ("sweep", "schemes"): "strlist",
    ("entropy", "n_sites"): "int",
    ("entropy", "q"): "int",
    ("entropy", "profile"): "str",
    ("entropy", "j0"): "float",
    ("entropy", "l_values"): "intlist",
    ("entropy", "beta_values"): "floatlist",
}


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    n_sites: int = 512
    profile: str = "constant"
    range_l: int = 1
    j0: float = 1.0
    q: int = 8
    beta: float = 1.0
    n_burnin: int = 2000
    n_samples: int = 2000
    thinning: int = 5
    rate: str = "metropolis"
    seed: int = 0
    beta_mode: str = "paper_scheme2"
    h_min: float = -0.5
    h_max: float = 0.5
    n_points: int = 11
    schemes: list = field(default_factory=lambda: ["micro", "cg0", "cg2"])
    entropy_n_sites: int = 16
    entropy_q: int = 4
    entropy_profile: str = "triangle"
    entropy_j0: float = 1.0
    entropy_l_values: list = field(default_factory=lambda: [4, 8, 16])
    entropy_beta_values: list = field(default_factory=lambda: [0.25, 0.5])

    def build_kernel(self) -> Kernel:
        return build_kernel(self.profile, self.range_l, self.j0, self.n_sites)

    def h_grid(self) -> np.ndarray:
        return np.linspace(self.h_min, self.h_max, self.n_points)


def build_kernel(profile: str, range_l: int, j0: float, n_sites: int) -> Kernel:
    if profile == "constant":
        return constant_kernel(j0, range_l)
    if profile == "triangle":
        return triangle_kernel(j0, range_l)
    if profile == "curie_weiss":
        return curie_weiss_kernel(j0, n_sites)
    raise ConfigError(f"unknown kernel profile {profile!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; raise ConfigError with a line number on any problem."""
    cfg = ExperimentConfig()
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not any(s == section for (s, _) in _SCHEMA):
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if (section, key) not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in section [{section}]", lineno)
        seen.add((section, key))
        tag = _SCHEMA[(section, key)]
        if tag == "int":
            val = _parse_int(value, lineno)
        elif tag == "float":
            val = _parse_float(value, lineno)
        elif tag == "intlist":
            val = _parse_list(value, lineno, int)
        elif tag == "floatlist":
            val = _parse_list(value, lineno, float)
        elif tag == "strlist":
            val = [s.strip() for s in value.split(",") if s.strip()]
        else:
            val = value
        attr = ("entropy_" if section == "entropy" else "") + key
        setattr(cfg, attr, val)

    _validate(cfg)
    return cfg


def parse_config_file(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config(text)


def _validate(cfg: ExperimentConfig):
    if cfg.n_sites < 2:
        raise ConfigError(f"n_sites must be >= 2, got {cfg.n_sites}")
    if cfg.profile not in _PROFILES:
        raise ConfigError(f"profile must be one of {_PROFILES}, got {cfg.profile!r}")
    if cfg.range_l < 1:
        raise ConfigError(f"range_l must be >= 1, got {cfg.range_l}")
    if cfg.profile != "curie_weiss" and cfg.n_sites <= 2 * cfg.range_l:
        raise ConfigError(
            f"finite-range production configs need n_sites > 2*range_l "
            f"(got N={cfg.n_sites}, L={cfg.range_l})")
    if cfg.q < 1 or cfg.n_sites % cfg.q != 0:
        raise ConfigError(f"q={cfg.q} must divide n_sites={cfg.n_sites}")
    if cfg.beta < 0:
        raise ConfigError(f"beta must be nonnegative, got {cfg.beta}")
    if cfg.rate not in _RATES:
        raise ConfigError(f"rate must be one of {_RATES}, got {cfg.rate!r}")
    if cfg.beta_mode not in _BETA_MODES:
        raise ConfigError(f"beta_mode must be one of {_BETA_MODES}")
    if cfg.n_burnin < 0 or cfg.n_samples < 0 or cfg.thinning < 1:
        raise ConfigError("chain lengths must be nonnegative, thinning >= 1")
    if not cfg.h_min < cfg.h_max:
        raise ConfigError(f"field grid must be strictly monotone "
                          f"(h_min={cfg.h_min}, h_max={cfg.h_max})")
    if cfg.n_points < 2:
        raise ConfigError(f"n_points must be >= 2, got {cfg.n_points}")
    for s in cfg.schemes:
        if s not in _SCHEMES:
            raise ConfigError(f"unknown scheme {s!r} in sweep.schemes")
    if "cg2" in cfg.schemes and cfg.q < 4:
        raise ConfigError("the 3rd-order scheme needs q >= 4")
    if cfg.entropy_n_sites > 20:
        raise ConfigError("entropy grid needs an enumerable lattice (n_sites <= 20)")
    if cfg.entropy_n_sites % cfg.entropy_q != 0:
        raise ConfigError("entropy grid q must divide its n_sites")
