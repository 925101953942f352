"""Experiment configuration: flat ``key=value`` files plus CLI overrides."""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from ..oracle import NOISE_KINDS, OBJECTIVES, NoiseModel, make_problem


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    objective: str = "quadratic"
    objective_params: dict = field(default_factory=dict)
    noise: str = "bernoulli"
    noise_width: float = 0.1
    dims: list = field(default_factory=lambda: [2])
    budgets: list = field(default_factory=lambda: [100_000])
    seeds: list = field(default_factory=lambda: list(range(5)))
    master_seed: int = 0
    delta: float = 0.1
    out: str = "results"
    trace: bool = False
    suite: str = "all"

    def validate(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"unknown noise {self.noise!r}")
        for name in ("dims", "budgets", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        if any(d < 1 for d in self.dims):
            raise ConfigError("dims must be positive")
        if any(b < 1 for b in self.budgets):
            raise ConfigError("budgets must be positive")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        return self

    def noise_model(self):
        if self.noise == "additive_uniform":
            return NoiseModel(self.noise, self.noise_width)
        return NoiseModel(self.noise)

    def problem(self, dim):
        try:
            return make_problem(self.objective, dim, **self.objective_params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad objective parameters: {exc}") from exc


def _int_list(text):
    return [int(float(t)) for t in text.split(",") if t.strip()]


def parse_seeds(text):
    """``"5"`` means seeds 0..4; a comma list (``"3,7"`` or ``"7,"``) is explicit."""
    text = text.strip()
    if "," in text:
        return _int_list(text)
    if not text:
        return []
    return list(range(int(text)))


# Objective parameters accepted as top-level keys.
OBJECTIVE_KEYS = {"q": "q", "f_star": "min_value", "value": "value"}


def apply_setting(config, key, value):
    """Set one ``key=value`` pair (both strings) on ``config``."""
    key = key.strip().replace("-", "_")
    value = value.strip()
    try:
        if key in ("dim", "dims"):
            config.dims = _int_list(value)
        elif key in ("budget", "budgets"):
            config.budgets = _int_list(value)
        elif key == "seeds":
            config.seeds = parse_seeds(value)
        elif key in OBJECTIVE_KEYS:
            config.objective_params[OBJECTIVE_KEYS[key]] = float(value)
        elif key in ("width", "noise_width"):
            config.noise_width = float(value)
        elif key in ("master_seed", "delta", "objective", "noise", "out", "suite"):
            kind = {f.name: f.type for f in fields(config)}[key]
            setattr(config, key, {"int": int, "float": float}.get(kind, str)(value))
        elif key == "trace":
            config.trace = value.lower() in ("1", "true", "yes", "on")
        else:
            raise ConfigError(f"unknown config key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc


def load_config(path, config=None):
    config = ExperimentConfig() if config is None else config
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        apply_setting(config, key, value)
    return config


def run_stream(master_seed, dim, budget, seed_index):
    """Random stream of one run, hashed from ``(master, dim, budget, seed)``.

    The four integers are the entropy of a ``numpy.random.SeedSequence``
    feeding a PCG64 generator.
    """
    seq = np.random.SeedSequence([master_seed, dim, budget, seed_index])
    return np.random.Generator(np.random.PCG64(seq))
