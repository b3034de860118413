"""Experiment configuration: JSON schema ingestion and validation.

Config files are JSON documents with nested sections::

    {
      "experiment": "nmse-sweep",
      "scenario": ["nPuC", "PuC"],
      "arrays": {"M": 128, "N": [8, 32, 128], "geometry": "uniform-linear",
                 "spacing": 0.5},
      "paths": {"L": [2, 4, 8], "aoa_range": [-1.0472, 1.0472],
                "aod_range": [-0.5236, 0.5236]},
      "cell": {"K": 2, "sigma_ratios": [1.0, 1.0]},
      "energy": {"rho_tau": 1.0, "total": 0.5, "normalized_grid": [...]},
      "timing": {"T_c": 128, "T_tau": 1},
      "mc": {"angle_realizations": 10, "noise_realizations": 2000, "seed": 1},
      "output": "results.csv"
    }

Scalar entries of the sweepable axes (M, N, L, K, rho_tau, T_tau) may be
lists; the runners take the cartesian product.  All fields are validated
before any computation; errors list every offending field at once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from pilotsim.pilot import NPUC, PC, PUC, SCENARIOS

EXPERIMENTS = ("nmse-sweep", "tradeoff", "scaling", "contamination")

AOA_DEFAULT = (-math.pi / 3, math.pi / 3)
AOD_DEFAULT = (-math.pi / 6, math.pi / 6)

# default normalized pilot-energy abscissa for tradeoff sweeps: dense below
# 0.3 where the optima live, coarse above
DEFAULT_TRADEOFF_GRID = tuple(
    [0.0] + list(np.linspace(0.001, 0.3, 15)) +
    [0.4167, 0.53335, 0.65, 0.76665, 0.8833, 1.0]
)


class ConfigError(ValueError):
    """Invalid experiment configuration; message lists offending fields."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))


def _as_list(value, kind):
    if isinstance(value, (list, tuple)):
        return tuple(kind(v) for v in value)
    return (kind(value),)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    scenarios: tuple = (NPUC,)
    m_list: tuple = (128,)
    n_list: tuple = (32,)
    l_list: tuple = (4,)
    k_list: tuple = (1,)
    geometry: str = "uniform-linear"
    spacing: float = 0.5
    aoa_range: tuple = AOA_DEFAULT
    aod_range: tuple = AOD_DEFAULT
    sigma_ratios: tuple = ()  # per-UE sigma^2/sigma_z^2; padded with 1.0
    rho_tau_list: tuple = (1.0,)
    rho_d: float | None = None
    total_energy: float | None = None
    normalized_grid: tuple | None = None
    t_c: int = 128
    t_tau_list: tuple | None = None
    angle_realizations: int = 10
    noise_realizations: int = 2000
    seed: int = 12345
    output: str | None = None
    workers: int = 1

    def sigma_sq(self, k: int) -> float:
        """Per-UE path-loss-normalized channel power sigma_k^2 / sigma_z^2."""
        return float(self.sigma_ratios[k]) if k < len(self.sigma_ratios) else 1.0

    def validate(self) -> "ExperimentConfig":
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(f"experiment: {self.experiment!r} not in {EXPERIMENTS}")
        for s in self.scenarios:
            if s not in SCENARIOS:
                problems.append(f"scenario: {s!r} not in {SCENARIOS}")
        for name, values in (("arrays.M", self.m_list), ("arrays.N", self.n_list),
                             ("paths.L", self.l_list), ("cell.K", self.k_list)):
            if not values or any(v < 1 for v in values):
                problems.append(f"{name}: entries must be >= 1, got {list(values)}")
        if self.geometry not in ("uniform-linear", "random-positions"):
            problems.append(f"arrays.geometry: unknown {self.geometry!r}")
        if self.spacing <= 0:
            problems.append(f"arrays.spacing: must be > 0, got {self.spacing}")
        for name, rng in (("paths.aoa_range", self.aoa_range),
                          ("paths.aod_range", self.aod_range)):
            if len(rng) != 2 or not rng[1] > rng[0]:
                problems.append(f"{name}: must be an increasing pair, got {list(rng)}")
        if any(s < 0 for s in self.sigma_ratios):
            problems.append(f"cell.sigma_ratios: must be nonnegative, got {list(self.sigma_ratios)}")
        if any(r < 0 for r in self.rho_tau_list):
            problems.append(f"energy.rho_tau: must be nonnegative, got {list(self.rho_tau_list)}")
        if self.rho_d is not None and self.rho_d < 0:
            problems.append(f"energy.rho_d: must be nonnegative, got {self.rho_d}")
        if self.total_energy is not None and self.total_energy <= 0:
            problems.append(f"energy.total: must be positive, got {self.total_energy}")
        if self.normalized_grid is not None and any(
                not 0 <= g <= 1 for g in self.normalized_grid):
            problems.append("energy.normalized_grid: entries must lie in [0, 1]")
        if self.t_c < 2:
            problems.append(f"timing.T_c: must be >= 2, got {self.t_c}")
        if self.t_tau_list is not None:
            for t in self.t_tau_list:
                if t < 1:
                    problems.append(f"timing.T_tau: must be >= 1, got {t}")
                elif PC in self.scenarios and any(t > l for l in self.l_list):
                    problems.append(
                        f"timing.T_tau: PC needs T_tau <= L, got T_tau={t} with L={list(self.l_list)}"
                    )
        if self.angle_realizations < 1:
            problems.append(f"mc.angle_realizations: must be >= 1, got {self.angle_realizations}")
        if self.noise_realizations < 0:
            problems.append(f"mc.noise_realizations: must be >= 0, got {self.noise_realizations}")
        if not 0 <= int(self.seed) < 2 ** 64:
            problems.append(f"mc.seed: must fit in 64 bits, got {self.seed}")
        if self.workers < 1:
            problems.append(f"workers: must be >= 1, got {self.workers}")
        if self.experiment in ("tradeoff", "scaling") and self.total_energy is None:
            problems.append("energy.total: required for tradeoff/scaling experiments")
        if problems:
            raise ConfigError(problems)
        return self

    def with_updates(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs).validate()


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply repeatable --override key=value flags to the raw config dict.

    Keys are dotted paths into the JSON document, e.g. arrays.M=128 or
    mc.seed=7; values parse as JSON with a plain-string fallback.
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override {item!r}: expected key=value"])
        key, _, value = item.partition("=")
        parts = key.strip().split(".")
        node = raw
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError([f"override {item!r}: {part} is not a section"])
        node[parts[-1]] = _parse_override_value(value.strip())
    return raw


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a parsed JSON document."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["document: top level must be a JSON object"])
    known = {"experiment", "scenario", "arrays", "paths", "cell", "energy",
             "timing", "mc", "output", "workers"}
    for key in raw:
        if key not in known:
            problems.append(f"{key}: unknown top-level key")

    def section(name):
        value = raw.get(name, {})
        if not isinstance(value, dict):
            problems.append(f"{name}: must be an object")
            return {}
        return value

    arrays = section("arrays")
    paths = section("paths")
    cell = section("cell")
    energy = dict(section("energy"))
    timing = section("timing")
    mc = section("mc")

    # energies may be given in dB via *_db keys (linear wins if both appear)
    def from_db(value):
        if isinstance(value, (list, tuple)):
            return [10.0 ** (float(v) / 10.0) for v in value]
        return 10.0 ** (float(value) / 10.0)

    for db_key, lin_key in (("rho_tau_db", "rho_tau"), ("rho_d_db", "rho_d"),
                            ("total_db", "total")):
        if db_key in energy:
            try:
                energy.setdefault(lin_key, from_db(energy[db_key]))
            except (TypeError, ValueError):
                problems.append(f"energy.{db_key}: cannot parse {energy[db_key]!r}")
            del energy[db_key]

    def grab(sec, sec_name, key, default, caster):
        if key not in sec:
            return default
        try:
            return caster(sec[key])
        except (TypeError, ValueError):
            problems.append(f"{sec_name}.{key}: cannot parse {sec[key]!r}")
            return default

    kwargs = dict(
        experiment=str(raw.get("experiment", "")),
        scenarios=_as_list(raw.get("scenario", NPUC), str),
        m_list=grab(arrays, "arrays", "M", (128,), lambda v: _as_list(v, int)),
        n_list=grab(arrays, "arrays", "N", (32,), lambda v: _as_list(v, int)),
        geometry=grab(arrays, "arrays", "geometry", "uniform-linear", str),
        spacing=grab(arrays, "arrays", "spacing", 0.5, float),
        l_list=grab(paths, "paths", "L", (4,), lambda v: _as_list(v, int)),
        aoa_range=grab(paths, "paths", "aoa_range", AOA_DEFAULT,
                       lambda v: tuple(float(x) for x in v)),
        aod_range=grab(paths, "paths", "aod_range", AOD_DEFAULT,
                       lambda v: tuple(float(x) for x in v)),
        k_list=grab(cell, "cell", "K", (1,), lambda v: _as_list(v, int)),
        sigma_ratios=grab(cell, "cell", "sigma_ratios", (),
                          lambda v: _as_list(v, float)),
        rho_tau_list=grab(energy, "energy", "rho_tau", (1.0,),
                          lambda v: _as_list(v, float)),
        rho_d=grab(energy, "energy", "rho_d", None, float),
        total_energy=grab(energy, "energy", "total", None, float),
        normalized_grid=grab(energy, "energy", "normalized_grid", None,
                             lambda v: tuple(float(x) for x in v)),
        t_c=grab(timing, "timing", "T_c", 128, int),
        t_tau_list=grab(timing, "timing", "T_tau", None, lambda v: _as_list(v, int)),
        angle_realizations=grab(mc, "mc", "angle_realizations", 10, int),
        noise_realizations=grab(mc, "mc", "noise_realizations", 2000, int),
        seed=grab(mc, "mc", "seed", 12345, int),
        output=raw.get("output"),
        workers=grab(raw, "document", "workers", 1, int),
    )
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**kwargs).validate()


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
    return config_from_dict(raw)
