"""Deterministic seeded sweep engine and CSV emission.

Every sweep decomposes into independent points.  Each point derives its
random streams purely from (master seed, point index, realization index), so
results are bit-identical regardless of worker count; the reduction order is
fixed by point index.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from pilotsim import channel, pilot, rate
from pilotsim.experiments.config import DEFAULT_TRADEOFF_GRID, ExperimentConfig

CSV_COLUMNS = ("experiment", "scenario", "M", "N", "L", "K", "T_tau",
               "rho_tau", "rho_d", "metric", "value", "value_db",
               "std_error", "trials", "seed")

# stream purposes: realization streams for angles are tagged 0; per-point
# noise/fading streams use 1 + point index
_ANGLE_TAG = 0


def derive_stream(master_seed: int, trial_index: int,
                  realization_index: int) -> np.random.Generator:
    """Reproducible counter-based stream from (seed, trial, realization).

    Pure function of its arguments; disjoint for distinct index tuples and
    independent of worker layout or platform.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=(int(trial_index), int(realization_index)))
    return np.random.Generator(np.random.Philox(seed=ss))


@dataclass(frozen=True)
class ResultRow:
    """One metric at one sweep point; everything needed to reproduce it."""

    experiment: str
    scenario: str
    m: int
    n: int
    l: int
    k: int
    t_tau: int
    rho_tau: float
    rho_d: float | None
    metric: str
    value: float
    value_db: float | None
    std_error: float
    trials: int
    seed: int
    wall_time_s: float = 0.0  # informational only; excluded from CSV output


def to_db(value: float) -> float | None:
    if value is None or value <= 0:
        return None
    return 10.0 * math.log10(value)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_csv(rows: list[ResultRow], path: str) -> None:
    """Write rows with a fixed header, UTF-8, '.' decimals, deterministic formatting."""
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in (
            r.experiment, r.scenario, r.m, r.n, r.l, r.k, r.t_tau,
            r.rho_tau, r.rho_d, r.metric, r.value, r.value_db,
            r.std_error, r.trials, r.seed)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class SweepPoint:
    """One cell of the sweep cartesian product."""

    index: int
    scenario: str
    m: int
    n: int
    l: int
    k: int
    rho_tau: float
    rho_d: float | None = None
    t_tau: int | None = None
    rho_frac: float | None = None  # tradeoff only: rho_tau / total energy


def _arrays_for(config: ExperimentConfig, m: int, n: int,
                rng: np.random.Generator) -> tuple[channel.ArrayConfig, channel.ArrayConfig]:
    if config.geometry == "uniform-linear":
        bs = channel.ArrayConfig(m, element_spacing=config.spacing)
        ue = channel.ArrayConfig(n, element_spacing=config.spacing)
    else:
        bs = channel.ArrayConfig.random_positions(m, rng, aperture=config.spacing * m)
        ue = channel.ArrayConfig.random_positions(n, rng, aperture=config.spacing * n)
    return bs, ue


def _stats_for_realization(config: ExperimentConfig, point: SweepPoint,
                           realization: int) -> list[channel.ChannelStats]:
    """Per-UE second-order statistics for one angle realization.

    The angle stream depends only on (seed, realization), so all sweep points
    of a run see the same angle draws, which keeps sweep curves comparable.
    """
    rng = derive_stream(config.seed, _ANGLE_TAG, realization)
    bs, ue = _arrays_for(config, point.m, point.n, rng)
    stats = []
    for k in range(point.k):
        paths = channel.sample_paths(rng, point.l, config.aoa_range,
                                     config.aod_range, config.sigma_sq(k))
        stats.append(channel.stats_from_paths(bs, ue, paths))
    return stats


def _scenario_t_tau(scenario: str, k: int, n: int, l: int,
                    t_tau_list: tuple | None) -> list[int]:
    if scenario == pilot.NPUC:
        return [k * n]
    if scenario == pilot.PUC:
        return [k * l]
    return list(t_tau_list) if t_tau_list else [1]


def build_points(config: ExperimentConfig) -> list[SweepPoint]:
    """Expand the config into the ordered list of sweep points."""
    points = []
    if config.experiment in ("nmse-sweep", "contamination"):
        for scen, m, n, l, k, rho in itertools.product(
                config.scenarios, config.m_list, config.n_list, config.l_list,
                config.k_list, config.rho_tau_list):
            for t_tau in _scenario_t_tau(scen, k, n, l, config.t_tau_list):
                points.append(SweepPoint(
                    index=len(points), scenario=scen, m=m, n=n, l=l, k=k,
                    rho_tau=rho, t_tau=t_tau))
    elif config.experiment in ("tradeoff", "scaling"):
        grid = config.normalized_grid or DEFAULT_TRADEOFF_GRID
        total = config.total_energy
        for scen, m, n, l, k in itertools.product(
                config.scenarios, config.m_list, config.n_list, config.l_list,
                config.k_list):
            t_tau = _scenario_t_tau(scen, k, n, l, config.t_tau_list)[0]
            for frac in grid:
                points.append(SweepPoint(
                    index=len(points), scenario=scen, m=m, n=n, l=l, k=k,
                    rho_tau=frac * total, rho_d=(1 - frac) * total,
                    t_tau=t_tau, rho_frac=frac))
    else:
        raise ValueError(f"unknown experiment {config.experiment!r}")
    return points


def _mean_and_stderr(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return mean, stderr


def _compute_nmse_point(config: ExperimentConfig, point: SweepPoint) -> list[ResultRow]:
    start = time.perf_counter()
    closed, lowers, uppers, empiricals = [], [], [], []
    sigma_z_sq = 1.0
    for r in range(config.angle_realizations):
        stats = _stats_for_realization(config, point, r)
        cov = pilot.error_cov_closed_form(
            point.scenario, stats[0], point.rho_tau, sigma_z_sq,
            t_tau=point.t_tau, all_stats=stats, ue_index=0)
        closed.append(pilot.nmse(cov))
        if point.scenario != pilot.PC:
            lo, hi = pilot.nmse_bounds(point.scenario, stats[0], point.rho_tau, sigma_z_sq)
            lowers.append(lo)
            uppers.append(hi)
        if config.noise_realizations > 0:
            scheme = pilot.build_scheme(point.scenario, point.k, point.n, point.l,
                                        point.t_tau, point.rho_tau, stats=stats)
            noise_rng = derive_stream(config.seed, 1 + point.index, r)
            empiricals.append(pilot.empirical_nmse(
                scheme, stats, config.noise_realizations, sigma_z_sq, noise_rng, k=0))
    wall = time.perf_counter() - start

    def row(metric, values, trials):
        mean, stderr = _mean_and_stderr(values)
        return ResultRow(
            experiment=config.experiment, scenario=point.scenario, m=point.m,
            n=point.n, l=point.l, k=point.k, t_tau=point.t_tau,
            rho_tau=point.rho_tau, rho_d=None, metric=metric, value=mean,
            value_db=to_db(mean), std_error=stderr, trials=trials,
            seed=config.seed, wall_time_s=wall)

    rows = [row("nmse_closed", closed, config.angle_realizations)]
    if lowers:
        rows.append(row("nmse_lower", lowers, config.angle_realizations))
        rows.append(row("nmse_upper", uppers, config.angle_realizations))
    if empiricals:
        rows.append(row("nmse_mc", empiricals,
                        config.angle_realizations * config.noise_realizations))
    return rows


def _compute_rate_point(config: ExperimentConfig, point: SweepPoint) -> list[ResultRow]:
    start = time.perf_counter()
    sigma_z_sq = 1.0
    t_d = config.t_c - point.t_tau
    if t_d < 1:
        raise ValueError(
            f"T_tau={point.t_tau} leaves no data symbols in T_c={config.t_c}"
        )
    phase = rate.DataPhaseConfig(rho_d=point.rho_d, t_d=t_d, t_c=config.t_c,
                                 sigma_z_sq=sigma_z_sq, l_streams=point.l)
    n_draws = max(config.noise_realizations, 1)
    means, variances = [], []
    trials = 0
    for r in range(config.angle_realizations):
        if point.rho_tau == 0 or point.rho_d == 0:
            means.append(0.0)
            variances.append(0.0)
            trials += n_draws
            continue
        stats = _stats_for_realization(config, point, r)
        scheme = pilot.build_scheme(point.scenario, point.k, point.n, point.l,
                                    point.t_tau, point.rho_tau, stats=stats)
        noise_rng = derive_stream(config.seed, 1 + point.index, r)
        res = rate.sum_rate_mc(scheme, stats, phase, n_draws, noise_rng)
        means.append(res.spectral_efficiency)
        variances.append(res.std_error ** 2)
        trials += res.trials
    mean = float(np.mean(means))
    stderr = float(math.sqrt(sum(variances)) / len(means))
    wall = time.perf_counter() - start
    return [ResultRow(
        experiment=config.experiment, scenario=point.scenario, m=point.m,
        n=point.n, l=point.l, k=point.k, t_tau=point.t_tau,
        rho_tau=point.rho_tau, rho_d=point.rho_d, metric="spectral_efficiency",
        value=mean, value_db=to_db(mean), std_error=stderr, trials=trials,
        seed=config.seed, wall_time_s=wall)]


def compute_point(config: ExperimentConfig, point: SweepPoint) -> list[ResultRow]:
    if config.experiment in ("nmse-sweep", "contamination"):
        return _compute_nmse_point(config, point)
    return _compute_rate_point(config, point)


def _pool_compute(args):
    config, point = args
    return point.index, compute_point(config, point)


def _argmax_rows(config: ExperimentConfig, points: list[SweepPoint],
                 per_point: dict[int, list[ResultRow]]) -> list[ResultRow]:
    """Grid-level optimum rows per (scenario, M, N, L, K) group for rate sweeps."""
    groups: dict[tuple, list[tuple[SweepPoint, ResultRow]]] = {}
    for p in points:
        se_row = per_point[p.index][0]
        key = (p.scenario, p.m, p.n, p.l, p.k)
        groups.setdefault(key, []).append((p, se_row))
    rows = []
    for key in groups:
        entries = groups[key]
        best_point, best_row = max(entries, key=lambda pr: (pr[1].value, -pr[0].index))
        common = dict(
            experiment=config.experiment, scenario=best_point.scenario,
            m=best_point.m, n=best_point.n, l=best_point.l, k=best_point.k,
            t_tau=best_point.t_tau, rho_tau=best_point.rho_tau,
            rho_d=best_point.rho_d, std_error=best_row.std_error,
            trials=best_row.trials, seed=config.seed)
        rows.append(ResultRow(metric="max_spectral_efficiency",
                              value=best_row.value, value_db=to_db(best_row.value),
                              **common))
        rows.append(ResultRow(metric="optimal_pilot_fraction",
                              value=best_point.rho_frac,
                              value_db=to_db(best_point.rho_frac), **common))
    return rows


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Run the configured sweep, honoring config.workers; deterministic output."""
    points = build_points(config)
    per_point: dict[int, list[ResultRow]] = {}
    if config.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for index, rows in pool.map(_pool_compute,
                                        [(config, p) for p in points]):
                per_point[index] = rows
    else:
        for p in points:
            per_point[p.index] = compute_point(config, p)
    rows = []
    for p in points:
        rows.extend(per_point[p.index])
    if config.experiment in ("tradeoff", "scaling"):
        rows.extend(_argmax_rows(config, points, per_point))
    return rows
