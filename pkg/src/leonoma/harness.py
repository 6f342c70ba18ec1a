"""Experiment sweeps, Monte-Carlo trial management, and CSV emission.

An :class:`Experiment` is a grid (sweep values x strategies x trials) over a
base scenario. Each grid point runs the engine with a trial-keyed random
stream, so identical seeds give byte-identical CSVs. Failed runs (for
example the cascade solver under residual interference) keep their row with
a non-ok status instead of aborting the experiment.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ScenarioConfig
from .engine import MetricsReport, Strategy, parse_strategy, run
from .power import UnsupportedModeError

CSV_HEADER = [
    "experiment", "strategy", "sweep_param", "sweep_value", "trial",
    "objective_gap_db", "satisfaction_ratio", "min_sat_rate_worst",
    "total_capacity_bps", "total_gap_bps", "energy_eff", "status",
]

EXPERIMENT_KINDS = (
    "single-run", "demand-sweep", "per-user-profile", "power-sweep",
    "polarization-compare", "single-beam-compare", "objective-compare",
    "ipsic-sweep", "per-satellite-satisfaction", "ee-sweep",
)

DEMAND_SWEEP_MBPS = tuple(range(300, 1301, 100))
POWER_SWEEP_DBW = (19.0, 22.0, 25.0, 28.0, 31.0)
IPSIC_SWEEP = (0.0, 1e-4, 1e-3, 1e-2, 1e-1)
IPSIC_ANTENNAS = (4, 8, 16)


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class Experiment:
    name: str
    kind: str
    config: ScenarioConfig
    strategies: tuple[str, ...]
    sweep_param: str             # config field name, "demand_mean_bps", or "none"
    sweep_values: tuple[float, ...]
    trials: int

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ExperimentError(f"unknown experiment kind: {self.kind}")
        if self.trials < 1:
            raise ExperimentError("trials must be >= 1")
        if not self.sweep_values:
            raise ExperimentError("sweep grid must be nonempty")
        if not self.strategies:
            raise ExperimentError("strategy list must be nonempty")


@dataclass
class ResultRow:
    experiment: str
    strategy: str
    sweep_param: str
    sweep_value: float
    trial: int
    objective_gap_db: float = math.nan
    satisfaction_ratio: float = math.nan
    min_sat_rate_worst: float = math.nan
    total_capacity_bps: float = math.nan
    total_gap_bps: float = math.nan
    energy_eff: float = math.nan
    status: str = "ok"


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)


def apply_sweep(config: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    if param == "none":
        return config
    if param == "demand_mean_bps":
        return replace(config, demand_range_bps=(0.9 * value, 1.1 * value))
    if param == "num_antennas":
        return replace(config, num_antennas=int(value))
    if not hasattr(config, param):
        raise ExperimentError(f"unknown sweep parameter: {param}")
    return replace(config, **{param: value}).validate()


def run_experiment(exp: Experiment) -> ResultTable:
    table = ResultTable()
    for value in exp.sweep_values:
        cfg = apply_sweep(exp.config, exp.sweep_param, value)
        for name in exp.strategies:
            strategy = parse_strategy(name)
            for trial in range(exp.trials):
                row = ResultRow(
                    experiment=exp.name, strategy=name,
                    sweep_param=exp.sweep_param, sweep_value=float(value), trial=trial,
                )
                try:
                    _, metrics = run(cfg, strategy, trial=trial)
                    row.objective_gap_db = metrics.objective_gap_db
                    row.satisfaction_ratio = metrics.satisfaction_ratio
                    row.min_sat_rate_worst = metrics.min_sat_rate_worst
                    row.total_capacity_bps = metrics.total_capacity_bps
                    row.total_gap_bps = metrics.total_gap_bps
                    row.energy_eff = metrics.energy_eff
                except UnsupportedModeError:
                    row.status = "unsupported"
                except Exception:
                    row.status = "error"
                table.rows.append(row)
    return table


def _fmt(x: float) -> str:
    return format(x, ".17g")


def emit(table: ResultTable, path: str) -> None:
    if not table.rows:
        raise ExperimentError("cannot emit an empty result table")
    rows = sorted(
        table.rows,
        key=lambda r: (r.experiment, r.strategy, r.sweep_param, r.sweep_value, r.trial),
    )
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow([
                    r.experiment, r.strategy, r.sweep_param, _fmt(r.sweep_value),
                    r.trial, _fmt(r.objective_gap_db), _fmt(r.satisfaction_ratio),
                    _fmt(r.min_sat_rate_worst), _fmt(r.total_capacity_bps),
                    _fmt(r.total_gap_bps), _fmt(r.energy_eff), r.status,
                ])
    except OSError as exc:
        raise ExperimentError(f"failed to write {path}: {exc}") from exc


def aggregate(table: ResultTable, metric: str = "objective_gap_db") -> dict[tuple[str, str, float], float]:
    """Mean of a metric per (experiment, strategy, sweep value) over ok trials."""
    groups: dict[tuple[str, str, float], list[float]] = {}
    for r in table.rows:
        if r.status != "ok":
            continue
        groups.setdefault((r.experiment, r.strategy, r.sweep_value), []).append(
            getattr(r, metric)
        )
    return {k: float(np.mean(v)) for k, v in groups.items()}


def load_table(path: str) -> ResultTable:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ExperimentError(f"{path}: unexpected CSV header")
        table = ResultTable()
        for rec in reader:
            table.rows.append(ResultRow(
                experiment=rec["experiment"], strategy=rec["strategy"],
                sweep_param=rec["sweep_param"], sweep_value=float(rec["sweep_value"]),
                trial=int(rec["trial"]),
                objective_gap_db=float(rec["objective_gap_db"]),
                satisfaction_ratio=float(rec["satisfaction_ratio"]),
                min_sat_rate_worst=float(rec["min_sat_rate_worst"]),
                total_capacity_bps=float(rec["total_capacity_bps"]),
                total_gap_bps=float(rec["total_gap_bps"]),
                energy_eff=float(rec["energy_eff"]),
                status=rec["status"],
            ))
    return table


# -- experiment factories ---------------------------------------------------


def make_experiments(
    kind: str,
    config: ScenarioConfig,
    strategies: tuple[str, ...],
    trials: int,
) -> list[Experiment]:
    """Default sweep grids per figure family."""
    if kind in ("single-run", "per-user-profile", "per-satellite-satisfaction",
                "polarization-compare", "single-beam-compare", "objective-compare"):
        return [Experiment(kind, kind, config, strategies, "none", (0.0,), trials)]
    if kind == "demand-sweep":
        return [Experiment(kind, kind, config, strategies, "demand_mean_bps",
                           tuple(v * 1e6 for v in DEMAND_SWEEP_MBPS), trials)]
    if kind in ("power-sweep", "ee-sweep"):
        return [Experiment(kind, kind, config, strategies, "sat_power_dbw",
                           POWER_SWEEP_DBW, trials)]
    if kind == "ipsic-sweep":
        exps = []
        for L in IPSIC_ANTENNAS:
            cfg = replace(config, num_antennas=L)
            exps.append(Experiment(f"{kind}-L{L}", kind, cfg, strategies,
                                   "ipsic_factor", IPSIC_SWEEP, trials))
        return exps
    raise ExperimentError(f"unknown experiment kind: {kind}")
