"""Command-line interface.

Desk-scale defaults (16 cells, 3 satellites) keep every command
minutes-fast; pass --full-scale for the full 64-cell / 6-satellite scenario,
or --config for arbitrary YAML overrides.
"""

from __future__ import annotations

import sys
from dataclasses import replace

import click

from .assignment import build_doppler_plan, dump_plan
from .channel import RadioParams
from .config import ScenarioConfig, build_cells, load_config, rng_for, spawn_users
from .engine import DEFAULT_STRATEGIES, dump_solution, parse_strategy, run as engine_run
from .harness import (
    EXPERIMENT_KINDS,
    Experiment,
    ResultTable,
    emit,
    make_experiments,
    run_experiment,
)
from .orbits import build_constellation, propagate, slant_geometry
import csv


def _load_scenario(config_path: str | None, seed: int | None, full_scale: bool) -> ScenarioConfig:
    if config_path:
        cfg = load_config(config_path)
    elif full_scale:
        cfg = ScenarioConfig()
    else:
        cfg = ScenarioConfig(num_cells=16, num_satellites=3)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg.validate()


def _common(f):
    f = click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="YAML scenario file.")(f)
    f = click.option("--seed", type=int, default=None, help="Random seed override.")(f)
    f = click.option("--full-scale", is_flag=True,
                     help="Use the full 64-cell / 6-satellite scenario.")(f)
    return f


@click.group()
def main():
    """Relay-assisted LEO constellation NOMA simulator."""


@main.command("run")
@_common
@click.option("--strategy", default="D-mNOMA-BF", show_default=True,
              help="Strategy name, e.g. A-eNOMA-BF or D-mNOMA-2c.")
@click.option("--trials", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output CSV path.")
@click.option("--dump-cells", type=click.Path(), default=None,
              help="Also write the per-user solution of trial 0 here.")
def run_cmd(config_path, seed, full_scale, strategy, trials, out, dump_cells):
    """Run one strategy and write per-trial metrics."""
    cfg = _load_scenario(config_path, seed, full_scale)
    exp = Experiment("single-run", "single-run", cfg, (strategy,), "none", (0.0,), trials)
    emit(run_experiment(exp), out)
    if dump_cells:
        report, _ = engine_run(cfg, parse_strategy(strategy), trial=0)
        dump_solution(report, dump_cells)
    click.echo(f"wrote {out}")


@main.command("sweep")
@_common
@click.option("--experiment", "kind", type=click.Choice(EXPERIMENT_KINDS),
              default="demand-sweep", show_default=True)
@click.option("--strategy", "strategies", multiple=True,
              help="Repeatable; defaults to the four NOMA-BF strategies and OMA-BF.")
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def sweep_cmd(config_path, seed, full_scale, kind, strategies, trials, out):
    """Run a figure-family experiment sweep."""
    cfg = _load_scenario(config_path, seed, full_scale)
    names = tuple(strategies) if strategies else DEFAULT_STRATEGIES
    table = ResultTable()
    for exp in make_experiments(kind, cfg, names, trials):
        table.rows.extend(run_experiment(exp).rows)
    emit(table, out)
    click.echo(f"wrote {out}")


@main.command("compare")
@_common
@click.option("--strategy", "strategies", multiple=True, required=True,
              help="Repeatable strategy names, compared on shared seeds.")
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def compare_cmd(config_path, seed, full_scale, strategies, trials, out):
    """Compare strategies at the base scenario on shared seeds."""
    cfg = _load_scenario(config_path, seed, full_scale)
    exp = Experiment("compare", "single-run", cfg, tuple(strategies), "none", (0.0,), trials)
    emit(run_experiment(exp), out)
    click.echo(f"wrote {out}")


@main.command("dump-plan")
@_common
@click.option("--strategy", default="D-mNOMA-BF", show_default=True)
@click.option("--trial", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def dump_plan_cmd(config_path, seed, full_scale, strategy, trial, out):
    """Write the satellite-cell assignment plan as CSV."""
    cfg = _load_scenario(config_path, seed, full_scale)
    report, _ = engine_run(cfg, parse_strategy(strategy), trial=trial)
    dump_plan(report.plan, out)
    click.echo(f"wrote {out}")


@main.command("dump-channels")
@_common
@click.option("--trial", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def dump_channels_cmd(config_path, seed, full_scale, trial, out):
    """Write per-user channel gains under the Doppler plan as CSV."""
    cfg = _load_scenario(config_path, seed, full_scale)
    rng = rng_for(cfg.seed, trial)
    cells = build_cells(cfg)
    users = spawn_users(cells, cfg, rng)
    elements = build_constellation(cfg)
    radio = RadioParams.from_config(cfg)
    plan = build_doppler_plan(cfg, elements, cells)
    from .engine import _user_channels

    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "sat_id", "cell_id", "user_id", "gain", "distance_m"])
        for slot in range(plan.horizon):
            for sat_id, cell_id in plan.cells_in_slot(slot):
                state = propagate(elements[sat_id], slot, cfg.slot_duration_s, sat_id=sat_id)
                cell_users = [u for u in users if u.cell_id == cell_id]
                chans = _user_channels(state, cell_users, radio, slot)
                for u, cv in zip(cell_users, chans):
                    dist = slant_geometry(state, u.lat_deg, u.lon_deg).distance_m
                    writer.writerow([slot, sat_id, cell_id, u.user_id,
                                     format(cv.gain, ".17g"), format(dist, ".17g")])
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
