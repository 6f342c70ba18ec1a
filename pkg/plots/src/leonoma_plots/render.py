"""Figure and summary rendering from the benchmark CSV schema.

The input contract is the harness CSV with header::

    experiment,strategy,sweep_param,sweep_value,trial,objective_gap_db,
    satisfaction_ratio,min_sat_rate_worst,total_capacity_bps,total_gap_bps,
    energy_eff,status

Sweep figures draw one mean +/- std curve per strategy across the sweep
values; bar figures draw the selected metric per strategy for a single
trial. Output is SVG with embedded timestamps disabled so re-rendering the
same CSV yields an identical file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

EXPECTED_HEADER = [
    "experiment", "strategy", "sweep_param", "sweep_value", "trial",
    "objective_gap_db", "satisfaction_ratio", "min_sat_rate_worst",
    "total_capacity_bps", "total_gap_bps", "energy_eff", "status",
]

SWEEP_KINDS = ("demand-sweep", "power-sweep", "ipsic-sweep", "ee-sweep")
BAR_KINDS = ("per-user-profile", "per-satellite-satisfaction",
             "polarization-compare", "single-beam-compare", "objective-compare",
             "single-run", "compare")

DEFAULT_METRIC = {
    "demand-sweep": "objective_gap_db",
    "power-sweep": "satisfaction_ratio",
    "ipsic-sweep": "objective_gap_db",
    "ee-sweep": "energy_eff",
    "per-satellite-satisfaction": "min_sat_rate_worst",
}

METRIC_COLUMNS = (
    "objective_gap_db", "satisfaction_ratio", "min_sat_rate_worst",
    "total_capacity_bps", "total_gap_bps", "energy_eff",
)


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv_path: str
    out_path: str
    strategies: tuple[str, ...] = ()   # empty = all strategies in the file
    metric: str | None = None          # defaults per kind
    trial: int = 0                     # bar figures only

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS + BAR_KINDS:
            raise PlotError(f"unknown figure kind: {self.kind}")
        metric = self.metric or DEFAULT_METRIC.get(self.kind, "objective_gap_db")
        if metric not in METRIC_COLUMNS:
            raise PlotError(f"unknown metric column: {metric}")

    @property
    def metric_column(self) -> str:
        return self.metric or DEFAULT_METRIC.get(self.kind, "objective_gap_db")


def load_rows(csv_path: str) -> list[dict]:
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotError(f"{csv_path}: empty file")
        missing = [c for c in EXPECTED_HEADER if c not in reader.fieldnames]
        if missing:
            raise PlotError(f"{csv_path}: missing column {missing[0]}")
        rows = []
        for rec in reader:
            row = dict(rec)
            row["sweep_value"] = float(rec["sweep_value"])
            row["trial"] = int(rec["trial"])
            for col in METRIC_COLUMNS:
                row[col] = float(rec[col])
            rows.append(row)
    if not rows:
        raise PlotError(f"{csv_path}: no data rows")
    return rows


def _select(rows: list[dict], spec: FigureSpec) -> tuple[list[dict], list[str]]:
    names = spec.strategies or tuple(
        sorted({r["strategy"] for r in rows})
    )
    picked = [r for r in rows if r["strategy"] in names and r["status"] == "ok"]
    if not picked:
        raise PlotError("strategy filter matched no usable rows: strategy")
    return picked, list(names)


def _new_axes():
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    return fig, ax


def _save(fig, out_path: str) -> None:
    plt.rcParams["svg.hashsalt"] = "leonoma"
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    rows = load_rows(spec.csv_path)
    picked, names = _select(rows, spec)
    metric = spec.metric_column

    fig, ax = _new_axes()
    if spec.kind in SWEEP_KINDS:
        for name in names:
            mine = [r for r in picked if r["strategy"] == name]
            if not mine:
                continue
            values = sorted({r["sweep_value"] for r in mine})
            means, stds = [], []
            for v in values:
                ys = np.array([r[metric] for r in mine if r["sweep_value"] == v])
                means.append(float(ys.mean()))
                stds.append(float(ys.std()))
            ax.errorbar(values, means, yerr=stds, marker="o", capsize=3, label=name)
        ax.set_xlabel(picked[0]["sweep_param"])
        ax.set_ylabel(metric)
        ax.legend()
    else:
        heights = []
        for name in names:
            mine = [r for r in picked if r["strategy"] == name and r["trial"] == spec.trial]
            if not mine:
                raise PlotError(f"no rows for trial {spec.trial}: trial")
            heights.append(float(np.mean([r[metric] for r in mine])))
        ax.bar(range(len(names)), heights)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=30, ha="right")
        ax.set_ylabel(metric)
    ax.set_title(spec.kind)
    fig.tight_layout()
    _save(fig, spec.out_path)
    return spec.out_path


def summary_table(csv_path: str, strategies: tuple[str, ...] = ()) -> str:
    """Text table of mean total capacity and total unsatisfied traffic.

    The reported numbers are plain means over ok rows per strategy, so they
    match any aggregate recomputed from the same CSV exactly.
    """
    rows = load_rows(csv_path)
    names = strategies or tuple(sorted({r["strategy"] for r in rows}))
    lines = [
        f"{'strategy':<24}{'total_capacity_bps':>22}{'total_gap_bps':>22}",
    ]
    for name in names:
        mine = [r for r in rows if r["strategy"] == name and r["status"] == "ok"]
        if not mine:
            raise PlotError(f"strategy filter matched no usable rows: {name}")
        cap = float(np.mean([r["total_capacity_bps"] for r in mine]))
        gap = float(np.mean([r["total_gap_bps"] for r in mine]))
        lines.append(f"{name:<24}{cap:>22.17g}{gap:>22.17g}")
    return "\n".join(lines) + "\n"
