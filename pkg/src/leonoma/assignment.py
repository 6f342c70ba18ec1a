"""Satellite-to-cell assignment planning.

Two planners produce an :class:`AssignmentPlan` over the horizon of
``ceil(K / M)`` slots: a greedy Doppler-threshold matcher (satellites whose
relay-measured shift passes the threshold claim their preferred cells, ties
resolved in favor of the smaller shift) and an ant-colony search whose
pheromone trails bias sampling toward low-traffic-gap plans.

Both planners guarantee the same invariants: cells assigned in one slot are
pairwise distinct, and every cell is covered exactly once across the horizon.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import Cell, ScenarioConfig
from .orbits import (
    DopplerMeasurement,
    OrbitElement,
    doppler_shift,
    propagate,
    relay_position,
    slant_geometry,
)


class PlanInfeasibleError(ValueError):
    """The cell set cannot be covered within the horizon."""


@dataclass
class AssignmentPlan:
    horizon: int
    # (sat_id, slot) -> cell_id; absent key means the satellite idles that slot
    entries: dict[tuple[int, int], int] = field(default_factory=dict)
    doppler_hz: dict[tuple[int, int], float] = field(default_factory=dict)

    def assign(self, sat_id: int, slot: int, cell_id: int, doppler_hz: float = 0.0) -> None:
        self.entries[(sat_id, slot)] = cell_id
        self.doppler_hz[(sat_id, slot)] = doppler_hz

    def mu(self, sat_id: int, slot: int, cell_id: int) -> int:
        return 1 if self.entries.get((sat_id, slot)) == cell_id else 0

    def cell_of(self, sat_id: int, slot: int) -> int | None:
        return self.entries.get((sat_id, slot))

    def cells_in_slot(self, slot: int) -> list[tuple[int, int]]:
        """(sat_id, cell_id) pairs active in a slot, sat_id ascending."""
        return sorted(
            (sat, cell) for (sat, s), cell in self.entries.items() if s == slot
        )

    def covered_cells(self) -> list[int]:
        return sorted(self.entries.values())

    def validate(self, num_cells: int, num_satellites: int) -> None:
        for (sat, slot), cell in self.entries.items():
            if not (0 <= slot < self.horizon):
                raise ValueError(f"slot {slot} outside horizon {self.horizon}")
            if not (0 <= sat < num_satellites):
                raise ValueError(f"unknown satellite {sat}")
            if not (0 <= cell < num_cells):
                raise ValueError(f"unknown cell {cell}")
        for slot in range(self.horizon):
            cells = [c for (_, s), c in self.entries.items() if s == slot]
            if len(cells) != len(set(cells)):
                raise ValueError(f"slot {slot} assigns a cell twice")
        covered = self.covered_cells()
        if covered != list(range(num_cells)):
            raise ValueError("plan does not cover every cell exactly once")


# -- Doppler-threshold strategy ---------------------------------------------


def doppler_match(
    shifts: Sequence[DopplerMeasurement],
    threshold_hz: float,
    remaining_cells: Iterable[int],
    preferences: dict[int, Sequence[int]],
) -> dict[int, int]:
    """One slot of threshold matching; returns sat_id -> cell_id.

    Satellites whose |shift| passes the threshold claim their top remaining
    preference; on a conflict the satellite with the larger |shift| drops the
    cell and refills from its next choice. Satellites failing the threshold
    (or out of preferences) take leftover cells in sat_id order.
    """
    pool = set(remaining_cells)
    if not pool:
        raise ValueError("doppler_match requires a nonempty cell pool")
    by_sat = {m.sat_id: m for m in shifts}
    passing = sorted(
        (m.sat_id for m in shifts if abs(m.shift_hz) <= threshold_hz),
        key=lambda sat: (abs(by_sat[sat].shift_hz), sat),
    )
    assignment: dict[int, int] = {}
    cursor = {sat: 0 for sat in passing}
    # Smaller-shift satellites claim first, so any conflict is already
    # resolved in their favor and each loser refills from its next choice.
    for sat in passing:
        prefs = preferences.get(sat, ())
        i = cursor[sat]
        while i < len(prefs) and prefs[i] not in pool:
            i += 1
        if i < len(prefs):
            assignment[sat] = prefs[i]
            pool.discard(prefs[i])
        cursor[sat] = i

    leftovers = sorted(pool)
    for m in sorted(shifts, key=lambda m: m.sat_id):
        if m.sat_id in assignment or not leftovers:
            continue
        assignment[m.sat_id] = leftovers.pop(0)
    return assignment


def distance_preferences(
    elements: Sequence[OrbitElement],
    cells: Sequence[Cell],
    slot: int,
    slot_duration_s: float,
    candidates: Iterable[int],
) -> dict[int, list[int]]:
    """Rank candidate cells per satellite by ascending slant distance."""
    cand = sorted(candidates)
    prefs = {}
    for sat_id, element in enumerate(elements):
        state = propagate(element, slot, slot_duration_s, sat_id=sat_id)
        dists = {
            c: slant_geometry(state, cells[c].center_lat_deg, cells[c].center_lon_deg).distance_m
            for c in cand
        }
        prefs[sat_id] = sorted(cand, key=lambda c: (dists[c], c))
    return prefs


def build_doppler_plan(
    config: ScenarioConfig,
    elements: Sequence[OrbitElement],
    cells: Sequence[Cell],
) -> AssignmentPlan:
    """Full-horizon plan from slot-by-slot Doppler-threshold matching."""
    _check_coverable(config.num_cells, len(elements), config.horizon_slots)
    relay = relay_position(config)
    plan = AssignmentPlan(horizon=config.horizon_slots)
    remaining = set(range(config.num_cells))
    for slot in range(config.horizon_slots):
        if not remaining:
            break
        shifts = [
            doppler_shift(
                propagate(e, slot, config.slot_duration_s, sat_id=i),
                relay,
                config.carrier_frequency_hz,
            )
            for i, e in enumerate(elements)
        ]
        prefs = distance_preferences(elements, cells, slot, config.slot_duration_s, remaining)
        slot_assignment = doppler_match(shifts, config.doppler_threshold_hz, remaining, prefs)
        for sat_id, cell_id in slot_assignment.items():
            plan.assign(sat_id, slot, cell_id, doppler_hz=shifts[sat_id].shift_hz)
            remaining.discard(cell_id)
    plan.validate(config.num_cells, len(elements))
    return plan


# -- ant-colony planner -----------------------------------------------------


@dataclass
class PheromoneTable:
    """Trail strengths per (satellite, from-cell, to-cell).

    Index ``num_cells`` on the from-axis is the virtual start node u_0.
    """

    values: np.ndarray   # (M, K+1, K)
    cap: float

    @classmethod
    def uniform(cls, num_satellites: int, num_cells: int, cap: float, level: float = 1.0) -> "PheromoneTable":
        return cls(values=np.full((num_satellites, num_cells + 1, num_cells), level), cap=cap)

    @property
    def start_index(self) -> int:
        return self.values.shape[1] - 1


@dataclass(frozen=True)
class AntPath:
    sat_id: int
    cells: tuple[int, ...]    # one per slot; -1 marks an idle slot
    utility: float


@dataclass
class AntPlanResult:
    plan: AssignmentPlan
    utility_trace: list[float]   # best utility after each iteration; non-decreasing
    best_paths: list[AntPath]


def transition_probability(
    weights: np.ndarray,
    pheromones: np.ndarray,
    s1: float,
    s2: float,
    candidates: Sequence[int],
) -> np.ndarray:
    """P(k') = iota^s1 * ell^s2 normalized over the candidate set, 0 elsewhere."""
    if len(candidates) == 0:
        raise ValueError("transition_probability requires a nonempty candidate set")
    idx = np.asarray(candidates, dtype=int)
    w = np.asarray(weights, dtype=float)[idx]
    l = np.asarray(pheromones, dtype=float)[idx]
    if np.any(w <= 0) or np.any(l <= 0):
        raise ValueError("route weights and pheromones must be positive on candidates")
    score = w**s1 * l**s2
    probs = np.zeros_like(np.asarray(weights, dtype=float))
    probs[idx] = score / score.sum()
    return probs


def update_pheromone(table: PheromoneTable, deposits: np.ndarray, tau: float) -> PheromoneTable:
    """ell <- clamp((1 - tau) ell + delta, 0, cap); deposits summed beforehand."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly in (0, 1)")
    table.values = np.clip((1.0 - tau) * table.values + deposits, 0.0, table.cap)
    return table


def ant_colony_plan(
    num_satellites: int,
    num_cells: int,
    horizon: int,
    route_weight: Callable[[int, int, int], float],
    slot_gap: Callable[[int, int, int], float],
    params,
    rng: np.random.Generator,
) -> AntPlanResult:
    """Colony search over joint plans.

    ``route_weight(sat, slot, cell)`` supplies the heuristic attraction iota
    (larger is better); ``slot_gap(sat, slot, cell)`` the surrogate traffic
    gap whose path sum drives pheromone deposits, delta ~ 1 / (1 + gap).
    """
    _check_coverable(num_cells, num_satellites, horizon)
    iota = np.empty((num_satellites, horizon, num_cells))
    gaps = np.empty_like(iota)
    for sat in range(num_satellites):
        for slot in range(horizon):
            for cell in range(num_cells):
                iota[sat, slot, cell] = route_weight(sat, slot, cell)
                gaps[sat, slot, cell] = slot_gap(sat, slot, cell)
    if np.any(iota <= 0):
        raise ValueError("route_weight must be strictly positive")
    if np.any(gaps < 0):
        raise ValueError("slot_gap must be nonnegative")
    gap_scale = float(np.median(gaps[gaps > 0])) if np.any(gaps > 0) else 1.0

    table = PheromoneTable.uniform(num_satellites, num_cells, cap=params.max_pheromone)
    best_paths: list[AntPath] | None = None
    best_gap = math.inf
    trace: list[float] = []

    for _ in range(params.max_iters):
        iter_best_paths = None
        iter_best_gap = math.inf
        for _ in range(params.colony_size):
            paths, total_gap = _sample_joint_plan(
                num_satellites, num_cells, horizon, iota, gaps, gap_scale, table, params, rng
            )
            if total_gap < iter_best_gap:
                iter_best_gap, iter_best_paths = total_gap, paths
        if iter_best_gap < best_gap:
            best_gap, best_paths = iter_best_gap, iter_best_paths
        trace.append(1.0 / (1.0 + best_gap / gap_scale))

        deposits = np.zeros_like(table.values)
        for path in iter_best_paths:
            prev = table.start_index
            path_gap = sum(
                gaps[path.sat_id, slot, cell]
                for slot, cell in enumerate(path.cells)
                if cell >= 0
            )
            delta = 1.0 / (1.0 + path_gap / gap_scale)
            for cell in path.cells:
                if cell < 0:
                    continue
                deposits[path.sat_id, prev, cell] += delta
                prev = cell
        update_pheromone(table, deposits, params.tau)

    plan = AssignmentPlan(horizon=horizon)
    for path in best_paths:
        for slot, cell in enumerate(path.cells):
            if cell >= 0:
                plan.assign(path.sat_id, slot, cell)
    plan.validate(num_cells, num_satellites)
    return AntPlanResult(plan=plan, utility_trace=trace, best_paths=best_paths)


def _sample_joint_plan(
    num_satellites: int,
    num_cells: int,
    horizon: int,
    iota: np.ndarray,
    gaps: np.ndarray,
    gap_scale: float,
    table: PheromoneTable,
    params,
    rng: np.random.Generator,
) -> tuple[list[AntPath], float]:
    unclaimed = set(range(num_cells))
    cells_by_sat: list[list[int]] = [[] for _ in range(num_satellites)]
    prev = [table.start_index] * num_satellites
    total_gap = 0.0
    for slot in range(horizon):
        order = rng.permutation(num_satellites)
        for sat in order:
            if not unclaimed:
                cells_by_sat[sat].append(-1)
                continue
            candidates = sorted(unclaimed)
            probs = transition_probability(
                iota[sat, slot], table.values[sat, prev[sat]], params.s1, params.s2, candidates
            )
            cell = int(rng.choice(num_cells, p=probs))
            cells_by_sat[sat].append(cell)
            unclaimed.discard(cell)
            prev[sat] = cell
            total_gap += gaps[sat, slot, cell]
    paths = []
    for sat in range(num_satellites):
        path_gap = sum(
            gaps[sat, slot, c] for slot, c in enumerate(cells_by_sat[sat]) if c >= 0
        )
        paths.append(
            AntPath(
                sat_id=sat,
                cells=tuple(cells_by_sat[sat]),
                utility=1.0 / (1.0 + path_gap / gap_scale),
            )
        )
    return paths, total_gap


def _check_coverable(num_cells: int, num_satellites: int, horizon: int) -> None:
    if num_cells > num_satellites * horizon:
        raise PlanInfeasibleError(
            f"{num_cells} cells cannot be covered by {num_satellites} satellites in {horizon} slots"
        )


# -- plan persistence -------------------------------------------------------


def dump_plan(plan: AssignmentPlan, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "sat_id", "cell_id", "doppler_khz"])
        for (sat, slot), cell in sorted(plan.entries.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            shift = plan.doppler_hz.get((sat, slot), 0.0)
            writer.writerow([slot, sat, cell, f"{shift / 1e3:.6f}"])


def load_plan(path: str) -> AssignmentPlan:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty plan file")
    horizon = max(int(r["slot"]) for r in rows) + 1
    plan = AssignmentPlan(horizon=horizon)
    for r in rows:
        plan.assign(
            int(r["sat_id"]),
            int(r["slot"]),
            int(r["cell_id"]),
            doppler_hz=float(r.get("doppler_khz", 0.0)) * 1e3,
        )
    return plan
