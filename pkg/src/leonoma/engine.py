"""End-to-end runs: assignment, per-cell beam/power iteration, and metrics.

A :class:`Strategy` names an assignment method (doppler / ant / fixed-plan),
a power solver (monotonic / expcone / oma / equal), a beam mode (per-user-bf /
spot / 2c / 4c) and an objective (traffic gap, or the demand-normalized ratio
variant). Canonical strategy names combine these: D-mNOMA-BF, A-eNOMA-BF,
A-mNOMA-BF, D-eNOMA-BF, OMA-BF, plus -2c / -4c / -S suffixed variants and an
optional -scheme2 objective suffix.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .assignment import (
    AssignmentPlan,
    ant_colony_plan,
    build_doppler_plan,
    load_plan,
)
from .beamform import color_partition, per_user_beams, spot_beam, uniform_direction
from .channel import (
    ChannelVector,
    NotVisibleError,
    RadioParams,
    build_channel_matrix,
    user_channel,
)
from .config import ScenarioConfig, User, build_cells, rng_for, spawn_users
from .orbits import build_constellation, propagate, relay_position, slant_geometry
from .power import (
    CellInstance,
    InfeasibleError,
    UnsupportedModeError,
    expcone_power_solve,
    monotonic_power_solve,
    oma_power_solve,
    rates_for,
    sinr,
)

OUTER_TOL = 1e-4
OUTER_MAX_ITERS = 50

DEFAULT_STRATEGIES = ("D-mNOMA-BF", "A-eNOMA-BF", "A-mNOMA-BF", "D-eNOMA-BF", "OMA-BF")


class StrategyError(ValueError):
    """Unknown or inconsistent strategy specification."""


@dataclass(frozen=True)
class Strategy:
    name: str
    assign: str          # doppler | ant | fixed-plan
    power: str           # monotonic | expcone | oma | equal
    beam: str            # per-user-bf | spot | 2c | 4c
    objective: str = "scheme1-gap"   # scheme1-gap | scheme2-ratio
    plan_path: str | None = None

    def __post_init__(self):
        if self.assign not in ("doppler", "ant", "fixed-plan"):
            raise StrategyError(f"unknown assignment mode: {self.assign}")
        if self.power not in ("monotonic", "expcone", "oma", "equal"):
            raise StrategyError(f"unknown power mode: {self.power}")
        if self.beam not in ("per-user-bf", "spot", "2c", "4c"):
            raise StrategyError(f"unknown beam mode: {self.beam}")
        if self.objective not in ("scheme1-gap", "scheme2-ratio"):
            raise StrategyError(f"unknown objective: {self.objective}")
        if self.power == "oma" and self.beam != "per-user-bf":
            raise StrategyError("the OMA baseline uses per-user beams only")


_NOMA_NAME = re.compile(r"^([DAF])-([me])NOMA-(BF|2c|4c|S)$")


def parse_strategy(name: str, plan_path: str | None = None) -> Strategy:
    base = name
    objective = "scheme1-gap"
    if base.endswith("-scheme2"):
        base = base[: -len("-scheme2")]
        objective = "scheme2-ratio"
    if base == "OMA-BF":
        return Strategy(name=name, assign="doppler", power="oma", beam="per-user-bf",
                        objective=objective, plan_path=plan_path)
    m = _NOMA_NAME.match(base)
    if not m:
        raise StrategyError(f"unknown strategy name: {name}")
    assign = {"D": "doppler", "A": "ant", "F": "fixed-plan"}[m.group(1)]
    power = {"m": "monotonic", "e": "expcone"}[m.group(2)]
    beam = {"BF": "per-user-bf", "S": "spot", "2c": "2c", "4c": "4c"}[m.group(3)]
    return Strategy(name=name, assign=assign, power=power, beam=beam,
                    objective=objective, plan_path=plan_path)


@dataclass
class CellSolution:
    slot: int
    sat_id: int
    cell_id: int
    user_ids: list[int]          # descending effective gain
    demands_bps: np.ndarray
    powers_w: np.ndarray
    rates_bps: np.ndarray
    sinrs: np.ndarray
    beam_mode: str
    status: str = "ok"           # ok | infeasible
    iterations: int = 0

    @property
    def tx_power_w(self) -> float:
        return float(self.powers_w.sum())


@dataclass
class SolutionReport:
    strategy_name: str
    plan: AssignmentPlan
    cells: list[CellSolution]
    converged: bool = True


@dataclass
class MetricsReport:
    objective_gap_bps2: float
    objective_gap_db: float
    satisfaction_ratio: float
    per_sat_min_satisfaction: dict[int, float]
    min_sat_rate_worst: float
    total_capacity_bps: float
    total_gap_bps: float
    energy_eff: float
    scheme2_score: float


GAP_DB_FLOOR = -400.0


# -- per-cell solving -------------------------------------------------------


def _solver_for(power_mode: str):
    return {"monotonic": monotonic_power_solve, "expcone": expcone_power_solve}[power_mode]


def _objective_weights(demands: np.ndarray, objective: str) -> np.ndarray | None:
    if objective == "scheme2-ratio":
        return 1.0 / demands**2
    return None


def _solve_noma_bf(
    strategy: Strategy,
    ordered: list[ChannelVector],
    demands: np.ndarray,
    config: ScenarioConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, str, int]:
    """Alternating beam/power loop for per-user or spot beams.

    Returns (powers, rates, sinrs, status, iterations) in the ordered-user
    indexing.
    """
    n = len(ordered)
    budget = config.headroom_power_w if strategy.power == "monotonic" else config.sat_power_w
    solver = _solver_for(strategy.power)
    weights = _objective_weights(demands, strategy.objective)
    h = np.stack([cv.h for cv in ordered])
    chan = build_channel_matrix(0, 0, list(ordered))

    p = np.full(n, budget / n)
    best = None
    best_obj = math.inf
    prev_rates = None
    iterations = 0
    for iterations in range(1, OUTER_MAX_ITERS + 1):
        beams = per_user_beams(chan, p) if strategy.beam == "per-user-bf" else spot_beam(chan, p)
        dirs = np.stack(beams.directions)
        cross = np.abs(h.conj() @ dirs.T) ** 2           # [i, j] = |h_i^H v_j|^2
        perm = np.argsort(-np.diag(cross), kind="stable")
        inv = np.argsort(perm)
        inst = CellInstance(
            cross_gains=cross[np.ix_(perm, perm)],
            demands_bps=demands[perm],
            bandwidth_hz=config.bandwidth_hz,
            noise_w=config.noise_power_w,
            budget_w=budget,
            r_min_bps=config.min_rate_bps,
            kappa=config.ipsic_factor,
            conventional_sic=config.conventional_sic,
            weights=None if weights is None else weights[perm],
        )
        try:
            alloc = solver(inst)
        except InfeasibleError:
            return (np.zeros(n), np.zeros(n), np.zeros(n), "infeasible", iterations)
        rates_p = rates_for(inst, alloc.p)
        sinrs_p = sinr(inst, alloc.p)
        wv = inst.weight_vec
        obj = float(np.sum(wv * (rates_p - demands[perm]) ** 2))
        if best is None or obj < best_obj - 1e-12 * max(best_obj, 1.0):
            best_obj = obj
            best = (alloc.p[inv], rates_p[inv], sinrs_p[inv])
        else:
            break   # reject non-improving steps; keep the best iterate
        rates_unperm = rates_p[inv]
        if prev_rates is not None:
            change = np.max(np.abs(rates_unperm - prev_rates) / np.maximum(prev_rates, 1.0))
            if change < OUTER_TOL:
                break
        prev_rates = rates_unperm
        p = alloc.p[inv]
    powers, rates, sinrs = best
    return powers, rates, sinrs, "ok", iterations


def _solve_color(
    strategy: Strategy,
    ordered: list[ChannelVector],
    demands: np.ndarray,
    config: ScenarioConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, str, int]:
    """2c / 4c reuse: no beamforming, same-color interference only."""
    n = len(ordered)
    labels, bw_factor = color_partition(n, strategy.beam)
    n_colors = max(labels) + 1
    u = uniform_direction(config.num_antennas)
    q = np.array([np.abs(np.vdot(cv.h, u)) ** 2 for cv in ordered])
    budget_each = (
        config.headroom_power_w if strategy.power == "monotonic" else config.sat_power_w
    ) / n_colors
    solver = _solver_for(strategy.power)
    weights = _objective_weights(demands, strategy.objective)
    bandwidth = config.bandwidth_hz * bw_factor
    noise = config.noise_power_w * bw_factor

    powers = np.zeros(n)
    rates = np.zeros(n)
    sinrs = np.zeros(n)
    status = "ok"
    for color in range(n_colors):
        members = [i for i in range(n) if labels[i] == color]
        if not members:
            continue
        members = sorted(members, key=lambda i: -q[i])
        live = [i for i in members if q[i] > 0.0]
        if len(live) < len(members):
            status = "infeasible"
        # Users that cannot reach r_min are dropped one at a time and the
        # rest of the color group is re-solved.
        alloc = None
        while live:
            g = q[live]
            # shared direction: user i hears every same-color beam at gain q_i
            inst = CellInstance(
                cross_gains=np.tile(g[:, None], (1, len(live))),
                demands_bps=demands[live],
                bandwidth_hz=bandwidth,
                noise_w=noise,
                budget_w=budget_each,
                r_min_bps=config.min_rate_bps,
                kappa=config.ipsic_factor,
                conventional_sic=config.conventional_sic,
                weights=None if weights is None else weights[live],
            )
            try:
                alloc = solver(inst)
            except InfeasibleError as exc:
                status = "infeasible"
                live.pop(exc.user_index)
                alloc = None
                continue
            break
        if alloc is None:
            continue
        r = rates_for(inst, alloc.p)
        s = sinr(inst, alloc.p)
        for pos, i in enumerate(live):
            powers[i], rates[i], sinrs[i] = alloc.p[pos], r[pos], s[pos]
    return powers, rates, sinrs, status, 1


def _solve_oma(
    strategy: Strategy,
    ordered: list[ChannelVector],
    demands: np.ndarray,
    config: ScenarioConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, str, int]:
    """Orthogonal 1/N shares, per-user matched beams, zero interference."""
    n = len(ordered)
    g = np.array([cv.gain for cv in ordered])
    share = 1.0 / n
    try:
        alloc = oma_power_solve(
            g,
            demands,
            config.bandwidth_hz * share,
            config.noise_power_w * share,
            config.sat_power_w,
            config.min_rate_bps,
            weights=_objective_weights(demands, strategy.objective),
        )
    except InfeasibleError:
        return np.zeros(n), np.zeros(n), np.zeros(n), "infeasible", 1
    gammas = g * alloc.p / (config.noise_power_w * share)
    return alloc.p, alloc.rates_bps, gammas, "ok", 1


def _solve_equal(
    strategy: Strategy,
    ordered: list[ChannelVector],
    demands: np.ndarray,
    config: ScenarioConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, str, int]:
    n = len(ordered)
    chan = build_channel_matrix(0, 0, list(ordered))
    p = np.full(n, config.sat_power_w / n)
    beams = per_user_beams(chan, p)
    h = np.stack([cv.h for cv in ordered])
    dirs = np.stack(beams.directions)
    cross = np.abs(h.conj() @ dirs.T) ** 2
    inst = CellInstance(
        cross_gains=cross,
        demands_bps=demands,
        bandwidth_hz=config.bandwidth_hz,
        noise_w=config.noise_power_w,
        budget_w=config.sat_power_w,
        r_min_bps=config.min_rate_bps,
        kappa=config.ipsic_factor,
        conventional_sic=config.conventional_sic,
    )
    return p, rates_for(inst, p), sinr(inst, p), "ok", 1


def solve_cell(
    strategy: Strategy,
    slot: int,
    sat_id: int,
    cell_id: int,
    channels: list[ChannelVector],
    demands_by_user: dict[int, float],
    config: ScenarioConfig,
) -> CellSolution:
    """Solve one served cell; users with zero channel gain stay at rate 0."""
    matrix = build_channel_matrix(cell_id, slot, channels)
    ordered_all = matrix.ordered
    served = [cv for cv in ordered_all if cv.gain > 0.0]
    user_ids = [cv.user_id for cv in ordered_all]
    demands_all = np.array([demands_by_user[u] for u in user_ids])
    n_all = len(ordered_all)
    powers = np.zeros(n_all)
    rates = np.zeros(n_all)
    sinrs = np.zeros(n_all)
    if not served:
        return CellSolution(slot, sat_id, cell_id, user_ids, demands_all,
                            powers, rates, sinrs, strategy.beam, status="infeasible")
    demands = np.array([demands_by_user[cv.user_id] for cv in served])
    solver = {
        "oma": _solve_oma,
        "equal": _solve_equal,
    }.get(strategy.power)
    if solver is None:
        solver = _solve_color if strategy.beam in ("2c", "4c") else _solve_noma_bf
    p, r, s, status, iters = solver(strategy, served, demands, config)
    for pos, cv in enumerate(served):
        idx = user_ids.index(cv.user_id)
        powers[idx], rates[idx], sinrs[idx] = p[pos], r[pos], s[pos]
    if len(served) < n_all and status == "ok":
        status = "infeasible"
    return CellSolution(slot, sat_id, cell_id, user_ids, demands_all,
                        powers, rates, sinrs, strategy.beam, status=status, iterations=iters)


# -- run orchestration ------------------------------------------------------


def _user_channels(state, users: list[User], radio: RadioParams, slot: int) -> list[ChannelVector]:
    out = []
    for u in users:
        geom = slant_geometry(state, u.lat_deg, u.lon_deg)
        try:
            out.append(user_channel(geom, radio, user_id=u.user_id, slot_index=slot))
        except NotVisibleError:
            out.append(ChannelVector(user_id=u.user_id,
                                     h=np.zeros(radio.num_antennas, dtype=complex),
                                     gain=0.0, slot_index=slot))
    return out


def _ant_plan(
    config: ScenarioConfig,
    elements,
    cells,
    users_by_cell: dict[int, list[User]],
    radio: RadioParams,
    rng: np.random.Generator,
) -> AssignmentPlan:
    """Ant-colony plan driven by a cheap per-(sat, slot, cell) gap surrogate.

    The surrogate solves the leakage-free cascade problem per cell with the
    fast rate-space solver; route weights favor short slant paths.
    """
    horizon = config.horizon_slots
    m, k = config.num_satellites, config.num_cells
    weights = np.empty((m, horizon, k))
    gaps = np.empty((m, horizon, k))
    for sat_id, element in enumerate(elements):
        for slot in range(horizon):
            state = propagate(element, slot, config.slot_duration_s, sat_id=sat_id)
            for cell in cells:
                geom = slant_geometry(state, cell.center_lat_deg, cell.center_lon_deg)
                weights[sat_id, slot, cell.cell_id] = 1.0 / geom.distance_m
                chans = _user_channels(state, users_by_cell[cell.cell_id], radio, slot)
                gaps[sat_id, slot, cell.cell_id] = _surrogate_gap(chans, users_by_cell[cell.cell_id], config)
    result = ant_colony_plan(
        m, k, horizon,
        route_weight=lambda s, t, c: weights[s, t, c],
        slot_gap=lambda s, t, c: gaps[s, t, c],
        params=config.ant_params,
        rng=rng,
    )
    return result.plan


def _surrogate_gap(chans: list[ChannelVector], users: list[User], config: ScenarioConfig) -> float:
    demand = {u.user_id: u.demand_bps for u in users}
    ordered = sorted(chans, key=lambda cv: (-cv.gain, cv.user_id))
    total = float(sum(d**2 for d in demand.values()))
    served = [cv for cv in ordered if cv.gain > 0]
    if not served:
        return total
    g = np.array([cv.gain for cv in served])
    d = np.array([demand[cv.user_id] for cv in served])
    inst = CellInstance(
        cross_gains=np.tile(g[:, None], (1, len(served))),
        demands_bps=d,
        bandwidth_hz=config.bandwidth_hz,
        noise_w=config.noise_power_w,
        budget_w=config.sat_power_w,
        r_min_bps=config.min_rate_bps,
    )
    try:
        alloc = expcone_power_solve(inst)
    except InfeasibleError:
        return total
    served_ids = {cv.user_id for cv in served}
    unserved = float(sum(demand[u]**2 for u in demand if u not in served_ids))
    return alloc.objective + unserved


def run(
    config: ScenarioConfig,
    strategy: Strategy,
    trial: int = 0,
    plan: AssignmentPlan | None = None,
) -> tuple[SolutionReport, MetricsReport]:
    if strategy.power == "expcone" and config.ipsic_factor > 0.0:
        raise UnsupportedModeError(
            "the cascade power recursion cannot iterate with residual interference (kappa > 0)"
        )
    rng = rng_for(config.seed, trial)
    cells = build_cells(config)
    users = spawn_users(cells, config, rng)
    users_by_cell: dict[int, list[User]] = {c.cell_id: [] for c in cells}
    for u in users:
        users_by_cell[u.cell_id].append(u)
    elements = build_constellation(config)
    radio = RadioParams.from_config(config)

    if plan is None:
        if strategy.assign == "fixed-plan":
            if strategy.plan_path is None:
                raise StrategyError("fixed-plan strategy requires a plan or plan_path")
            plan = load_plan(strategy.plan_path)
        elif strategy.assign == "ant":
            plan = _ant_plan(config, elements, cells, users_by_cell, radio, rng)
        else:
            plan = build_doppler_plan(config, elements, cells)

    demand_by_user = {u.user_id: u.demand_bps for u in users}
    solutions: list[CellSolution] = []
    converged = True
    for slot in range(plan.horizon):
        states = {
            sat_id: propagate(elements[sat_id], slot, config.slot_duration_s, sat_id=sat_id)
            for sat_id, _ in plan.cells_in_slot(slot)
        }
        for sat_id, cell_id in plan.cells_in_slot(slot):
            chans = _user_channels(states[sat_id], users_by_cell[cell_id], radio, slot)
            sol = solve_cell(strategy, slot, sat_id, cell_id, chans, demand_by_user, config)
            solutions.append(sol)
            if sol.iterations >= OUTER_MAX_ITERS:
                converged = False
    report = SolutionReport(strategy_name=strategy.name, plan=plan,
                            cells=solutions, converged=converged)
    return report, compute_metrics(report, config)


def run_oma_baseline(
    config: ScenarioConfig, trial: int = 0, plan: AssignmentPlan | None = None
) -> tuple[SolutionReport, MetricsReport]:
    return run(config, parse_strategy("OMA-BF"), trial=trial, plan=plan)


# -- metrics ----------------------------------------------------------------


def compute_metrics(report: SolutionReport, config: ScenarioConfig) -> MetricsReport:
    rates = np.concatenate([s.rates_bps for s in report.cells]) if report.cells else np.zeros(0)
    demands = np.concatenate([s.demands_bps for s in report.cells]) if report.cells else np.zeros(0)
    gap = float(np.sum((rates - demands) ** 2))
    total_d2 = float(np.sum(demands**2))
    if total_d2 > 0 and gap > 0:
        gap_db = max(10.0 * math.log10(gap / total_d2), GAP_DB_FLOOR)
    else:
        gap_db = GAP_DB_FLOOR
    frac = np.minimum(rates / np.maximum(demands, 1e-300), 1.0)
    satisfaction = float(frac.mean()) if frac.size else 0.0

    per_sat: dict[int, float] = {}
    sat_log_rate: dict[int, float] = {}
    sat_power: dict[int, float] = {}
    for s in report.cells:
        cell_frac = np.minimum(s.rates_bps / np.maximum(s.demands_bps, 1e-300), 1.0)
        cell_min = float(cell_frac.min()) if cell_frac.size else 0.0
        per_sat[s.sat_id] = max(per_sat.get(s.sat_id, 0.0), cell_min)
        sat_log_rate[s.sat_id] = sat_log_rate.get(s.sat_id, 0.0) + float(
            np.sum(np.log1p(s.sinrs))
        )
        sat_power[s.sat_id] = sat_power.get(s.sat_id, 0.0) + s.tx_power_w
    energy_eff = sum(
        sat_log_rate[m] / sat_power[m] for m in sat_power if sat_power[m] > 0.0
    )
    worst = min(per_sat.values()) if per_sat else 0.0
    capacity = float(np.sum(np.minimum(rates, demands)))
    unsatisfied = float(np.sum(np.maximum(demands - rates, 0.0)))
    scheme2 = float(np.sum(frac)) if frac.size else 0.0
    return MetricsReport(
        objective_gap_bps2=gap,
        objective_gap_db=gap_db,
        satisfaction_ratio=satisfaction,
        per_sat_min_satisfaction=per_sat,
        min_sat_rate_worst=worst,
        total_capacity_bps=capacity,
        total_gap_bps=unsatisfied,
        energy_eff=energy_eff,
        scheme2_score=scheme2,
    )


def dump_solution(report: SolutionReport, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["slot", "cell", "sat", "user", "demand_bps", "rate_bps", "power_w",
             "beam_norm_sq", "infeasible"]
        )
        for s in sorted(report.cells, key=lambda s: (s.slot, s.sat_id)):
            for i, user in enumerate(s.user_ids):
                writer.writerow(
                    [s.slot, s.cell_id, s.sat_id, user,
                     f"{s.demands_bps[i]:.3f}", f"{s.rates_bps[i]:.3f}",
                     f"{s.powers_w[i]:.9e}", f"{s.powers_w[i]:.9e}",
                     int(s.status != "ok")]
                )
