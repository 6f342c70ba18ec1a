"""Scenario configuration, cell grid construction, user generation, unit helpers.

All internal computation is carried out in SI linear units (W, Hz, m, bps);
dB values appear only at the configuration boundary.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml

SEED_ENV_VAR = "LEONOMA_SEED"


class ConfigError(ValueError):
    """Raised when a configuration file fails to parse or validate."""


def dbw_to_watts(x_dbw: float) -> float:
    return 10.0 ** (x_dbw / 10.0)


def watts_to_dbw(x_w: float) -> float:
    return 10.0 * math.log10(x_w)


def dbi_to_linear(x_dbi: float) -> float:
    return 10.0 ** (x_dbi / 10.0)


def linear_to_dbi(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class AntParams:
    """Ant-colony planner knobs."""

    s1: float = 1.0            # exponent on route weights
    s2: float = 1.0            # exponent on pheromone concentration
    tau: float = 0.5           # evaporation ratio, 0 < tau < 1
    colony_size: int = 8       # joint plans sampled per iteration
    max_pheromone: float = 10.0
    max_iters: int = 30


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-6
    max_iters: int = 500


@dataclass(frozen=True)
class ScenarioConfig:
    """Full experiment description. Defaults reproduce the standard parameter table."""

    carrier_frequency_hz: float = 11.7e9
    bandwidth_hz: float = 500e6
    region_lon_deg: tuple[float, float] = (100.0, 105.0)
    region_lat_deg: tuple[float, float] = (-1.5, 1.5)
    num_satellites: int = 6
    num_cells: int = 64
    users_per_cell: int = 4
    num_antennas: int = 8
    antenna_spacing_m: float = 0.5
    aperture_radius_m: float = 0.5
    rx_gain_dbi: float = 35.7
    max_tx_gain_dbi: float = 64.9
    noise_power_dbw: float = -136.0
    sat_power_dbw: float = 25.0
    power_headroom_factor: float = 1.05
    min_rate_bps: float = 5e6
    demand_range_bps: tuple[float, float] = (300e6, 1300e6)
    leo_altitude_m: float = 1200e3
    leo_speed_mps: float = 7900.0
    relay_lon_deg: float = 103.0
    relay_altitude_m: float = 36000e3
    ipsic_factor: float = 0.0
    slot_duration_s: float = 10.0
    doppler_threshold_hz: float = 250e3
    rain_atten_db_per_km: float = 0.01
    rain_atten_ref_db: float = 0.0
    literal_bessel_pattern: bool = False   # restore the printed (discontinuous) pattern
    conventional_sic: bool = False         # flip the SIC interference direction
    ant_params: AntParams = field(default_factory=AntParams)
    solver_params: SolverParams = field(default_factory=SolverParams)
    seed: int = 0

    # -- derived quantities -------------------------------------------------

    @property
    def wavelength_m(self) -> float:
        from .orbits import LIGHT_SPEED_MPS

        return LIGHT_SPEED_MPS / self.carrier_frequency_hz

    @property
    def noise_power_w(self) -> float:
        return dbw_to_watts(self.noise_power_dbw)

    @property
    def sat_power_w(self) -> float:
        return dbw_to_watts(self.sat_power_dbw)

    @property
    def headroom_power_w(self) -> float:
        return self.power_headroom_factor * self.sat_power_w

    @property
    def rx_gain_linear(self) -> float:
        return dbi_to_linear(self.rx_gain_dbi)

    @property
    def max_tx_gain_linear(self) -> float:
        return dbi_to_linear(self.max_tx_gain_dbi)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return most_square_grid(self.num_cells)

    @property
    def horizon_slots(self) -> int:
        return -(-self.num_cells // self.num_satellites)

    def validate(self) -> "ScenarioConfig":
        positive = [
            "carrier_frequency_hz", "bandwidth_hz", "num_satellites", "num_cells",
            "users_per_cell", "num_antennas", "antenna_spacing_m", "aperture_radius_m",
            "min_rate_bps", "leo_altitude_m", "leo_speed_mps", "relay_altitude_m",
            "slot_duration_s", "doppler_threshold_hz",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        lo, hi = self.demand_range_bps
        if lo > hi:
            raise ConfigError("demand_range_bps must be ordered (lo <= hi)")
        if lo <= 0:
            raise ConfigError("demand_range_bps must be strictly positive")
        if not 0.0 <= self.ipsic_factor <= 1.0:
            raise ConfigError("ipsic_factor must lie in [0, 1]")
        if not 0.0 < self.ant_params.tau < 1.0:
            raise ConfigError("ant_params.tau must lie strictly in (0, 1)")
        if self.power_headroom_factor < 1.0:
            raise ConfigError("power_headroom_factor must be >= 1")
        if self.region_lon_deg[0] >= self.region_lon_deg[1]:
            raise ConfigError("region_lon_deg must be an increasing interval")
        if self.region_lat_deg[0] >= self.region_lat_deg[1]:
            raise ConfigError("region_lat_deg must be an increasing interval")
        most_square_grid(self.num_cells)  # raises if not factorable
        return self


def most_square_grid(num_cells: int) -> tuple[int, int]:
    """Pick the most-square r x c factorization with r <= c (8x8 for K=64)."""
    if num_cells < 1:
        raise ConfigError("num_cells must be >= 1")
    r = int(math.isqrt(num_cells))
    while r >= 1 and num_cells % r != 0:
        r -= 1
    if r < 1:
        raise ConfigError(f"num_cells={num_cells} is not factorable into a grid")
    return r, num_cells // r


_NESTED = {"ant_params": AntParams, "solver_params": SolverParams}
_TUPLES = {"region_lon_deg", "region_lat_deg", "demand_range_bps"}


def load_config(path: str) -> ScenarioConfig:
    """Load a YAML scenario file; absent keys take the defaults.

    The seed may be overridden via the LEONOMA_SEED environment variable.
    """
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"failed to parse {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ScenarioConfig:
    known = {f.name for f in fields(ScenarioConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key: {key}")
        if key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be a mapping")
            sub_known = {f.name for f in fields(_NESTED[key])}
            bad = set(value) - sub_known
            if bad:
                raise ConfigError(f"unknown key under {key}: {sorted(bad)[0]}")
            kwargs[key] = _NESTED[key](**value)
        elif key in _TUPLES:
            if not (isinstance(value, (list, tuple)) and len(value) == 2):
                raise ConfigError(f"{key} must be a two-element list")
            kwargs[key] = (float(value[0]), float(value[1]))
        else:
            kwargs[key] = value
    cfg = ScenarioConfig(**kwargs)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        cfg = replace(cfg, seed=int(env_seed))
    return cfg.validate()


# -- cells and users --------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    cell_id: int
    center_lat_deg: float
    center_lon_deg: float
    # (lon_min, lon_max, lat_min, lat_max)
    bounds: tuple[float, float, float, float]


@dataclass(frozen=True)
class User:
    user_id: int
    cell_id: int
    lat_deg: float
    lon_deg: float
    demand_bps: float


def build_cells(config: ScenarioConfig) -> list[Cell]:
    """Tile the region into a regular r x c grid, row-major ids from the north-west."""
    rows, cols = config.grid_shape
    lon0, lon1 = config.region_lon_deg
    lat0, lat1 = config.region_lat_deg
    dlon = (lon1 - lon0) / cols
    dlat = (lat1 - lat0) / rows
    cells = []
    for r in range(rows):
        lat_hi = lat1 - r * dlat
        for c in range(cols):
            lon_lo = lon0 + c * dlon
            cells.append(
                Cell(
                    cell_id=r * cols + c,
                    center_lat_deg=lat_hi - dlat / 2.0,
                    center_lon_deg=lon_lo + dlon / 2.0,
                    bounds=(lon_lo, lon_lo + dlon, lat_hi - dlat, lat_hi),
                )
            )
    return cells


def spawn_users(cells: list[Cell], config: ScenarioConfig, rng: np.random.Generator) -> list[User]:
    """Exactly N users per cell, uniform positions and i.i.d. uniform demands."""
    lo, hi = config.demand_range_bps
    users = []
    uid = 0
    for cell in cells:
        lon_lo, lon_hi, lat_lo, lat_hi = cell.bounds
        for _ in range(config.users_per_cell):
            users.append(
                User(
                    user_id=uid,
                    cell_id=cell.cell_id,
                    lat_deg=float(rng.uniform(lat_lo, lat_hi)),
                    lon_deg=float(rng.uniform(lon_lo, lon_hi)),
                    demand_bps=float(rng.uniform(lo, hi)),
                )
            )
            uid += 1
    return users


def rng_for(seed: int, trial_index: int = 0) -> np.random.Generator:
    """Deterministic stream keyed by (seed, trial_index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial_index,)))
