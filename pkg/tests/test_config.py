import dataclasses
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leonoma.config import (
    AntParams,
    ConfigError,
    ScenarioConfig,
    build_cells,
    config_from_dict,
    dbi_to_linear,
    dbw_to_watts,
    linear_to_dbi,
    load_config,
    most_square_grid,
    rng_for,
    spawn_users,
    watts_to_dbw,
)


class TestUnitConversions:
    def test_zero_dbw_is_one_watt(self):
        assert dbw_to_watts(0.0) == 1.0

    def test_25_dbw(self):
        assert dbw_to_watts(25.0) == pytest.approx(316.2278, rel=1e-6)

    def test_noise_floor(self):
        assert dbw_to_watts(-136.0) == pytest.approx(2.5119e-14, rel=1e-4)

    def test_dbi_matches_dbw_scale(self):
        assert dbi_to_linear(30.0) == pytest.approx(1000.0, rel=1e-12)
        assert linear_to_dbi(1000.0) == pytest.approx(30.0, abs=1e-12)

    @given(st.floats(min_value=-200.0, max_value=100.0))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, x):
        assert abs(x - watts_to_dbw(dbw_to_watts(x))) < 1e-9


class TestScenarioConfig:
    def test_defaults_match_parameter_table(self):
        cfg = ScenarioConfig().validate()
        assert cfg.carrier_frequency_hz == 11.7e9
        assert cfg.bandwidth_hz == 500e6
        assert cfg.num_satellites == 6
        assert cfg.num_cells == 64
        assert cfg.users_per_cell == 4
        assert cfg.num_antennas == 8
        assert cfg.noise_power_dbw == -136.0
        assert cfg.sat_power_dbw == 25.0
        assert cfg.min_rate_bps == 5e6
        assert cfg.demand_range_bps == (300e6, 1300e6)
        assert cfg.grid_shape == (8, 8)

    def test_override_keeps_other_defaults(self):
        cfg = config_from_dict({"num_cells": 16})
        assert cfg.num_cells == 16
        assert cfg.grid_shape == (4, 4)
        assert cfg.carrier_frequency_hz == 11.7e9

    def test_empty_dict_gives_defaults(self):
        assert config_from_dict({}) == ScenarioConfig()

    def test_bad_tau_names_field(self):
        with pytest.raises(ConfigError, match="tau"):
            config_from_dict({"ant_params": {"tau": 1.5}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="no_such_key"):
            config_from_dict({"no_such_key": 1})

    def test_nonpositive_field_named(self):
        with pytest.raises(ConfigError, match="bandwidth_hz"):
            dataclasses.replace(ScenarioConfig(), bandwidth_hz=-1.0).validate()

    def test_demand_range_must_be_ordered(self):
        with pytest.raises(ConfigError, match="demand_range_bps"):
            dataclasses.replace(ScenarioConfig(), demand_range_bps=(2.0, 1.0)).validate()

    def test_derived_powers(self):
        cfg = ScenarioConfig()
        assert cfg.sat_power_w == pytest.approx(316.2278, rel=1e-6)
        assert cfg.headroom_power_w == pytest.approx(1.05 * cfg.sat_power_w, rel=1e-12)

    def test_horizon_is_ceil_k_over_m(self):
        assert ScenarioConfig().horizon_slots == 11
        assert config_from_dict({"num_cells": 16, "num_satellites": 3}).horizon_slots == 6

    def test_yaml_file_and_env_seed_override(self, tmp_path, monkeypatch):
        path = tmp_path / "scenario.yaml"
        path.write_text("num_cells: 16\nseed: 7\n")
        assert load_config(str(path)).seed == 7
        monkeypatch.setenv("LEONOMA_SEED", "99")
        cfg = load_config(str(path))
        assert cfg.seed == 99
        assert cfg.num_cells == 16

    def test_yaml_parse_failure(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("num_cells: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(str(path))


class TestGrid:
    def test_most_square(self):
        assert most_square_grid(64) == (8, 8)
        assert most_square_grid(16) == (4, 4)
        assert most_square_grid(12) == (3, 4)
        assert most_square_grid(1) == (1, 1)

    def test_cell_zero_center_k64(self):
        cells = build_cells(ScenarioConfig())
        assert len(cells) == 64
        assert cells[0].center_lon_deg == pytest.approx(100.3125, abs=1e-9)
        assert cells[0].center_lat_deg == pytest.approx(1.3125, abs=1e-9)

    def test_single_cell_at_region_midpoint(self):
        cells = build_cells(config_from_dict({"num_cells": 1}))
        assert cells[0].center_lon_deg == pytest.approx(102.5)
        assert cells[0].center_lat_deg == pytest.approx(0.0)

    def test_k4_centers_symmetric_about_midpoint(self):
        cells = build_cells(config_from_dict({"num_cells": 4}))
        centers = {
            (round(c.center_lon_deg, 9), round(c.center_lat_deg, 9)) for c in cells
        }
        assert len(centers) == 4
        for lon, lat in centers:
            mirrored = (round(2 * 102.5 - lon, 9), round(-lat, 9))
            assert mirrored in centers

    def test_tiling_covers_region_without_overlap(self):
        cfg = ScenarioConfig()
        cells = build_cells(cfg)
        area = sum(
            (b[1] - b[0]) * (b[3] - b[2]) for b in (c.bounds for c in cells)
        )
        lon0, lon1 = cfg.region_lon_deg
        lat0, lat1 = cfg.region_lat_deg
        assert area == pytest.approx((lon1 - lon0) * (lat1 - lat0), rel=1e-12)
        # pairwise interiors disjoint: identical-width grid, so distinct
        # bounds suffice
        assert len({c.bounds for c in cells}) == len(cells)


class TestUsers:
    def test_exact_count_per_cell(self):
        cfg = ScenarioConfig()
        users = spawn_users(build_cells(cfg), cfg, rng_for(0))
        assert len(users) == 256
        per_cell = {}
        for u in users:
            per_cell[u.cell_id] = per_cell.get(u.cell_id, 0) + 1
        assert set(per_cell.values()) == {4}

    def test_positions_inside_their_cell(self):
        cfg = config_from_dict({"num_cells": 16})
        cells = build_cells(cfg)
        for u in spawn_users(cells, cfg, rng_for(3)):
            lon_lo, lon_hi, lat_lo, lat_hi = cells[u.cell_id].bounds
            assert lon_lo <= u.lon_deg <= lon_hi
            assert lat_lo <= u.lat_deg <= lat_hi

    def test_degenerate_demand_range(self):
        cfg = config_from_dict({"num_cells": 4, "demand_range_bps": [5e8, 5e8]})
        users = spawn_users(build_cells(cfg), cfg, rng_for(1))
        assert all(u.demand_bps == 5e8 for u in users)

    def test_determinism(self):
        cfg = ScenarioConfig()
        cells = build_cells(cfg)
        a = spawn_users(cells, cfg, rng_for(cfg.seed, 5))
        b = spawn_users(cells, cfg, rng_for(cfg.seed, 5))
        assert a == b

    def test_trial_streams_differ(self):
        cfg = ScenarioConfig()
        cells = build_cells(cfg)
        a = spawn_users(cells, cfg, rng_for(cfg.seed, 0))
        b = spawn_users(cells, cfg, rng_for(cfg.seed, 1))
        assert a != b
