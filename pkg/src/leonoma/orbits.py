"""Circular LEO orbit propagation, relay geometry, Doppler and slant angles.

Spherical non-rotating Earth; orbits are circular Keplerian tracks defined by
inclination, RAAN and an along-track phase. The relay is a fixed ECEF point
acting purely as a Doppler measurement reference.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig

EARTH_RADIUS_M = 6371.0e3
LIGHT_SPEED_MPS = 299792458.0

DEFAULT_INCLINATION_DEG = 87.0
# RAAN offsets (deg of longitude) and along-track phase offsets (deg) used to
# spread the constellation planes across the configured region. Satellites are
# staggered along-track so every one of them is over the region during the
# planning horizon.
_PLANE_LON_OFFSETS = (-1.7, 0.0, 1.7)
_ALONG_TRACK_STAGGER_DEG = 1.2


@dataclass(frozen=True)
class OrbitElement:
    plane_index: int
    inclination_deg: float
    raan_deg: float
    phase_deg: float
    altitude_m: float
    ground_speed_mps: float


@dataclass(frozen=True)
class SatelliteState:
    sat_id: int
    position: np.ndarray   # ECEF meters
    velocity: np.ndarray   # ECEF m/s
    slot_index: int


@dataclass(frozen=True)
class DopplerMeasurement:
    sat_id: int
    slot_index: int
    shift_hz: float
    cos_alpha: float


@dataclass(frozen=True)
class SlantGeometry:
    distance_m: float
    off_axis_rad: float
    aod_rad: float
    visible: bool


def geodetic_to_ecef(lat_deg: float, lon_deg: float, radius_m: float = EARTH_RADIUS_M) -> np.ndarray:
    lat = math.radians(lat_deg)
    lon = math.radians(lon_deg)
    return radius_m * np.array(
        [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
    )


def relay_position(config: ScenarioConfig) -> np.ndarray:
    return geodetic_to_ecef(0.0, config.relay_lon_deg, EARTH_RADIUS_M + config.relay_altitude_m)


def build_constellation(config: ScenarioConfig) -> list[OrbitElement]:
    """M satellites on three near-polar planes crossing the configured region.

    The leading trio starts just south of the region so that mid-horizon the
    sub-satellite points sweep across it; additional satellites trail their
    plane by a small along-track stagger.
    """
    lon_c = 0.5 * (config.region_lon_deg[0] + config.region_lon_deg[1])
    # Sweep length over the horizon, in degrees of arc along track.
    omega_deg = math.degrees(
        config.leo_speed_mps / (EARTH_RADIUS_M + config.leo_altitude_m)
    ) * config.slot_duration_s
    base_phase = -0.5 * omega_deg * config.horizon_slots
    elements = []
    for i in range(config.num_satellites):
        plane = i % len(_PLANE_LON_OFFSETS)
        rank = i // len(_PLANE_LON_OFFSETS)
        elements.append(
            OrbitElement(
                plane_index=plane,
                inclination_deg=DEFAULT_INCLINATION_DEG,
                raan_deg=lon_c + _PLANE_LON_OFFSETS[plane],
                phase_deg=base_phase - rank * _ALONG_TRACK_STAGGER_DEG,
                altitude_m=config.leo_altitude_m,
                ground_speed_mps=config.leo_speed_mps,
            )
        )
    return elements


def propagate(element: OrbitElement, slot: int, slot_duration_s: float, sat_id: int = 0) -> SatelliteState:
    """State on the circular orbit advanced by slot * slot_duration * v0 along track."""
    radius = EARTH_RADIUS_M + element.altitude_m
    omega = element.ground_speed_mps / radius   # rad/s
    u = math.radians(element.phase_deg) + omega * slot * slot_duration_s
    inc = math.radians(element.inclination_deg)
    raan = math.radians(element.raan_deg)

    in_plane = np.array([math.cos(u), math.sin(u), 0.0])
    in_plane_v = np.array([-math.sin(u), math.cos(u), 0.0])
    rot = _rot_z(raan) @ _rot_x(inc)
    return SatelliteState(
        sat_id=sat_id,
        position=radius * (rot @ in_plane),
        velocity=element.ground_speed_mps * (rot @ in_plane_v),
        slot_index=slot,
    )


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def doppler_shift(state: SatelliteState, relay_pos: np.ndarray, f_c: float) -> DopplerMeasurement:
    """Carrier shift f_c * v0 * cos(alpha) / c toward the relay."""
    to_relay = relay_pos - state.position
    dist = np.linalg.norm(to_relay)
    if dist == 0.0:
        raise ValueError("relay coincides with satellite position")
    speed = np.linalg.norm(state.velocity)
    cos_alpha = float(np.dot(state.velocity, to_relay) / (speed * dist))
    return DopplerMeasurement(
        sat_id=state.sat_id,
        slot_index=state.slot_index,
        shift_hz=f_c * speed * cos_alpha / LIGHT_SPEED_MPS,
        cos_alpha=cos_alpha,
    )


def slant_geometry(state: SatelliteState, lat_deg: float, lon_deg: float) -> SlantGeometry:
    """Distance, off-axis angle from nadir, and signed along-track departure angle.

    A ground point at or below the geometric horizon (elevation <= 0) is
    flagged not visible; the distance is still returned.
    """
    ground = geodetic_to_ecef(lat_deg, lon_deg)
    to_ground = ground - state.position
    distance = float(np.linalg.norm(to_ground))
    d_hat = to_ground / distance

    nadir = -state.position / np.linalg.norm(state.position)
    off_axis = _angle_between(nadir, d_hat)

    # Signed steering angle in the along-track / nadir plane.
    along = state.velocity / np.linalg.norm(state.velocity)
    aod = math.atan2(float(np.dot(d_hat, along)), float(np.dot(d_hat, nadir)))

    up = ground / np.linalg.norm(ground)
    visible = float(np.dot(up, -to_ground)) > 0.0
    return SlantGeometry(distance_m=distance, off_axis_rad=off_axis, aod_rad=aod, visible=visible)


def _angle_between(a: np.ndarray, b: np.ndarray) -> float:
    return float(math.acos(max(-1.0, min(1.0, float(np.dot(a, b))))))


def dump_ephemeris(states: list[SatelliteState], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "sat_id", "x", "y", "z", "vx", "vy", "vz"])
        for s in sorted(states, key=lambda s: (s.slot_index, s.sat_id)):
            writer.writerow(
                [s.slot_index, s.sat_id]
                + [f"{v:.6f}" for v in s.position]
                + [f"{v:.9f}" for v in s.velocity]
            )
