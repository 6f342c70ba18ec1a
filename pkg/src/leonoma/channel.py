"""Per-user complex channel vectors from slant geometry and radio parameters.

The channel combines rain attenuation, free-space loss, the circular-aperture
transmit pattern and a uniform-linear-array response steered at the user's
departure angle. Users are ordered by descending effective gain ||h||^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import j1

from .config import ScenarioConfig
from .orbits import SlantGeometry


@dataclass(frozen=True)
class RadioParams:
    wavelength_m: float
    rx_gain_linear: float
    max_tx_gain_linear: float
    aperture_radius_m: float
    antenna_spacing_m: float
    num_antennas: int
    rain_atten_db_per_km: float = 0.01
    rain_atten_ref_db: float = 0.0
    rain_ref_distance_m: float = 1200e3
    literal_bessel_pattern: bool = False

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "RadioParams":
        return cls(
            wavelength_m=config.wavelength_m,
            rx_gain_linear=config.rx_gain_linear,
            max_tx_gain_linear=config.max_tx_gain_linear,
            aperture_radius_m=config.aperture_radius_m,
            antenna_spacing_m=config.antenna_spacing_m,
            num_antennas=config.num_antennas,
            rain_atten_db_per_km=config.rain_atten_db_per_km,
            rain_atten_ref_db=config.rain_atten_ref_db,
            rain_ref_distance_m=config.leo_altitude_m,
            literal_bessel_pattern=config.literal_bessel_pattern,
        )


@dataclass(frozen=True)
class ChannelVector:
    user_id: int
    h: np.ndarray          # complex, length L
    gain: float            # ||h||^2
    slot_index: int


@dataclass(frozen=True)
class ChannelMatrix:
    cell_id: int
    slot_index: int
    vectors: list[ChannelVector]
    order: list[int]       # indices into vectors, descending gain

    @property
    def ordered(self) -> list[ChannelVector]:
        return [self.vectors[i] for i in self.order]


class NotVisibleError(ValueError):
    """Channel requested for a ground point below the satellite horizon."""


def array_response(theta_rad: float, num_antennas: int, spacing_m: float, wavelength_m: float) -> np.ndarray:
    """Unit-norm ULA steering vector, entry l = exp(-j l (2 pi s / lambda) sin theta) / sqrt(L)."""
    if num_antennas < 1:
        raise ValueError("num_antennas must be >= 1")
    phase = 2.0 * np.pi * spacing_m / wavelength_m * np.sin(theta_rad)
    l = np.arange(num_antennas)
    return np.exp(-1j * l * phase) / np.sqrt(num_antennas)


def transmit_gain(phi_rad: float, params: RadioParams) -> float:
    """Circular-aperture pattern G_max |2 J1(u)/u|^2 with u = 2 pi a sin(phi) / lambda.

    The normalized 2J1(u)/u form is continuous with the boresight branch; the
    literal_bessel_pattern switch restores the printed 4J1(u)/u variant for
    comparison.
    """
    if phi_rad == 0.0:
        return params.max_tx_gain_linear
    u = 2.0 * np.pi * params.aperture_radius_m * np.sin(abs(phi_rad)) / params.wavelength_m
    if u == 0.0:
        return params.max_tx_gain_linear
    num = 4.0 if params.literal_bessel_pattern else 2.0
    return params.max_tx_gain_linear * float(np.abs(num * j1(u) / u)) ** 2


def rain_amplitude(distance_m: float, params: RadioParams) -> float:
    """Amplitude factor for the linear-in-distance rain attenuation slope."""
    excess_km = max(0.0, distance_m - params.rain_ref_distance_m) / 1000.0
    atten_db = params.rain_atten_ref_db + params.rain_atten_db_per_km * excess_km
    return 10.0 ** (-atten_db / 20.0)


def user_channel(geometry: SlantGeometry, params: RadioParams, user_id: int = 0, slot_index: int = 0) -> ChannelVector:
    """h = rain * sqrt(G_r) * (lambda / 4 pi d) * sqrt(G_t(phi)) * a(theta)."""
    if not geometry.visible:
        raise NotVisibleError("ground point below the geometric horizon")
    nu = params.wavelength_m / (4.0 * np.pi * geometry.distance_m)
    scale = (
        rain_amplitude(geometry.distance_m, params)
        * np.sqrt(params.rx_gain_linear)
        * nu
        * np.sqrt(transmit_gain(geometry.off_axis_rad, params))
    )
    h = scale * array_response(
        geometry.aod_rad, params.num_antennas, params.antenna_spacing_m, params.wavelength_m
    )
    return ChannelVector(user_id=user_id, h=h, gain=float(np.vdot(h, h).real), slot_index=slot_index)


def order_users(channels: list[ChannelVector]) -> list[int]:
    """Stable descending-gain order; ties broken by ascending user_id."""
    if not channels:
        raise ValueError("order_users requires a nonempty channel list")
    return sorted(range(len(channels)), key=lambda i: (-channels[i].gain, channels[i].user_id))


def build_channel_matrix(
    cell_id: int, slot_index: int, channels: list[ChannelVector]
) -> ChannelMatrix:
    return ChannelMatrix(
        cell_id=cell_id,
        slot_index=slot_index,
        vectors=channels,
        order=order_users(channels),
    )
