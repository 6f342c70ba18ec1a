"""Per-user matched (rank-one SVD) beams, shared spot beams, and color reuse.

Beam vectors are stored scaled so that ||w_i||^2 = p_i; rate evaluation uses
the unit-norm directions (power enters the SINR separately).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelMatrix, ChannelVector


@dataclass(frozen=True)
class BeamMatrix:
    cell_id: int
    w: list[np.ndarray]            # scaled vectors, ||w_i||^2 <= p_i
    directions: list[np.ndarray]   # unit-norm beam directions
    mode: str                      # per-user | spot | color
    degenerate: bool = False       # zero channel encountered


def svd_beamformer(h: np.ndarray, p: float) -> np.ndarray:
    """w = sqrt(p) * h / ||h||: the principal singular direction of h^H h.

    Achieves |h^H w|^2 = p * ||h||^2, the Cauchy-Schwarz optimum under
    ||w||^2 <= p. A zero channel yields a zero beam.
    """
    if p < 0:
        raise ValueError("beam power must be nonnegative")
    norm = np.linalg.norm(h)
    if norm == 0.0:
        return np.zeros_like(h)
    return np.sqrt(p) * h / norm


def power_iteration(a: np.ndarray, tol: float = 1e-10, max_iters: int = 500) -> np.ndarray:
    """Principal eigenvector of a Hermitian PSD matrix by power iteration."""
    n = a.shape[0]
    v = np.ones(n, dtype=complex) / np.sqrt(n)
    for _ in range(max_iters):
        w = a @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return v
        w /= norm
        # phase-align so convergence is measured on the ray, not the vector
        phase = np.vdot(v, w)
        if abs(phase) > 0:
            w = w * (phase.conjugate() / abs(phase))
        if np.linalg.norm(w - v) < tol:
            return w
        v = w
    return v


def per_user_beams(channels: ChannelMatrix, powers: np.ndarray) -> BeamMatrix:
    """Matched beam per user in the matrix's gain-descending order."""
    ordered = channels.ordered
    directions = []
    degenerate = False
    for cv in ordered:
        norm = np.linalg.norm(cv.h)
        if norm == 0.0:
            directions.append(np.zeros_like(cv.h))
            degenerate = True
        else:
            directions.append(cv.h / norm)
    w = [np.sqrt(p) * d for p, d in zip(powers, directions)]
    return BeamMatrix(
        cell_id=channels.cell_id, w=w, directions=directions, mode="per-user", degenerate=degenerate
    )


def spot_beam(channels: ChannelMatrix, powers: np.ndarray) -> BeamMatrix:
    """One shared direction maximizing sum_i p_i |h_i^H v|^2 over unit v."""
    ordered = channels.ordered
    if not ordered:
        raise ValueError("spot_beam requires a nonempty cell")
    dim = ordered[0].h.shape[0]
    a = np.zeros((dim, dim), dtype=complex)
    for p, cv in zip(powers, ordered):
        weight = p if np.any(powers > 0) else 1.0
        a += weight * np.outer(cv.h, cv.h.conj())
    v = power_iteration(a)
    w = [np.sqrt(p) * v for p in powers]
    return BeamMatrix(
        cell_id=channels.cell_id, w=w, directions=[v] * len(ordered), mode="spot"
    )


def uniform_direction(num_antennas: int) -> np.ndarray:
    """Equal energy on every antenna: the no-beamforming reference direction."""
    return np.ones(num_antennas, dtype=complex) / np.sqrt(num_antennas)


def color_partition(num_users: int, mode: str) -> tuple[list[int], float]:
    """Round-robin colors over users in channel-gain order.

    2c: two colors, full bandwidth. 4c: four colors, half bandwidth. Returns
    (color label per gain-ordered user, bandwidth factor).
    """
    if num_users < 1:
        raise ValueError("color_partition requires at least one user")
    if mode == "2c":
        n_colors, bw_factor = 2, 1.0
    elif mode == "4c":
        n_colors, bw_factor = 4, 0.5
    else:
        raise ValueError(f"unknown color mode: {mode}")
    return [i % n_colors for i in range(num_users)], bw_factor
