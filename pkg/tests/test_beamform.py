import math

import numpy as np
import pytest

from leonoma.beamform import (
    color_partition,
    per_user_beams,
    power_iteration,
    spot_beam,
    svd_beamformer,
    uniform_direction,
)
from leonoma.channel import ChannelVector, build_channel_matrix


def _matrix(hs):
    chans = [
        ChannelVector(user_id=i, h=np.asarray(h, dtype=complex),
                      gain=float(np.vdot(h, h).real), slot_index=0)
        for i, h in enumerate(hs)
    ]
    return build_channel_matrix(0, 0, chans)


class TestSvdBeamformer:
    def test_matched_gain_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            l = int(rng.integers(2, 9))
            h = rng.normal(size=l) + 1j * rng.normal(size=l)
            p = float(rng.uniform(0.1, 10.0))
            w = svd_beamformer(h, p)
            assert abs(np.vdot(h, w)) ** 2 == pytest.approx(
                p * float(np.vdot(h, h).real), rel=1e-10
            )
            assert float(np.vdot(w, w).real) == pytest.approx(p, rel=1e-12)

    def test_beats_random_competitors(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            l = 8
            h = rng.normal(size=l) + 1j * rng.normal(size=l)
            p = float(rng.uniform(0.1, 10.0))
            w = svd_beamformer(h, p)
            best = abs(np.vdot(h, w)) ** 2
            for _ in range(200):
                u = rng.normal(size=l) + 1j * rng.normal(size=l)
                u *= math.sqrt(p) / np.linalg.norm(u)
                assert abs(np.vdot(h, u)) ** 2 <= best * (1 + 1e-12)

    def test_zero_channel_gives_zero_beam(self):
        w = svd_beamformer(np.zeros(4, dtype=complex), 2.0)
        assert np.all(w == 0)

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            svd_beamformer(np.ones(4, dtype=complex), -1.0)


class TestPowerIteration:
    def test_principal_eigenvector(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        a = x @ x.conj().T
        v = power_iteration(a)
        vals, vecs = np.linalg.eigh(a)
        lead = vecs[:, -1]
        overlap = abs(np.vdot(lead, v))
        assert overlap == pytest.approx(1.0, abs=1e-8)


class TestPerUserBeams:
    def test_norms_equal_powers(self):
        rng = np.random.default_rng(4)
        m = _matrix(rng.normal(size=(3, 6)) + 1j * rng.normal(size=(3, 6)))
        p = np.array([1.0, 2.0, 0.5])
        beams = per_user_beams(m, p)
        for w, pi in zip(beams.w, p):
            assert float(np.vdot(w, w).real) == pytest.approx(pi, rel=1e-12)
        for d in beams.directions:
            assert float(np.vdot(d, d).real) == pytest.approx(1.0, rel=1e-12)
        assert not beams.degenerate

    def test_zero_channel_flagged_degenerate(self):
        m = _matrix([np.ones(4), np.zeros(4)])
        beams = per_user_beams(m, np.array([1.0, 1.0]))
        assert beams.degenerate


class TestSpotBeam:
    def test_two_orthogonal_equal_gain_channels_vs_grid(self):
        # For L = 2 with h1 = e0 and h2 = e1 and equal powers, every unit v
        # achieves the same sum |h_i^H v|^2; any direction is optimal. Use
        # slightly unequal weights so the optimum is unique and check against
        # a dense grid over the unit sphere.
        h1 = np.array([1.0, 0.0], dtype=complex)
        h2 = np.array([0.0, 1.0], dtype=complex)
        m = _matrix([h1, h2])
        p = np.array([2.0, 1.0])
        beams = spot_beam(m, p)
        v = beams.directions[0]
        achieved = sum(pi * abs(np.vdot(cv.h, v)) ** 2 for pi, cv in zip(p, m.ordered))
        best_grid = 0.0
        for theta in np.linspace(0, math.pi / 2, 181):
            for phase in np.linspace(0, 2 * math.pi, 73):
                u = np.array([math.cos(theta), math.sin(theta) * np.exp(1j * phase)])
                val = sum(pi * abs(np.vdot(cv.h, u)) ** 2 for pi, cv in zip(p, m.ordered))
                best_grid = max(best_grid, val)
        assert achieved >= best_grid * (1 - 1e-6)

    def test_shared_direction(self):
        rng = np.random.default_rng(5)
        m = _matrix(rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4)))
        beams = spot_beam(m, np.array([1.0, 1.0, 1.0]))
        assert all(np.array_equal(beams.directions[0], d) for d in beams.directions)

    def test_empty_cell_rejected(self):
        from leonoma.channel import ChannelMatrix

        empty = ChannelMatrix(cell_id=0, slot_index=0, vectors=[], order=[])
        with pytest.raises(ValueError):
            spot_beam(empty, np.zeros(0))


class TestColors:
    def test_uniform_direction_unit_norm(self):
        u = uniform_direction(8)
        assert float(np.vdot(u, u).real) == pytest.approx(1.0, rel=1e-12)

    def test_2c_round_robin(self):
        labels, bw = color_partition(4, "2c")
        assert labels == [0, 1, 0, 1]
        assert bw == 1.0

    def test_4c_half_bandwidth(self):
        labels, bw = color_partition(4, "4c")
        assert labels == [0, 1, 2, 3]
        assert bw == 0.5

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            color_partition(4, "3c")

    def test_needs_users(self):
        with pytest.raises(ValueError):
            color_partition(0, "2c")
