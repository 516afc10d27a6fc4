# Copyright 2026 Harald Albrecht
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
# implied. See the License for the specific language governing
# permissions and limitations under the License.

# pylint: disable=missing-module-docstring
# pylint: disable=missing-class-docstring,missing-function-docstring

import numpy as np
import pytest

from otfs_isac.errors import ConfigError, DimensionMismatch, \
    EstimatorDegenerate
from otfs_isac.estimation import (
    EPLayout, EstimatorStats, UplinkPowers, compute_B, compute_psi,
    ep_overhead, estimate_stats, link_statistics, sample_estimate_pair,
    sensing_beam_cov)
from otfs_isac.geometry import AnglePair
from otfs_isac.lattice import DDGridSpec
from tests.isachelper import IsacTestHelper


class TestLayout(IsacTestHelper):

    def test_extents(self):
        ep = EPLayout(k_max=1, ell_max=2, k_hat=0)
        assert ep.doppler_extent == 5
        assert ep.delay_extent == 5
        assert ep.footprint == 25
        assert EPLayout(k_max=10, ell_max=20, k_hat=1).doppler_extent == 45
        assert EPLayout.from_config(self.desk_config()) == ep

    def test_invalid_layout(self):
        with pytest.raises(ConfigError) as err:
            EPLayout(k_max=-1, ell_max=2)
            pytest.fail('accepts negative guard')
        assert err.value.key == 'k_max'

    def test_overhead(self):
        grid = DDGridSpec(M=16, N=8, delta_f=15e3, N_cp=2)
        overhead = ep_overhead(grid, EPLayout(1, 2, 0), n_users=4)
        assert overhead.cp_overhead == pytest.approx(2 / 128)
        assert overhead.footprint == 25
        assert overhead.pilot_fraction == pytest.approx(100 / 128)
        with pytest.raises(ConfigError):
            ep_overhead(grid, EPLayout(1, 2, 1), n_users=4)
            pytest.fail('accepts a guard region beyond the grid')


class TestMMSE(IsacTestHelper):

    POWERS = UplinkPowers(pilot=0.2, data=0.2, eta=1.0, noise=0.01)

    def test_scalar_estimate(self):
        r = np.full((1, 1, 1, 1, 1), 0.5, dtype=complex)
        ep = EPLayout(1, 2, 0)
        n = 8
        psi = compute_psi(0, 0, 0, r, self.POWERS, ep, n)
        expected = 0.2 * 0.5 + 0.5 * 0.2 / n - 0.2 * 5 / n ** 2 * 0.5 + 0.01
        assert psi[0, 0].real == pytest.approx(expected)
        stats = estimate_stats(r, self.POWERS, ep, n)
        assert stats.B[0, 1, 0, 0, 0].real == pytest.approx(
            0.2 * 0.25 / expected), 'scalar MMSE variance mismatch'

    def test_estimate_bounds(self):
        rng = np.random.default_rng(5)
        r = np.array([[[self.random_hpd(rng, 2, 0.1) for _ in range(3)]
                       for _ in range(4)] for _ in range(2)])
        stats = estimate_stats(r, self.POWERS, EPLayout(1, 2, 0), 8)
        b = stats.B[:, 1:]
        assert np.allclose(b, np.swapaxes(b, -1, -2).conj()), \
            'estimate covariance is not Hermitian'
        assert np.min(np.linalg.eigvalsh(b)) > -1e-12, \
            'estimate covariance is not PSD'
        assert np.min(np.linalg.eigvalsh(r - b)) > -1e-12, \
            'estimate covariance exceeds the correlation'

    def test_perfect_csi(self):
        rng = np.random.default_rng(5)
        r = np.array([[[self.random_hpd(rng, 2)]]])
        stats = estimate_stats(r, self.POWERS, EPLayout(1, 2, 0), 8,
                               perfect_csi=True)
        assert stats.perfect_csi
        assert np.allclose(stats.B[:, 1:], r)

    def test_more_pilot_power_helps(self):
        rng = np.random.default_rng(8)
        r = np.array([[[self.random_hpd(rng, 2, 0.1)] for _ in range(2)]])
        weak = estimate_stats(r, UplinkPowers(0.05, 0.2, 1.0, 0.01),
                              EPLayout(1, 2, 0), 8)
        strong = estimate_stats(r, UplinkPowers(0.5, 0.2, 1.0, 0.01),
                                EPLayout(1, 2, 0), 8)
        assert np.all(strong.traces()[:, 1:] > weak.traces()[:, 1:])

    def test_degenerate(self):
        r = np.zeros((1, 1, 1, 2, 2), dtype=complex)
        powers = UplinkPowers(0.2, 0.2, 1.0, 0.0)
        with pytest.raises(EstimatorDegenerate):
            estimate_stats(r, powers, EPLayout(1, 2, 0), 8)
            pytest.fail('inverts a singular Ψ')
        with pytest.raises(DimensionMismatch):
            compute_B(np.eye(2)[None], np.eye(3)[None], 1.0)
            pytest.fail('accepts Ψ and R of different sizes')
        with pytest.raises(DimensionMismatch):
            estimate_stats(np.ones((1, 3, 1, 1, 1), dtype=complex),
                           UplinkPowers(0.2, 0.2, [1.0, 1.0], 0.01),
                           EPLayout(1, 2, 0), 8)
            pytest.fail('accepts power control of the wrong length')
        with pytest.raises(ConfigError):
            UplinkPowers(-0.1, 0.2, 1.0, 0.01)
            pytest.fail('accepts negative pilot power')


class TestStats(IsacTestHelper):

    def test_sensing_column(self):
        config = self.desk_config()
        model = self.desk_model()
        stats = link_statistics(config, model.R, model.precoding.beam)
        assert stats.B.shape == (10, 5, 3, 2, 2)
        assert stats.n_users == 4 and stats.n_paths == 3
        assert np.allclose(stats.traces()[:, 0], 1.0), \
            'sensing beam is not unit norm'
        assert np.allclose(stats.R[:, 0], 0.0)
        assert np.allclose(stats.B[:, 0, 1:], 0.0), \
            'sensing column has more than one path'
        off = stats.without_beam()
        assert np.allclose(off.B[:, 0], 0.0)
        assert np.allclose(off.B[:, 1:], stats.B[:, 1:])

    def test_beam_switch(self):
        config = self.desk_config(sensing_beam=False)
        model = self.desk_model(sensing_beam=False)
        stats = link_statistics(config, model.R, model.precoding.beam)
        assert np.allclose(stats.B[:, 0], 0.0), \
            'switched-off beam still present'

    def test_guard_too_large(self):
        config = self.desk_config(k_hat=1)
        with pytest.raises(ConfigError) as err:
            link_statistics(config, self.desk_model().R)
            pytest.fail('accepts a guard region beyond the grid')
        assert err.value.key == 'k_hat'
        assert '9 Doppler bins, grid has 8' in str(err.value)
        stats = link_statistics(config.replace(k_hat=0), self.desk_model().R)
        assert stats.n_users == config.n_users

    def test_beam_covariance(self):
        cov = sensing_beam_cov(AnglePair(0.3), 4).matrix
        assert np.allclose(cov, cov.conj().T)
        assert np.trace(cov).real == pytest.approx(1.0)
        assert np.linalg.matrix_rank(cov) == 1

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            EstimatorStats(R=np.zeros((1, 2, 1, 2, 2)),
                           B=np.zeros((1, 2, 1, 3, 3)))
            pytest.fail('accepts R and B of different shapes')


class TestSampling(IsacTestHelper):

    def test_estimate_pair_moments(self):
        rng = np.random.default_rng(9)
        r = self.random_hpd(rng, 2)
        b = 0.6 * r
        count = 40000
        h_hat, h = sample_estimate_pair(
            rng, np.broadcast_to(r, (count, 2, 2)),
            np.broadcast_to(b, (count, 2, 2)))
        err = h - h_hat
        scale = np.max(np.abs(r))
        assert np.allclose(h_hat.T @ h_hat.conj() / count, b,
                           atol=0.05 * scale), 'estimate covariance mismatch'
        assert np.allclose(err.T @ err.conj() / count, r - b,
                           atol=0.05 * scale), 'error covariance mismatch'
        assert np.allclose(h_hat.T @ err.conj() / count, 0.0,
                           atol=0.05 * scale), 'error correlates with estimate'

    def test_indefinite_error(self):
        r = np.eye(2)
        with pytest.raises(EstimatorDegenerate):
            sample_estimate_pair(1, r, 2.0 * r)
            pytest.fail('accepts estimate covariance above the correlation')
