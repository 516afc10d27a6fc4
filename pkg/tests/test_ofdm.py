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

import math

import numpy as np
import pytest

from otfs_isac.allocator import equal_power
from otfs_isac.channel import PathTable
from otfs_isac.errors import ConfigError, OffGridDelay, UseLowerBound
from otfs_isac.estimation import UplinkPowers
from otfs_isac.lattice import DDGridSpec, PathDD, build_q_ofdm, \
    chi_kappa_dense_rows, q_ofdm_for_path, to_frequency
from otfs_isac.ofdm import (
    OFDMConfig, bt_pilot_model, ofdm_prelog, ofdm_se_full, ofdm_se_lower,
    overhead_frame, overhead_table, pilot_assignment)
from tests.isachelper import IsacTestHelper


class TestOFDMConfig(IsacTestHelper):

    def test_from_config(self):
        ofdm = OFDMConfig.from_config(self.desk_config())
        assert (ofdm.M, ofdm.N_cp, ofdm.pilot_len) == (16, 2, 14)
        assert ofdm_prelog(ofdm) == pytest.approx(1 - 2 / 16)
        assert OFDMConfig.from_config(self.desk_config(), 2).pilot_len == 2

    def test_invalid(self):
        with pytest.raises(ConfigError):
            OFDMConfig(M=16, delta_f=15e3, N_cp=16, pilot_len=1)
            pytest.fail('accepts a prefix filling the symbol')
        with pytest.raises(ConfigError):
            OFDMConfig(M=16, delta_f=15e3, N_cp=2, pilot_len=0)
            pytest.fail('accepts an empty pilot')

    def test_pilot_spacing(self):
        config = self.desk_config()
        ofdm = OFDMConfig(M=16, delta_f=15e3, N_cp=2, pilot_len=1, D_t=6,
                          D_f=13)
        ofdm.validate(config.nu_max, config.tau_max)
        with pytest.raises(ConfigError) as err:
            OFDMConfig(M=16, delta_f=15e3, N_cp=2, pilot_len=1,
                       D_t=7).validate(config.nu_max, config.tau_max)
            pytest.fail('accepts pilots beyond the coherence time')
        assert err.value.key == 'D_t'
        with pytest.raises(ConfigError) as err:
            OFDMConfig(M=16, delta_f=15e3, N_cp=2, pilot_len=1,
                       D_f=14).validate(config.nu_max, config.tau_max)
            pytest.fail('accepts pilots beyond the coherence bandwidth')
        assert err.value.key == 'D_f'

    def test_pilot_assignment(self):
        assert pilot_assignment(5, 2).tolist() == [0, 1, 0, 1, 0]
        assert pilot_assignment(3, 14).tolist() == [0, 1, 2]


class TestOperators(IsacTestHelper):

    def test_delay_is_shift(self):
        q = build_q_ofdm(8, 1 / 15e3, delay=2 / (8 * 15e3))
        assert np.allclose(q, np.roll(np.eye(8), 2, axis=0))

    def test_off_grid(self):
        with pytest.raises(OffGridDelay):
            build_q_ofdm(8, 1 / 15e3, delay=0.5 / (8 * 15e3))
            pytest.fail('accepts a delay between samples')

    def test_doppler_free_is_diagonal(self):
        grid = DDGridSpec(M=16, N=8, delta_f=15e3)
        q = to_frequency(q_ofdm_for_path(grid, PathDD(3)))
        assert np.allclose(q - np.diag(np.diag(q)), 0.0), \
            'a pure delay mixes subcarriers'
        assert np.allclose(np.abs(np.diag(q)), 1.0)

    def test_doppler_leaks(self):
        grid = DDGridSpec(M=16, N=8, delta_f=15e3)
        qi = to_frequency(q_ofdm_for_path(grid, PathDD(1, 1, 0.3)))
        qj = to_frequency(q_ofdm_for_path(grid, PathDD(2)))
        chi, _ = chi_kappa_dense_rows(qi, qj)
        assert np.all(chi < 1.0), 'Doppler does not leak into neighbors'


class TestPilots(IsacTestHelper):

    POWERS = UplinkPowers(pilot=0.2, data=0.2, eta=1.0, noise=0.01)

    def r_users(self, n_users=4):
        rng = np.random.default_rng(4)
        return np.array([[[self.random_hpd(rng, 2, 0.1)]
                          for _ in range(n_users)] for _ in range(3)])

    def test_orthogonal_pilots(self):
        r = self.r_users()
        ofdm = OFDMConfig(M=16, delta_f=15e3, N_cp=2, pilot_len=4)
        stats = bt_pilot_model(r, ofdm, self.POWERS)
        for p in range(3):
            for q in range(4):
                rr = r[p, q, 0]
                expected = 0.2 * rr @ np.linalg.solve(
                    0.2 * rr + 0.01 * np.eye(2), rr)
                assert np.allclose(stats.B[p, q + 1, 0], expected), \
                    'orthogonal pilot estimate of user {q} mismatch'.format(
                        q=q + 1)

    def test_contamination(self):
        r = self.r_users()
        shared = bt_pilot_model(r, OFDMConfig(16, 15e3, 2, 1), self.POWERS)
        own = bt_pilot_model(r, OFDMConfig(16, 15e3, 2, 4), self.POWERS)
        assert np.all(shared.traces()[:, 1:] < own.traces()[:, 1:]), \
            'shared pilots do not degrade the estimates'

    def test_perfect_csi(self):
        r = self.r_users()
        stats = bt_pilot_model(r, OFDMConfig(16, 15e3, 2, 1), self.POWERS,
                               perfect_csi=True)
        assert np.allclose(stats.B[:, 1:], r)


class TestSpectralEfficiency(IsacTestHelper):

    def test_doppler_free_full_is_lower_bound(self):
        model = self.desk_model(distinct_delays=False)
        config, grid = model.config, model.config.grid
        paths = PathTable(ell=model.paths.ell,
                          k=np.zeros_like(model.paths.k),
                          kappa=np.zeros_like(model.paths.kappa))
        stats = model.stats('ofdm')
        ofdm = OFDMConfig.from_config(config)
        eta = equal_power(stats)
        for q in range(1, config.n_users + 1):
            bound, _ = ofdm_se_lower(q, eta, stats, config.rho_d, ofdm)
            full, rows = ofdm_se_full(q, eta, stats, paths, grid,
                                      config.rho_d, ofdm)
            assert rows.shape == (config.M,)
            assert full == pytest.approx(bound, rel=1e-9), \
                'Doppler-free OFDM differs from the bound for user ' \
                '{q}'.format(q=q)
        with pytest.raises(UseLowerBound):
            ofdm_se_full(1, eta, stats, paths, grid, config.rho_d, ofdm,
                         max_m=8)
            pytest.fail('evaluates too many subcarriers')

    def test_fractional_doppler(self):
        model = self.desk_model(distinct_delays=False)
        config = model.config
        stats = model.stats('ofdm')
        eta = equal_power(stats)
        full, _ = ofdm_se_full(1, eta, stats, model.paths, config.grid,
                               config.rho_d, OFDMConfig.from_config(config))
        assert math.isfinite(full) and full > 0


class TestOverhead(IsacTestHelper):

    def test_long_delay_profile(self):
        rows = overhead_table(10e-6, (15e3, 45e3, 75e3, 105e3, 135e3), 512,
                              128, (14, 4, 2, 2, 1))
        assert [r.N_cp for r in rows] == [77, 231, 384, 538, 692]
        assert [r.feasible for r in rows] == [True, True, True, False, False]
        assert rows[0].ofdm_overhead == pytest.approx(77 / 512)
        assert rows[0].otfs_overhead == pytest.approx(77 / (512 * 128))
        assert rows[3].pilot_len == 2

    def test_frame(self):
        frame = overhead_frame(2.5e-6, (15e3, 135e3), 512, 128)
        assert frame['n_cp'].tolist() == [20, 173]
        assert frame['ofdm_cp_percent'].round(2).tolist() == [3.91, 33.79]
        assert frame['otfs_cp_percent'].round(3).tolist() == [0.031, 0.264]
        assert frame['pilot_len'].isna().all()
        evb = overhead_frame(10e-6, (135e3,), 512, 128)
        assert math.isnan(evb['ofdm_cp_percent'][0])

    def test_pilot_length_mismatch(self):
        with pytest.raises(ConfigError):
            overhead_table(2.5e-6, (15e3, 45e3), 512, 128, (14,))
            pytest.fail('accepts too few pilot lengths')
