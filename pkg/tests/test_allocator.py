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

import dataclasses

import numpy as np
import pytest

from otfs_isac.allocator import (
    IterState, SolverOptions, equal_power, extract_coefficients,
    inner_solve, max_sensing_sinr, maxmin_allocate, solve_maxmin, update_y)
from otfs_isac.errors import (
    ConfigError, DegenerateScenario, Infeasible, NonMonotone)
from otfs_isac.estimation import EstimatorStats
from otfs_isac.performance import PowerAlloc, sensing_sinr
from tests.isachelper import IsacTestHelper


TIGHT = SolverOptions(epsilon=1e-8, max_outer=200)


class TestOptions(IsacTestHelper):

    def test_defaults(self):
        options = SolverOptions.from_config(self.desk_config())
        assert options.epsilon == 1e-4 and options.max_outer == 100
        assert options.solve_kwargs() == {}

    def test_solver_tolerances(self):
        kwargs = SolverOptions(solver='clarabel').solve_kwargs()
        assert kwargs['solver'] == 'CLARABEL'
        assert kwargs['tol_feas'] == 1e-7
        assert SolverOptions(solver='scs').solve_kwargs()['eps_abs'] == 1e-7

    def test_invalid(self):
        with pytest.raises(ConfigError) as err:
            SolverOptions(epsilon=0.0)
            pytest.fail('accepts zero tolerance')
        assert err.value.key == 'epsilon'
        with pytest.raises(ConfigError):
            SolverOptions(max_outer=0)
            pytest.fail('accepts no outer iterations')


class TestEqualPower(IsacTestHelper):

    def test_full_budget(self):
        coeffs = self.synthetic_coefficients(beam=True)
        stats_b = coeffs.b
        b = np.zeros(stats_b.shape + (1, 1, 1))
        b[..., 0, 0, 0] = stats_b
        stats = EstimatorStats(R=np.zeros_like(b), B=b)
        eta = equal_power(stats)
        assert np.allclose(eta.ap_load(stats_b), 1.0)
        assert np.all(eta.eta[:, 0] == 0.0)
        split = equal_power(stats, 0.25)
        assert np.allclose(split.eta[:, 0] * stats_b[:, 0], 0.25), \
            'beam does not get its budget share'
        assert np.allclose(split.ap_load(stats_b), 1.0)

    def test_degenerate(self):
        zero = np.zeros((2, 3, 1, 2, 2))
        with pytest.raises(DegenerateScenario):
            equal_power(EstimatorStats(R=zero, B=zero))
            pytest.fail('splits power over nothing')
        with pytest.raises(ConfigError):
            equal_power(EstimatorStats(R=zero, B=zero), 1.0)
            pytest.fail('accepts the whole budget for the beam')


class TestCoefficients(IsacTestHelper):

    def test_sinr_consistency(self):
        model = self.desk_model()
        stats = model.stats('otfs')
        config = model.config
        coeffs = extract_coefficients(stats, model.precoding, config.rho_d,
                                      first_slot='R')
        eta = equal_power(stats, 0.2)
        report = sensing_sinr(eta, stats, model.precoding, config.rho_d)
        assert coeffs.sensing_sinr(eta) == pytest.approx(report.sinr)
        assert coeffs.noise_const == config.n_rx * config.n_antennas

    def test_no_geometry(self):
        coeffs = self.synthetic_coefficients()
        stats = EstimatorStats(R=np.zeros((2, 3, 1, 1, 1)),
                               B=coeffs.b[..., None, None, None] + 0j)
        plain = extract_coefficients(stats, None, 1.0)
        assert plain.noise_const == 0.0
        assert np.all(plain.c == 0.0)
        with pytest.raises(ConfigError):
            extract_coefficients(stats, None, 1.0, gamma_s=1.0)
            pytest.fail('senses without a geometry')

    def test_update_y(self):
        coeffs = self.synthetic_coefficients()
        eta = equal_power(EstimatorStats(
            R=np.zeros((2, 3, 1, 1, 1)),
            B=coeffs.b[..., None, None, None] + 0j))
        y = update_y(eta, coeffs)
        # at the optimal y the transformed objective equals the SINR
        amplitude = np.sqrt(coeffs.rho_d) * np.sum(
            np.sqrt(eta.eta[:, 1:]) * coeffs.b[:, 1:], axis=0)
        interference = coeffs.rho_d * np.einsum(
            'pk,pqk->q', eta.eta, coeffs.a[:, 1:, :]) + 1.0
        assert np.allclose(2 * y * amplitude - y ** 2 * interference,
                           coeffs.user_sinr(eta))


class TestMaxMin(IsacTestHelper):

    def test_against_brute_force(self):
        for seed in (1, 2):
            coeffs = self.synthetic_coefficients(seed=seed)
            eta, state = solve_maxmin(coeffs, TIGHT)
            best = self.brute_force_min_sinr(coeffs)
            assert coeffs.min_sinr(eta) >= best * (1 - 1e-2), \
                'allocation falls short of the grid search for seed ' \
                '{s}'.format(s=seed)
            assert np.all(coeffs.ap_load(eta) <= 1 + 1e-6)
            assert state.trace, 'no iterate accepted'

    def test_monotone_trace(self):
        coeffs = self.synthetic_coefficients(n_tx=4, n_users=3, beam=True,
                                             seed=3)
        gamma = 0.3 * max_sensing_sinr(coeffs)
        coeffs = dataclasses.replace(coeffs, gamma_s=gamma)
        _, state = solve_maxmin(coeffs, TIGHT)
        values = [r['min_sinr'] for r in state.trace]
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:])), \
            'min SINR decreases over the iterations'
        assert [r['t'] for r in state.trace] == sorted(
            r['t'] for r in state.trace)

    def test_beats_equal_power(self):
        model = self.desk_model()
        stats = model.stats('otfs')
        config = model.config
        coeffs = extract_coefficients(stats, model.precoding, config.rho_d)
        eta, _ = solve_maxmin(coeffs)
        assert coeffs.min_sinr(eta) >= coeffs.min_sinr(
            equal_power(stats)) * (1 - 1e-9)

    def test_sensing_constraint(self):
        coeffs = self.synthetic_coefficients(n_tx=3, n_users=2, beam=True)
        top = max_sensing_sinr(coeffs)
        constrained = dataclasses.replace(coeffs, gamma_s=0.5 * top)
        eta, _ = solve_maxmin(constrained, TIGHT)
        assert constrained.sensing_sinr(eta) >= 0.5 * top * (1 - 1e-4), \
            'sensing threshold missed'
        assert constrained.is_feasible(eta)
        free, _ = solve_maxmin(coeffs, TIGHT)
        assert coeffs.min_sinr(free) >= constrained.min_sinr(eta) \
            * (1 - 1e-3), 'a sensing threshold improves communication'

    def test_infeasible(self):
        coeffs = self.synthetic_coefficients(n_tx=3, n_users=2, beam=True)
        top = max_sensing_sinr(coeffs)
        with pytest.raises(Infeasible) as err:
            solve_maxmin(dataclasses.replace(coeffs, gamma_s=2 * top))
            pytest.fail('meets an unreachable sensing threshold')
        assert err.value.max_sensing_sinr == pytest.approx(top)
        with pytest.raises(Infeasible):
            inner_solve(np.ones(2), dataclasses.replace(
                coeffs, gamma_s=2 * top))
            pytest.fail('inner problem meets an unreachable threshold')

    def test_max_sensing_against_vertices(self):
        for seed in (1, 2, 3):
            coeffs = self.synthetic_coefficients(seed=seed, n_tx=3,
                                                 n_users=2, beam=True)
            assert max_sensing_sinr(coeffs) == pytest.approx(
                self.brute_force_sensing(coeffs), rel=1e-6), \
                'sensing maximum off for seed {s}'.format(s=seed)

    def test_scale_invariance(self):
        coeffs = self.synthetic_coefficients(n_tx=3, n_users=2, beam=True)
        coeffs = dataclasses.replace(
            coeffs, gamma_s=0.4 * max_sensing_sinr(coeffs))
        s = 10.0
        scaled = dataclasses.replace(
            coeffs, b=s * coeffs.b, a=s ** 2 * coeffs.a, c=s ** 2 * coeffs.c,
            d=s ** 2 * coeffs.d, rho_d=coeffs.rho_d / s)
        eta, _ = solve_maxmin(coeffs, TIGHT)
        eta_s, _ = solve_maxmin(scaled, TIGHT)
        assert scaled.min_sinr(eta_s) == pytest.approx(
            coeffs.min_sinr(eta), rel=1e-4)
        assert scaled.sensing_sinr(eta_s) == pytest.approx(
            coeffs.sensing_sinr(eta), rel=1e-4)
        assert np.allclose(s * eta_s.eta, eta.eta, rtol=1e-3,
                           atol=1e-6 * np.max(eta.eta)), \
            'power control does not scale inversely'

    def test_allocate_from_stats(self):
        model = self.desk_model()
        config = model.config
        eta, state = maxmin_allocate(model.stats('otfs'), model.precoding,
                                     config.rho_d, gamma_s=1e-10)
        assert eta.eta.shape == (config.n_tx, config.n_users + 1)
        assert state.trace[0]['t'] == 0


class TestIterState(IsacTestHelper):

    def test_non_monotone(self):
        coeffs = self.synthetic_coefficients()
        stats = EstimatorStats(R=np.zeros((2, 3, 1, 1, 1)),
                               B=coeffs.b[..., None, None, None] + 0j)
        eta = equal_power(stats)
        state = IterState(eta=eta, y=update_y(eta, coeffs), z=0.0)
        state.record(0, 0.0, eta, state.y, coeffs)
        assert state.z == pytest.approx(coeffs.min_sinr(eta))
        with pytest.raises(NonMonotone):
            state.record(1, 0.0, PowerAlloc(0.5 * eta.eta), state.y, coeffs)
            pytest.fail('accepts a worse iterate')
