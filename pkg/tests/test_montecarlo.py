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
from otfs_isac.errors import ConfigError, UseLowerBound
from otfs_isac.experiments import build_model, scenario_seed
from otfs_isac.montecarlo import (
    MCEstimate, PairCores, choose_power, mc_validate_se, mc_validate_sensing)
from tests.isachelper import IsacTestHelper


@pytest.fixture(scope='class')
def validated(request):
    """Simulates a desk-scale scenario whose links share delay indices,
    with part of every AP's budget on the sensing beam."""
    model = IsacTestHelper.desk_model(distinct_delays=False,
                                      sensing_fraction=0.2)
    request.cls.model = model
    request.cls.se = mc_validate_se(model)
    request.cls.sensing = mc_validate_sensing(model)


class TestEstimate(IsacTestHelper):

    def test_from_samples(self):
        est = MCEstimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]))
        assert est.mean == 2.5 and est.count == 4
        assert est.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
        assert est.within(2.6, sigmas=1.0)
        assert not est.within(5.0)
        assert MCEstimate.from_samples(np.array([1.0])).stderr == math.inf


class TestPairCores(IsacTestHelper):

    def test_identity_coefficients(self):
        model = self.desk_model(distinct_delays=False)
        cores = PairCores(model)
        n_tx, n_paths = model.config.n_tx, model.config.n_paths
        coef = np.zeros((n_tx, n_paths, n_paths), dtype=complex)
        coef[0, 1, 1] = 1.0
        z = cores.effective(1, 1, coef)
        assert np.allclose(z, np.eye(model.config.grid.size)), \
            'a path times its own adjoint is not the identity'
        coef = np.zeros((n_tx, n_paths, 1), dtype=complex)
        coef[2, 0, 0] = 2.0
        z = cores.effective(1, 0, coef)
        rows = cores.cores[1, 0][0]
        assert rows.shape == (n_tx, n_paths, 1, model.config.grid.size)
        assert np.allclose(np.abs(np.linalg.eigvals(z)), 2.0), \
            'beam pair is not twice a unitary'


class TestChoosePower(IsacTestHelper):

    def test_equal(self):
        model = self.desk_model(sensing_fraction=0.2)
        stats = model.stats('otfs')
        assert np.allclose(choose_power(model, stats).eta,
                           equal_power(stats, 0.2).eta)
        given = equal_power(stats)
        assert choose_power(model, stats, given) is given

    def test_optimized(self):
        model = self.desk_model(mc_power='optimized', gamma_s_db=-100.0)
        stats = model.stats('otfs')
        eta = choose_power(model, stats)
        assert np.all(eta.ap_load(stats.traces()) <= 1 + 1e-6)


@pytest.mark.usefixtures('validated')
class TestSEValidation(IsacTestHelper):

    def test_spectral_efficiency(self):
        for user in self.se.users:
            assert user.mc_se.within(user.closed_se, sigmas=5.0,
                                     rtol=0.02), \
                'user {q}: simulated SE {m} ± {s} vs closed form {c}'.format(
                    q=user.user, m=user.mc_se.mean, s=user.mc_se.stderr,
                    c=user.closed_se)
            assert user.closed_se > 0
            assert math.isfinite(user.row_sum_se)

    def test_components(self):
        for user in self.se.users:
            for part in ('ds2', 'bu', 'isi', 'iui'):
                est = getattr(user, part)
                closed = getattr(user.closed, part)
                assert est.within(closed, sigmas=5.0, rtol=0.02), \
                    'user {q}: simulated {p} {m} ± {s} vs closed form ' \
                    '{c}'.format(q=user.user, p=part, m=est.mean,
                                 s=est.stderr, c=closed)

    def test_frame(self):
        frame = self.se.to_frame()
        assert len(frame) == self.model.config.n_users
        assert {'mc_se', 'closed_se', 'row_sum_se', 'mc_isi',
                'closed_isi'} <= set(frame.columns)
        assert self.se.n_realizations == 400
        assert self.se.seed == self.model.seed

    def test_reproducible(self):
        again = mc_validate_se(self.model, n_real=40, threads=3)
        once = mc_validate_se(self.model, n_real=40, threads=1)
        assert [u.mc_se.mean for u in again.users] == \
            [u.mc_se.mean for u in once.users], \
            'worker count changes the simulation'


@pytest.mark.usefixtures('validated')
class TestSensingValidation(IsacTestHelper):

    def test_sinr(self):
        sensing = self.sensing
        assert sensing.numerator.within(sensing.closed_numerator,
                                        sigmas=5.0, rtol=0.02), \
            'echo power {m} ± {s} vs closed form {c}'.format(
                m=sensing.numerator.mean, s=sensing.numerator.stderr,
                c=sensing.closed_numerator)
        assert sensing.denominator.within(sensing.closed_denominator,
                                          sigmas=5.0, rtol=0.02), \
            'clutter power {m} ± {s} vs closed form {c}'.format(
                m=sensing.denominator.mean, s=sensing.denominator.stderr,
                c=sensing.closed_denominator)
        assert sensing.rel_error <= 0.2
        assert len(sensing.to_frame()) == 1


class TestGuards(IsacTestHelper):

    def test_too_few_realizations(self):
        model = self.desk_model()
        with pytest.raises(ConfigError):
            mc_validate_se(model, n_real=1)
            pytest.fail('simulates a single realization')
        with pytest.raises(ConfigError):
            mc_validate_sensing(model, n_real=1)
            pytest.fail('simulates a single realization')

    def test_without_paths(self):
        config = self.desk_config()
        model = build_model(config, scenario_seed(config.seed, 0),
                            with_paths=False)
        with pytest.raises(ConfigError):
            mc_validate_se(model, n_real=10)
            pytest.fail('simulates without paths')

    def test_large_lattice(self):
        model = self.desk_model(max_full_mn=64)
        with pytest.raises(UseLowerBound):
            mc_validate_se(model, n_real=10)
            pytest.fail('simulates a too large lattice')
