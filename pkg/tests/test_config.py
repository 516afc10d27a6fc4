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
import yaml

from otfs_isac.config import (
    ExperimentConfig, config_from_mapping, load_config)
from otfs_isac.errors import ConfigError
from tests.isachelper import IsacTestHelper


class TestDefaults(IsacTestHelper):

    def test_derived(self):
        config = ExperimentConfig()
        assert config.ell_max == 20, 'invalid delay index bound'
        assert config.k_max == 10, 'invalid Doppler index bound'
        assert config.grid.N_cp == 20
        assert config.nu_max == pytest.approx(1111.87, rel=1e-5)
        assert config.gamma_s == pytest.approx(10 ** 0.3)
        assert config.rho_d == pytest.approx(
            1.0 / (1.381e-23 * 290 * 512 * 15e3 * 10 ** 0.7))

    def test_desk(self):
        config = self.desk_config()
        assert (config.ell_max, config.k_max, config.grid.N_cp) == (2, 1, 2)

    def test_replace(self):
        config = self.desk_config()
        other = config.replace(n_antennas=1)
        assert other.n_antennas == 1 and config.n_antennas == 2
        with pytest.raises(ConfigError):
            config.replace(n_antennas=0)
            pytest.fail('replace skips validation')


class TestValidation(IsacTestHelper):

    @pytest.mark.parametrize('key,value', [
        ('n_users', 0),
        ('delta_f', 0.0),
        ('tau_max', -1e-6),
        ('correlation_coeff', 1.0),
        ('sensing_fraction', 1.0),
        ('signal', 'fbmc'),
        ('evaluation', 'guess'),
        ('target_position', 'moon'),
        ('pilot_lengths', [14, 4]),
        ('delta_f_sweep', [15e3, -1.0, 75e3, 105e3, 135e3]),
        ('M', 16.5),
        ('shadowing', 1),
        ('n_tx', 'ten'),
        ('fc', float('inf')),
        ('sweep_antennas', 4),
    ])
    def test_rejects(self, key, value):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig(**{key: value})
            pytest.fail('accepts {k}={v!r}'.format(k=key, v=value))
        assert err.value.key == key, \
            'error names {e!r}, not {k!r}'.format(e=err.value.key, k=key)
        assert str(err.value).startswith(key + ': ')

    def test_coercion(self):
        config = ExperimentConfig(M=np.int64(16), tau_max='5.0e-6', fc=4e9,
                                  delta_f_sweep=[15e3], pilot_lengths=[2.0])
        assert isinstance(config.M, int) and config.M == 16
        assert config.tau_max == pytest.approx(5e-6)
        assert config.delta_f_sweep == (15e3,)
        assert config.pilot_lengths == (2,)

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as err:
            config_from_mapping({'M': 16, 'colour': 'blue'})
            pytest.fail('accepts unknown key')
        assert err.value.key == 'colour'
        with pytest.raises(ConfigError):
            config_from_mapping([1, 2])
            pytest.fail('accepts a list document')


class TestLoading(IsacTestHelper):

    def test_load_yaml(self, tmp_path):
        path = tmp_path / 'desk.yaml'
        path.write_text(yaml.safe_dump(dict(self.DESK, seed=7)))
        config = load_config(str(path))
        assert config == self.desk_config(seed=7)

    def test_exponent_without_dot(self, tmp_path):
        # YAML 1.1 reads 5e-6 as a string
        path = tmp_path / 'short.yaml'
        path.write_text('tau_max: 5e-6\nM: 16\n')
        assert load_config(str(path)).tau_max == pytest.approx(5e-6)

    def test_overrides(self, tmp_path):
        path = tmp_path / 'desk.yaml'
        path.write_text(yaml.safe_dump(dict(self.DESK, seed=7)))
        config = load_config(str(path), seed=9, threads=None)
        assert config.seed == 9
        assert config.threads == self.DESK['threads']

    def test_defaults_without_file(self):
        assert load_config() == ExperimentConfig()
        assert load_config(None, M=16).M == 16

    def test_round_trip(self, tmp_path):
        config = self.desk_config(gamma_sweep_db=[-10.0, 0.0])
        path = tmp_path / 'again.yaml'
        path.write_text(yaml.safe_dump(config.to_dict()))
        assert load_config(str(path)) == config

    def test_bad_documents(self, tmp_path):
        missing = tmp_path / 'missing.yaml'
        with pytest.raises(ConfigError):
            load_config(str(missing))
            pytest.fail('reads a missing file')
        broken = tmp_path / 'broken.yaml'
        broken.write_text('M: [16\n')
        with pytest.raises(ConfigError):
            load_config(str(broken))
            pytest.fail('parses broken YAML')
        scalar = tmp_path / 'scalar.yaml'
        scalar.write_text('42\n')
        with pytest.raises(ConfigError):
            load_config(str(scalar))
            pytest.fail('accepts a scalar document')
        binary = tmp_path / 'binary.yaml'
        binary.write_bytes(b'\xff\xfe\x00M: 16\n')
        with pytest.raises(ConfigError) as err:
            load_config(str(binary))
            pytest.fail('reads a document that is not UTF-8')
        assert 'UTF-8' in str(err.value)
