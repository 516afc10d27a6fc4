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

"""Experiment configuration.

A configuration document is a flat YAML mapping whose keys are the
field names of :class:`ExperimentConfig`; every key is optional and
defaults to the standard simulation setup (4 GHz carrier, 15 kHz
subcarriers, 512×128 lattice, 100+2 APs with 4 antennas, 15 users, a
15 m sensing hotspot in the middle of a 1 km square). An empty document
thus gives the full default setup:

.. code-block:: yaml

    # desk-scale Monte Carlo check
    M: 16
    N: 8
    tau_max: 5.0e-6
    n_tx: 10
    n_users: 4
    n_antennas: 2
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import yaml

from otfs_isac.errors import ConfigError
from otfs_isac.lattice import DDGridSpec, ceil_index


#: speed of light in m/s.
SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class ExperimentConfig:  # pylint: disable=too-many-instance-attributes
    """All parameters of an experiment. Instances are immutable; use
    :meth:`replace` to derive variants."""

    # radio
    fc: float = 4e9
    delta_f: float = 15e3
    M: int = 512
    N: int = 128
    tau_max: float = 2.5e-6
    v_max_kmh: float = 300.0
    n_paths: int = 9
    distinct_delays: bool = True
    noise_figure_db: float = 7.0
    # deployment
    region_side: float = 1000.0
    hotspot_side: float = 15.0
    n_tx: int = 100
    n_rx: int = 2
    n_antennas: int = 4
    n_users: int = 15
    ap_height: float = 10.0
    ue_height: float = 1.5
    min_distance: float = 10.0
    shadowing: bool = True
    shadowing_std_db: float = 7.82
    correlation_coeff: float = 0.5
    angular_spread_deg: float = 20.0
    antenna_gain_tx_dbi: float = 0.0
    antenna_gain_rx_dbi: float = 0.0
    # sensing
    gamma_s_db: float = 3.0
    clutter_scaling: float = 0.3
    rcs_variance_dbsm: float = 0.0
    sensing_beam: bool = True
    sensing_fraction: float = 0.0
    target_position: str = 'sampled'
    # powers
    ap_power: float = 1.0
    pilot_power: float = 0.2
    data_power: float = 0.2
    uplink_eta: float = 1.0
    # Doppler guard bins against fractional Doppler; the pilot region
    # spans 4k_max + 4k_hat + 1 Doppler bins, which must not exceed N.
    # Small grids such as M=16, N=8 with k_max=1 need k_hat=0.
    k_hat: int = 1
    # modes
    perfect_csi: bool = False
    signal: str = 'otfs'
    evaluation: str = 'true'
    # OFDM baseline
    ofdm_pilot_len: int = 14
    delta_f_sweep: Tuple[float, ...] = (15e3, 45e3, 75e3, 105e3, 135e3)
    pilot_lengths: Tuple[int, ...] = (14, 4, 2, 2, 1)
    tau_max_evb: float = 10e-6
    # experiments
    seed: int = 1
    n_realizations: int = 500
    n_scenarios: int = 100
    threads: int = 0
    gamma_sweep_db: Tuple[float, ...] = ()
    sweep_antennas: Tuple[int, ...] = (1, 4)
    sweep_power: str = 'optimized'
    mc_power: str = 'equal'
    # solver
    epsilon: float = 1e-4
    max_outer: int = 100
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    eta_floor: float = 1e-12
    solver: str = ''
    max_full_mn: int = 4096

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            object.__setattr__(self, f.name,
                               _coerce(f.name, f.type, getattr(self, f.name)))
        self._validate()

    def _validate(self) -> None:
        positive_ints = ('M', 'N', 'n_paths', 'n_tx', 'n_rx', 'n_antennas',
                         'n_users', 'ofdm_pilot_len', 'n_realizations',
                         'n_scenarios', 'max_outer', 'max_full_mn')
        for key in positive_ints:
            if getattr(self, key) < 1:
                raise ConfigError('must be at least 1, got {v}'.format(
                    v=getattr(self, key)), key=key)
        positive = ('fc', 'delta_f', 'region_side', 'hotspot_side',
                    'ap_power', 'min_distance', 'epsilon',
                    'feasibility_tol', 'optimality_tol', 'eta_floor',
                    'ap_height', 'ue_height')
        for key in positive:
            if not getattr(self, key) > 0:
                raise ConfigError('must be positive, got {v}'.format(
                    v=getattr(self, key)), key=key)
        nonnegative = ('tau_max', 'v_max_kmh', 'clutter_scaling',
                       'pilot_power', 'data_power', 'uplink_eta',
                       'shadowing_std_db', 'angular_spread_deg', 'k_hat',
                       'threads', 'tau_max_evb')
        for key in nonnegative:
            if getattr(self, key) < 0:
                raise ConfigError('must not be negative, got {v}'.format(
                    v=getattr(self, key)), key=key)
        if not 0.0 <= self.correlation_coeff < 1.0:
            raise ConfigError('correlation coefficient {r} outside '
                              '[0, 1)'.format(r=self.correlation_coeff),
                              key='correlation_coeff')
        if not 0.0 <= self.sensing_fraction < 1.0:
            raise ConfigError('fraction {f} outside [0, 1)'.format(
                f=self.sensing_fraction), key='sensing_fraction')
        choices = (('signal', ('otfs', 'ofdm')),
                   ('target_position', ('sampled', 'center')),
                   ('evaluation', ('true', 'model')),
                   ('sweep_power', ('equal', 'optimized')),
                   ('mc_power', ('equal', 'optimized')))
        for key, allowed in choices:
            if getattr(self, key) not in allowed:
                raise ConfigError('{v!r} is not one of {a}'.format(
                    v=getattr(self, key), a=', '.join(allowed)), key=key)
        if len(self.pilot_lengths) != len(self.delta_f_sweep):
            raise ConfigError('needs one pilot length per subcarrier '
                              'bandwidth', key='pilot_lengths')
        if any(p < 1 for p in self.pilot_lengths):
            raise ConfigError('pilot lengths must be positive',
                              key='pilot_lengths')
        if any(f <= 0 for f in self.delta_f_sweep):
            raise ConfigError('bandwidths must be positive',
                              key='delta_f_sweep')
        if any(m < 1 for m in self.sweep_antennas):
            raise ConfigError('antenna counts must be positive',
                              key='sweep_antennas')

    def replace(self, **changes: Any) -> 'ExperimentConfig':
        """Returns a copy with some fields changed."""
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Plain mapping suitable for YAML/JSON documents."""
        return {k: list(v) if isinstance(v, tuple) else v
                for k, v in dataclasses.asdict(self).items()}

    @property
    def grid(self) -> DDGridSpec:
        """The OTFS lattice with the cyclic prefix covering tau_max."""
        return DDGridSpec.from_delay_spread(self.M, self.N, self.delta_f,
                                            self.tau_max)

    @property
    def T_sym(self) -> float:  # pylint: disable=invalid-name
        """Symbol duration in seconds."""
        return 1.0 / self.delta_f

    @property
    def v_max(self) -> float:
        """Maximum speed in m/s."""
        return self.v_max_kmh / 3.6

    @property
    def nu_max(self) -> float:
        """Maximum Doppler shift in Hz."""
        return self.fc * self.v_max / SPEED_OF_LIGHT

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.fc

    @property
    def ell_max(self) -> int:
        return ceil_index(self.tau_max * self.M * self.delta_f)

    @property
    def k_max(self) -> int:
        return ceil_index(self.nu_max * self.N * self.T_sym)

    @property
    def gamma_s(self) -> float:
        """Sensing SINR threshold, linear."""
        return 10.0 ** (self.gamma_s_db / 10.0)

    @property
    def rcs_variance(self) -> float:
        """Radar cross-section variance in m², linear."""
        return 10.0 ** (self.rcs_variance_dbsm / 10.0)

    @property
    def noise_variance(self) -> float:
        """Receiver noise power in W over the M·delta_f band."""
        # pylint: disable=import-outside-toplevel
        from otfs_isac.performance import noise_variance
        return noise_variance(self.M, self.delta_f, self.noise_figure_db)

    @property
    def rho_d(self) -> float:
        """Normalized downlink SNR, AP power over noise power."""
        return self.ap_power / self.noise_variance


def _coerce(key: str, annotation: Any, value: Any) -> Any:
    """Checks and converts a configuration value to its field type."""
    if annotation in (bool, int, float, str):
        return _scalar(key, annotation, value)
    # Tuple[X, ...]
    item = annotation.__args__[0]
    if isinstance(value, (str, bytes)) or not hasattr(value, '__iter__'):
        raise ConfigError('expected a list, got {v!r}'.format(v=value),
                          key=key)
    return tuple(_scalar(key, item, v) for v in value)


def _scalar(key: str, item: type, value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if item is bool or item is str:
        if not isinstance(value, item):
            raise ConfigError('expected {t}, got {v!r}'.format(
                t='true or false' if item is bool else 'a string',
                v=value), key=key)
        return value
    if isinstance(value, str):
        # YAML 1.1 reads exponent notation without a dot as a string
        try:
            value = float(value)
        except ValueError:
            raise ConfigError('expected a number, got {v!r}'.format(
                v=value), key=key) from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError('expected a number, got {v!r}'.format(v=value),
                          key=key)
    if not math.isfinite(value):
        raise ConfigError('expected a finite number, got {v!r}'.format(
            v=value), key=key)
    if item is int:
        if int(value) != value:
            raise ConfigError('expected an integer, got {v!r}'.format(
                v=value), key=key)
        return int(value)
    return float(value)


def config_from_mapping(doc: Optional[Mapping[str, Any]]) -> ExperimentConfig:
    """Builds a configuration from a flat mapping, rejecting unknown
    keys."""
    if doc is None:
        doc = {}
    if not isinstance(doc, Mapping):
        raise ConfigError('configuration document must be a mapping, '
                          'not {t}'.format(t=type(doc).__name__))
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in doc:
        if key not in known:
            raise ConfigError('unknown configuration key', key=str(key))
    return ExperimentConfig(**doc)


def load_config(path: Optional[str] = None,
                **overrides: Any) -> ExperimentConfig:
    """Loads a YAML configuration document; without a path, returns the
    defaults. Keyword overrides whose value is not None win over the
    document."""
    doc = {}  # type: Dict[str, Any]
    if path:
        try:
            with open(path, encoding='utf-8') as f:
                doc = yaml.safe_load(f) or {}
        except yaml.YAMLError as err:
            raise ConfigError('cannot parse {p}: {e}'.format(
                p=path, e=err)) from err
        except UnicodeDecodeError as err:
            raise ConfigError('{p} is not UTF-8 text: {e}'.format(
                p=path, e=err)) from err
        except OSError as err:
            raise ConfigError('cannot read {p}: {e}'.format(
                p=path, e=err)) from err
        if not isinstance(doc, dict):
            raise ConfigError('configuration document must be a mapping, '
                              'not {t}'.format(t=type(doc).__name__))
    doc = dict(doc)
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_mapping(doc)
