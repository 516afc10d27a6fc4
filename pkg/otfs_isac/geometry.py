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

"""Deployment geometry: random placement of access points (APs), users
and the sensing hotspot, large-scale fading, array responses, spatial
correlation and radar link gains.

All APs sit at ``ap_height`` and all users as well as the target at
``ue_height``. The receiving APs are the ``n_rx`` APs closest to the
hotspot center; the remaining ``n_tx`` APs transmit.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import toeplitz

from otfs_isac import streams
from otfs_isac.config import ExperimentConfig, SPEED_OF_LIGHT
from otfs_isac.errors import ConfigError, DomainError


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Position3D:
    """A point in meters."""

    x: float
    y: float
    z: float

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def distance(self, other: 'Position3D') -> float:
        return float(np.linalg.norm(other.to_array() - self.to_array()))

    def angles_to(self, other: 'Position3D') -> 'AnglePair':
        """Azimuth and elevation of ``other`` as seen from here."""
        dx, dy, dz = other.to_array() - self.to_array()
        return AnglePair(math.atan2(dy, dx),
                         math.atan2(dz, math.hypot(dx, dy)))


@dataclass(frozen=True)
class AnglePair:
    """Azimuth in (−π, π] and elevation in [−π/2, π/2], radians."""

    azimuth: float
    elevation: float = 0.0

    def __post_init__(self) -> None:
        if not -math.pi < self.azimuth <= math.pi:
            raise DomainError('azimuth {a} outside (-pi, pi]'.format(
                a=self.azimuth))
        if not -math.pi / 2 <= self.elevation <= math.pi / 2:
            raise DomainError('elevation {e} outside [-pi/2, pi/2]'.format(
                e=self.elevation))


def _positions(points: np.ndarray) -> Tuple[Position3D, ...]:
    return tuple(Position3D(*map(float, p)) for p in points)


@dataclass(frozen=True)
class Scenario:
    """One random deployment. ``target`` is the true target position
    inside the hotspot box, drawn along with the deployment."""

    tx_aps: Tuple[Position3D, ...]
    rx_aps: Tuple[Position3D, ...]
    users: Tuple[Position3D, ...]
    hotspot_center: Position3D
    hotspot_side: float
    target: Position3D
    seed: int

    @staticmethod
    def _array(points: Tuple[Position3D, ...]) -> np.ndarray:
        return np.array([p.to_array() for p in points]).reshape(-1, 3)

    @property
    def tx_array(self) -> np.ndarray:
        return self._array(self.tx_aps)

    @property
    def rx_array(self) -> np.ndarray:
        return self._array(self.rx_aps)

    @property
    def user_array(self) -> np.ndarray:
        return self._array(self.users)

    def to_dict(self) -> Dict[str, Any]:
        def pts(points):
            return [[p.x, p.y, p.z] for p in points]
        return {
            'seed': self.seed,
            'tx_aps': pts(self.tx_aps),
            'rx_aps': pts(self.rx_aps),
            'users': pts(self.users),
            'hotspot_center': pts([self.hotspot_center])[0],
            'hotspot_side': self.hotspot_side,
            'target': pts([self.target])[0],
        }

    def to_json(self, config: ExperimentConfig = None) -> str:
        """JSON document of the positions and seed, with an optional
        configuration echo."""
        doc = self.to_dict()
        if config is not None:
            doc['config'] = config.to_dict()
        return json.dumps(doc, indent=2, sort_keys=True)


def place_scenario(config: ExperimentConfig, seed: int) -> Scenario:
    """Places APs and users uniformly at random in the square region and
    picks the receiving APs closest to the hotspot center."""
    total = config.n_tx + config.n_rx
    if config.n_rx >= total:
        raise ConfigError('{r} receiving APs leave no transmitting AP'.format(
            r=config.n_rx), key='n_rx')
    rng = streams.substream(seed, streams.PLACEMENT)
    side = config.region_side
    aps = np.column_stack([rng.uniform(0.0, side, (total, 2)),
                           np.full(total, config.ap_height)])
    users = np.column_stack([rng.uniform(0.0, side, (config.n_users, 2)),
                             np.full(config.n_users, config.ue_height)])
    center = np.array([side / 2, side / 2, config.ue_height])
    half = config.hotspot_side / 2
    target = center + np.append(rng.uniform(-half, half, 2), 0.0)
    order = np.argsort(np.linalg.norm(aps - center, axis=1), kind='stable')
    rx = order[:config.n_rx]
    tx = np.sort(order[config.n_rx:])
    return Scenario(
        tx_aps=_positions(aps[tx]),
        rx_aps=_positions(aps[rx]),
        users=_positions(users),
        hotspot_center=Position3D(*map(float, center)),
        hotspot_side=config.hotspot_side,
        target=Position3D(*map(float, target)),
        seed=int(seed))


def umi_pathloss_db(d3d: ArrayLike, fc: float,
                    h_ue: float = 1.5) -> ArrayLike:
    """Urban-microcell NLOS path loss in dB, without shadowing; accepts
    a distance or an array of distances."""
    d3d = np.asarray(d3d, dtype=float)
    if not np.all(d3d > 0):
        raise DomainError('distance {d} is not positive'.format(
            d=d3d.min() if d3d.size else d3d))
    return (35.3 * np.log10(d3d) + 22.4 + 21.3 * math.log10(fc / 1e9)
            - 0.3 * (h_ue - 1.5))


def umi_pathloss(d3d: ArrayLike, fc: float, shadow_sample: ArrayLike = 0.0,
                 h_ue: float = 1.5) -> ArrayLike:
    """Linear large-scale gain 10^(−PL/10) of the urban-microcell NLOS
    model, with shadowing samples in dB added to the path loss."""
    return 10.0 ** (-(umi_pathloss_db(d3d, fc, h_ue) + shadow_sample) / 10.0)


def array_response(angle: AnglePair, M_t: int) -> np.ndarray:
    """Unit-norm response of a uniform linear array with half-wavelength
    spacing."""
    phase = math.pi * math.sin(angle.azimuth) * math.cos(angle.elevation)
    return np.exp(1j * phase * np.arange(M_t)) / math.sqrt(M_t)


def radar_link_gain(d_pt: ArrayLike, d_tr: ArrayLike, fc: float,
                    G_t_dBi: float = 0.0, G_r_dBi: float = 0.0) -> ArrayLike:
    """Two-way radar range equation gain λ²·G_t·G_r/((4π)³·d_pt²·d_tr²),
    per square meter of radar cross section. Distance arrays broadcast
    against each other."""
    d_pt = np.asarray(d_pt, dtype=float)
    d_tr = np.asarray(d_tr, dtype=float)
    if not (np.all(d_pt > 0) and np.all(d_tr > 0)):
        raise DomainError('distances {a}, {b} must be positive'.format(
            a=d_pt, b=d_tr))
    wavelength = SPEED_OF_LIGHT / fc
    gains = 10.0 ** ((G_t_dBi + G_r_dBi) / 10.0)
    return (wavelength ** 2 * gains
            / ((4 * math.pi) ** 3 * d_pt ** 2 * d_tr ** 2))


def correlation_matrix(azimuth: float, M_t: int, r: float) -> np.ndarray:
    """Unit-diagonal exponential correlation with
    [C]_(m,n) = (r·e^(jπ·sin φ))^(m−n) for m ≥ n."""
    if not 0.0 <= r < 1.0:
        raise ConfigError('correlation coefficient {r} outside [0, 1)'.format(
            r=r), key='correlation_coeff')
    col = (r * np.exp(1j * math.pi * math.sin(azimuth))) ** np.arange(M_t)
    return toeplitz(col, col.conj())


def _wrap(angle: np.ndarray) -> np.ndarray:
    """Maps angles into (−π, π]."""
    wrapped = np.mod(angle + np.pi, 2 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def _azimuths(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    d = dst[None, :, :] - src[:, None, :]
    return np.arctan2(d[..., 1], d[..., 0])


def _distances(src: np.ndarray, dst: np.ndarray, floor: float) -> np.ndarray:
    d = np.linalg.norm(dst[None, :, :] - src[:, None, :], axis=-1)
    return np.maximum(d, floor)


@dataclass(frozen=True)
class LinkBudget:
    """Large-scale quantities of a scenario: UMi gains of every AP-user
    link, per-path azimuths, and UMi gains between transmitting and
    receiving APs."""

    beta: np.ndarray
    path_azimuth: np.ndarray
    beta_apap: np.ndarray
    azimuth_apap: np.ndarray
    azimuth_rxtx: np.ndarray


def link_budget(scenario: Scenario, config: ExperimentConfig) -> LinkBudget:
    """Draws shadowing and path angles from the scenario seed and
    evaluates the large-scale gains."""
    tx, rx, users = scenario.tx_array, scenario.rx_array, scenario.user_array
    n_tx, n_users, n_rx = len(tx), len(users), len(rx)
    sigma = config.shadowing_std_db if config.shadowing else 0.0
    shadow = streams.substream(scenario.seed, streams.SHADOWING, 0) \
        .normal(0.0, 1.0, (n_tx, n_users)) * sigma
    shadow_apap = streams.substream(scenario.seed, streams.SHADOWING, 1) \
        .normal(0.0, 1.0, (n_tx, n_rx)) * sigma
    beta = umi_pathloss(_distances(tx, users, config.min_distance),
                        config.fc, shadow, config.ue_height)
    beta_apap = umi_pathloss(_distances(tx, rx, config.min_distance),
                             config.fc, shadow_apap, config.ap_height)
    spread = math.radians(config.angular_spread_deg)
    offsets = streams.substream(scenario.seed, streams.PATH_ANGLES).uniform(
        -spread / 2, spread / 2, (n_tx, n_users, config.n_paths))
    path_azimuth = _wrap(_azimuths(tx, users)[..., None] + offsets)
    return LinkBudget(beta=beta, path_azimuth=path_azimuth,
                      beta_apap=beta_apap,
                      azimuth_apap=_azimuths(tx, rx),
                      azimuth_rxtx=_azimuths(rx, tx).T)


def comm_correlation(p: int, q: int, i: int, budget: LinkBudget,
                     config: ExperimentConfig) -> np.ndarray:
    """Spatial correlation R_pq,i = (β_pq/L)·C(φ_pq,i) of path ``i``
    between transmitting AP ``p`` and user ``q`` (both zero-based)."""
    return (budget.beta[p, q] / config.n_paths) * correlation_matrix(
        budget.path_azimuth[p, q, i], config.n_antennas,
        config.correlation_coeff)


def comm_correlations(budget: LinkBudget,
                      config: ExperimentConfig) -> np.ndarray:
    """All R_pq,i as an array of shape (n_tx, n_users, L, M_t, M_t)."""
    n_tx, n_users, n_paths = budget.path_azimuth.shape
    out = np.empty((n_tx, n_users, n_paths, config.n_antennas,
                    config.n_antennas), dtype=complex)
    for p in range(n_tx):
        for q in range(n_users):
            for i in range(n_paths):
                out[p, q, i] = comm_correlation(p, q, i, budget, config)
    return out


def sensing_correlations(p: int, r: int, budget: LinkBudget,
                         config: ExperimentConfig) \
        -> Tuple[np.ndarray, np.ndarray]:
    """(R_tx, R_rx) of the target-free channel from transmitting AP
    ``p`` to receiving AP ``r``: R_rx has unit diagonal, R_tx carries
    the clutter-scaled UMi gain between the two APs."""
    m_t, coeff = config.n_antennas, config.correlation_coeff
    r_rx = correlation_matrix(budget.azimuth_rxtx[p, r], m_t, coeff)
    r_tx = (config.clutter_scaling * budget.beta_apap[p, r]
            * correlation_matrix(budget.azimuth_apap[p, r], m_t, coeff))
    return r_tx, r_rx


@dataclass(frozen=True)
class SensingGeometry:
    """Everything the sensing SINR needs about one target position:
    radar gains β_pr, array responses toward and from the target, the
    target-free correlations, and the beam direction toward the hotspot
    center."""

    beta_radar: np.ndarray
    h_pt: np.ndarray
    h_tr: np.ndarray
    r_tx: np.ndarray
    r_rx: np.ndarray
    beam: np.ndarray
    rcs_variance: float

    @property
    def n_rx(self) -> int:
        return self.beta_radar.shape[1]

    @property
    def n_antennas(self) -> int:
        return self.h_pt.shape[1]

    @property
    def v(self) -> np.ndarray:
        """V_pr = h_tr·h_ptᵀ, shape (n_tx, n_rx, M_t, M_t)."""
        return np.einsum('ra,pb->prab', self.h_tr, self.h_pt)


def sensing_geometry(scenario: Scenario, budget: LinkBudget,
                     config: ExperimentConfig,
                     target: str = 'center') -> SensingGeometry:
    """Sensing geometry for the hotspot center (``target='center'``, as
    assumed when precoding) or for the drawn true target position
    (``'sampled'``)."""
    if target not in ('center', 'sampled'):
        raise ConfigError('unknown target position {t!r}'.format(t=target),
                          key='target_position')
    point = scenario.hotspot_center if target == 'center' else scenario.target
    tx, rx = scenario.tx_array, scenario.rx_array
    n_tx, n_rx, m_t = len(tx), len(rx), config.n_antennas
    spot = point.to_array()[None, :]
    d_pt = _distances(tx, spot, config.min_distance)[:, 0]
    d_tr = _distances(rx, spot, config.min_distance)[:, 0]
    beta_radar = radar_link_gain(d_pt[:, None], d_tr[None, :], config.fc,
                                 config.antenna_gain_tx_dbi,
                                 config.antenna_gain_rx_dbi)
    h_pt = np.array([array_response(Position3D(*a).angles_to(point), m_t)
                     for a in tx])
    h_tr = np.array([array_response(point.angles_to(Position3D(*a)), m_t)
                     for a in rx])
    center = scenario.hotspot_center
    beam = np.array([array_response(Position3D(*a).angles_to(center), m_t)
                     for a in tx])
    r_tx = np.empty((n_tx, n_rx, m_t, m_t), dtype=complex)
    r_rx = np.empty_like(r_tx)
    for p in range(n_tx):
        for r in range(n_rx):
            r_tx[p, r], r_rx[p, r] = sensing_correlations(p, r, budget,
                                                          config)
    return SensingGeometry(beta_radar=beta_radar, h_pt=h_pt, h_tr=h_tr,
                           r_tx=r_tx, r_rx=r_rx, beam=beam,
                           rcs_variance=config.rcs_variance)
