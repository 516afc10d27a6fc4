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

"""OFDM baseline: a cyclic prefix per symbol, block-type (BT) pilots
spanning all subcarriers, and per-subcarrier path operators Q̄ in place
of the delay-Doppler operators.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from otfs_isac.config import ExperimentConfig
from otfs_isac.errors import ConfigError, UseLowerBound
from otfs_isac.estimation import EstimatorStats, UplinkPowers, compute_B, \
    with_sensing_column
from otfs_isac.lattice import MAX_DENSE_MN, DDGridSpec, ceil_index, \
    chi_kappa_dense_rows, q_ofdm_for_path, to_frequency
from otfs_isac.performance import PowerAlloc, as_alloc, link_coefficients, \
    pair_traces, se_lower_bound, check_user


log = logging.getLogger(__name__)


#: subcarrier bandwidths of the overhead comparison, Hz.
SWEEP_DELTA_F = (15e3, 45e3, 75e3, 105e3, 135e3)
#: orthogonal pilot lengths used at these bandwidths.
SWEEP_PILOT_LENGTHS = (14, 4, 2, 2, 1)
#: delay spreads of the two delay profiles, s.
EVA_TAU_MAX = 2.5e-6
EVB_TAU_MAX = 10e-6


@dataclass(frozen=True)
class OFDMConfig:
    """An OFDM symbol of ``M`` subcarriers with an ``N_cp`` sample prefix
    and ``pilot_len`` orthogonal pilot sequences. ``D_t`` and ``D_f`` are
    the optional pilot spacings in symbols and subcarriers."""

    M: int
    delta_f: float
    N_cp: int
    pilot_len: int
    D_t: Optional[int] = None
    D_f: Optional[int] = None

    def __post_init__(self) -> None:
        if self.pilot_len < 1:
            raise ConfigError('pilot length {p} below 1'.format(
                p=self.pilot_len), key='ofdm_pilot_len')
        if not 0 <= self.N_cp < self.M:
            raise ConfigError('cyclic prefix of {c} samples does not fit '
                              '{m} subcarriers'.format(c=self.N_cp, m=self.M),
                              key='N_cp')

    @property
    def T_sym(self) -> float:  # pylint: disable=invalid-name
        return 1.0 / self.delta_f

    def validate(self, nu_max: float, tau_max: float) -> None:
        """Checks the pilot spacings against the channel coherence."""
        if self.D_t is not None and nu_max > 0 \
                and not self.D_t < 1.0 / (2.0 * nu_max * self.T_sym):
            raise ConfigError('pilot spacing of {d} symbols exceeds the '
                              'coherence time'.format(d=self.D_t), key='D_t')
        if self.D_f is not None and tau_max > 0 \
                and not self.D_f < 1.0 / (self.delta_f * tau_max):
            raise ConfigError('pilot spacing of {d} subcarriers exceeds the '
                              'coherence bandwidth'.format(d=self.D_f),
                              key='D_f')

    @classmethod
    def from_config(cls, config: ExperimentConfig,
                    pilot_len: Optional[int] = None) -> 'OFDMConfig':
        return cls(M=config.M, delta_f=config.delta_f,
                   N_cp=ceil_index(config.tau_max * config.M * config.delta_f),
                   pilot_len=pilot_len or config.ofdm_pilot_len)


def ofdm_prelog(ofdm: OFDMConfig) -> float:
    """Fraction of each OFDM symbol left after its cyclic prefix."""
    return 1.0 - ofdm.N_cp / ofdm.M


def pilot_assignment(n_users: int, pilot_len: int) -> np.ndarray:
    """Zero-based pilot index of every user, round-robin."""
    if pilot_len < 1:
        raise ConfigError('pilot length {p} below 1'.format(p=pilot_len),
                          key='ofdm_pilot_len')
    return np.arange(n_users) % pilot_len


def bt_pilot_model(R_users: np.ndarray, ofdm: OFDMConfig,
                   powers: UplinkPowers, beams: Optional[np.ndarray] = None,
                   perfect_csi: bool = False) -> EstimatorStats:
    """MMSE statistics under block-type pilots. Users sharing a pilot
    contaminate each other's estimates; there is no fractional Doppler
    leakage.

    :param R_users: correlations of the user links, shape
      (n_tx, n_users, L, M_t, M_t).
    """
    n_users = R_users.shape[1]
    if perfect_csi:
        return with_sensing_column(R_users, R_users.copy(), beams, True)
    pilots = pilot_assignment(n_users, ofdm.pilot_len)
    eta = np.broadcast_to(powers.eta, (n_users,))
    sharing = (pilots[:, None] == pilots[None, :]).astype(float)
    weights = powers.pilot * sharing * eta[None, :]
    psi = (np.einsum('qk,pkiab->pqiab', weights, R_users)
           + powers.noise * np.eye(R_users.shape[-1]))
    log.debug('BT pilots: %d users on %d sequences', n_users, ofdm.pilot_len)
    gain = powers.pilot * eta[None, :, None]
    return with_sensing_column(R_users, compute_B(psi, R_users, gain), beams)


def ofdm_se_lower(q: int, eta: Union[PowerAlloc, np.ndarray],
                  stats: EstimatorStats, rho_d: float,
                  ofdm: OFDMConfig) -> Tuple[float, float]:
    """Lower-bound SE of user ``q`` with the OFDM pre-log factor."""
    return se_lower_bound(q, eta, stats, rho_d, ofdm_prelog(ofdm))


def ofdm_se_full(q: int, eta: Union[PowerAlloc, np.ndarray],
                 stats: EstimatorStats, paths, grid: DDGridSpec,
                 rho_d: float, ofdm: OFDMConfig,
                 max_m: int = MAX_DENSE_MN) -> Tuple[float, np.ndarray]:
    """SE of user ``q`` averaged over the M subcarriers, with per-row
    χ + κ of the products Q̄_i·Q̄_j† as own-link interference weights."""
    alloc = as_alloc(eta)
    check_user(q, alloc)
    if grid.M > max_m:
        raise UseLowerBound('{m} subcarriers above {g}; use the lower '
                            'bound'.format(m=grid.M, g=max_m))
    b, a = link_coefficients(stats, 'R')
    signal = np.sum(np.sqrt(alloc.eta[:, q]) * b[:, q]) ** 2
    traces = pair_traces(stats, q, q)
    own = np.zeros(grid.M)
    for p in range(alloc.n_tx):
        ops = [to_frequency(q_ofdm_for_path(grid, x))
               for x in paths.link(p, q)]
        for i, qi in enumerate(ops):
            for j, qj in enumerate(ops):
                if i == j:
                    weight = 1.0
                else:
                    chi, kappa = chi_kappa_dense_rows(qi, qj)
                    weight = chi + kappa
                own += alloc.eta[p, q] * traces[p, i, j] * weight
    others = np.delete(np.arange(alloc.n_users + 1), q)
    iui = np.sum(alloc.eta[:, others] * a[:, q, others])
    sinr = rho_d * signal / (rho_d * (own + iui) + 1.0)
    return float(ofdm_prelog(ofdm) * np.mean(np.log2(1.0 + sinr))), sinr


@dataclass(frozen=True)
class OverheadRow:
    """Cyclic prefix accounting of one subcarrier bandwidth."""

    delta_f: float
    N_cp: int
    otfs_overhead: float
    ofdm_overhead: float
    pilot_len: Optional[int]
    feasible: bool


def overhead_table(tau_max: float, delta_f_list: Sequence[float],
                   M: int, N: int,
                   pilot_lengths: Optional[Sequence[int]] = None) \
        -> List[OverheadRow]:
    """CP overheads of OTFS (one prefix per frame) and OFDM (one per
    symbol) per subcarrier bandwidth. OFDM is infeasible once the prefix
    fills the symbol."""
    if pilot_lengths is not None and len(pilot_lengths) != len(delta_f_list):
        raise ConfigError('needs one pilot length per subcarrier bandwidth',
                          key='pilot_lengths')
    rows = []
    for n, delta_f in enumerate(delta_f_list):
        n_cp = ceil_index(tau_max * M * delta_f)
        feasible = n_cp < M
        if not feasible:
            log.warning('OFDM infeasible at %g Hz: %d prefix samples, %d '
                        'subcarriers', delta_f, n_cp, M)
        rows.append(OverheadRow(
            delta_f=float(delta_f), N_cp=n_cp,
            otfs_overhead=n_cp / (M * N), ofdm_overhead=n_cp / M,
            pilot_len=None if pilot_lengths is None else pilot_lengths[n],
            feasible=feasible))
    return rows


def overhead_frame(tau_max: float, delta_f_list: Sequence[float], M: int,
                   N: int, pilot_lengths: Optional[Sequence[int]] = None) \
        -> pd.DataFrame:
    """:func:`overhead_table` as a data frame with percentages."""
    rows = overhead_table(tau_max, delta_f_list, M, N, pilot_lengths)
    return pd.DataFrame({
        'delta_f_khz': [r.delta_f / 1e3 for r in rows],
        'n_cp': [r.N_cp for r in rows],
        'otfs_cp_percent': [100.0 * r.otfs_overhead for r in rows],
        'ofdm_cp_percent': [100.0 * r.ofdm_overhead if r.feasible
                            else math.nan for r in rows],
        'pilot_len': [r.pilot_len for r in rows],
        'feasible': [r.feasible for r in rows],
    })
