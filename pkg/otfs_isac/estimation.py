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

"""MMSE channel estimation with embedded pilots (EP).

Every user sends one pilot inside a guard region of the delay-Doppler
grid, while the other users send data. The estimate of path ``i`` of
link (p, q) is Gaussian with covariance

    B = P_pil·η_q · R · Ψ⁻¹ · R

where Ψ collects the pilot, the data leaking into the guard region,
and noise. Estimation is realized statistically: Monte Carlo code
samples estimates and errors from (R, B) instead of processing pilots.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from otfs_isac import streams
from otfs_isac.config import ExperimentConfig
from otfs_isac.errors import ConfigError, DimensionMismatch, \
    EstimatorDegenerate
from otfs_isac.geometry import AnglePair, array_response
from otfs_isac.lattice import DDGridSpec


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EPLayout:
    """Guard sizes of the embedded pilot: ``k_max`` and ``ell_max``
    bound the channel spread, ``k_hat`` adds Doppler guard bins against
    fractional Doppler leakage."""

    k_max: int
    ell_max: int
    k_hat: int = 1

    def __post_init__(self) -> None:
        for name in ('k_max', 'ell_max', 'k_hat'):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ConfigError('invalid guard size {v}'.format(v=value),
                                  key=name)

    @property
    def doppler_extent(self) -> int:
        """Doppler bins of the pilot region, 4k_max + 4k̂ + 1."""
        return 4 * self.k_max + 4 * self.k_hat + 1

    @property
    def delay_extent(self) -> int:
        """Delay bins of the pilot region, 2ℓ_max + 1."""
        return 2 * self.ell_max + 1

    @property
    def footprint(self) -> int:
        """Grid points of one user's pilot and guard region."""
        return self.doppler_extent * self.delay_extent

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> 'EPLayout':
        return cls(k_max=config.k_max, ell_max=config.ell_max,
                   k_hat=config.k_hat)


@dataclass(frozen=True)
class UplinkPowers:
    """Uplink pilot and data powers in W, per-user power control and the
    receiver noise variance in W."""

    pilot: float
    data: float
    eta: np.ndarray
    noise: float

    def __post_init__(self) -> None:
        object.__setattr__(self, 'eta', np.atleast_1d(
            np.asarray(self.eta, dtype=float)))
        if self.pilot < 0 or self.data < 0 or self.noise < 0 \
                or np.any(self.eta < 0):
            raise ConfigError('uplink powers must not be negative')

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> 'UplinkPowers':
        return cls(pilot=config.pilot_power, data=config.data_power,
                   eta=np.full(config.n_users, config.uplink_eta),
                   noise=config.noise_variance)


def _check_pd(matrices: np.ndarray, what: str) -> None:
    try:
        np.linalg.cholesky(matrices)
    except np.linalg.LinAlgError as err:
        raise EstimatorDegenerate('{w} is not positive definite'.format(
            w=what)) from err


def compute_psi_all(R: np.ndarray, powers: UplinkPowers, ep: EPLayout,
                    N: int) -> np.ndarray:
    """Ψ of every link and path. ``R`` has shape
    (n_tx, n_users, L, M_t, M_t), user columns only.

    :raises EstimatorDegenerate: when some Ψ is not positive definite.
    """
    n_tx, n_users, _, m_t, _ = R.shape
    if powers.eta.shape not in ((1,), (n_users,)):
        raise DimensionMismatch('{e} power control entries for {k} '
                                'users'.format(e=len(powers.eta), k=n_users))
    eta = np.broadcast_to(powers.eta, (n_users,))
    link_sum = R.sum(axis=2)
    # data of all users leaks into the guard region, minus the own data
    # that the guard region keeps out
    leakage = np.einsum('k,pkab->pab', eta, link_sum) * powers.data / N
    guard = powers.data * ep.doppler_extent / N ** 2
    psi = (powers.pilot * eta[None, :, None, None, None] * R
           + leakage[:, None, None]
           - (guard * eta[None, :, None, None] * link_sum)[:, :, None]
           + powers.noise * np.eye(m_t))
    psi = 0.5 * (psi + np.swapaxes(psi, -1, -2).conj())
    _check_pd(psi, 'Ψ')
    return psi.reshape(n_tx, n_users, -1, m_t, m_t)


def compute_psi(p: int, q: int, i: int, R: np.ndarray,
                powers: UplinkPowers, ep: EPLayout, N: int) -> np.ndarray:
    """Ψ of path ``i`` of the link between AP ``p`` and user ``q``, all
    zero-based and over the user columns of ``R``."""
    return compute_psi_all(R[p:p + 1], powers, ep, N)[0, q, i]


def compute_B(psi: np.ndarray, R: np.ndarray,
              pilot_gain: Union[float, np.ndarray]) -> np.ndarray:
    """B = P_pil·η·R·Ψ⁻¹·R for a batch of matrices; ``pilot_gain`` is
    P_pil·η, broadcast over the batch dimensions.

    :raises EstimatorDegenerate: when some Ψ is singular.
    """
    if psi.shape != R.shape:
        raise DimensionMismatch('Ψ of shape {a} and R of shape {b}'.format(
            a=psi.shape, b=R.shape))
    _check_pd(psi, 'Ψ')
    gain = np.asarray(pilot_gain, dtype=float)
    gain = gain.reshape(gain.shape + (1, 1))
    b = gain * (R @ np.linalg.solve(psi, R))
    return 0.5 * (b + np.swapaxes(b, -1, -2).conj())


@dataclass(frozen=True)
class SensingBeamCov:
    """The rank-one covariance a·a† of the dedicated sensing beam."""

    beam: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.beam, self.beam.conj())


def sensing_beam_cov(angle: AnglePair, M_t: int) -> SensingBeamCov:
    """Beam covariance for the direction toward the hotspot center."""
    return SensingBeamCov(beam=array_response(angle, M_t))


@dataclass(frozen=True)
class EstimatorStats:
    """Correlations R and estimate covariances B of all links and paths,
    shape (n_tx, n_users + 1, L, M_t, M_t).

    Column 0 is the dedicated sensing beam treated as a pseudo-user with
    a single path: B[:, 0, 0] = a·a†, zero padding elsewhere, and R
    zero since its actual channel never appears in a signal term.
    """

    R: np.ndarray
    B: np.ndarray
    perfect_csi: bool = False

    def __post_init__(self) -> None:
        if self.R.shape != self.B.shape:
            raise DimensionMismatch('R of shape {a} and B of shape '
                                    '{b}'.format(a=self.R.shape,
                                                 b=self.B.shape))

    @property
    def n_tx(self) -> int:
        return self.B.shape[0]

    @property
    def n_users(self) -> int:
        return self.B.shape[1] - 1

    @property
    def n_paths(self) -> int:
        return self.B.shape[2]

    @property
    def n_antennas(self) -> int:
        return self.B.shape[-1]

    def traces(self) -> np.ndarray:
        """b_pq = Σ_i Tr(B_pq,i), shape (n_tx, n_users + 1)."""
        return np.einsum('pqiaa->pq', self.B).real

    def without_beam(self) -> 'EstimatorStats':
        """The same statistics with the sensing beam switched off."""
        b = self.B.copy()
        b[:, 0] = 0.0
        return EstimatorStats(R=self.R, B=b, perfect_csi=self.perfect_csi)


def with_sensing_column(R_users: np.ndarray, B_users: np.ndarray,
                        beams: Optional[np.ndarray],
                        perfect_csi: bool = False) -> EstimatorStats:
    """Prepends the sensing column to user statistics; ``beams`` holds
    one unit-norm beam per AP, shape (n_tx, M_t), or None for no beam."""
    n_tx, _, n_paths, m_t, _ = R_users.shape
    pad = np.zeros((n_tx, 1, n_paths, m_t, m_t), dtype=complex)
    b0 = pad.copy()
    if beams is not None:
        b0[:, 0, 0] = np.einsum('pa,pb->pab', beams, beams.conj())
    return EstimatorStats(R=np.concatenate([pad, R_users], axis=1),
                          B=np.concatenate([b0, B_users], axis=1),
                          perfect_csi=perfect_csi)


def estimate_stats(R_users: np.ndarray, powers: UplinkPowers, ep: EPLayout,
                   N: int, beams: Optional[np.ndarray] = None,
                   perfect_csi: bool = False) -> EstimatorStats:
    """EP-based MMSE statistics of all links. In perfect-CSI mode B is R
    itself and the error vanishes."""
    if perfect_csi:
        return with_sensing_column(R_users, R_users.copy(), beams, True)
    psi = compute_psi_all(R_users, powers, ep, N)
    eta = np.broadcast_to(powers.eta, (R_users.shape[1],))
    gain = powers.pilot * eta[None, :, None]
    return with_sensing_column(R_users, compute_B(psi, R_users, gain), beams)


def sample_estimate_pair(seed_or_rng: Union[int, np.random.Generator],
                         R: np.ndarray, B: np.ndarray) \
        -> Tuple[np.ndarray, np.ndarray]:
    """Draws (ĥ, h) with ĥ ~ CN(0, B) and an independent error
    ε ~ CN(0, R − B), h = ĥ + ε, for a batch of covariances.

    :raises EstimatorDegenerate: when R − B is indefinite.
    """
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) \
        else np.random.default_rng(seed_or_rng)
    err_cov = R - B
    scale = max(1.0, float(np.max(np.abs(R), initial=0.0)))
    if err_cov.size and np.min(np.linalg.eigvalsh(err_cov)) < -1e-10 * scale:
        raise EstimatorDegenerate('R − B is indefinite')
    h_hat = streams.sample_correlated(rng, B)
    return h_hat, h_hat + streams.sample_correlated(rng, err_cov)


@dataclass(frozen=True)
class EPOverhead:
    """Cyclic prefix overhead and pilot footprint of the EP scheme."""

    cp_overhead: float
    footprint: int
    pilot_fraction: float


def ep_overhead(grid: DDGridSpec, ep: EPLayout, n_users: int) -> EPOverhead:
    """CP overhead N_cp/(MN) and the pilot region of one user; the
    fraction of the grid that all users' regions would occupy without
    sharing guards is informational only.

    :raises ConfigError: when a pilot region does not fit the grid.
    """
    if ep.doppler_extent > grid.N:
        raise ConfigError('pilot guard spans {d} Doppler bins, grid has '
                          '{n}'.format(d=ep.doppler_extent, n=grid.N),
                          key='k_hat')
    if ep.delay_extent > grid.M:
        raise ConfigError('pilot guard spans {d} delay bins, grid has '
                          '{m}'.format(d=ep.delay_extent, m=grid.M),
                          key='M')
    return EPOverhead(cp_overhead=grid.N_cp / grid.size,
                      footprint=ep.footprint,
                      pilot_fraction=n_users * ep.footprint / grid.size)


def link_statistics(config: ExperimentConfig, R_users: np.ndarray,
                    beams: Optional[np.ndarray] = None,
                    perfect_csi: Optional[bool] = None) -> EstimatorStats:
    """EP statistics for a configuration; the Doppler extent of the
    pilot region must fit the grid."""
    ep = EPLayout.from_config(config)
    if ep.doppler_extent > config.N:
        raise ConfigError('pilot guard spans {d} Doppler bins, grid has '
                          '{n}'.format(d=ep.doppler_extent, n=config.N),
                          key='k_hat')
    if perfect_csi is None:
        perfect_csi = config.perfect_csi
    if not config.sensing_beam:
        beams = None
    log.debug('EP statistics: %d APs, %d users, %d paths, guard %d',
              R_users.shape[0], R_users.shape[1], R_users.shape[2],
              ep.doppler_extent)
    return estimate_stats(R_users, UplinkPowers.from_config(config), ep,
                          config.N, beams=beams, perfect_csi=perfect_csi)
