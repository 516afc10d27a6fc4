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

"""Multipath channel sampling: delay and Doppler indices of the paths
of every AP-user link, complex path gains, effective delay-Doppler
channel matrices, and the random quantities of the sensing side (radar
cross sections and target-free channel factors).
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from otfs_isac import streams
from otfs_isac.config import ExperimentConfig
from otfs_isac.errors import (
    ConfigError, DomainError, GridTooSmall, UseFactoredForm)
from otfs_isac.lattice import (
    MAX_DENSE_MN, DDGridSpec, PathDD, build_T, ceil_index)


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexBounds:
    """Largest delay and Doppler indices of any path, and the cyclic
    prefix length in samples."""

    ell_max: int
    k_max: int
    N_cp: int


def derive_index_bounds(config: ExperimentConfig) -> IndexBounds:
    """Index bounds from the delay spread and the maximum speed.

    :raises GridTooSmall: when the lattice cannot hold the delay or
      Doppler spread.
    """
    ell_max = ceil_index(config.tau_max * config.M * config.delta_f)
    k_max = ceil_index(config.nu_max * config.N * config.T_sym)
    if ell_max >= config.M:
        raise GridTooSmall('delay index bound {l} needs more than {m} '
                           'subcarriers'.format(l=ell_max, m=config.M),
                           key='M')
    if 2 * k_max >= config.N and k_max > 0:
        raise GridTooSmall('Doppler index bound {k} needs more than {n} '
                           'symbols'.format(k=k_max, n=config.N), key='N')
    return IndexBounds(ell_max=ell_max, k_max=k_max, N_cp=ell_max)


def sample_paths(seed: int, p: int, q: int, L: int, ell_max: int,
                 k_max: int, distinct_delays: bool = True) -> List[PathDD]:
    """Draws the lattice indices of the ``L`` paths of link (p, q).

    Delay indices are uniform on 0..ell_max, without replacement when
    ``distinct_delays`` is set; Doppler indices are uniform on
    −k_max..k_max, fractional Doppler uniform on (−0.5, 0.5).
    """
    if L < 1:
        raise ConfigError('path count {n} below 1'.format(n=L),
                          key='n_paths')
    if distinct_delays and L > ell_max + 1:
        raise ConfigError('{n} paths cannot have distinct delay indices '
                          'within 0..{l}'.format(n=L, l=ell_max),
                          key='n_paths')
    rng = streams.substream(seed, streams.PATH_INDICES, p, q)
    ells = rng.choice(ell_max + 1, size=L, replace=not distinct_delays)
    ks = rng.integers(-k_max, k_max + 1, size=L)
    kappas = rng.uniform(-0.5, 0.5, size=L)
    # the open interval excludes the lower end
    kappas[kappas == -0.5] = 0.0
    return [PathDD(int(l), int(k), float(c))
            for l, k, c in zip(ells, ks, kappas)]


@dataclass(frozen=True)
class PathTable:
    """Lattice indices of all paths, as arrays of shape
    (n_tx, n_users + 1, L). Column 0 belongs to the sensing beam, which
    has a single Doppler-free path at delay 0; its remaining entries are
    padding and never carry gain."""

    ell: np.ndarray
    k: np.ndarray
    kappa: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.ell.shape[-1]

    def path(self, p: int, q: int, i: int) -> PathDD:
        return PathDD(int(self.ell[p, q, i]), int(self.k[p, q, i]),
                      float(self.kappa[p, q, i]))

    def link(self, p: int, q: int) -> List[PathDD]:
        return [self.path(p, q, i) for i in range(self.n_paths)]


def sample_path_table(seed: int, config: ExperimentConfig,
                      bounds: IndexBounds = None) -> PathTable:
    """Draws the paths of every AP-user link of a scenario."""
    if bounds is None:
        bounds = derive_index_bounds(config)
    shape = (config.n_tx, config.n_users + 1, config.n_paths)
    ell = np.zeros(shape, dtype=int)
    k = np.zeros(shape, dtype=int)
    kappa = np.zeros(shape)
    for p in range(config.n_tx):
        for q in range(1, config.n_users + 1):
            paths = sample_paths(seed, p, q, config.n_paths, bounds.ell_max,
                                 bounds.k_max, config.distinct_delays)
            ell[p, q] = [x.ell for x in paths]
            k[p, q] = [x.k for x in paths]
            kappa[p, q] = [x.kappa for x in paths]
    return PathTable(ell=ell, k=k, kappa=kappa)


@dataclass(frozen=True)
class PathRealization:
    """One path of a link: its lattice indices and its complex gain
    vector over the AP antennas."""

    dd: PathDD
    gain: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.gain)):
            raise DomainError('path gain has non-finite entries')


@dataclass(frozen=True)
class ChannelRealization:
    """Path gains of every link, shape (n_tx, n_users + 1, L, M_t), with
    the path indices they belong to."""

    paths: PathTable
    gains: np.ndarray

    def link(self, p: int, q: int) -> List[PathRealization]:
        return [PathRealization(self.paths.path(p, q, i), self.gains[p, q, i])
                for i in range(self.paths.n_paths)]


def sample_channel(seed: int, R: np.ndarray, paths: PathTable,
                   realization: int = 0) -> ChannelRealization:
    """Draws h_pq,i ~ CN(0, R_pq,i) for all links and paths. ``R`` has
    shape (n_tx, n_users + 1, L, M_t, M_t)."""
    rng = streams.substream(seed, streams.CHANNEL, realization)
    return ChannelRealization(paths=paths,
                              gains=streams.sample_correlated(rng, R))


def assemble_effective_channel(paths: Sequence[PathRealization],
                               grid: DDGridSpec) -> np.ndarray:
    """H = Σ_i h_iᵀ ⊗ T_i, an MN × (M_t·MN) matrix.

    :raises UseFactoredForm: for lattices above the dense limit.
    """
    if grid.size > MAX_DENSE_MN:
        raise UseFactoredForm('lattice size {s} exceeds dense limit '
                              '{g}'.format(s=grid.size, g=MAX_DENSE_MN))
    if not paths:
        raise DomainError('a link needs at least one path')
    m_t = len(paths[0].gain)
    h = np.zeros((grid.size, m_t * grid.size), dtype=complex)
    for path in paths:
        h += np.kron(path.gain.reshape(1, -1), build_T(grid, path.dd))
    return h


@dataclass(frozen=True)
class RCSSample:
    """Swerling-I amplitudes α_pr of one sensing period, shape
    (n_tx, n_rx)."""

    alpha: np.ndarray


def sample_rcs(seed: int, sigma2: float, n_tx: int, n_rx: int,
               realization: int = 0) -> RCSSample:
    """Draws i.i.d. CN(0, sigma2) radar cross-section amplitudes."""
    if sigma2 < 0:
        raise DomainError('RCS variance {s} is negative'.format(s=sigma2))
    rng = streams.substream(seed, streams.RCS, realization)
    return RCSSample(alpha=streams.complex_normal(rng, (n_tx, n_rx), sigma2))


def sample_target_free_factor(seed: int, p: int, r: int, M_t: int,
                              realization: int = 0) -> np.ndarray:
    """Draws the M_t×M_t standard complex Gaussian factor W of the
    target-free channel between transmitting AP ``p`` and receiving AP
    ``r``."""
    rng = streams.substream(seed, streams.TARGET_FREE, realization, p, r)
    return streams.complex_normal(rng, (M_t, M_t))
