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

"""Monte Carlo checks of the closed-form SE and sensing expressions.

The SE check draws estimate and channel pairs, forms the effective
downlink matrix Z_qq' = A·(Σ √η h_iᵀ·conj(ĥ_j) Π-core_ij)·A† of every
user pair from the sparse pair cores, and estimates desired signal,
uncertainty, inter-symbol and inter-user powers per lattice row. The
sensing check draws RCS amplitudes and target-free channels and averages
echo and clutter powers.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix

from otfs_isac import streams
from otfs_isac.allocator import SolverOptions, equal_power, maxmin_allocate
from otfs_isac.channel import sample_rcs, sample_target_free_factor
from otfs_isac.errors import ConfigError, UseLowerBound
from otfs_isac.estimation import EstimatorStats, sample_estimate_pair
from otfs_isac.experiments import ScenarioModel, pool_map
from otfs_isac.lattice import FactoredDD, pair_core, sandwich
from otfs_isac.performance import ComponentPowers, PowerAlloc, as_alloc, \
    component_powers, prelog, se_full, sensing_sinr


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with its standard error over ``count`` realizations."""

    mean: float
    stderr: float
    count: int

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> 'MCEstimate':
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 \
            else math.inf
        return cls(float(np.mean(samples)), stderr, n)

    def within(self, value: float, sigmas: float = 3.0,
               rtol: float = 1e-9) -> bool:
        """Whether ``value`` lies within ``sigmas`` standard errors."""
        return abs(self.mean - value) <= sigmas * self.stderr \
            + rtol * abs(value)


def choose_power(model: ScenarioModel, stats: EstimatorStats,
                 eta: Optional[Union[PowerAlloc, np.ndarray]] = None) \
        -> PowerAlloc:
    """The given allocation, or the one ``config.mc_power`` asks for."""
    if eta is not None:
        return as_alloc(eta)
    config = model.config
    if config.mc_power == 'equal':
        return equal_power(stats, config.sensing_fraction)
    alloc, _ = maxmin_allocate(stats, model.precoding, config.rho_d,
                               config.gamma_s,
                               SolverOptions.from_config(config),
                               sensing_beam=config.sensing_beam)
    return alloc


def _estimate_columns(h_hat_users: np.ndarray,
                      beams: Optional[np.ndarray]) -> np.ndarray:
    """Estimates with the deterministic sensing beam prepended as
    column 0, path 0."""
    n_tx, _, n_paths, m_t = h_hat_users.shape
    beam = np.zeros((n_tx, 1, n_paths, m_t), dtype=complex)
    if beams is not None:
        beam[:, 0, 0] = beams
    return np.concatenate([beam, h_hat_users], axis=1)


class PairCores:
    """Sparse pair cores Π^(l_i)·diag(ramp_i·conj(ramp_j))·Π^(-l_j) of
    every AP and path pair between user q's channel and the precoder of
    stream q'. The sensing stream has a single identity path."""

    def __init__(self, model: ScenarioModel) -> None:
        grid, paths = model.config.grid, model.paths
        n_tx, n_cols, n_paths = paths.ell.shape
        identity = FactoredDD(grid, 0, np.ones(grid.size, dtype=complex))
        ops = [[[FactoredDD.from_path(grid, paths.path(p, q, i))
                 for i in range(n_paths)] if q else [identity]
                for q in range(n_cols)] for p in range(n_tx)]
        self.grid = grid
        self.cores = {}  # type: Dict[Tuple[int, int], Tuple[np.ndarray, ...]]
        for q in range(1, n_cols):
            for q2 in range(n_cols):
                parts = [[[pair_core(ops[p][q][i], tj) for tj in ops[p][q2]]
                          for i in range(n_paths)] for p in range(n_tx)]
                self.cores[q, q2] = tuple(
                    np.array([[[x[k] for x in row] for row in per_ap]
                              for per_ap in parts]) for k in range(3))

    def effective(self, q: int, q2: int, coef: np.ndarray) -> np.ndarray:
        """Z = A·X·A† for the per-(AP, i, j) coefficients ``coef``."""
        rows, cols, vals = self.cores[q, q2]
        size = self.grid.size
        x = coo_matrix(((vals * coef[..., None]).ravel(),
                        (rows.ravel(), cols.ravel())),
                       shape=(size, size)).toarray()
        return sandwich(x, self.grid)


def _se_realization(model: ScenarioModel, stats: EstimatorStats,
                    alloc: PowerAlloc, cores: PairCores, r: int) \
        -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonal, own-stream row energy and inter-user row energy of
    every user in realization ``r``, each of shape (n_users, MN)."""
    rng = streams.substream(model.seed, streams.CHANNEL, r)
    h_hat, h = sample_estimate_pair(rng, stats.R[:, 1:], stats.B[:, 1:])
    est = _estimate_columns(h_hat, model.beams)
    n_users, size = stats.n_users, model.config.grid.size
    diag = np.zeros((n_users, size), dtype=complex)
    own = np.zeros((n_users, size))
    iui = np.zeros((n_users, size))
    amp = np.sqrt(alloc.eta)
    for q in range(1, n_users + 1):
        for q2 in range(n_users + 1):
            if not np.any(amp[:, q2]):
                continue
            coef = amp[:, q2, None, None] * np.einsum(
                'pia,pja->pij', h[:, q - 1], est[:, q2].conj())
            if q2 == 0:
                coef = coef[:, :, :1]
            z = cores.effective(q, q2, coef)
            energy = np.sum(np.abs(z) ** 2, axis=1)
            if q2 == q:
                diag[q - 1] = np.diag(z)
                own[q - 1] = energy
            else:
                iui[q - 1] += energy
    return diag, own, iui


@dataclass(frozen=True)
class UserValidation:  # pylint: disable=too-many-instance-attributes
    """Simulated against closed-form figures of one user."""

    user: int
    mc_se: MCEstimate
    closed_se: float
    row_sum_se: float
    ds2: MCEstimate
    bu: MCEstimate
    isi: MCEstimate
    iui: MCEstimate
    closed: ComponentPowers

    @property
    def rel_error(self) -> float:
        return abs(self.mc_se.mean - self.closed_se) / self.closed_se \
            if self.closed_se else math.nan


@dataclass(frozen=True)
class SEValidation:
    """Per-user outcome of :func:`mc_validate_se`."""

    users: List[UserValidation]
    n_realizations: int
    seed: int

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for u in self.users:
            row = {'user': u.user, 'mc_se': u.mc_se.mean,
                   'mc_se_stderr': u.mc_se.stderr, 'closed_se': u.closed_se,
                   'row_sum_se': u.row_sum_se, 'rel_error': u.rel_error}
            for part in ('ds2', 'bu', 'isi', 'iui'):
                est = getattr(u, part)
                row['mc_' + part] = est.mean
                row['mc_{p}_stderr'.format(p=part)] = est.stderr
                row['closed_' + part] = getattr(u.closed, part)
            rows.append(row)
        return pd.DataFrame(rows)


def _batch_se(diag: np.ndarray, own: np.ndarray, iui: np.ndarray,
              rho_d: float, omega: float) -> float:
    """SE from per-row moments over a set of realizations, shapes
    (n_real, MN)."""
    ds = diag.mean(axis=0)
    ds2 = np.abs(ds) ** 2
    interference = own.mean(axis=0) - ds2 + iui.mean(axis=0)
    sinr = rho_d * ds2 / (rho_d * np.maximum(interference, 0.0) + 1.0)
    return float(omega * np.mean(np.log2(1.0 + sinr)))


def _se_estimate(diag: np.ndarray, own: np.ndarray, iui: np.ndarray,
                 rho_d: float, omega: float,
                 n_batches: int = 10) -> MCEstimate:
    """SE of all realizations with a batch-means standard error."""
    n = diag.shape[0]
    value = _batch_se(diag, own, iui, rho_d, omega)
    if n < 2 * n_batches:
        return MCEstimate(value, math.inf, n)
    batches = [_batch_se(diag[s], own[s], iui[s], rho_d, omega)
               for s in np.array_split(np.arange(n), n_batches)]
    return MCEstimate(value, float(np.std(batches, ddof=1)
                                   / math.sqrt(n_batches)), n)


def mc_validate_se(model: ScenarioModel, n_real: Optional[int] = None,
                   eta: Optional[Union[PowerAlloc, np.ndarray]] = None,
                   threads: Optional[int] = None,
                   progress: bool = False) -> SEValidation:
    """Simulates the downlink of every user over ``n_real`` channel
    realizations and sets the resulting SE and power components beside
    their closed forms.

    :raises UseLowerBound: for lattices above ``config.max_full_mn``.
    """
    config = model.config
    grid = config.grid
    n_real = n_real or config.n_realizations
    if n_real < 2:
        raise ConfigError('needs at least two realizations',
                          key='n_realizations')
    if model.paths is None:
        raise ConfigError('scenario model drawn without paths')
    if grid.size > config.max_full_mn:
        raise UseLowerBound('lattice size {s} above {g}; no simulation '
                            'possible'.format(s=grid.size,
                                              g=config.max_full_mn))
    stats = model.stats('otfs')
    alloc = choose_power(model, stats, eta)
    cores = PairCores(model)
    log.info('simulating %d realizations on a %dx%d lattice', n_real,
             grid.M, grid.N)
    draws = pool_map(lambda r: _se_realization(model, stats, alloc, cores, r),
                     range(n_real),
                     config.threads if threads is None else threads,
                     progress, 'realizations')
    diag = np.stack([d[0] for d in draws])
    own = np.stack([d[1] for d in draws])
    iui = np.stack([d[2] for d in draws])
    omega = prelog(grid, 'otfs')
    users = []
    for q in range(1, stats.n_users + 1):
        d, o, i = diag[:, q - 1], own[:, q - 1], iui[:, q - 1]
        ds = MCEstimate.from_samples(d.real.mean(axis=1))
        ds_rows = d.mean(axis=0)
        spread = np.abs(d - ds_rows) ** 2 * n_real / (n_real - 1)
        bu = MCEstimate.from_samples(spread.mean(axis=1))
        isi = MCEstimate.from_samples(
            (o - np.abs(d) ** 2).mean(axis=1))
        closed_se, _ = se_full(q, alloc, stats, model.paths, grid,
                               config.rho_d, omega, 'energy',
                               max_mn=config.max_full_mn)
        row_sum_se, _ = se_full(q, alloc, stats, model.paths, grid,
                                config.rho_d, omega, 'row-sum',
                                max_mn=config.max_full_mn)
        users.append(UserValidation(
            user=q,
            mc_se=_se_estimate(d, o, i, config.rho_d, omega),
            closed_se=closed_se, row_sum_se=row_sum_se,
            ds2=MCEstimate(ds.mean ** 2, 2.0 * abs(ds.mean) * ds.stderr,
                           n_real),
            bu=bu, isi=isi,
            iui=MCEstimate.from_samples(i.mean(axis=1)),
            closed=component_powers(q, alloc, stats, model.paths, grid,
                                    'energy')))
        log.debug('user %d: simulated SE %.5g, closed form %.5g', q,
                  users[-1].mc_se.mean, closed_se)
    return SEValidation(users=users, n_realizations=n_real, seed=model.seed)


@dataclass(frozen=True)
class SensingValidation:
    """Simulated against closed-form sensing SINR."""

    numerator: MCEstimate
    denominator: MCEstimate
    closed_numerator: float
    closed_denominator: float

    @property
    def mc_sinr(self) -> float:
        return self.numerator.mean / self.denominator.mean

    @property
    def closed_sinr(self) -> float:
        return self.closed_numerator / self.closed_denominator

    @property
    def rel_error(self) -> float:
        return abs(self.mc_sinr - self.closed_sinr) / self.closed_sinr \
            if self.closed_sinr else math.nan

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            'mc_numerator': self.numerator.mean,
            'mc_numerator_stderr': self.numerator.stderr,
            'closed_numerator': self.closed_numerator,
            'mc_denominator': self.denominator.mean,
            'mc_denominator_stderr': self.denominator.stderr,
            'closed_denominator': self.closed_denominator,
            'mc_sinr': self.mc_sinr,
            'closed_sinr': self.closed_sinr,
            'rel_error': self.rel_error,
        }])


def _sensing_realization(model: ScenarioModel, stats: EstimatorStats,
                         alloc: PowerAlloc, factors: Tuple[np.ndarray, ...],
                         r: int) -> Tuple[float, float]:
    config, geo = model.config, model.target
    rng = streams.substream(model.seed, streams.CHANNEL, r, 1)
    est = _estimate_columns(streams.sample_correlated(rng, stats.B[:, 1:]),
                            model.beams)
    alpha = sample_rcs(model.seed, geo.rcs_variance, stats.n_tx, geo.n_rx,
                       realization=r).alpha
    gain = np.abs(np.einsum('pa,pqia->pqi', geo.h_pt, est.conj())) ** 2
    streams_power = np.einsum('pq,pq->p', alloc.eta, gain.sum(axis=2))
    rx = np.abs(alpha) ** 2 * geo.beta_radar \
        * np.sum(np.abs(geo.h_tr) ** 2, axis=1)[None, :]
    numerator = config.rho_d * float(np.sum(streams_power[:, None] * rx))
    f_tx, f_rx = factors
    m_t = stats.n_antennas
    clutter = 0.0
    for p in range(stats.n_tx):
        precoders = est[p].reshape(-1, m_t).conj().T
        weights = np.repeat(alloc.eta[p], est.shape[2])
        for rr in range(geo.n_rx):
            w = sample_target_free_factor(model.seed, p, rr, m_t,
                                          realization=r)
            g = f_rx[p, rr] @ w @ f_tx[p, rr].T
            clutter += float(np.sum(weights * np.sum(
                np.abs(g @ precoders) ** 2, axis=0)))
    return numerator, config.rho_d * clutter + geo.n_rx * m_t


def mc_validate_sensing(model: ScenarioModel, n_real: Optional[int] = None,
                        eta: Optional[Union[PowerAlloc, np.ndarray]] = None,
                        threads: Optional[int] = None,
                        progress: bool = False) -> SensingValidation:
    """Simulates echo and clutter powers over ``n_real`` draws of the
    estimates, RCS amplitudes and target-free channels."""
    config = model.config
    n_real = n_real or config.n_realizations
    if n_real < 2:
        raise ConfigError('needs at least two realizations',
                          key='n_realizations')
    stats = model.stats('otfs')
    alloc = choose_power(model, stats, eta)
    geo = model.target
    factors = (streams.covariance_factor(geo.r_tx),
               streams.covariance_factor(geo.r_rx))
    draws = pool_map(
        lambda r: _sensing_realization(model, stats, alloc, factors, r),
        range(n_real), config.threads if threads is None else threads,
        progress, 'sensing')
    closed = sensing_sinr(alloc, stats, geo, config.rho_d)
    return SensingValidation(
        numerator=MCEstimate.from_samples([d[0] for d in draws]),
        denominator=MCEstimate.from_samples([d[1] for d in draws]),
        closed_numerator=closed.numerator,
        closed_denominator=closed.denominator)
