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

"""Closed-form downlink spectral efficiency (SE) and sensing SINR.

Power control is an ``n_tx × (n_users + 1)`` matrix η whose column 0
drives the dedicated sensing beam. Users are numbered 1..n_users, so
user ``q`` is column ``q`` of η and of the estimator statistics.

The lower bound replaces the per-row interference weights χ + κ of the
full expression by one. The "first slot" of the interference traces
Tr(X·B) is the true correlation R when evaluating, and the estimate
covariance B inside the optimizer.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from otfs_isac.errors import ConfigError, DomainError, UseLowerBound
from otfs_isac.estimation import EstimatorStats
from otfs_isac.lattice import MAX_DENSE_MN, DDGridSpec, chi_kappa_rows, \
    chi_kappa_dense_rows, build_T


log = logging.getLogger(__name__)


#: Boltzmann constant in J/K.
BOLTZMANN = 1.381e-23
#: reference noise temperature in K.
T0 = 290.0

ISI_FORMS = ('row-sum', 'energy')


def noise_variance(M: int, delta_f: float, F_dB: float) -> float:
    """Thermal noise power k_B·T_0·(M·Δf)·F in W."""
    return BOLTZMANN * T0 * M * delta_f * 10.0 ** (F_dB / 10.0)


def prelog(grid: DDGridSpec, signal_kind: str = 'otfs') -> float:
    """Fraction of the frame left after the cyclic prefix: one prefix
    per OTFS frame, but one per OFDM symbol."""
    if signal_kind == 'otfs':
        span = grid.size
    elif signal_kind == 'ofdm':
        span = grid.M
    else:
        raise ConfigError('unknown signal {s!r}'.format(s=signal_kind),
                          key='signal')
    if grid.N_cp >= span:
        raise ConfigError('cyclic prefix of {c} samples fills the {s} '
                          'frame'.format(c=grid.N_cp, s=signal_kind),
                          key='N_cp')
    return 1.0 - grid.N_cp / span


@dataclass(frozen=True)
class PowerAlloc:
    """Nonnegative power control coefficients, shape
    (n_tx, n_users + 1)."""

    eta: np.ndarray

    def __post_init__(self) -> None:
        eta = np.array(self.eta, dtype=float)
        if eta.ndim != 2:
            raise DomainError('power control needs a matrix, got shape '
                              '{s}'.format(s=eta.shape))
        if not np.all(np.isfinite(eta)) or np.any(eta < 0):
            raise DomainError('power control coefficients must be finite '
                              'and nonnegative')
        eta.setflags(write=False)
        object.__setattr__(self, 'eta', eta)

    @property
    def n_tx(self) -> int:
        return self.eta.shape[0]

    @property
    def n_users(self) -> int:
        return self.eta.shape[1] - 1

    def ap_load(self, b: np.ndarray) -> np.ndarray:
        """Per-AP transmit power Σ_q η_pq·b_pq, relative to the budget."""
        return np.sum(self.eta * b, axis=1)

    def is_feasible(self, b: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(self.ap_load(b) <= 1.0 + tol))


def as_alloc(eta: Union[PowerAlloc, np.ndarray]) -> PowerAlloc:
    return eta if isinstance(eta, PowerAlloc) else PowerAlloc(eta)


def _first_slot(stats: EstimatorStats, first_slot: str) -> np.ndarray:
    if first_slot == 'R':
        return stats.R
    if first_slot == 'B':
        return stats.B
    raise ConfigError('first slot must be R or B, got {s!r}'.format(
        s=first_slot))


def link_coefficients(stats: EstimatorStats, first_slot: str = 'R') \
        -> Tuple[np.ndarray, np.ndarray]:
    """Signal traces b_pq = Σ_i Tr(B_pq,i) and interference traces
    a[p, q, q'] = Σ_i Σ_j Tr(X_pq,i·B_pq',j), X being R or B."""
    x = _first_slot(stats, first_slot).sum(axis=2)
    b_sum = stats.B.sum(axis=2)
    a = np.einsum('pqab,pkba->pqk', x, b_sum).real
    return stats.traces(), np.maximum(a, 0.0)


def check_user(q: int, alloc: PowerAlloc) -> None:
    if not 1 <= q <= alloc.n_users:
        raise DomainError('user {q} outside 1..{k}'.format(
            q=q, k=alloc.n_users))


def lower_bound_sinr(eta: Union[PowerAlloc, np.ndarray], b: np.ndarray,
                     a: np.ndarray, rho_d: float) -> np.ndarray:
    """SINR of every user under the lower bound, shape (n_users,)."""
    alloc = as_alloc(eta)
    amplitude = np.sum(np.sqrt(alloc.eta[:, 1:]) * b[:, 1:], axis=0)
    interference = np.einsum('pk,pqk->q', alloc.eta, a[:, 1:, :])
    return rho_d * amplitude ** 2 / (rho_d * interference + 1.0)


def se_lower_bound(q: int, eta: Union[PowerAlloc, np.ndarray],
                   stats: EstimatorStats, rho_d: float, omega: float = 1.0,
                   first_slot: str = 'R') -> Tuple[float, float]:
    """Lower bound on the SE of user ``q`` as (SE, SINR); ``omega`` is
    the pre-log factor."""
    alloc = as_alloc(eta)
    check_user(q, alloc)
    b, a = link_coefficients(stats, first_slot)
    sinr = float(lower_bound_sinr(alloc, b, a, rho_d)[q - 1])
    return omega * math.log2(1.0 + sinr), sinr


def pair_traces(stats: EstimatorStats, q: int, q2: int,
                first_slot: str = 'R') -> np.ndarray:
    """Tr(X_pq,i·B_pq2,j) for all APs and path pairs, shape
    (n_tx, L, L)."""
    x = _first_slot(stats, first_slot)
    return np.einsum('piab,pjba->pij', x[:, q], stats.B[:, q2]).real


def _same_link_weights(q: int, paths, grid: DDGridSpec, isi_form: str,
                       dense: bool) -> np.ndarray:
    """Per-row (χ, off-diagonal weight) of every AP and path pair of
    link q, shape (2, n_tx, L, L, MN). The weight is κ for the row-sum
    form and the off-diagonal energy 1 − χ otherwise."""
    n_tx, n_paths = paths.ell.shape[0], paths.n_paths
    out = np.zeros((2, n_tx, n_paths, n_paths, grid.size))
    out[1] = 1.0
    for p in range(n_tx):
        link = paths.link(p, q)
        ops = [build_T(grid, x) for x in link] if dense else None
        for i in range(n_paths):
            out[0, p, i, i], out[1, p, i, i] = 1.0, 0.0
            for j in range(n_paths):
                if i == j or (not dense and link[i].ell != link[j].ell):
                    continue
                if dense:
                    chi, kappa = chi_kappa_dense_rows(ops[i], ops[j])
                else:
                    chi, kappa = chi_kappa_rows(grid, link[i], link[j])
                out[0, p, i, j] = chi
                out[1, p, i, j] = kappa if isi_form == 'row-sum' \
                    else 1.0 - chi
    return out


def _check_full(grid: DDGridSpec, isi_form: str, max_mn: int) -> None:
    if isi_form not in ISI_FORMS:
        raise ConfigError('unknown ISI form {f!r}'.format(f=isi_form))
    if grid.size > max_mn:
        raise UseLowerBound('lattice size {s} above {g}; use the lower '
                            'bound'.format(s=grid.size, g=max_mn))


def se_full(q: int, eta: Union[PowerAlloc, np.ndarray],
            stats: EstimatorStats, paths, grid: DDGridSpec, rho_d: float,
            omega: Optional[float] = None, isi_form: str = 'row-sum',
            dense: bool = False, max_mn: int = MAX_DENSE_MN) \
        -> Tuple[float, np.ndarray]:
    """SE of user ``q`` averaged over the MN lattice rows, as
    (SE, per-row SINR).

    The own-link interference of a path pair i ≠ j carries the per-row
    weight χ + κ of T_i·T_j† (``isi_form='row-sum'``) or χ plus the
    off-diagonal row energy (``'energy'``, the exact second moment,
    which equals the lower bound). ``dense`` computes χ and κ from
    explicit operator products instead of the closed form.

    :raises UseLowerBound: for lattices larger than ``max_mn``.
    """
    alloc = as_alloc(eta)
    check_user(q, alloc)
    _check_full(grid, isi_form, max_mn)
    if omega is None:
        omega = prelog(grid, 'otfs')
    b, a = link_coefficients(stats, 'R')
    signal = np.sum(np.sqrt(alloc.eta[:, q]) * b[:, q]) ** 2
    chi_w = _same_link_weights(q, paths, grid, isi_form, dense)
    traces = pair_traces(stats, q, q)
    own = np.einsum('p,pij,pijv->v', alloc.eta[:, q], traces,
                    chi_w[0] + chi_w[1])
    others = np.delete(np.arange(alloc.n_users + 1), q)
    iui = np.sum(alloc.eta[:, others] * a[:, q, others])
    sinr = rho_d * signal / (rho_d * (own + iui) + 1.0)
    return float(omega * np.mean(np.log2(1.0 + sinr))), sinr


@dataclass(frozen=True)
class ComponentPowers:
    """Received powers of desired signal, precoding gain uncertainty,
    inter-symbol and inter-user interference, without the ρ_d scaling."""

    ds2: float
    bu: float
    isi: float
    iui: float

    @property
    def sinr_denominator(self) -> float:
        return self.bu + self.isi + self.iui

    def sinr(self, rho_d: float) -> float:
        return rho_d * self.ds2 / (rho_d * self.sinr_denominator + 1.0)


def component_powers(q: int, eta: Union[PowerAlloc, np.ndarray],
                     stats: EstimatorStats, paths=None,
                     grid: Optional[DDGridSpec] = None,
                     isi_form: str = 'energy',
                     first_slot: str = 'R') -> ComponentPowers:
    """The four received-power components of user ``q``.

    Without ``paths`` and ``grid`` the bound split applies: pairs of
    distinct paths count fully as inter-symbol interference. With them,
    the row-averaged χ moves into the uncertainty term and the rest
    stays inter-symbol interference.
    """
    alloc = as_alloc(eta)
    check_user(q, alloc)
    b, a = link_coefficients(stats, first_slot)
    eta_q = alloc.eta[:, q]
    traces = pair_traces(stats, q, q, first_slot)
    own = np.einsum('p,pii->', eta_q, traces)
    n_paths = traces.shape[-1]
    off = ~np.eye(n_paths, dtype=bool)
    if paths is None or grid is None:
        bu = own
        isi = np.sum(eta_q[:, None, None] * traces * off)
    else:
        _check_full(grid, isi_form, MAX_DENSE_MN)
        w = _same_link_weights(q, paths, grid, isi_form, False).mean(axis=-1)
        bu = own + np.sum(eta_q[:, None, None] * traces * w[0] * off)
        isi = np.sum(eta_q[:, None, None] * traces * w[1] * off)
    others = np.delete(np.arange(alloc.n_users + 1), q)
    return ComponentPowers(
        ds2=float(np.sum(np.sqrt(eta_q) * b[:, q]) ** 2),
        bu=float(bu), isi=float(isi),
        iui=float(np.sum(alloc.eta[:, others] * a[:, q, others])))


def sensing_coefficients(stats: EstimatorStats, geometry) \
        -> Tuple[np.ndarray, np.ndarray]:
    """Per-(AP, stream) echo coefficients c and clutter coefficients d,
    shape (n_tx, n_users + 1).

    The precoder transmits the conjugate estimate, so the echo carries
    Tr(V_pr·conj(B)·V_pr†).
    """
    b_sum = stats.B.sum(axis=2)
    v = geometry.v
    echo = np.einsum('prab,pqbc,prdc->pqrad', v, b_sum.conj(), v.conj())
    echo = np.einsum('pqraa->pqr', echo).real
    c = geometry.rcs_variance * np.einsum('pr,pqr->pq', geometry.beta_radar,
                                          echo)
    rx_gain = np.einsum('praa->pr', geometry.r_rx).real
    tx_load = np.einsum('prab,pqba->pqr', geometry.r_tx, b_sum).real
    d = np.einsum('pr,pqr->pq', rx_gain, tx_load)
    return np.maximum(c, 0.0), np.maximum(d, 0.0)


@dataclass(frozen=True)
class SensingReport:
    """Numerator, denominator and ratio of the sensing SINR."""

    numerator: float
    denominator: float

    @property
    def sinr(self) -> float:
        return self.numerator / self.denominator

    @property
    def sinr_db(self) -> float:
        return 10.0 * math.log10(self.sinr) if self.sinr > 0 else -math.inf


def sensing_sinr(eta: Union[PowerAlloc, np.ndarray], stats: EstimatorStats,
                 geometry, rho_d: float) -> SensingReport:
    """Sensing SINR of the target echo against target-free clutter and
    the noise of N_rx·M_t receive antennas."""
    alloc = as_alloc(eta)
    c, d = sensing_coefficients(stats, geometry)
    return SensingReport(
        numerator=float(rho_d * np.sum(alloc.eta * c)),
        denominator=float(rho_d * np.sum(alloc.eta * d)
                          + geometry.n_rx * geometry.n_antennas))


@dataclass(frozen=True)
class SEReport:
    """SE figures of one user."""

    user: int
    se_lower: float
    sinr: float
    components: ComponentPowers
    se_full: Optional[float] = None
    row_sinr: Optional[np.ndarray] = field(default=None, repr=False)


def se_report(eta: Union[PowerAlloc, np.ndarray], stats: EstimatorStats,
              rho_d: float, grid: DDGridSpec, paths=None,
              isi_form: str = 'row-sum', signal_kind: str = 'otfs',
              max_mn: int = MAX_DENSE_MN) -> List[SEReport]:
    """SE reports of all users. The full expression is added when paths
    are given and the lattice is small enough."""
    alloc = as_alloc(eta)
    omega = prelog(grid, signal_kind)
    reports = []
    for q in range(1, alloc.n_users + 1):
        se_lo, sinr = se_lower_bound(q, alloc, stats, rho_d, omega)
        full, rows = None, None
        if paths is not None and signal_kind == 'otfs':
            try:
                full, rows = se_full(q, alloc, stats, paths, grid, rho_d,
                                     omega, isi_form, max_mn=max_mn)
            except UseLowerBound:
                log.debug('user %d: lattice too large for full SE', q)
        reports.append(SEReport(
            user=q, se_lower=se_lo, sinr=sinr, se_full=full, row_sinr=rows,
            components=component_powers(q, alloc, stats)))
    return reports
