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

"""Max-min fair downlink power allocation under a sensing SINR
constraint and per-AP power budgets.

The outer loop alternates the quadratic-transform auxiliaries y with a
convex inner problem in η. The inner problem is posed in the scaled
variables x_pq = η_pq·b_pq, the share of AP p's budget spent on stream
q; this keeps the conic solver well conditioned although the physical
coefficients span many orders of magnitude.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog

from otfs_isac.config import ExperimentConfig
from otfs_isac.errors import (
    ConfigError, DegenerateScenario, Infeasible, IsacError, NonMonotone)
from otfs_isac.estimation import EstimatorStats
from otfs_isac.performance import (
    PowerAlloc, as_alloc, link_coefficients, lower_bound_sinr,
    sensing_coefficients)


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SINRCoefficients:  # pylint: disable=too-many-instance-attributes
    """Coefficients of the user and sensing SINRs as functions of η.

    ``a`` has shape (n_tx, n_users + 1, n_users + 1), ``b``, ``c`` and
    ``d`` have shape (n_tx, n_users + 1); column 0 is the sensing beam.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    rho_d: float
    gamma_s: float
    noise_const: float
    sensing_beam: bool = True

    @property
    def n_users(self) -> int:
        return self.b.shape[1] - 1

    @property
    def active(self) -> np.ndarray:
        """Entries of η that may carry power."""
        active = self.b > 0
        if not self.sensing_beam:
            active[:, 0] = False
        return active

    def _per_budget(self, values: np.ndarray) -> np.ndarray:
        active = self.active
        return np.divide(values, self.b, out=np.zeros_like(values),
                         where=active)

    @property
    def signal_gain(self) -> np.ndarray:
        """√(ρ_d·b), the amplitude gain per unit √x."""
        return np.sqrt(self.rho_d * self.b * self.active)

    @property
    def interference_gain(self) -> np.ndarray:
        """ρ_d·a[p, q, q']/b[p, q'] for users q, shape
        (n_tx, n_users, n_users + 1)."""
        active = self.active[:, None, :]
        b = np.broadcast_to(self.b[:, None, :], self.a[:, 1:].shape)
        return np.divide(self.rho_d * self.a[:, 1:], b,
                         out=np.zeros_like(b), where=active)

    @property
    def echo_gain(self) -> np.ndarray:
        return self._per_budget(self.rho_d * self.c)

    @property
    def clutter_gain(self) -> np.ndarray:
        return self._per_budget(self.rho_d * self.d)

    def user_sinr(self, eta: Union[PowerAlloc, np.ndarray]) -> np.ndarray:
        return lower_bound_sinr(eta, self.b, self.a, self.rho_d)

    def min_sinr(self, eta: Union[PowerAlloc, np.ndarray]) -> float:
        return float(np.min(self.user_sinr(eta)))

    def sensing_terms(self, eta: Union[PowerAlloc, np.ndarray]) \
            -> Tuple[float, float]:
        """(numerator, denominator) of the sensing SINR."""
        e = as_alloc(eta).eta
        return (float(self.rho_d * np.sum(e * self.c)),
                float(self.rho_d * np.sum(e * self.d) + self.noise_const))

    def sensing_sinr(self, eta: Union[PowerAlloc, np.ndarray]) -> float:
        num, den = self.sensing_terms(eta)
        return num / den if den > 0 else 0.0

    def ap_load(self, eta: Union[PowerAlloc, np.ndarray]) -> np.ndarray:
        return as_alloc(eta).ap_load(self.b)

    def is_feasible(self, eta: Union[PowerAlloc, np.ndarray],
                    tol: float = 1e-6) -> bool:
        """Per-AP budgets, inactive entries and the sensing constraint,
        each within ``tol``."""
        e = as_alloc(eta).eta
        if np.any(self.ap_load(e) > 1.0 + tol):
            return False
        if np.any(e[~self.active] * self.b[~self.active] > tol):
            return False
        if self.gamma_s > 0:
            num, den = self.sensing_terms(e)
            return num >= self.gamma_s * den - tol * max(1.0, num)
        return True


def extract_coefficients(stats: EstimatorStats, geometry, rho_d: float,
                         gamma_s: float = 0.0, first_slot: str = 'B',
                         sensing_beam: bool = True) -> SINRCoefficients:
    """Coefficients from estimator statistics. Inside the optimizer the
    estimate covariance B stands in for the unknown true correlation R,
    so ``first_slot`` defaults to B."""
    b, a = link_coefficients(stats, first_slot)
    if geometry is None:
        if gamma_s > 0:
            raise ConfigError('sensing threshold without sensing geometry',
                              key='gamma_s_db')
        c, d, noise = np.zeros_like(b), np.zeros_like(b), 0.0
    else:
        c, d = sensing_coefficients(stats, geometry)
        noise = float(geometry.n_rx * geometry.n_antennas)
    return SINRCoefficients(a=a, b=b, c=c, d=d, rho_d=rho_d,
                            gamma_s=gamma_s, noise_const=noise,
                            sensing_beam=sensing_beam)


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the outer loop and the conic inner solver. An
    empty ``solver`` lets cvxpy pick an installed solver."""

    epsilon: float = 1e-4
    max_outer: int = 100
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    eta_floor: float = 1e-12
    solver: str = ''
    initial_sensing_fraction: float = 0.1

    def __post_init__(self) -> None:
        for name in ('epsilon', 'feasibility_tol', 'optimality_tol',
                     'eta_floor'):
            if not getattr(self, name) > 0:
                raise ConfigError('tolerance must be positive', key=name)
        if self.max_outer < 1:
            raise ConfigError('needs at least one outer iteration',
                              key='max_outer')

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> 'SolverOptions':
        return cls(epsilon=config.epsilon, max_outer=config.max_outer,
                   feasibility_tol=config.feasibility_tol,
                   optimality_tol=config.optimality_tol,
                   eta_floor=config.eta_floor, solver=config.solver)

    def solve_kwargs(self) -> Dict[str, Any]:
        """Keyword arguments for :meth:`cvxpy.Problem.solve`."""
        name = self.solver.upper()
        if not name:
            return {}
        kwargs = {'solver': name}  # type: Dict[str, Any]
        if name == 'CLARABEL':
            kwargs.update(tol_feas=self.feasibility_tol,
                          tol_gap_abs=self.optimality_tol,
                          tol_gap_rel=self.optimality_tol)
        elif name == 'ECOS':
            kwargs.update(feastol=self.feasibility_tol,
                          abstol=self.optimality_tol,
                          reltol=self.optimality_tol)
        elif name == 'SCS':
            kwargs.update(eps_abs=self.optimality_tol,
                          eps_rel=self.optimality_tol)
        return kwargs


@dataclass
class IterState:
    """State of the outer loop with one trace record per accepted
    iterate."""

    eta: PowerAlloc
    y: np.ndarray
    z: float
    t: int = 0
    trace: List[Dict[str, float]] = field(default_factory=list)

    def record(self, t: int, z: float, eta: PowerAlloc, y: np.ndarray,
               coeffs: SINRCoefficients) -> None:
        """Accepts a new iterate; ``z`` is the value of the inner
        problem that produced it.

        :raises NonMonotone: when the max-min SINR decreases.
        """
        min_sinr = coeffs.min_sinr(eta)
        if self.trace and min_sinr < self.z - 1e-8:
            raise NonMonotone('min SINR fell from {a} to {b} at iteration '
                              '{t}'.format(a=self.z, b=min_sinr, t=t))
        self.eta, self.y, self.z, self.t = eta, y, min_sinr, t
        self.trace.append({
            't': t,
            'z': float(z),
            'min_sinr': min_sinr,
            'sensing_sinr': coeffs.sensing_sinr(eta),
            'max_ap_power': float(np.max(coeffs.ap_load(eta))),
        })
        log.debug('iteration %d: z %.6g, min SINR %.6g', t, z, min_sinr)


def _equal_from_traces(b: np.ndarray, fraction: float) -> PowerAlloc:
    if not 0.0 <= fraction < 1.0:
        raise ConfigError('fraction {f} outside [0, 1)'.format(f=fraction),
                          key='sensing_fraction')
    users = b[:, 1:].sum(axis=1)
    if not np.any(users > 0):
        raise DegenerateScenario('no AP has any usable channel estimate')
    beam = (b[:, 0] > 0) & (fraction > 0)
    share = np.where(beam, 1.0 - fraction, 1.0)
    eta = np.zeros_like(b)
    eta[:, 1:] = np.divide(share, users, out=np.zeros_like(users),
                           where=users > 0)[:, None]
    eta[:, 0] = np.divide(fraction, b[:, 0], out=np.zeros_like(users),
                          where=beam)
    return PowerAlloc(eta)


def equal_power(stats: EstimatorStats, fraction: float = 0.0) -> PowerAlloc:
    """Every AP splits its budget equally over its users, after setting
    aside ``fraction`` for the sensing beam.

    :raises DegenerateScenario: when all estimate covariances vanish.
    """
    return _equal_from_traces(stats.traces(), fraction)


def update_y(eta: Union[PowerAlloc, np.ndarray],
             coeffs: SINRCoefficients) -> np.ndarray:
    """Optimal quadratic-transform auxiliaries for fixed η."""
    e = as_alloc(eta).eta
    amplitude = math.sqrt(coeffs.rho_d) * np.sum(
        np.sqrt(e[:, 1:]) * coeffs.b[:, 1:], axis=0)
    interference = coeffs.rho_d * np.einsum('pk,pqk->q', e,
                                            coeffs.a[:, 1:, :])
    return amplitude / (interference + 1.0)


def _max_sensing_lp(coeffs: SINRCoefficients) \
        -> Tuple[float, Optional[np.ndarray]]:
    """Maximizes the sensing SINR over the budget-feasible x as a
    linear program in the Charnes-Cooper variables (u, t) = (x, 1)/DEN."""
    active = coeffs.active
    n_tx, n_cols = active.shape
    if coeffs.noise_const <= 0 or not np.any(active):
        return 0.0, None
    n = active.size
    budgets = np.zeros((n_tx, n + 1))
    for p in range(n_tx):
        budgets[p, p * n_cols:(p + 1) * n_cols] = 1.0
    budgets[:, -1] = -1.0
    res = linprog(np.append(-coeffs.echo_gain.ravel(), 0.0),
                  A_ub=budgets, b_ub=np.zeros(n_tx),
                  A_eq=np.append(coeffs.clutter_gain.ravel(),
                                 coeffs.noise_const)[None, :],
                  b_eq=[1.0],
                  bounds=[(0.0, None) if a else (0.0, 0.0)
                          for a in active.ravel()] + [(0.0, None)],
                  method='highs')
    if res.status != 0:
        raise IsacError('sensing feasibility program failed: {m}'.format(
            m=res.message))
    u, t = res.x[:-1], res.x[-1]
    share = (u / t).reshape(n_tx, n_cols) if t > 0 else None
    return max(0.0, -float(res.fun)), share


def max_sensing_sinr(coeffs: SINRCoefficients) -> float:
    """The largest sensing SINR any budget-feasible allocation reaches;
    certificate for :exc:`Infeasible`."""
    return _max_sensing_lp(coeffs)[0]


def inner_solve(y: np.ndarray, coeffs: SINRCoefficients,
                options: Optional[SolverOptions] = None) \
        -> Tuple[PowerAlloc, float]:
    """Maximizes z subject to the per-user quadratic-transform
    constraints, the sensing constraint and the per-AP budgets, for
    fixed y. Returns the allocation and z.

    :raises Infeasible: when the sensing constraint cannot be met.
    """
    options = options or SolverOptions()
    active = coeffs.active
    x = cp.Variable(active.shape, nonneg=True)
    z = cp.Variable()
    constraints = [cp.sum(x, axis=1) <= 1.0]
    if not np.all(active):
        constraints.append(cp.multiply((~active).astype(float), x) == 0)
    gain, inter = coeffs.signal_gain, coeffs.interference_gain
    for q in range(1, coeffs.n_users + 1):
        yq = float(y[q - 1])
        signal = cp.sum(cp.multiply(gain[:, q], cp.sqrt(x[:, q])))
        interference = cp.sum(cp.multiply(inter[:, q - 1, :], x))
        constraints.append(
            2.0 * yq * signal - yq ** 2 * (interference + 1.0) >= z)
    if coeffs.gamma_s > 0:
        margin = coeffs.echo_gain - coeffs.gamma_s * coeffs.clutter_gain
        constraints.append(cp.sum(cp.multiply(margin, x))
                           >= coeffs.gamma_s * coeffs.noise_const)
    problem = cp.Problem(cp.Maximize(z), constraints)
    try:
        problem.solve(**options.solve_kwargs())
    except cp.error.SolverError as err:
        raise IsacError('inner solver failed: {e}'.format(e=err)) from err
    if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        raise Infeasible('sensing SINR {g:.4g} unreachable'.format(
            g=coeffs.gamma_s), max_sensing_sinr(coeffs))
    if x.value is None or z.value is None:
        raise IsacError('inner solver ended with status {s}'.format(
            s=problem.status))
    share = np.where(active, np.clip(x.value, 0.0, None), 0.0)
    share[share < options.eta_floor] = 0.0
    share /= np.maximum(share.sum(axis=1), 1.0)[:, None]
    eta = np.divide(share, coeffs.b, out=np.zeros_like(share), where=active)
    return PowerAlloc(eta), float(z.value)


def solve_maxmin(coeffs: SINRCoefficients,
                 options: Optional[SolverOptions] = None,
                 initial: Optional[Union[PowerAlloc, np.ndarray]] = None) \
        -> Tuple[PowerAlloc, IterState]:
    """Runs the outer loop from ``initial``, or from equal power, with
    a sensing-beam seed when equal power misses the sensing threshold.
    Only improving iterates are accepted; the loop stops when the gain
    falls to ``options.epsilon`` or after ``options.max_outer``
    iterations.

    :raises Infeasible: when no allocation reaches the sensing threshold.
    """
    options = options or SolverOptions()
    if coeffs.gamma_s > 0:
        best = max_sensing_sinr(coeffs)
        if coeffs.gamma_s > best:
            raise Infeasible('sensing SINR {g:.4g} above the achievable '
                             '{m:.4g}'.format(g=coeffs.gamma_s, m=best), best)
    if initial is None:
        eta = _equal_from_traces(coeffs.b * coeffs.active, 0.0)
        if not coeffs.is_feasible(eta) and coeffs.sensing_beam:
            eta = _equal_from_traces(coeffs.b * coeffs.active,
                                     options.initial_sensing_fraction)
    else:
        eta = as_alloc(initial)
    feasible = coeffs.is_feasible(eta)
    state = IterState(eta=eta, y=update_y(eta, coeffs), z=0.0)
    if feasible:
        state.record(0, coeffs.min_sinr(eta), eta, state.y, coeffs)
    for t in range(1, options.max_outer + 1):
        y = update_y(state.eta, coeffs)
        candidate, z_inner = inner_solve(y, coeffs, options)
        z_new = coeffs.min_sinr(candidate)
        if feasible and z_new <= state.z:
            if z_new < state.z - 1e-8 * max(1.0, state.z):
                log.warning('iteration %d: rejected min SINR %.6g below '
                            '%.6g', t, z_new, state.z)
            break
        gain = z_new - state.z if feasible else math.inf
        feasible = True
        state.record(t, z_inner, candidate, y, coeffs)
        if gain <= options.epsilon:
            break
    if not feasible:
        raise IsacError('no feasible allocation found')
    return state.eta, state


def maxmin_allocate(stats: EstimatorStats, geometry, rho_d: float,
                    gamma_s: float = 0.0,
                    options: Optional[SolverOptions] = None,
                    sensing_beam: bool = True,
                    initial: Optional[Union[PowerAlloc, np.ndarray]] = None) \
        -> Tuple[PowerAlloc, IterState]:
    """Max-min fair allocation for estimator statistics and a sensing
    geometry (None disables sensing)."""
    coeffs = extract_coefficients(stats, geometry, rho_d, gamma_s,
                                  sensing_beam=sensing_beam)
    return solve_maxmin(coeffs, options, initial)
