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

"""Experiment drivers: per-user SE distributions, the sensing versus
communication tradeoff, the subcarrier bandwidth sweep, the overhead
table, and the writer of result files.

Each experiment is a pure function of its configuration: scenario
``s`` is drawn from a seed derived from the master seed and ``s``, so
neither the worker count nor the execution order changes any result.
"""

import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
import psutil
import yaml
from tqdm import tqdm

from otfs_isac import streams
from otfs_isac.allocator import (
    SolverOptions, equal_power, extract_coefficients, max_sensing_sinr,
    solve_maxmin)
from otfs_isac.channel import IndexBounds, PathTable, derive_index_bounds, \
    sample_path_table
from otfs_isac.config import ExperimentConfig
from otfs_isac.errors import ConfigError, Infeasible
from otfs_isac.estimation import EstimatorStats, UplinkPowers, \
    link_statistics
from otfs_isac.geometry import LinkBudget, Scenario, SensingGeometry, \
    comm_correlations, link_budget, place_scenario, sensing_geometry
from otfs_isac.ofdm import EVA_TAU_MAX, EVB_TAU_MAX, SWEEP_DELTA_F, \
    SWEEP_PILOT_LENGTHS, OFDMConfig, bt_pilot_model, ofdm_prelog, \
    overhead_frame
from otfs_isac.performance import PowerAlloc, component_powers, \
    link_coefficients, lower_bound_sinr, prelog


log = logging.getLogger(__name__)

SIGNALS = ('otfs', 'ofdm')
POWERS = ('equal', 'opt')
CSI_MODES = ('est', 'perfect')
COMPONENTS = ('ds2', 'bu', 'isi', 'iui')


def scenario_seed(seed: int, index: int) -> int:
    """Seed of scenario ``index`` derived from the master seed."""
    rng = streams.substream(seed, streams.SCENARIO, index)
    return int(rng.integers(0, 2 ** 63 - 1))


@dataclass(frozen=True)
class ScenarioModel:  # pylint: disable=too-many-instance-attributes
    """A drawn scenario with everything the SE and sensing expressions
    need. ``precoding`` holds the sensing geometry toward the hotspot
    center, ``target`` the one used for evaluation."""

    config: ExperimentConfig
    seed: int
    scenario: Scenario
    budget: LinkBudget
    R: np.ndarray
    precoding: SensingGeometry
    target: SensingGeometry
    bounds: Optional[IndexBounds] = None
    paths: Optional[PathTable] = None

    @property
    def beams(self) -> Optional[np.ndarray]:
        return self.precoding.beam if self.config.sensing_beam else None

    def stats(self, signal: str = 'otfs', perfect_csi: Optional[bool] = None,
              pilot_len: Optional[int] = None) -> EstimatorStats:
        """Estimator statistics of the EP scheme (OTFS) or of block-type
        pilots (OFDM)."""
        if perfect_csi is None:
            perfect_csi = self.config.perfect_csi
        if signal == 'otfs':
            return link_statistics(self.config, self.R, self.beams,
                                   perfect_csi)
        if signal == 'ofdm':
            return bt_pilot_model(
                self.R, OFDMConfig.from_config(self.config, pilot_len),
                UplinkPowers.from_config(self.config), self.beams,
                perfect_csi)
        raise ConfigError('unknown signal {s!r}'.format(s=signal),
                          key='signal')

    def omega(self, signal: str = 'otfs',
              pilot_len: Optional[int] = None) -> float:
        if signal == 'ofdm':
            return ofdm_prelog(OFDMConfig.from_config(self.config, pilot_len))
        return prelog(self.config.grid, signal)


def build_model(config: ExperimentConfig, seed: int,
                with_paths: bool = True) -> ScenarioModel:
    """Draws the scenario of ``seed`` and derives its statistics;
    ``with_paths`` also draws the lattice indices of all paths."""
    scenario = place_scenario(config, seed)
    budget = link_budget(scenario, config)
    bounds, paths = None, None
    if with_paths:
        bounds = derive_index_bounds(config)
        paths = sample_path_table(seed, config, bounds)
    return ScenarioModel(
        config=config, seed=seed, scenario=scenario, budget=budget,
        R=comm_correlations(budget, config),
        precoding=sensing_geometry(scenario, budget, config, 'center'),
        target=sensing_geometry(scenario, budget, config,
                                config.target_position),
        bounds=bounds, paths=paths)


def worker_count(threads: int) -> int:
    """Configured worker count; 0 means one per physical core."""
    if threads > 0:
        return threads
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def pool_map(func: Callable[[Any], Any], items: Iterable[Any],
             threads: int = 1, progress: bool = False,
             desc: Optional[str] = None) -> List[Any]:
    """Maps ``func`` over ``items`` in order, optionally on a thread
    pool and with a progress bar."""
    items = list(items)
    workers = worker_count(threads)
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in tqdm(items, desc=desc,
                                      disable=not progress)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(func, items), total=len(items), desc=desc,
                         disable=not progress))


def first_slot(config: ExperimentConfig) -> str:
    """True correlations R when evaluating against the real channel,
    estimate covariances B for the optimizer's own model."""
    return 'R' if config.evaluation == 'true' else 'B'


def user_se(eta: PowerAlloc, stats: EstimatorStats, config: ExperimentConfig,
            omega: float) -> np.ndarray:
    """Lower-bound SE of every user."""
    b, a = link_coefficients(stats, first_slot(config))
    return omega * np.log2(1.0 + lower_bound_sinr(eta, b, a, config.rho_d))


def optimize(model: ScenarioModel, stats: EstimatorStats,
             gamma_s: Optional[float] = None,
             options: Optional[SolverOptions] = None):
    """Max-min allocation of a scenario; returns (η, state) or
    (None, None) when the sensing threshold is out of reach."""
    config = model.config
    gamma_s = config.gamma_s if gamma_s is None else gamma_s
    coeffs = extract_coefficients(stats, model.precoding, config.rho_d,
                                  gamma_s, sensing_beam=config.sensing_beam)
    try:
        return solve_maxmin(coeffs, options or SolverOptions.from_config(
            config))
    except Infeasible as err:
        log.warning('scenario %d: sensing SINR out of reach, at most '
                    '%.4g', model.seed, err.max_sensing_sinr)
        return None, None


@dataclass(frozen=True)
class CDFResult:
    """Per-(scenario, user) SE samples, their summary with the
    95%-likely SE, and the allocator convergence traces."""

    frame: pd.DataFrame
    summary: pd.DataFrame
    traces: List[Dict[str, Any]]


def _cdf_scenario(config: ExperimentConfig, index: int) \
        -> Dict[str, Any]:
    model = build_model(config, scenario_seed(config.seed, index),
                        with_paths=False)
    columns = {}  # type: Dict[str, np.ndarray]
    traces = []
    feasible, limit = True, math.nan
    for signal in SIGNALS:
        omega = model.omega(signal)
        for csi in CSI_MODES:
            stats = model.stats(signal, perfect_csi=csi == 'perfect')
            eta_eq = equal_power(stats, config.sensing_fraction)
            eta_opt, state = optimize(model, stats)
            allocs = {'equal': eta_eq, 'opt': eta_opt}
            for power in POWERS:
                name = 'se_{s}_{p}_{c}'.format(s=signal, p=power, c=csi)
                eta = allocs[power]
                columns[name] = np.full(config.n_users, math.nan) \
                    if eta is None else user_se(eta, stats, config, omega)
            if signal == 'otfs' and csi == 'est':
                feasible = eta_opt is not None
                if not feasible:
                    limit = max_sensing_sinr(extract_coefficients(
                        stats, model.precoding, config.rho_d, config.gamma_s,
                        sensing_beam=config.sensing_beam))
                for power in POWERS:
                    eta = allocs[power]
                    for part in COMPONENTS:
                        columns['{c}_{p}'.format(c=part, p=power)] = \
                            np.full(config.n_users, math.nan)
                    if eta is None:
                        continue
                    for q in range(1, config.n_users + 1):
                        comp = component_powers(q, eta, stats,
                                                first_slot=first_slot(config))
                        for part in COMPONENTS:
                            columns['{c}_{p}'.format(c=part, p=power)][
                                q - 1] = getattr(comp, part)
                if state is not None:
                    traces = [dict(r, scenario=index) for r in state.trace]
    columns['optimized_feasible'] = np.full(config.n_users, feasible)
    columns['max_sensing_sinr'] = np.full(config.n_users, limit)
    return {'columns': columns, 'traces': traces}


def likely_summary(frame: pd.DataFrame, columns: Sequence[str]) \
        -> pd.DataFrame:
    """Mean and 95%-likely (5th percentile) value of SE columns."""
    return pd.DataFrame({
        'column': list(columns),
        'mean': [frame[c].mean() for c in columns],
        'likely95': [frame[c].quantile(0.05) for c in columns],
    })


def run_cdf_experiment(config: ExperimentConfig,
                       progress: bool = False) -> CDFResult:
    """SE of every user in ``config.n_scenarios`` scenarios for OTFS and
    OFDM, equal and optimized power, estimated and perfect CSI."""
    results = pool_map(lambda s: _cdf_scenario(config, s),
                       range(config.n_scenarios), config.threads, progress,
                       'cdf')
    frames, traces = [], []
    for index, result in enumerate(results):
        part = pd.DataFrame(result['columns'])
        part.insert(0, 'user', np.arange(1, config.n_users + 1))
        part.insert(0, 'scenario', index)
        frames.append(part)
        traces.extend(result['traces'])
    frame = pd.concat(frames, ignore_index=True)
    se_columns = [c for c in frame.columns if c.startswith('se_')]
    return CDFResult(frame=frame, summary=likely_summary(frame, se_columns),
                     traces=traces)


@dataclass(frozen=True)
class TradeoffResult:
    """Per-scenario points, the scenario-averaged curve per variant and
    the largest feasible sensing threshold per scenario and variant."""

    points: pd.DataFrame
    curve: pd.DataFrame
    limits: pd.DataFrame


def default_gamma_list(limit_db: float, count: int = 12) -> List[float]:
    """Thresholds from well inside the feasible region to just beyond
    its edge, in dB."""
    return [float(g) for g in np.linspace(limit_db - 40.0, limit_db + 2.0,
                                          count)]


def _to_db(value: float) -> float:
    return 10.0 * math.log10(value) if value > 0 else -math.inf


def _tradeoff_variant(config: ExperimentConfig, index: int, antennas: int,
                      beam: bool, gammas_db: Sequence[float]) \
        -> Dict[str, Any]:
    cfg = config.replace(n_antennas=antennas, sensing_beam=beam)
    model = build_model(cfg, scenario_seed(config.seed, index),
                        with_paths=False)
    stats = model.stats('otfs')
    base = extract_coefficients(stats, model.precoding, cfg.rho_d, 0.0,
                                sensing_beam=beam)
    limit = max_sensing_sinr(base)
    options = SolverOptions.from_config(cfg)
    omega = model.omega('otfs')
    rows = []
    best_se = -math.inf
    # a solution at a higher threshold stays feasible at lower ones
    for gamma_db in sorted(gammas_db, reverse=True):
        gamma = 10.0 ** (gamma_db / 10.0)
        if gamma <= limit:
            try:
                eta, _ = solve_maxmin(dataclasses.replace(
                    base, gamma_s=gamma), options)
                best_se = max(best_se, float(np.min(
                    user_se(eta, stats, cfg, omega))))
            except Infeasible:
                log.debug('scenario %d: infeasible at %.2f dB', index,
                          gamma_db)
        min_se = best_se if gamma <= limit and best_se > -math.inf \
            else math.nan
        rows.append({'n_antennas': antennas, 'beam': beam,
                     'gamma_db': gamma_db, 'scenario': index,
                     'min_se': min_se, 'feasible': not math.isnan(min_se)})
    rows.reverse()
    return {'rows': rows, 'limit': {'n_antennas': antennas, 'beam': beam,
                                    'scenario': index,
                                    'max_gamma_db': _to_db(limit)}}


def run_tradeoff_sweep(config: ExperimentConfig,
                       gamma_list: Optional[Sequence[float]] = None,
                       progress: bool = False) -> TradeoffResult:
    """Max-min SE against the sensing threshold (dB) for every antenna
    count of ``config.sweep_antennas``, with and without the sensing
    beam. Without a threshold list, twelve points around the largest
    achievable sensing SINR of the first scenario are used."""
    if gamma_list is None:
        gamma_list = config.gamma_sweep_db or None
    if gamma_list is None:
        cfg = config.replace(n_antennas=max(config.sweep_antennas),
                             sensing_beam=True)
        model = build_model(cfg, scenario_seed(config.seed, 0),
                            with_paths=False)
        top = max_sensing_sinr(extract_coefficients(
            model.stats('otfs'), model.precoding, cfg.rho_d, 0.0))
        gamma_list = default_gamma_list(_to_db(top))
    gammas = sorted(float(g) for g in gamma_list)
    tasks = [(s, m, beam) for s in range(config.n_scenarios)
             for m in config.sweep_antennas for beam in (True, False)]
    results = pool_map(
        lambda task: _tradeoff_variant(config, task[0], task[1], task[2],
                                       gammas),
        tasks, config.threads, progress, 'tradeoff')
    points = pd.DataFrame([r for res in results for r in res['rows']])
    points = points.sort_values(['n_antennas', 'beam', 'gamma_db',
                                 'scenario'], ascending=[True, False, True,
                                                         True],
                                kind='mergesort', ignore_index=True)
    curve = points.groupby(['n_antennas', 'beam', 'gamma_db'], sort=False) \
        .agg(avg_min_se=('min_se', 'mean'),
             feasible_fraction=('feasible', 'mean')).reset_index()
    curve.loc[curve['feasible_fraction'] < 1.0, 'avg_min_se'] = math.nan
    curve['feasible'] = curve['feasible_fraction'] >= 1.0
    limits = pd.DataFrame([res['limit'] for res in results])
    return TradeoffResult(points=points, curve=curve, limits=limits)


def _bandwidth_point(config: ExperimentConfig, index: int,
                     pilot_len: int, ofdm_feasible: bool) -> Dict[str, float]:
    model = build_model(config, scenario_seed(config.seed, index),
                        with_paths=False)
    out = {'otfs': math.nan, 'ofdm': math.nan}
    signals = SIGNALS if ofdm_feasible else ('otfs',)
    for signal in signals:
        stats = model.stats(signal, pilot_len=pilot_len)
        if config.sweep_power == 'equal':
            eta = equal_power(stats, config.sensing_fraction)
        else:
            eta, _ = optimize(model, stats)
        if eta is not None:
            out[signal] = float(np.mean(user_se(
                eta, stats, config, model.omega(signal, pilot_len))))
    return out


def run_bandwidth_sweep(config: ExperimentConfig,
                        delta_f_list: Optional[Sequence[float]] = None,
                        progress: bool = False) -> pd.DataFrame:
    """Average per-user SE of OTFS and OFDM over subcarrier bandwidths
    for the short (EVA) and long (EVB) delay profiles. The gap ratio
    relates the OTFS-OFDM gap to the gap at the first bandwidth."""
    if delta_f_list is None:
        delta_f_list = config.delta_f_sweep
    if len(delta_f_list) != len(config.pilot_lengths):
        raise ConfigError('needs one pilot length per subcarrier bandwidth',
                          key='pilot_lengths')
    rows = []
    for profile, tau_max in (('EVA', config.tau_max),
                             ('EVB', config.tau_max_evb)):
        table = overhead_frame(tau_max, delta_f_list, config.M, config.N,
                               config.pilot_lengths)
        first_gap = None
        for n, delta_f in enumerate(delta_f_list):
            cfg = config.replace(delta_f=float(delta_f), tau_max=tau_max)
            entry = table.iloc[n]
            feasible = bool(entry['feasible'])
            pilot_len = int(config.pilot_lengths[n])
            if not feasible:
                log.warning('%s at %g kHz: OFDM prefix exceeds the symbol',
                            profile, delta_f / 1e3)
            points = pool_map(
                lambda s, c=cfg, p=pilot_len, f=feasible:
                _bandwidth_point(c, s, p, f),
                range(config.n_scenarios), config.threads, progress,
                '{p} {f:g} kHz'.format(p=profile, f=delta_f / 1e3))
            otfs = float(np.mean([x['otfs'] for x in points]))
            ofdm = float(np.mean([x['ofdm'] for x in points])) \
                if feasible else math.nan
            gap = otfs - ofdm
            if first_gap is None:
                first_gap = gap
            rows.append({
                'profile': profile,
                'delta_f_khz': float(delta_f) / 1e3,
                'n_cp': int(entry['n_cp']),
                'otfs_cp_percent': float(entry['otfs_cp_percent']),
                'ofdm_cp_percent': float(entry['ofdm_cp_percent']),
                'pilot_len': pilot_len,
                'ofdm_feasible': feasible,
                'otfs_se': otfs,
                'ofdm_se': ofdm,
                'gap': gap,
                'gap_ratio': gap / first_gap if first_gap else math.nan,
            })
    return pd.DataFrame(rows)


def overhead_summary(M: int = 512, N: int = 128,
                     delta_f_list: Sequence[float] = SWEEP_DELTA_F,
                     pilot_lengths: Sequence[int] = SWEEP_PILOT_LENGTHS,
                     tau_eva: float = EVA_TAU_MAX,
                     tau_evb: float = EVB_TAU_MAX) -> pd.DataFrame:
    """CP overheads in percent of OTFS and OFDM for both delay profiles,
    with the OFDM pilot length per subcarrier bandwidth."""
    eva = overhead_frame(tau_eva, delta_f_list, M, N, pilot_lengths)
    evb = overhead_frame(tau_evb, delta_f_list, M, N, pilot_lengths)
    return pd.DataFrame({
        'delta_f_khz': eva['delta_f_khz'],
        'pilot_len': eva['pilot_len'],
        'otfs_eva_percent': eva['otfs_cp_percent'],
        'ofdm_eva_percent': eva['ofdm_cp_percent'],
        'otfs_evb_percent': evb['otfs_cp_percent'],
        'ofdm_evb_percent': evb['ofdm_cp_percent'],
        'evb_feasible': evb['feasible'],
    })


def write_outputs(out_dir: str, config: ExperimentConfig, command: str,
                  frames: Optional[Dict[str, pd.DataFrame]] = None,
                  scenario: Optional[Scenario] = None,
                  traces: Optional[List[Dict[str, Any]]] = None) \
        -> List[str]:
    """Writes result CSVs, the scenario JSON, the convergence trace as
    JSON lines, the resolved configuration as YAML and a manifest.
    Returns the written file names; only the manifest carries a
    timestamp."""
    # pylint: disable=import-outside-toplevel
    from otfs_isac import __version__
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(name: str) -> str:
        written.append(name)
        return os.path.join(out_dir, name)

    for name, frame in sorted((frames or {}).items()):
        frame.to_csv(path(name + '.csv'), index=False, float_format='%.10g')
    if scenario is not None:
        with open(path('scenario.json'), 'w', encoding='utf-8') as f:
            f.write(scenario.to_json(config) + '\n')
    if traces is not None:
        with open(path('convergence.jsonl'), 'w', encoding='utf-8') as f:
            for record in traces:
                f.write(json.dumps(record, sort_keys=True) + '\n')
    with open(path('config.yaml'), 'w', encoding='utf-8') as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=True)
    manifest = {
        'command': command,
        'seed': config.seed,
        'version': __version__,
        'created': datetime.now(timezone.utc).isoformat(),
        'files': list(written),
        'config': config.to_dict(),
    }
    with open(path('manifest.json'), 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write('\n')
    log.info('wrote %d files to %s', len(written), out_dir)
    return written
