"""Runs the OTFS-ISAC experiments from the command line and prints
their outcome as a tree to the console."""

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


import logging
import math
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import sty
import asciitree
from asciitree.drawing import BoxStyle, BOX_LIGHT
from asciitree.traversal import Traversal

from otfs_isac.config import ExperimentConfig, load_config
from otfs_isac.errors import ConfigError, Infeasible, IsacError
from otfs_isac.estimation import EPLayout
from otfs_isac.experiments import (
    build_model, overhead_summary, run_bandwidth_sweep, run_cdf_experiment,
    run_tradeoff_sweep, scenario_seed, write_outputs)
from otfs_isac.montecarlo import mc_validate_se, mc_validate_sensing


log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_RUNTIME = 3


class ReportNode:  # pylint: disable=too-few-public-methods
    """A line of the console report; ``kind`` selects its color."""

    def __init__(self, text: str, children: Sequence['ReportNode'] = (),
                 kind: str = 'plain') -> None:
        self.text = text
        self.children = list(children)
        self.kind = kind


class ReportTraversal(Traversal):
    """Traverses a tree of report nodes."""

    KINDCOLORS = {
        'title': sty.ef.bold,
        'value': sty.fg.da_green,
        'file': sty.fg.da_yellow,
        'bad': sty.fg.red,
    }

    def __init__(self, colorize: bool) -> None:
        super().__init__()
        self.colorize = colorize

    def get_root(self, tree: ReportNode) -> ReportNode:
        return tree

    def get_children(self, node: ReportNode) -> List[ReportNode]:
        return node.children

    def get_text(self, node: ReportNode) -> str:
        if not self.colorize or node.kind not in self.KINDCOLORS:
            return node.text
        return self.KINDCOLORS[node.kind] + node.text + sty.rs.all


def render(root: ReportNode, colorize: bool = False) -> str:
    """Renders a report tree with light box drawing characters."""
    return asciitree.LeftAligned(
        traverse=ReportTraversal(colorize),
        draw=BoxStyle(gfx=BOX_LIGHT, horiz_len=2))(root)


def scenario_report(config: ExperimentConfig, model) -> ReportNode:
    """Deployment tree: receiving APs with their hotspot distance, the
    transmitting APs and users, and the lattice indices."""
    scenario = model.scenario
    center = scenario.hotspot_center
    rx = [ReportNode('AP {n} at ({x:.1f}, {y:.1f}) m, {d:.1f} m from the '
                     'hotspot'.format(n=n, x=ap.x, y=ap.y,
                                      d=ap.distance(center)), kind='value')
          for n, ap in enumerate(scenario.rx_aps)]
    ep = EPLayout.from_config(config)
    grid = config.grid
    return ReportNode('scenario seed {s}'.format(s=model.seed), [
        ReportNode('hotspot at ({x:.1f}, {y:.1f}) m, side {a:g} m, target at '
                   '({tx:.2f}, {ty:.2f}) m'.format(
                       x=center.x, y=center.y, a=scenario.hotspot_side,
                       tx=scenario.target.x, ty=scenario.target.y)),
        ReportNode('receiving APs', rx, kind='title'),
        ReportNode('transmitting APs: {n}'.format(n=len(scenario.tx_aps))),
        ReportNode('users: {n}'.format(n=len(scenario.users))),
        ReportNode('lattice {m}x{n} at {f:g} kHz'.format(
            m=grid.M, n=grid.N, f=grid.delta_f / 1e3), [
                ReportNode('delay index bound {l}'.format(
                    l=config.ell_max), kind='value'),
                ReportNode('Doppler index bound {k}'.format(
                    k=config.k_max), kind='value'),
                ReportNode('cyclic prefix {c} samples'.format(
                    c=grid.N_cp), kind='value'),
                ReportNode('pilot region {d}x{t} bins'.format(
                    d=ep.delay_extent, t=ep.doppler_extent),
                    kind='value' if ep.doppler_extent <= grid.N
                    else 'bad'),
            ], kind='title'),
    ], kind='title')


def overhead_report(frame) -> ReportNode:
    """CP overheads per subcarrier bandwidth."""
    def percent(value: float) -> ReportNode:
        if math.isnan(value):
            return ReportNode('OFDM infeasible', kind='bad')
        return ReportNode('OFDM {v:.2f}%'.format(v=value), kind='value')

    nodes = []
    for row in frame.itertuples(index=False):
        nodes.append(ReportNode(
            '{f:g} kHz, OFDM pilot length {p}'.format(
                f=row.delta_f_khz, p=row.pilot_len), [
                ReportNode('EVA: OTFS {o:.3f}%'.format(
                    o=row.otfs_eva_percent), [percent(row.ofdm_eva_percent)]),
                ReportNode('EVB: OTFS {o:.3f}%'.format(
                    o=row.otfs_evb_percent), [percent(row.ofdm_evb_percent)]),
            ], kind='title'))
    return ReportNode('cyclic prefix overhead', nodes, kind='title')


def files_report(out_dir: str, files: Sequence[str],
                 extra: Sequence[ReportNode] = ()) -> ReportNode:
    return ReportNode(out_dir, list(extra) + [
        ReportNode(name, kind='file') for name in files], kind='title')


def cmd_scenario(config: ExperimentConfig, args) -> ReportNode:
    model = build_model(config, scenario_seed(config.seed, 0),
                        with_paths=False)
    write_outputs(args.out, config, 'scenario', scenario=model.scenario)
    return scenario_report(config, model)


def cmd_validate_se(config: ExperimentConfig, args) -> ReportNode:
    model = build_model(config, scenario_seed(config.seed, 0))
    se = mc_validate_se(model, progress=args.progress)
    sensing = mc_validate_sensing(model, progress=args.progress)
    files = write_outputs(args.out, config, 'validate-se', frames={
        'se_validation': se.to_frame(),
        'sensing_validation': sensing.to_frame()})
    users = [ReportNode(
        'user {q}: simulated {m:.4f} ± {s:.4f}, closed form {c:.4f} '
        'bit/s/Hz'.format(q=u.user, m=u.mc_se.mean, s=u.mc_se.stderr,
                          c=u.closed_se),
        kind='value' if u.mc_se.within(u.closed_se) else 'bad')
             for u in se.users]
    return files_report(args.out, files, [
        ReportNode('spectral efficiency', users, kind='title'),
        ReportNode('sensing SINR: simulated {m:.4g}, closed form {c:.4g}'
                   .format(m=sensing.mc_sinr, c=sensing.closed_sinr),
                   kind='value')])


def cmd_cdf(config: ExperimentConfig, args) -> ReportNode:
    result = run_cdf_experiment(config, progress=args.progress)
    files = write_outputs(args.out, config, 'cdf', frames={
        'cdf': result.frame, 'cdf_summary': result.summary},
        traces=result.traces)
    frame = result.frame
    if not frame['optimized_feasible'].any():
        raise Infeasible('no scenario reaches the sensing threshold of '
                         '{g:g} dB'.format(g=config.gamma_s_db),
                         float(frame['max_sensing_sinr'].max()))
    summary = [ReportNode('{c}: mean {m:.4f}, 95%-likely {l:.4f}'.format(
        c=row.column, m=row.mean, l=row.likely95), kind='value')
               for row in result.summary.itertuples(index=False)]
    return files_report(args.out, files, [
        ReportNode('per-user SE', summary, kind='title')])


def cmd_tradeoff(config: ExperimentConfig, args) -> ReportNode:
    result = run_tradeoff_sweep(config, args.gamma, progress=args.progress)
    files = write_outputs(args.out, config, 'tradeoff', frames={
        'tradeoff_points': result.points, 'tradeoff_curve': result.curve,
        'tradeoff_limits': result.limits})
    return files_report(args.out, files)


def cmd_bandwidth(config: ExperimentConfig, args) -> ReportNode:
    frame = run_bandwidth_sweep(config, progress=args.progress)
    files = write_outputs(args.out, config, 'bandwidth',
                          frames={'bandwidth': frame})
    return files_report(args.out, files)


def cmd_overhead(config: ExperimentConfig, args) -> ReportNode:
    frame = overhead_summary(config.M, config.N, config.delta_f_sweep,
                   config.pilot_lengths, config.tau_max, config.tau_max_evb)
    write_outputs(args.out, config, 'overhead', frames={'overhead': frame})
    return overhead_report(frame)


COMMANDS = {
    'scenario': (cmd_scenario, 'draw a deployment and show it'),
    'validate-se': (cmd_validate_se, 'compare simulated against closed-form '
                    'SE and sensing SINR'),
    'cdf': (cmd_cdf, 'per-user SE distributions of OTFS and OFDM'),
    'tradeoff': (cmd_tradeoff, 'minimum SE against the sensing threshold'),
    'bandwidth': (cmd_bandwidth, 'SE against the subcarrier bandwidth'),
    'overhead': (cmd_overhead, 'cyclic prefix overheads'),
}  # type: Dict[str, Any]

ALIASES = {
    'overhead': ['table4'],
}  # type: Dict[str, List[str]]


def main(argv: Optional[Sequence[str]] = None) -> int:
    """otfsisac CLI."""
    import argparse # pylint: disable=import-outside-toplevel

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config', metavar='FILE',
        help='YAML configuration document'
    )
    common.add_argument(
        '--seed', type=int,
        help='master seed, overrides the configuration'
    )
    common.add_argument(
        '--out', default='results', metavar='DIR',
        help='output directory (default: results)'
    )
    common.add_argument(
        '--threads', type=int,
        help='worker threads, 0 for one per core'
    )
    common.add_argument(
        '--realizations', type=int,
        help='Monte Carlo realizations'
    )
    common.add_argument(
        '--scenarios', type=int,
        help='number of random scenarios'
    )
    common.add_argument(
        '-p', '--progress', action='store_true',
        help='show progress bars'
    )
    common.add_argument(
        '-c', '--color', action='store_true',
        help='colorize output'
    )
    common.add_argument(
        '-v', '--verbose', action='count', default=0,
        help='log progress, twice for debug details'
    )

    parser = argparse.ArgumentParser(
        prog='otfsisac',
        description='Cell-free massive MIMO ISAC with OTFS and OFDM.'
    )
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True
    for name, (func, helptext) in COMMANDS.items():
        sub = commands.add_parser(name, parents=[common], help=helptext,
                                  aliases=ALIASES.get(name, []))
        sub.set_defaults(func=func)
        if name == 'tradeoff':
            sub.add_argument(
                '--gamma', type=float, nargs='+', metavar='DB',
                help='sensing thresholds in dB'
            )

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(logging.WARNING, logging.INFO,
               logging.DEBUG)[min(args.verbose, 2)],
        format='%(levelname)s %(name)s: %(message)s')
    try:
        config = load_config(args.config, seed=args.seed,
                             n_realizations=args.realizations,
                             threads=args.threads,
                             n_scenarios=args.scenarios)
        command = args.func  # type: Callable[..., ReportNode]
        print(render(command(config, args), args.color))
    except Infeasible as err:
        print('infeasible: {e} (largest sensing SINR {m:.4g})'.format(
            e=err, m=err.max_sensing_sinr), file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as err:
        print('configuration error: {e}'.format(e=err), file=sys.stderr)
        return EXIT_CONFIG
    except IsacError as err:
        print('runtime error: {e}'.format(e=err), file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
