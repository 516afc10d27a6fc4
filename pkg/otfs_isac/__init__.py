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

"""Simulation of integrated sensing and communication in cell-free
massive MIMO with OTFS modulation: delay-Doppler channel operators,
MMSE estimation with embedded pilots, closed-form spectral efficiency
and sensing SINR, an OFDM baseline, and max-min fair power allocation
under a sensing constraint.

CLI
---

The package comes with a single CLI tool, ``otfsisac``, with one
subcommand per experiment. Each subcommand accepts a YAML
configuration document (``--config``), overrides for the seed, the
number of realizations and scenarios and the worker threads, and the
output directory (``--out``), where it writes CSV files, a manifest and
the resolved configuration.

.. code-block:: console

    $ otfsisac overhead
    cyclic prefix overhead
    ├── 15 kHz, OFDM pilot length 14
    │   ├── EVA: OTFS 0.031%
    │   │   └── OFDM 3.91%
    │   └── EVB: OTFS 0.117%
    │       └── OFDM 15.04%
    ...

Exit codes are 0 on success, 1 on configuration errors, and 2 when the
requested sensing SINR is out of reach.

.. note:: The CLI is implemented in :mod:`otfs_isac.tools.otfsisac`.


Examples
--------

Configurations are immutable; derived lattice quantities are computed
on the fly.

>>> import otfs_isac
>>> config = otfs_isac.load_config(M=16, N=8, tau_max=5e-6)
>>> config.ell_max, config.k_max, config.grid.N_cp
(2, 1, 2)

Unknown or malformed configuration keys are rejected, naming the key.

>>> otfs_isac.load_config(n_users=0)
Traceback (most recent call last):
  ...
otfs_isac.errors.ConfigError: n_users: must be at least 1, got 0

Delay-Doppler operators are unitary.

>>> import numpy as np
>>> grid = config.grid
>>> T = otfs_isac.build_T(grid, otfs_isac.PathDD(ell=1, k=1, kappa=0.25))
>>> bool(np.allclose(T @ T.conj().T, np.eye(grid.size)))
True

With the long delay profile, the OFDM cyclic prefix no longer fits
its symbol at the two largest subcarrier bandwidths.

>>> otfs_isac.overhead_summary()['ofdm_evb_percent'].isna().tolist()
[False, False, False, True, True]

API
---
"""

from otfs_isac.errors import (
    IsacError, ConfigError, GridTooSmall, DomainError, OffGridDelay,
    DimensionMismatch, PathIndexError, UseFactoredForm, UseLowerBound,
    EstimatorDegenerate, DegenerateScenario, Infeasible, NonMonotone)
from otfs_isac.config import ExperimentConfig, load_config
from otfs_isac.lattice import (
    DDGridSpec, PathDD, FactoredDD, build_T, chi_kappa, chi_kappa_rows,
    build_q_ofdm)
from otfs_isac.geometry import (
    Position3D, AnglePair, Scenario, place_scenario, umi_pathloss,
    array_response, radar_link_gain, correlation_matrix)
from otfs_isac.channel import (
    sample_paths, sample_channel, assemble_effective_channel, sample_rcs)
from otfs_isac.estimation import (
    EPLayout, EstimatorStats, compute_psi, compute_B, estimate_stats)
from otfs_isac.performance import (
    PowerAlloc, se_lower_bound, se_full, component_powers, sensing_sinr)
from otfs_isac.ofdm import OFDMConfig, bt_pilot_model, ofdm_se_lower
from otfs_isac.allocator import (
    SolverOptions, equal_power, maxmin_allocate, max_sensing_sinr)
from otfs_isac.experiments import (
    build_model, run_cdf_experiment, run_tradeoff_sweep,
    run_bandwidth_sweep, overhead_summary, write_outputs)
from otfs_isac.montecarlo import mc_validate_se, mc_validate_sensing


# library/package semantic version
__version__ = '1.0.0'
