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

"""Exceptions raised by the :mod:`otfs_isac` package. All of them derive
from :exc:`IsacError`; argument-related errors additionally derive from
the matching builtin exception, so callers may catch, for instance, a
plain :exc:`ValueError`.
"""

from typing import Optional


class IsacError(Exception):
    """Base class of all errors raised by this package."""


class ConfigError(IsacError, ValueError):
    """An invalid configuration value. The offending configuration key,
    if known, is available as :attr:`key`.
    """

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        super().__init__(message if key is None
                         else '{k}: {m}'.format(k=key, m=message))
        self.key = key


class GridTooSmall(ConfigError):
    """The delay-Doppler grid cannot hold the configured delay or
    Doppler spread."""


class DomainError(IsacError, ValueError):
    """An argument outside the mathematical domain of a function, such
    as a nonpositive distance."""


class OffGridDelay(IsacError, ValueError):
    """A path delay not on the OFDM sampling grid."""


class DimensionMismatch(IsacError, ValueError):
    """Operators or matrices of incompatible sizes."""


class PathIndexError(IsacError, IndexError):
    """Delay or Doppler index outside the grid."""


class UseFactoredForm(IsacError):
    """Dense assembly refused; the lattice is too large."""


class UseLowerBound(IsacError):
    """Full per-row evaluation refused; the lattice is too large."""


class EstimatorDegenerate(IsacError, ArithmeticError):
    """Estimator statistics are not positive (semi)definite."""


class DegenerateScenario(IsacError):
    """A scenario without any usable signal, such as all-zero estimate
    covariances."""


class Infeasible(IsacError):
    """The sensing constraint cannot be met within the per-AP power
    budgets. :attr:`max_sensing_sinr` certifies the largest achievable
    sensing SINR (linear)."""

    def __init__(self, message: str, max_sensing_sinr: float) -> None:
        super().__init__(message)
        self.max_sensing_sinr = max_sensing_sinr


class NonMonotone(IsacError, RuntimeError):
    """The max-min value decreased between outer iterations."""
