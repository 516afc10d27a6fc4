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

"""Counter-based random substreams. Every random quantity is drawn from
a generator keyed by the master seed, a purpose tag and the indices of
the quantity (link, path, realization), so results never depend on the
order or the number of worker threads drawing them.
"""

from typing import Optional, Tuple, Union

import numpy as np


#: purpose tags of the substreams; never renumber.
PLACEMENT = 1
SHADOWING = 2
PATH_ANGLES = 3
PATH_INDICES = 4
CHANNEL = 5
RCS = 6
TARGET_FREE = 7
SCENARIO = 8


def substream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    """Returns an independent generator for the given master seed,
    purpose tag and index keys."""
    return np.random.default_rng(np.random.SeedSequence(
        entropy=int(seed) & (2**64 - 1),
        spawn_key=(int(purpose),) + tuple(int(k) for k in keys)))


def covariance_factor(cov: np.ndarray) -> np.ndarray:
    """Returns a factor F with F·F† = cov for a batch of Hermitian PSD
    matrices (last two axes). Tiny negative eigenvalues from round-off
    are clipped."""
    w, u = np.linalg.eigh(cov)
    return u * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def complex_normal(rng: np.random.Generator,
                   shape: Union[int, Tuple[int, ...]],
                   variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples; real and
    imaginary parts each carry half of the variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape)
                    + 1j * rng.standard_normal(shape))


def sample_correlated(rng: np.random.Generator, cov: np.ndarray,
                      count: Optional[int] = None,
                      factor: Optional[np.ndarray] = None) -> np.ndarray:
    """Draws CN(0, cov) vectors for a batch of covariance matrices of
    shape (..., M_t, M_t). Returns shape (..., M_t), or (count, ..., M_t)
    when count is given."""
    if factor is None:
        factor = covariance_factor(cov)
    shape = cov.shape[:-1] if count is None else (count,) + cov.shape[:-1]
    w = complex_normal(rng, shape)
    return np.einsum('...ab,...b->...a', factor, w)
