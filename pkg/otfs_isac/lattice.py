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

"""Delay-Doppler lattice operators.

An OTFS frame of ``N`` symbols with ``M`` subcarriers each is a vector
of length ``MN``; the lattice index of the delay bin ``l`` and Doppler
bin ``k`` is ``v = k*M + l``. A propagation path with delay index ``l``,
Doppler index ``k`` and fractional Doppler ``kappa`` acts on a frame as

    T = (F_N ⊗ I_M) · Π^l · Δ^(k+kappa) · (F_N† ⊗ I_M)

with the cyclic forward shift ``Π`` and the diagonal phase ramp
``Δ = diag(z^0, …, z^(MN-1))``, ``z = exp(j2π/MN)``.

Operators come in two forms: dense ``MN×MN`` matrices for desk-scale
work and tests, and :class:`FactoredDD`, which keeps only the shift
and the phase ramp and applies the DFT sandwich with FFTs.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import dft

from otfs_isac.errors import (
    ConfigError, DimensionMismatch, OffGridDelay, PathIndexError,
    UseFactoredForm)


#: largest lattice size M·N that is ever materialized densely.
MAX_DENSE_MN = 4096


def ceil_index(value: float) -> int:
    """Ceiling of a nonnegative index estimate, tolerant of floating
    point noise such as 384.00000000000006."""
    return int(math.ceil(round(value, 9)))


@dataclass(frozen=True)
class DDGridSpec:
    """The delay-Doppler lattice: ``M`` subcarriers of bandwidth
    ``delta_f`` Hz, ``N`` symbols of duration ``T_sym = 1/delta_f``
    seconds, and a cyclic prefix of ``N_cp`` samples."""

    M: int
    N: int
    delta_f: float
    N_cp: int = 0
    T_sym: Optional[float] = field(default=None)

    def __post_init__(self) -> None:
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError('invalid subcarrier count {m}'.format(
                m=self.M), key='M')
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError('invalid symbol count {n}'.format(
                n=self.N), key='N')
        if not self.delta_f > 0:
            raise ConfigError('invalid subcarrier bandwidth {f}'.format(
                f=self.delta_f), key='delta_f')
        if int(self.N_cp) != self.N_cp or self.N_cp < 0:
            raise ConfigError('invalid cyclic prefix length {c}'.format(
                c=self.N_cp), key='N_cp')
        if self.T_sym is None:
            object.__setattr__(self, 'T_sym', 1.0 / self.delta_f)
        elif abs(self.T_sym * self.delta_f - 1.0) > 1e-12:
            raise ConfigError('symbol duration {t} does not match '
                              'subcarrier bandwidth {f}'.format(
                                  t=self.T_sym, f=self.delta_f),
                              key='T_sym')

    @classmethod
    def from_delay_spread(cls, M: int, N: int, delta_f: float,
                          tau_max: float) -> 'DDGridSpec':
        """Grid whose cyclic prefix covers the delay spread ``tau_max``
        (seconds)."""
        return cls(M, N, delta_f, ceil_index(tau_max * M * delta_f))

    @property
    def size(self) -> int:
        """Lattice size M·N."""
        return self.M * self.N

    def delay(self, ell: float) -> float:
        """Delay in seconds of delay index ``ell``."""
        return ell / (self.M * self.delta_f)

    def doppler(self, exponent: float) -> float:
        """Doppler shift in Hz of the (fractional) Doppler index."""
        return exponent / (self.N * self.T_sym)


@dataclass(frozen=True)
class PathDD:
    """Delay index, Doppler index and fractional Doppler of one path."""

    ell: int
    k: int = 0
    kappa: float = 0.0

    def __post_init__(self) -> None:
        if int(self.ell) != self.ell or self.ell < 0:
            raise PathIndexError('invalid delay index {l}'.format(
                l=self.ell))
        if int(self.k) != self.k:
            raise PathIndexError('invalid Doppler index {k}'.format(
                k=self.k))
        if not -0.5 < self.kappa < 0.5:
            raise PathIndexError('fractional Doppler {c} outside '
                                 '(-0.5, 0.5)'.format(c=self.kappa))

    @property
    def exponent(self) -> float:
        """The phase-ramp exponent k + kappa."""
        return self.k + self.kappa

    def check(self, grid: DDGridSpec) -> None:
        """Raises :exc:`PathIndexError` unless the path fits the grid."""
        if self.ell >= grid.M:
            raise PathIndexError('delay index {l} outside grid with '
                                 'M={m}'.format(l=self.ell, m=grid.M))
        if 2 * abs(self.k) >= grid.N and self.k != 0:
            raise PathIndexError('Doppler index {k} outside grid with '
                                 'N={n}'.format(k=self.k, n=grid.N))


def _dense_guard(size: int) -> None:
    if size > MAX_DENSE_MN:
        raise UseFactoredForm('lattice size {s} exceeds dense limit '
                              '{g}'.format(s=size, g=MAX_DENSE_MN))


def phase_ramp(size: int, exponent: float) -> np.ndarray:
    """The diagonal of Δ^exponent, that is z^(exponent·n)."""
    n = np.arange(size)
    return np.exp(2j * np.pi * exponent * n / size)


def build_permutation(grid: DDGridSpec) -> np.ndarray:
    """The MN×MN cyclic forward shift Π with Π[i, j] = 1 iff
    i = (j+1) mod MN."""
    _dense_guard(grid.size)
    return np.roll(np.eye(grid.size, dtype=complex), 1, axis=0)


def build_delta(grid: DDGridSpec, exponent: float) -> np.ndarray:
    """The diagonal phase ramp Δ raised to a real ``exponent``."""
    _dense_guard(grid.size)
    return np.diag(phase_ramp(grid.size, exponent))


def dd_dft(grid: DDGridSpec) -> np.ndarray:
    """The unitary sandwich matrix F_N ⊗ I_M."""
    _dense_guard(grid.size)
    return np.kron(dft(grid.N, scale='sqrtn'), np.eye(grid.M))


def _dd_fft(x: np.ndarray, M: int, N: int, inverse: bool = False) \
        -> np.ndarray:
    """Applies F_N ⊗ I_M (or its adjoint) to the columns of x."""
    shape = x.shape
    y = x.reshape((N, M) + shape[1:])
    y = np.fft.ifft(y, axis=0, norm='ortho') if inverse \
        else np.fft.fft(y, axis=0, norm='ortho')
    return y.reshape(shape)


def sandwich(x: np.ndarray, grid: DDGridSpec) -> np.ndarray:
    """Returns (F_N ⊗ I_M) · x · (F_N† ⊗ I_M) for a square x."""
    left = _dd_fft(x, grid.M, grid.N)
    return _dd_fft(left.conj().T, grid.M, grid.N).conj().T


@dataclass(frozen=True)
class FactoredDD:
    """A delay-Doppler operator kept as its cyclic shift and phase ramp:
    T = A · Π^shift · diag(ramp) · A†, with A = F_N ⊗ I_M."""

    grid: DDGridSpec
    shift: int
    ramp: np.ndarray = field(compare=False, repr=False)

    @classmethod
    def from_path(cls, grid: DDGridSpec, path: PathDD) -> 'FactoredDD':
        path.check(grid)
        return cls(grid, path.ell, phase_ramp(grid.size, path.exponent))

    def core(self) -> np.ndarray:
        """The dense inner matrix Π^shift · diag(ramp)."""
        size = self.grid.size
        _dense_guard(size)
        core = np.zeros((size, size), dtype=complex)
        cols = np.arange(size)
        core[(cols + self.shift) % size, cols] = self.ramp
        return core

    def dense(self) -> np.ndarray:
        """Materializes the MN×MN operator."""
        return sandwich(self.core(), self.grid)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Returns T·x without materializing T."""
        y = _dd_fft(x, self.grid.M, self.grid.N, inverse=True)
        y = self.ramp.reshape((-1,) + (1,) * (y.ndim - 1)) * y
        y = np.roll(y, self.shift, axis=0)
        return _dd_fft(y, self.grid.M, self.grid.N)


def pair_core(ti: FactoredDD, tj: FactoredDD) \
        -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sparse inner matrix of Ti·Tj†, that is
    Π^(l_i) · diag(ramp_i · conj(ramp_j)) · Π^(-l_j), as
    ``(rows, cols, values)`` with one entry per column."""
    size = ti.grid.size
    cols = np.arange(size)
    src = (cols - tj.shift) % size
    rows = (src + ti.shift) % size
    return rows, cols, ti.ramp[src] * np.conj(tj.ramp[src])


def build_T(grid: DDGridSpec, path: PathDD) -> np.ndarray:
    """The effective DD operator of a path as a dense, unitary MN×MN
    matrix."""
    return FactoredDD.from_path(grid, path).dense()


def chi_kappa(ti: np.ndarray, tj: np.ndarray, v: int) -> Tuple[float, float]:
    """Returns (chi, kappa) of row ``v`` (zero-based) of P = Ti·Tj†:
    chi is the squared magnitude of the diagonal entry, kappa the squared
    magnitude of the sum of the off-diagonal entries of the row."""
    if ti.shape != tj.shape or ti.ndim != 2 or ti.shape[0] != ti.shape[1]:
        raise DimensionMismatch('operators of shapes {a} and {b}'.format(
            a=ti.shape, b=tj.shape))
    if not 0 <= v < ti.shape[0]:
        raise PathIndexError('row {v} outside operator of size {s}'.format(
            v=v, s=ti.shape[0]))
    row = ti[v, :] @ tj.conj().T
    diag = row[v]
    return float(abs(diag) ** 2), float(abs(row.sum() - diag) ** 2)


def chi_kappa_dense_rows(ti: np.ndarray, tj: np.ndarray) \
        -> Tuple[np.ndarray, np.ndarray]:
    """(chi, kappa) for every row of Ti·Tj†, from the dense product."""
    if ti.shape != tj.shape:
        raise DimensionMismatch('operators of shapes {a} and {b}'.format(
            a=ti.shape, b=tj.shape))
    p = ti @ tj.conj().T
    diag = np.diag(p)
    return np.abs(diag) ** 2, np.abs(p.sum(axis=1) - diag) ** 2


def chi_kappa_rows(grid: DDGridSpec, pi: PathDD, pj: PathDD) \
        -> Tuple[np.ndarray, np.ndarray]:
    """(chi, kappa) for every row of Ti·Tj†, in closed form.

    Paths with different delay indices give chi = 0 and kappa = 1 in
    every row. For a common delay index the product is block-circulant
    per delay bin b: the diagonal entry is the mean of the phase ramp
    over the Doppler bins of b, and the row sum is its first entry.
    """
    size = grid.size
    if pi.ell != pj.ell:
        return np.zeros(size), np.ones(size)
    n = np.arange(size)
    ramp = np.exp(2j * np.pi * (pi.exponent - pj.exponent)
                  * ((n - pi.ell) % size) / size).reshape(grid.N, grid.M)
    mean = ramp.mean(axis=0)
    chi = np.tile(np.abs(mean) ** 2, grid.N)
    kappa = np.tile(np.abs(ramp[0] - mean) ** 2, grid.N)
    return chi, kappa


def isi_energy_rows(grid: DDGridSpec, pi: PathDD, pj: PathDD) -> np.ndarray:
    """Energy Σ_{v'≠v} |[Ti·Tj†]_(v,v')|² of every row. The rows of the
    unitary product have unit norm, so this is 1 − chi."""
    chi, _ = chi_kappa_rows(grid, pi, pj)
    return 1.0 - chi


def build_q_ofdm(M: int, T_sym: float, delay: float = 0.0,
                 doppler: float = 0.0) -> np.ndarray:
    """The M×M OFDM path operator with [Q]_(m,n) = 1 iff
    (m − n − τM/T) mod M = 0, times the Doppler phase of sample n.
    Zero-based sample n carries the phase exp(j2π·n·ν·T/M), so that a
    Doppler-free path is a pure cyclic shift."""
    shift = delay * M / T_sym
    if abs(shift - round(shift)) > 1e-9:
        raise OffGridDelay('delay {d} s is {s} samples, not on the '
                           'sampling grid'.format(d=delay, s=shift))
    n = np.arange(M)
    q = np.zeros((M, M), dtype=complex)
    q[(n + int(round(shift))) % M, n] = np.exp(
        2j * np.pi * n * doppler * T_sym / M)
    return q


def q_ofdm_for_path(grid: DDGridSpec, path: PathDD) -> np.ndarray:
    """OFDM operator of a path given by its lattice indices."""
    path.check(grid)
    return build_q_ofdm(grid.M, grid.T_sym, grid.delay(path.ell),
                        grid.doppler(path.exponent))


def to_frequency(q: np.ndarray) -> np.ndarray:
    """Q̄ = F_M · Q · F_M†."""
    f = dft(q.shape[0], scale='sqrtn')
    return f @ q @ f.conj().T
