"""Chirp generation and receive-side dechirping for LoRa symbols.

A symbol m in [0, M) is the cyclic left-shift by m of the basic upchirp

    s0[n] = exp{j*2*pi*(n^2/(2M) - n/2)},   n = 0..M-1,

with M = 2**SF.  The receiver multiplies an M-sample block by conj(s0)
and applies a unitary M-point DFT; a propagation path of gain h delayed
by l samples then appears as a single tone of value sqrt(M)*h (times a
bin-dependent phase that is removed here) in bin (m - l) mod M.

The alphabet size is passed as a plain integer so the arithmetic can be
exercised at any M; `LoRaConfig` enforces the standard SF range for
user-facing configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class LoRaConfig:
    """Spreading factor and bandwidth of a LoRa link.

    Attributes
    ----------
    sf : int
        Spreading factor, 7..12.  The chirp alphabet has ``2**sf`` symbols.
    bandwidth_hz : float
        Chirp bandwidth; also the baseband sample rate.
    """

    sf: int
    bandwidth_hz: float = 500e3

    def __post_init__(self):
        if not isinstance(self.sf, int) or not 7 <= self.sf <= 12:
            raise ValueError(f"spreading factor must be an integer in 7..12, got {self.sf!r}")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def m_size(self) -> int:
        """Alphabet size M = 2**sf."""
        return 1 << self.sf

    @property
    def symbol_duration_s(self) -> float:
        """One symbol lasts M samples at the chirp bandwidth."""
        return self.m_size / self.bandwidth_hz


@dataclass(frozen=True)
class LoRaSymbol:
    """A modulated chirp: symbol index plus its M baseband samples."""

    index: int
    samples: np.ndarray

    @property
    def m_size(self) -> int:
        return self.samples.shape[-1]


@lru_cache(maxsize=32)
def _cached_upchirp(m_size: int) -> np.ndarray:
    n = np.arange(m_size)
    chirp = np.exp(2j * np.pi * (n * n / (2.0 * m_size) - 0.5 * n))
    chirp.setflags(write=False)
    return chirp


def _check_m_size(m_size: int) -> int:
    if not isinstance(m_size, (int, np.integer)) or m_size < 1:
        raise ValueError(f"alphabet size must be a positive integer, got {m_size!r}")
    return int(m_size)


def basic_upchirp(m_size: int) -> np.ndarray:
    """Return the length-M basic upchirp (read-only array).

    Every sample has unit magnitude; sample n equals
    exp{j*2*pi*(n^2/(2M) - n/2)}.
    """
    return _cached_upchirp(_check_m_size(m_size))


def modulate(m_size: int, symbol: int) -> LoRaSymbol:
    """Modulate symbol index ``symbol`` onto a chirp of alphabet size M.

    The samples are the cyclic left-shift of the basic upchirp:
    samples[n] = s0[(n + symbol) mod M].
    """
    m_size = _check_m_size(m_size)
    if not 0 <= symbol < m_size:
        raise ValueError(f"symbol index {symbol} out of range [0, {m_size})")
    samples = np.roll(_cached_upchirp(m_size), -int(symbol))
    return LoRaSymbol(index=int(symbol), samples=samples)


def modulate_batch(m_size: int, symbols: np.ndarray) -> np.ndarray:
    """Vectorised modulation: (S,) symbol indices -> (S, M) chirp samples."""
    m_size = _check_m_size(m_size)
    symbols = np.asarray(symbols, dtype=np.intp)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= m_size):
        raise ValueError("symbol index out of range")
    chirp = _cached_upchirp(m_size)
    idx = (np.arange(m_size)[None, :] + symbols[:, None]) % m_size
    return chirp[idx]


def dechirp_and_transform(received: np.ndarray, m_size: int | None = None) -> np.ndarray:
    """Dechirp and DFT a received block, removing the per-bin phase offset.

    Multiplies elementwise by conj(basic upchirp), applies the unitary
    (1/sqrt(M)-scaled) DFT along the last axis, then rotates bin k by
    exp{-j*psi_k} with psi_k = 2*pi*(k^2/(2M) - k/2).  A clean symbol m
    over a unit channel yields sqrt(M) in bin m and 0 elsewhere; white
    noise of variance sigma^2 per sample stays white with variance
    sigma^2 per bin.

    Accepts a single (M,) block or any (..., M) batch.
    """
    y = np.asarray(received, dtype=complex)
    if y.shape[-1] < 1:
        raise ValueError("received block is empty")
    if m_size is not None and y.shape[-1] != m_size:
        raise ValueError(f"received block has {y.shape[-1]} samples, expected {m_size}")
    m = y.shape[-1]
    chirp = _cached_upchirp(m)
    spectrum = np.fft.fft(y * np.conj(chirp), axis=-1) / np.sqrt(m)
    # The bin phase offset psi_k equals the chirp's own sample phase, so the
    # correction exp{-j*psi_k} is just conj(s0[k]).
    spectrum *= np.conj(chirp)
    return spectrum
