"""Time-varying Rician multipath channel at chirp-rate sampling.

A delay/power path table is collapsed onto sample-spaced taps: with
bandwidth B the filter has L = ceil(max(delay)*B) taps and each path is
binned to the nearest tap.  Tap 0 may carry a line-of-sight component
(shape factor K0 > 0); all later taps are pure scatter (Rayleigh).

Tap gains are held constant over one symbol and evolve symbol to symbol:
the diffuse part is a sum of equal-power sinusoids with random arrival
angles (autocorrelation J0(2*pi*fd*dt)), the LoS part a single ray with a
fixed random angle, so its phase rotates at up to fd.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modem import LoRaSymbol

# Number of sinusoids in the diffuse-scatter model.  The magnitude
# statistics are indistinguishable from Rayleigh well before 32.
SCATTER_SINUSOIDS = 32


@dataclass(frozen=True)
class PathTable:
    """Delay/power profile, one row per propagation path."""

    delays_ns: tuple[float, ...]
    relative_powers_db: tuple[float, ...]

    def __post_init__(self):
        delays = tuple(float(d) for d in self.delays_ns)
        powers = tuple(float(p) for p in self.relative_powers_db)
        if not delays:
            raise ValueError("path table is empty")
        if len(delays) != len(powers):
            raise ValueError("delay and power columns differ in length")
        if delays[0] != 0.0:
            raise ValueError("first path delay must be 0")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("path delays must be strictly increasing")
        object.__setattr__(self, "delays_ns", delays)
        object.__setattr__(self, "relative_powers_db", powers)

    @classmethod
    def from_text(cls, text: str) -> "PathTable":
        """Parse 'delay_ns power_db' rows; blank lines and # comments ignored."""
        delays, powers = [], []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'delay_ns power_db', got {raw!r}")
            delays.append(float(parts[0]))
            powers.append(float(parts[1]))
        return cls(tuple(delays), tuple(powers))


# ITU Extended Vehicular A delay/power profile.
EVA = PathTable(
    delays_ns=(0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0),
    relative_powers_db=(0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9),
)


@dataclass(frozen=True)
class ChannelProfile:
    """Per-tap average powers and shape factors plus the Doppler spread.

    ``profile_from_path_table`` normalises the tap powers to total 1;
    ``scaled`` (used for per-packet parameter drift) deliberately does not
    renormalise.
    """

    tap_powers: np.ndarray
    tap_shape_factors: np.ndarray
    doppler_hz: float = 0.0

    def __post_init__(self):
        powers = np.asarray(self.tap_powers, dtype=float)
        shapes = np.asarray(self.tap_shape_factors, dtype=float)
        if powers.ndim != 1 or powers.size < 1:
            raise ValueError("tap_powers must be a non-empty 1-D array")
        if powers.shape != shapes.shape:
            raise ValueError("tap_powers and tap_shape_factors differ in length")
        if (powers < 0).any():
            raise ValueError("tap powers must be non-negative")
        if shapes[0] < 0:
            raise ValueError("shape factor must be non-negative")
        if shapes.size > 1 and (shapes[1:] != 0).any():
            raise ValueError("only tap 0 may carry a line-of-sight component")
        if self.doppler_hz < 0:
            raise ValueError("Doppler spread must be non-negative")
        powers.setflags(write=False)
        shapes.setflags(write=False)
        object.__setattr__(self, "tap_powers", powers)
        object.__setattr__(self, "tap_shape_factors", shapes)

    @property
    def num_taps(self) -> int:
        return self.tap_powers.size

    @property
    def k0(self) -> float:
        return float(self.tap_shape_factors[0])

    def scaled(self, power_factors: np.ndarray, k0_factor: float = 1.0) -> "ChannelProfile":
        """Return a copy with tap powers and K0 multiplied by the factors."""
        shapes = self.tap_shape_factors.copy()
        shapes[0] *= k0_factor
        return ChannelProfile(
            tap_powers=self.tap_powers * np.asarray(power_factors, dtype=float),
            tap_shape_factors=shapes,
            doppler_hz=self.doppler_hz,
        )


def profile_from_path_table(
    table: PathTable,
    bandwidth_hz: float,
    k0: float = 0.0,
    doppler_hz: float = 0.0,
) -> ChannelProfile:
    """Collapse a path table onto sample-spaced taps at the given bandwidth.

    L = ceil(max(delay) * B), at least 1.  Each path lands in tap
    floor(delay*B + 0.5) (clamped to the last tap); linear path powers are
    summed per tap and normalised to a total of 1.  Tap 0 receives shape
    factor ``k0``, all other taps 0.
    """
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    if k0 < 0:
        raise ValueError("k0 must be non-negative")
    delays_s = np.asarray(table.delays_ns, dtype=float) * 1e-9
    num_taps = max(1, math.ceil(delays_s.max() * bandwidth_hz))
    bins = np.floor(delays_s * bandwidth_hz + 0.5).astype(int)
    bins = np.clip(bins, 0, num_taps - 1)
    linear = 10.0 ** (np.asarray(table.relative_powers_db, dtype=float) / 10.0)
    powers = np.zeros(num_taps)
    np.add.at(powers, bins, linear)
    powers /= powers.sum()
    shapes = np.zeros(num_taps)
    shapes[0] = k0
    return ChannelProfile(tap_powers=powers, tap_shape_factors=shapes, doppler_hz=doppler_hz)


def realize_packet(
    profile: ChannelProfile,
    num_symbols: int,
    symbol_duration_s: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw per-symbol tap gains for one packet, shape (num_symbols, L).

    Each tap is a fixed-angle LoS ray of power K*rho/(K+1) plus a diffuse
    sum-of-sinusoids of power rho/(K+1).  With zero Doppler every symbol
    sees the same gains; the magnitude of tap l is Rice-distributed with
    E[|h_l|^2] = rho_l either way.
    """
    if num_symbols < 1:
        raise ValueError("num_symbols must be >= 1")
    num_taps = profile.num_taps
    fd = profile.doppler_hz
    taps = np.empty((num_symbols, num_taps), dtype=complex)
    t = np.arange(num_symbols) * symbol_duration_s
    for tap in range(num_taps):
        rho = profile.tap_powers[tap]
        shape = profile.tap_shape_factors[tap]
        p_los = shape * rho / (shape + 1.0)
        p_diffuse = rho / (shape + 1.0)
        if fd == 0.0:
            los_phase = rng.uniform(0.0, 2.0 * np.pi)
            g = complex_awgn((), p_diffuse, rng)
            taps[:, tap] = math.sqrt(p_los) * np.exp(1j * los_phase) + g
        else:
            angle = rng.uniform(0.0, 2.0 * np.pi)
            los_phase = rng.uniform(0.0, 2.0 * np.pi)
            los = math.sqrt(p_los) * np.exp(
                1j * (los_phase + 2.0 * np.pi * fd * math.cos(angle) * t)
            )
            ray_angles = rng.uniform(0.0, 2.0 * np.pi, SCATTER_SINUSOIDS)
            ray_phases = rng.uniform(0.0, 2.0 * np.pi, SCATTER_SINUSOIDS)
            arg = (
                2.0 * np.pi * fd * np.cos(ray_angles)[None, :] * t[:, None]
                + ray_phases[None, :]
            )
            g = math.sqrt(p_diffuse / SCATTER_SINUSOIDS) * np.exp(1j * arg).sum(axis=1)
            taps[:, tap] = los + g
    return taps


def complex_awgn(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise, E[|w|^2] = sigma2."""
    if sigma2 < 0:
        raise ValueError("noise variance must be non-negative")
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    else:
        shape = tuple(shape)
    if sigma2 == 0.0:
        return np.zeros(shape, dtype=complex)
    z = rng.standard_normal(shape + (2,))
    return math.sqrt(sigma2 / 2.0) * (z[..., 0] + 1j * z[..., 1])


def _circular_convolve(taps: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Length-M circular convolution by folding the linear tail back."""
    full = np.convolve(taps, samples)
    m = samples.shape[-1]
    out = full[:m].copy()
    tail = full[m:]
    out[: tail.size] += tail
    return out


def apply_channel(
    symbol: LoRaSymbol | np.ndarray,
    taps: np.ndarray,
    sigma2: float,
    rng: np.random.Generator,
    mode: str = "circular",
) -> np.ndarray:
    """Pass one symbol through the tap filter and add AWGN.

    circular mode returns the length-M cyclic convolution (the standard
    single-symbol model); linear mode returns the full length M+L-1 linear
    convolution.  Noise is i.i.d. complex Gaussian, variance sigma2 per
    sample.
    """
    samples = symbol.samples if isinstance(symbol, LoRaSymbol) else np.asarray(symbol, dtype=complex)
    taps = np.asarray(taps, dtype=complex)
    if taps.ndim != 1 or taps.size < 1:
        raise ValueError("taps must be a non-empty 1-D array")
    if taps.size > samples.shape[-1]:
        raise ValueError(f"channel has {taps.size} taps but the symbol only {samples.shape[-1]} samples")
    if mode == "circular":
        out = _circular_convolve(taps, samples)
    elif mode == "linear":
        out = np.convolve(taps, samples)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out + complex_awgn(out.shape, sigma2, rng)


def apply_channel_batch(
    symbol_samples: np.ndarray,
    taps: np.ndarray,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Circular-channel a batch: (S, M) samples with per-symbol (S, L) taps."""
    symbol_samples = np.asarray(symbol_samples, dtype=complex)
    taps = np.asarray(taps, dtype=complex)
    out = taps[:, 0:1] * symbol_samples
    for tap in range(1, taps.shape[1]):
        out += taps[:, tap : tap + 1] * np.roll(symbol_samples, tap, axis=1)
    return out + complex_awgn(out.shape, sigma2, rng)


def apply_channel_stream(
    symbol_samples: np.ndarray,
    taps: np.ndarray,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Linear-convolution packet stream, returned as (S, M) receive blocks.

    Symbols are concatenated before filtering, so the first L-1 samples of
    each block carry genuine inter-symbol interference from the previous
    symbol's tail instead of the cyclic wrap-around.
    """
    symbol_samples = np.asarray(symbol_samples, dtype=complex)
    taps = np.asarray(taps, dtype=complex)
    num_symbols, m = symbol_samples.shape
    num_taps = taps.shape[1]
    stream = np.zeros(num_symbols * m + num_taps - 1, dtype=complex)
    for tap in range(num_taps):
        stream[tap : tap + num_symbols * m] += (taps[:, tap : tap + 1] * symbol_samples).ravel()
    stream += complex_awgn(stream.shape, sigma2, rng)
    return stream[: num_symbols * m].reshape(num_symbols, m)
