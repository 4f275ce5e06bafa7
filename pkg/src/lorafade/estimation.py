"""Moment-based channel-statistics estimation from preamble spectra.

The preamble carries symbol 0, so across packets bin 0 collects the
(possibly line-of-sight) first tap, bin M-l the l-th tap, and every other
bin pure noise.  Accumulating per-bin second and fourth absolute moments
is enough to recover the noise variance, the tap powers and the shape
factor of the first tap:

    second/fourth-moment Rician split of bin 0:
        d = sqrt(max(0, 2*m2^2 - m4))        # LoS power of the bin
        diffuse + noise = m2 - d

Accumulators over disjoint packet sets merge by plain addition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detectors import ChannelStatistics

# Floor applied to estimated quantities that must stay strictly positive
# for the detector coefficients to remain finite.
NOISE_VAR_FLOOR = 1e-30
_K0_CAP = 1e6


class StatisticAccumulator:
    """Running per-bin sums of |Y|^2 and |Y|^4 over preamble spectra."""

    def __init__(self, m_size: int):
        if m_size < 1:
            raise ValueError("m_size must be positive")
        self.m_size = int(m_size)
        self.count = 0
        self.sum_sq = np.zeros(self.m_size)
        self.sum_quad = np.zeros(self.m_size)

    def accumulate(self, preamble_spectrum: np.ndarray) -> "StatisticAccumulator":
        """Add one (M,) spectrum or a (..., M) batch of them."""
        spectra = np.asarray(preamble_spectrum, dtype=complex)
        if spectra.shape[-1] != self.m_size:
            raise ValueError("spectrum size does not match the accumulator")
        power = (spectra.real**2 + spectra.imag**2).reshape(-1, self.m_size)
        self.sum_sq += power.sum(axis=0)
        self.sum_quad += (power * power).sum(axis=0)
        self.count += power.shape[0]
        return self

    def __add__(self, other: "StatisticAccumulator") -> "StatisticAccumulator":
        if not isinstance(other, StatisticAccumulator):
            return NotImplemented
        if other.m_size != self.m_size:
            raise ValueError("cannot merge accumulators of different sizes")
        merged = StatisticAccumulator(self.m_size)
        merged.count = self.count + other.count
        merged.sum_sq = self.sum_sq + other.sum_sq
        merged.sum_quad = self.sum_quad + other.sum_quad
        return merged


@dataclass(frozen=True)
class EstimationResult:
    """Estimated statistics plus diagnostics about applied clamps."""

    statistics: ChannelStatistics
    flags: tuple[str, ...] = field(default_factory=tuple)


def estimate_statistics(acc: StatisticAccumulator, num_taps: int) -> EstimationResult:
    """Turn accumulated moments into ChannelStatistics for L known taps.

    Noise variance is the mean |Y|^2 over off-support bins; tap powers
    come from the support bins' excess power; the first tap's shape factor
    from the second/fourth-moment split of bin 0.  Degenerate moments are
    clamped (never raised) and reported through the result flags.
    """
    if num_taps < 1 or num_taps >= acc.m_size:
        raise ValueError("num_taps must be in [1, m_size)")
    if acc.count < 2:
        raise ValueError("need at least two accumulated spectra")
    flags: list[str] = []
    m = acc.m_size
    mean_sq = acc.sum_sq / acc.count
    mean_quad = acc.sum_quad / acc.count

    support = np.array([(-tap) % m for tap in range(num_taps)])
    off_support = np.setdiff1d(np.arange(m), support)
    noise_var = float(mean_sq[off_support].mean())
    if noise_var < NOISE_VAR_FLOOR:
        noise_var = NOISE_VAR_FLOOR
        flags.append("noise_var_floored")

    powers = np.empty(num_taps)
    for tap in range(1, num_taps):
        excess = (mean_sq[(-tap) % m] - noise_var) / m
        if excess <= 0.0:
            excess = NOISE_VAR_FLOOR
            flags.append(f"rho{tap}_floored")
        powers[tap] = excess

    m2 = float(mean_sq[0])
    m4 = float(mean_quad[0])
    bin_power = m2 - noise_var
    if bin_power <= 0.0:
        bin_power = NOISE_VAR_FLOOR
        flags.append("rho0_floored")
    powers[0] = bin_power / m

    discriminant = 2.0 * m2 * m2 - m4
    if discriminant <= 0.0:
        k0 = 0.0
        flags.append("k0_degenerate_moments")
    else:
        los_power = float(np.sqrt(discriminant))
        scatter = bin_power - los_power
        if scatter <= 0.0:
            k0 = _K0_CAP
            flags.append("k0_saturated")
        else:
            k0 = min(los_power / scatter, _K0_CAP)
    statistics = ChannelStatistics(
        tap_powers=powers, k0=k0, noise_var=noise_var, m_size=m
    )
    return EstimationResult(statistics=statistics, flags=tuple(flags))


def save_statistics(stats: ChannelStatistics, path) -> None:
    """Write statistics as a human-readable key=value file."""
    lines = [
        "# lorafade channel statistics",
        f"m_size = {stats.m_size}",
        f"noise_var = {stats.noise_var!r}",
        f"k0 = {stats.k0!r}",
        "tap_powers = " + ",".join(repr(float(p)) for p in stats.tap_powers),
        "",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def load_statistics(path) -> ChannelStatistics:
    """Read statistics written by :func:`save_statistics`."""
    fields: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        return ChannelStatistics(
            tap_powers=np.array([float(v) for v in fields["tap_powers"].split(",")]),
            k0=float(fields["k0"]),
            noise_var=float(fields["noise_var"]),
            m_size=int(fields["m_size"]),
        )
    except KeyError as missing:
        raise ValueError(f"statistics file is missing key {missing}") from None
