"""Symbol detectors operating on the dechirped spectrum.

Four families, all deciding among the M cyclic shifts:

* conventional: index of the strongest bin.
* coherent ML: argmax_m sum_l Re{Y[(m-l) mod M] * conj(h_l)} with known
  instantaneous tap gains -- a RAKE combiner over the L support bins.
* noncoherent ML: needs only the channel statistics (tap powers, shape
  factor of the first tap, noise variance).  Per candidate m the
  log-likelihood, with m-independent constants dropped, is

      log I0(b*|Y[m]|) + sum_l q_l * |Y[(m-l) mod M]|^2,

  where b = 2*sqrt(Kt*(Kt+1)/(M*rho0 + s2)),
  q_0 = M*rho0 / (s2*(M*rho0 + (K0+1)*s2)),
  q_l = M*rho_l / (s2*(M*rho_l + s2)) for l >= 1, s2 the per-bin noise
  variance and Kt the effective shape factor of the peak bin.
* TDEL: cyclic correlation against a reference spectrum built from the
  preamble, deciding on the shift with the largest magnitude.

All argmax rules break ties toward the lowest symbol index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bessel import log_i0, log_i0_nonneg


@dataclass(frozen=True)
class ChannelStatistics:
    """Average channel knowledge consumed by the noncoherent detector.

    Attributes
    ----------
    tap_powers : np.ndarray
        Average linear power per tap (need not sum to 1).
    k0 : float
        Rician shape factor of tap 0; taps >= 1 are Rayleigh.
    noise_var : float
        Per-sample (equivalently per-bin) complex noise variance.
    m_size : int
        Alphabet size of the spectra these statistics describe.
    """

    tap_powers: np.ndarray
    k0: float
    noise_var: float
    m_size: int

    def __post_init__(self):
        powers = np.asarray(self.tap_powers, dtype=float)
        if powers.ndim != 1 or powers.size < 1:
            raise ValueError("tap_powers must be a non-empty 1-D array")
        if (powers <= 0).any():
            raise ValueError("tap powers must be positive")
        if self.k0 < 0:
            raise ValueError("k0 must be non-negative")
        if not self.noise_var > 0:
            raise ValueError("noise variance must be positive")
        if not isinstance(self.m_size, (int, np.integer)) or self.m_size < powers.size:
            raise ValueError("m_size must be an integer >= the number of taps")
        powers.setflags(write=False)
        object.__setattr__(self, "tap_powers", powers)
        object.__setattr__(self, "m_size", int(self.m_size))

    @property
    def num_taps(self) -> int:
        return self.tap_powers.size

    @property
    def shape_factor_effective(self) -> float:
        """Shape factor of the peak bin after the DFT.

        The sqrt(M) processing gain boosts the LoS part while the bin also
        absorbs the noise, giving
        Kt = K0*M*rho0 / (M*rho0 + (K0+1)*sigma2), always in [0, K0].
        """
        m_rho0 = self.m_size * self.tap_powers[0]
        return self.k0 * m_rho0 / (m_rho0 + (self.k0 + 1.0) * self.noise_var)


@dataclass(frozen=True)
class DetectionDecision:
    """Detector output: decided symbol index and the winning metric value."""

    symbol: int
    score: float


@dataclass(frozen=True)
class TdelReference:
    """Reference spectrum template extracted from preamble upchirps."""

    bins: np.ndarray

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=complex)
        if bins.ndim != 1 or bins.size < 1:
            raise ValueError("reference must be a non-empty 1-D spectrum")
        if not np.any(bins):
            raise ValueError("reference has no nonzero bin")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    @property
    def m_size(self) -> int:
        return self.bins.size


def _decision(metric: np.ndarray) -> DetectionDecision:
    symbol = int(np.argmax(metric))
    return DetectionDecision(symbol=symbol, score=float(metric[symbol]))


# ---------------------------------------------------------------------------
# conventional


def detect_conventional(spectrum: np.ndarray) -> DetectionDecision:
    """Pick the bin with the highest power."""
    spectrum = np.asarray(spectrum)
    return _decision(np.abs(spectrum) ** 2)


# ---------------------------------------------------------------------------
# coherent ML


def coherent_metrics(spectra: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Coherent ML metric for every candidate symbol.

    metric[m] = sum_l Re{Y[(m-l) mod M] * conj(h_l)}.  ``spectra`` may be
    (M,) or (S, M); ``taps`` (L,) applies one gain vector everywhere while
    (S, L) supplies per-row gains.
    """
    spectra = np.asarray(spectra, dtype=complex)
    taps = np.asarray(taps, dtype=complex)
    metric = np.zeros(spectra.shape, dtype=float)
    for tap in range(taps.shape[-1]):
        gain = np.conj(taps[..., tap])
        if taps.ndim > 1:
            gain = gain[..., None]
        metric += (np.roll(spectra, tap, axis=-1) * gain).real
    return metric


def detect_coherent_ml(spectrum: np.ndarray, taps: np.ndarray) -> DetectionDecision:
    """Coherent ML decision with known instantaneous tap gains."""
    return _decision(coherent_metrics(spectrum, taps))


def coherent_log_likelihood(spectrum: np.ndarray, taps: np.ndarray, symbol: int) -> float:
    """Per-symbol coherent log-likelihood, m-independent terms dropped.

    Equals sqrt(M) * coherent metric; the dropped pieces are the additive
    constant collecting all |Y[k]|^2 terms, the -M*|h_l|^2 energy terms and
    the overall 2/sigma^2 scale, none of which depend on the candidate m.
    """
    spectrum = np.asarray(spectrum)
    metric = coherent_metrics(spectrum, taps)
    return float(np.sqrt(spectrum.shape[-1]) * metric[..., symbol])


# ---------------------------------------------------------------------------
# noncoherent ML


def _nc_ml_coefficients(stats: ChannelStatistics) -> tuple[float, np.ndarray]:
    m = stats.m_size
    s2 = stats.noise_var
    rho = stats.tap_powers
    k_eff = stats.shape_factor_effective
    bessel_scale = 2.0 * np.sqrt(k_eff * (k_eff + 1.0) / (m * rho[0] + s2))
    quad = np.empty(rho.size)
    quad[0] = m * rho[0] / (s2 * (m * rho[0] + (stats.k0 + 1.0) * s2))
    quad[1:] = m * rho[1:] / (s2 * (m * rho[1:] + s2))
    return float(bessel_scale), quad


def nc_ml_metrics(spectra: np.ndarray, stats: ChannelStatistics) -> np.ndarray:
    """Noncoherent ML metric for every candidate symbol; batch-aware.

    This is the exact per-candidate log-likelihood of the bin-magnitude
    model with every m-independent term dropped.  Finite by construction:
    log I0 is evaluated in the log domain and noise_var > 0 keeps the
    quadratic weights bounded.
    """
    spectra = np.asarray(spectra, dtype=complex)
    if spectra.shape[-1] != stats.m_size:
        raise ValueError(
            f"spectrum has {spectra.shape[-1]} bins but statistics describe M={stats.m_size}"
        )
    bessel_scale, quad = _nc_ml_coefficients(stats)
    magnitude = np.abs(spectra)
    power = magnitude * magnitude
    metric = quad[0] * power
    for tap in range(1, quad.size):
        echo = np.roll(power, tap, axis=-1)
        echo *= quad[tap]
        metric += echo
    if bessel_scale > 0.0:
        magnitude *= bessel_scale
        metric += log_i0_nonneg(magnitude)
    return metric


def detect_nc_ml(spectrum: np.ndarray, stats: ChannelStatistics) -> DetectionDecision:
    """Noncoherent ML decision from channel statistics alone."""
    return _decision(nc_ml_metrics(spectrum, stats))


def nc_log_likelihood(spectrum: np.ndarray, stats: ChannelStatistics, symbol: int) -> float:
    """Per-symbol noncoherent log-likelihood, m-independent terms dropped.

    The dropped constant collects the all-bins Rayleigh factor, the
    candidate-independent normalisations and exp(-Kt); what remains is the
    metric maximised by ``detect_nc_ml``.
    """
    return float(nc_ml_metrics(spectrum, stats)[..., symbol])


# ---------------------------------------------------------------------------
# TDEL


def build_tdel_reference(
    preamble_spectra: np.ndarray,
    variant: str = "original",
    num_taps: int | None = None,
) -> TdelReference:
    """Average preamble spectra into a cyclic-correlation reference.

    original: bins below 1/4 of the strongest bin's amplitude are zeroed.
    modified: requires ``num_taps``; keeps exactly the L bins a length-L
    channel can populate for the known preamble symbol (index 0), i.e.
    bins {0, M-1, ..., M-L+1}, and zeroes everything else.  Anchoring on
    the known support rather than the strongest bin matters: when the
    second tap momentarily outfades the first, a peak-anchored window
    would drop tap 0 from the reference and leave adjacent candidates
    nearly tied.
    """
    spectra = np.atleast_2d(np.asarray(preamble_spectra, dtype=complex))
    if spectra.shape[0] < 1:
        raise ValueError("need at least one preamble spectrum")
    mean = spectra.mean(axis=0)
    amplitude = np.abs(mean)
    peak = amplitude.max()
    if peak == 0.0:
        raise ValueError("averaged preamble spectrum is identically zero")
    if variant == "original":
        template = np.where(amplitude >= 0.25 * peak, mean, 0.0)
    elif variant == "modified":
        if num_taps is None:
            raise ValueError("the modified variant needs the channel tap count")
        keep = (-np.arange(num_taps)) % mean.size
        template = np.zeros_like(mean)
        template[keep] = mean[keep]
    else:
        raise ValueError(f"unknown TDEL variant {variant!r}")
    return TdelReference(bins=template)


def tdel_metrics(spectra: np.ndarray, reference: TdelReference) -> np.ndarray:
    """|cyclic cross-correlation| of spectra against the reference.

    metric[s] = |sum_k Y[k] * conj(R[(k-s) mod M])|, evaluated for all M
    shifts via FFTs; the preamble carries symbol 0, so shift s corresponds
    to candidate symbol s.
    """
    spectra = np.asarray(spectra, dtype=complex)
    if spectra.shape[-1] != reference.m_size:
        raise ValueError("spectrum and reference sizes differ")
    cross = np.fft.fft(spectra, axis=-1) * np.conj(np.fft.fft(reference.bins))
    return np.abs(np.fft.ifft(cross, axis=-1))


def detect_tdel(spectrum: np.ndarray, reference: TdelReference) -> DetectionDecision:
    """Decide on the cyclic shift whose correlation magnitude is largest."""
    return _decision(tdel_metrics(spectrum, reference))
