"""Independent reference implementations shared by the test modules.

Everything here is deliberately brute force or built on scipy/mpmath so it
shares no algorithmic shortcuts with the package code it checks.
"""

import numpy as np
from scipy import special

from lorafade.channel import complex_awgn
from lorafade.detectors import ChannelStatistics


def full_likelihood_oracle(spectra: np.ndarray, stats: ChannelStatistics) -> np.ndarray:
    """Complete per-candidate log-likelihood over all M bin magnitudes.

    Every bin contributes its own magnitude law: Rice for the candidate's
    peak bin, heavy Rayleigh for the L-1 echo bins, noise Rayleigh for the
    rest.  Nothing is dropped.  This validates the detector's constant
    dropping and coefficient algebra; the Bessel primitive itself is
    certified separately against mpmath in test_bessel.
    """
    spectra = np.atleast_2d(spectra)
    m = stats.m_size
    s2 = stats.noise_var
    rho = stats.tap_powers
    k_eff = stats.shape_factor_effective
    r = np.abs(spectra)
    power = r**2
    safe_r = np.maximum(r, 1e-300)

    lp_noise = np.log(2.0 * safe_r / s2) - power / s2
    lp_echo = [
        np.log(2.0 * safe_r / (m * rho[tap] + s2)) - power / (m * rho[tap] + s2)
        for tap in range(1, stats.num_taps)
    ]
    arg = 2.0 * np.sqrt(k_eff * (k_eff + 1.0) / (m * rho[0] + s2)) * r
    lp_rice = (
        np.log(2.0 * (k_eff + 1.0) * safe_r / (m * rho[0] + s2))
        - k_eff
        - (k_eff + 1.0) * power / (m * rho[0] + s2)
        + np.log(special.i0e(arg))
        + arg
    )
    base = lp_noise.sum(axis=-1, keepdims=True)
    loglik = np.empty_like(power)
    for cand in range(m):
        total = base[..., 0] + lp_rice[..., cand] - lp_noise[..., cand]
        for tap in range(1, stats.num_taps):
            bin_idx = (cand - tap) % m
            total = total + lp_echo[tap - 1][..., bin_idx] - lp_noise[..., bin_idx]
        loglik[..., cand] = total
    return loglik


def random_statistics(rng, m=16, num_taps=2) -> ChannelStatistics:
    return ChannelStatistics(
        tap_powers=rng.uniform(0.05, 1.2, num_taps),
        k0=rng.uniform(0.0, 12.0),
        noise_var=10.0 ** rng.uniform(-2.0, 1.0),
        m_size=m,
    )


def model_spectra(rng, stats: ChannelStatistics, n: int) -> np.ndarray:
    """Draw spectra from the generative bin model for given statistics."""
    m = stats.m_size
    rho = stats.tap_powers
    symbols = rng.integers(0, m, n)
    spectra = complex_awgn((n, m), stats.noise_var, rng)
    los = np.sqrt(stats.k0 * rho[0] / (stats.k0 + 1))
    scatter = np.sqrt(rho[0] / (stats.k0 + 1) / 2)
    h0 = los * np.exp(2j * np.pi * rng.random(n)) + scatter * (
        rng.standard_normal(n) + 1j * rng.standard_normal(n)
    )
    spectra[np.arange(n), symbols] += np.sqrt(m) * h0
    for tap in range(1, stats.num_taps):
        h = np.sqrt(rho[tap] / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        spectra[np.arange(n), (symbols - tap) % m] += np.sqrt(m) * h
    return spectra


def shifted_symbol_sum_oracle(taps: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Direct per-tap shifted-symbol accumulation (double loop)."""
    m = samples.size
    out = np.zeros(m, dtype=complex)
    for tap, gain in enumerate(taps):
        for n in range(m):
            out[n] += gain * samples[(n - tap) % m]
    return out
