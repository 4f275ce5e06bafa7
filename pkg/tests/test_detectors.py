"""Detector rules against brute-force likelihood and matched-filter oracles."""

import numpy as np
import pytest
from scipy import special

from lorafade.channel import profile_from_path_table, EVA
from lorafade.detectors import (
    ChannelStatistics,
    TdelReference,
    build_tdel_reference,
    coherent_log_likelihood,
    coherent_metrics,
    detect_conventional,
    detect_coherent_ml,
    detect_nc_ml,
    detect_tdel,
    nc_log_likelihood,
    nc_ml_metrics,
    tdel_metrics,
)
from lorafade.modem import dechirp_and_transform, modulate, modulate_batch
from oracles import full_likelihood_oracle, model_spectra, random_statistics
from lorafade.channel import apply_channel, apply_channel_batch


class TestChannelStatistics:
    def test_effective_shape_factor_value(self):
        stats = ChannelStatistics(np.array([0.9, 0.1]), 2.0, 0.5, 128)
        m_rho0 = 128 * 0.9
        assert stats.shape_factor_effective == pytest.approx(
            2.0 * m_rho0 / (m_rho0 + 3.0 * 0.5)
        )

    def test_effective_shape_factor_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            stats = random_statistics(rng)
            assert 0.0 <= stats.shape_factor_effective <= stats.k0

    def test_rayleigh_first_tap_gives_zero_shape(self):
        stats = ChannelStatistics(np.array([1.0]), 0.0, 1.0, 8)
        assert stats.shape_factor_effective == 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(tap_powers=np.array([0.0, 1.0]), k0=0.0, noise_var=1.0, m_size=8),
            dict(tap_powers=np.array([1.0]), k0=-1.0, noise_var=1.0, m_size=8),
            dict(tap_powers=np.array([1.0]), k0=0.0, noise_var=0.0, m_size=8),
            dict(tap_powers=np.array([1.0] * 9), k0=0.0, noise_var=1.0, m_size=8),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            ChannelStatistics(**kwargs)


class TestConventional:
    def test_clean_symbol(self):
        spectrum = dechirp_and_transform(modulate(128, 42).samples)
        decision = detect_conventional(spectrum)
        assert decision.symbol == 42
        assert decision.score == pytest.approx(128.0)

    def test_exact_tie_breaks_low(self):
        spectrum = np.zeros(16, dtype=complex)
        spectrum[3] = 2.0
        spectrum[7] = 2.0
        assert detect_conventional(spectrum).symbol == 3

    def test_stronger_echo_causes_deterministic_error(self):
        taps = np.array([0.5, 1.0])
        for m in (0, 17, 100):
            received = apply_channel(modulate(128, m), taps, 0.0, np.random.default_rng(0))
            decision = detect_conventional(dechirp_and_transform(received))
            assert decision.symbol == (m - 1) % 128


class TestCoherentMl:
    def test_single_unit_tap_reduces_to_real_part(self):
        rng = np.random.default_rng(1)
        spectra = rng.standard_normal((200, 32)) + 1j * rng.standard_normal((200, 32))
        reduced = np.argmax(spectra.real, axis=1)
        metric = coherent_metrics(spectra, np.array([1.0 + 0j]))
        np.testing.assert_array_equal(np.argmax(metric, axis=1), reduced)

    def test_noiseless_eva_exhaustive(self):
        rng = np.random.default_rng(2)
        profile = profile_from_path_table(EVA, 500e3)
        taps = np.sqrt(profile.tap_powers / 2) * (
            rng.standard_normal(2) + 1j * rng.standard_normal(2)
        )
        for m in range(128):
            received = apply_channel(modulate(128, m), taps, 0.0, rng)
            decision = detect_coherent_ml(dechirp_and_transform(received), taps)
            assert decision.symbol == m

    def test_noiseless_metric_value(self):
        rng = np.random.default_rng(3)
        taps = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        received = apply_channel(modulate(64, 20), taps, 0.0, rng)
        decision = detect_coherent_ml(dechirp_and_transform(received), taps)
        assert decision.score == pytest.approx(
            np.sqrt(64) * np.sum(np.abs(taps) ** 2), rel=1e-9
        )

    def test_log_likelihood_accessor_scaling(self):
        # L = 1, h = 1, spectrum sqrt(M) at the true bin: the Eq-form
        # summand evaluates to sqrt(M)*sqrt(M) = M.
        m_size = 64
        spectrum = np.zeros(m_size, dtype=complex)
        spectrum[11] = np.sqrt(m_size)
        value = coherent_log_likelihood(spectrum, np.array([1.0 + 0j]), 11)
        assert value == pytest.approx(m_size)

    def test_matches_restricted_matched_filter(self):
        """RAKE view: the metric equals Re of the inner product between the
        L support bins and the conjugated taps."""
        rng = np.random.default_rng(4)
        m_size, num_taps = 32, 3
        spectrum = rng.standard_normal(m_size) + 1j * rng.standard_normal(m_size)
        taps = rng.standard_normal(num_taps) + 1j * rng.standard_normal(num_taps)
        metric = coherent_metrics(spectrum, taps)
        for cand in range(m_size):
            support = spectrum[[(cand - tap) % m_size for tap in range(num_taps)]]
            assert metric[cand] == pytest.approx(
                float(np.sum(support * np.conj(taps)).real), rel=1e-12
            )


class TestNcMl:
    def test_rayleigh_first_tap_drops_bessel_term(self):
        rng = np.random.default_rng(5)
        stats = ChannelStatistics(np.array([0.9, 0.1]), 0.0, 0.3, 16)
        spectra = rng.standard_normal((50, 16)) + 1j * rng.standard_normal((50, 16))
        power = np.abs(spectra) ** 2
        m_rho = 16 * stats.tap_powers
        quad = (
            m_rho[0] / (0.3 * (m_rho[0] + 0.3)) * power
            + m_rho[1] / (0.3 * (m_rho[1] + 0.3)) * np.roll(power, 1, axis=1)
        )
        np.testing.assert_allclose(nc_ml_metrics(spectra, stats), quad, rtol=1e-12)

    def test_single_tap_equals_conventional(self):
        rng = np.random.default_rng(6)
        for k0 in (0.0, 4.0):
            stats = ChannelStatistics(np.array([1.0]), k0, 0.5, 16)
            spectra = rng.standard_normal((10_000, 16)) + 1j * rng.standard_normal((10_000, 16))
            nc = np.argmax(nc_ml_metrics(spectra, stats), axis=1)
            conventional = np.argmax(np.abs(spectra) ** 2, axis=1)
            np.testing.assert_array_equal(nc, conventional)

    def test_agrees_with_full_likelihood_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            stats = random_statistics(rng, m=8)
            spectra = model_spectra(rng, stats, 100)
            nc = np.argmax(nc_ml_metrics(spectra, stats), axis=-1)
            oracle = np.argmax(full_likelihood_oracle(spectra, stats), axis=-1)
            np.testing.assert_array_equal(nc, oracle)

    def test_scale_invariance(self):
        """Scaling bins by c with statistics scaled by c^2 keeps decisions."""
        rng = np.random.default_rng(8)
        stats = random_statistics(rng, m=32)
        spectra = model_spectra(rng, stats, 500)
        scale = 7.3
        scaled_stats = ChannelStatistics(
            tap_powers=stats.tap_powers * scale**2,
            k0=stats.k0,
            noise_var=stats.noise_var * scale**2,
            m_size=stats.m_size,
        )
        np.testing.assert_array_equal(
            np.argmax(nc_ml_metrics(spectra, stats), axis=-1),
            np.argmax(nc_ml_metrics(scale * spectra, scaled_stats), axis=-1),
        )

    def test_metric_finite_at_extremes(self):
        stats = ChannelStatistics(np.array([0.93, 0.07]), 10.0, 1e-30, 128)
        spectrum = np.full(128, 1e3 + 1e3j)
        assert np.isfinite(nc_ml_metrics(spectrum, stats)).all()

    def test_zero_bin_contributes_nothing(self):
        stats = ChannelStatistics(np.array([1.0]), 0.0, 0.5, 16)
        spectrum = np.zeros(16, dtype=complex)
        spectrum[4] = 3.0
        assert nc_log_likelihood(spectrum, stats, 9) == 0.0
        assert detect_nc_ml(spectrum, stats).symbol == 4

    def test_size_mismatch_raises(self):
        stats = ChannelStatistics(np.array([1.0]), 0.0, 0.5, 16)
        with pytest.raises(ValueError):
            nc_ml_metrics(np.zeros(8, dtype=complex), stats)

    def test_noiseless_decisions_perfect_for_small_noise_stats(self):
        """With exact tap draws and sigma^2 -> tiny, NC-ML decides every
        symbol correctly on the two-tap EVA channel, for all shape factors."""
        rng = np.random.default_rng(9)
        for k0 in (0.0, 2.0, 10.0):
            profile = profile_from_path_table(EVA, 500e3, k0=k0)
            stats = ChannelStatistics(profile.tap_powers, k0, 1e-12, 128)
            los = np.sqrt(k0 * profile.tap_powers[0] / (k0 + 1))
            h = np.sqrt(profile.tap_powers / (np.array([k0, 0.0]) + 1) / 2) * (
                rng.standard_normal(2) + 1j * rng.standard_normal(2)
            )
            h[0] += los
            for m in range(0, 128, 7):
                received = apply_channel(modulate(128, m), h, 0.0, rng)
                assert detect_nc_ml(dechirp_and_transform(received), stats).symbol == m


class TestTdel:
    def _preamble_spectra(self, taps, sigma2, rng, count=8, m_size=64):
        tx = modulate_batch(m_size, np.zeros(count, dtype=int))
        taps_rows = np.broadcast_to(np.asarray(taps, dtype=complex), (count, len(taps)))
        return dechirp_and_transform(apply_channel_batch(tx, taps_rows, sigma2, rng))

    def test_original_quarter_rule_zeroes_weak_echo(self):
        rng = np.random.default_rng(10)
        spectra = self._preamble_spectra([1.0, 0.1], 0.0, rng, count=1)
        original = build_tdel_reference(spectra, "original")
        modified = build_tdel_reference(spectra, "modified", num_taps=2)
        assert original.bins[63] == 0.0
        assert original.bins[0] != 0.0
        assert modified.bins[63] != 0.0
        assert modified.bins[0] != 0.0

    def test_single_tap_keeps_one_bin(self):
        rng = np.random.default_rng(11)
        spectra = self._preamble_spectra([1.0], 0.0, rng)
        for variant, kwargs in (("original", {}), ("modified", {"num_taps": 1})):
            reference = build_tdel_reference(spectra, variant, **kwargs)
            assert np.count_nonzero(reference.bins) == 1

    def test_noiseless_reference_values(self):
        rng = np.random.default_rng(12)
        spectra = self._preamble_spectra([1.0, 0.5], 0.0, rng)
        reference = build_tdel_reference(spectra, "modified", num_taps=2)
        assert reference.bins[0] == pytest.approx(np.sqrt(64) * 1.0, abs=1e-9)
        assert reference.bins[63] == pytest.approx(np.sqrt(64) * 0.5, abs=1e-9)

    def test_matched_reference_decodes_noiselessly(self):
        rng = np.random.default_rng(13)
        taps = np.array([0.8 - 0.2j, 0.4 + 0.3j])
        spectra = self._preamble_spectra(taps, 0.0, rng)
        reference = build_tdel_reference(spectra, "modified", num_taps=2)
        for m in range(64):
            received = apply_channel(modulate(64, m), taps, 0.0, rng)
            assert detect_tdel(dechirp_and_transform(received), reference).symbol == m

    def test_delta_reference_reduces_to_conventional(self):
        rng = np.random.default_rng(14)
        delta = np.zeros(32, dtype=complex)
        delta[0] = 1.0
        reference = TdelReference(bins=delta)
        spectra = rng.standard_normal((2000, 32)) + 1j * rng.standard_normal((2000, 32))
        np.testing.assert_array_equal(
            np.argmax(tdel_metrics(spectra, reference), axis=1),
            np.argmax(np.abs(spectra), axis=1),
        )

    def test_stale_reference_degrades_at_high_snr(self):
        """A reference drawn from an independent channel realization errors
        far more often than the matched one (the stale-preamble mechanism)."""
        rng = np.random.default_rng(15)
        m_size, sigma2 = 64, 1e-3
        profile = profile_from_path_table(EVA, 500e3)

        def draw_taps():
            return np.sqrt(profile.tap_powers / 2) * (
                rng.standard_normal(2) + 1j * rng.standard_normal(2)
            )

        matched_errors = stale_errors = 0
        for _ in range(300):
            taps = draw_taps()
            matched_ref = build_tdel_reference(
                self._preamble_spectra(taps, sigma2, rng, m_size=m_size), "modified", num_taps=2
            )
            stale_ref = build_tdel_reference(
                self._preamble_spectra(draw_taps(), sigma2, rng, m_size=m_size),
                "modified",
                num_taps=2,
            )
            payload = rng.integers(0, m_size, 20)
            tx = modulate_batch(m_size, payload)
            taps_rows = np.broadcast_to(taps, (20, 2))
            spectra = dechirp_and_transform(apply_channel_batch(tx, taps_rows, sigma2, rng))
            matched_errors += int(
                (np.argmax(tdel_metrics(spectra, matched_ref), axis=1) != payload).sum()
            )
            stale_errors += int(
                (np.argmax(tdel_metrics(spectra, stale_ref), axis=1) != payload).sum()
            )
        assert matched_errors <= 2
        assert stale_errors > 50 * max(matched_errors, 1)

    def test_rejects_all_zero_average(self):
        with pytest.raises(ValueError):
            build_tdel_reference(np.zeros((4, 16), dtype=complex), "original")

    def test_rejects_unknown_variant(self):
        with pytest.raises(ValueError):
            build_tdel_reference(np.ones((1, 16), dtype=complex), "fancy")

    def test_modified_needs_tap_count(self):
        with pytest.raises(ValueError):
            build_tdel_reference(np.ones((1, 16), dtype=complex), "modified")

    def test_size_mismatch_raises(self):
        reference = TdelReference(bins=np.ones(16, dtype=complex))
        with pytest.raises(ValueError):
            tdel_metrics(np.ones(8, dtype=complex), reference)
