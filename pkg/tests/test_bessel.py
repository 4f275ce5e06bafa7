"""log I0 against high-precision references."""

import mpmath
import numpy as np
import pytest
from scipy import special

from lorafade.bessel import log_i0


def _reference(x: float) -> float:
    with mpmath.workdps(60):
        return float(mpmath.log(mpmath.besseli(0, mpmath.mpf(x))))


class TestAccuracy:
    def test_matches_mpmath_on_0_to_50(self):
        """Relative error below 1e-10 across the whole working range."""
        grid = np.concatenate(
            [
                [0.0],
                np.logspace(-14, -1, 40),
                np.linspace(0.1, 50.0, 300),
                [19.999999, 20.0, 20.000001],  # both sides of the branch switch
            ]
        )
        ours = log_i0(grid)
        for x, got in zip(grid, ours):
            want = _reference(x)
            if want == 0.0:
                assert got == 0.0
            else:
                assert abs(got - want) / abs(want) < 1e-10, f"x={x}: {got} vs {want}"

    def test_matches_scipy_log_domain_form(self):
        x = np.linspace(0.0, 600.0, 500)
        want = x + np.log(special.i0e(x))
        np.testing.assert_allclose(log_i0(x), want, rtol=1e-12, atol=1e-12)

    def test_tiny_argument_keeps_relative_precision(self):
        # log I0(x) ~ x^2/4 for x -> 0; a plain log(i0(x)) would round to 0.
        x = 1e-12
        assert log_i0(x) == pytest.approx(x * x / 4.0, rel=1e-10)


class TestAsymptotics:
    def test_approaches_x_minus_half_log_2pi_x(self):
        """The gap to the leading-order form shrinks like 1/(8x)."""
        previous = np.inf
        for x in (1e2, 1e3, 1e4, 1e6):
            gap = log_i0(x) - (x - 0.5 * np.log(2 * np.pi * x))
            assert 0.0 < gap < 1.5 / (8.0 * x)
            assert gap < previous
            previous = gap

    def test_no_overflow_at_huge_argument(self):
        value = log_i0(1e8)
        assert np.isfinite(value)
        assert value == pytest.approx(1e8 - 0.5 * np.log(2 * np.pi * 1e8), rel=1e-12)

    def test_branches_agree_at_switches(self):
        from lorafade.bessel import _asymptotic_log_i0, _mid_log_i0, _series_log_i0

        assert _series_log_i0(np.array([4.0]))[0] == pytest.approx(
            _mid_log_i0(np.array([4.0]))[0], rel=2e-11
        )
        assert _mid_log_i0(np.array([20.0]))[0] == pytest.approx(
            _asymptotic_log_i0(np.array([20.0]))[0], rel=1e-12
        )


class TestInterface:
    def test_scalar_in_scalar_out(self):
        assert isinstance(log_i0(1.5), float)
        assert log_i0(0.0) == 0.0

    def test_even_function(self):
        assert log_i0(-3.0) == log_i0(3.0)

    def test_array_shape_preserved(self):
        x = np.array([[0.1, 5.0], [25.0, 100.0]])
        assert log_i0(x.ravel()).shape == (4,)

    def test_strictly_increasing(self):
        x = np.linspace(0.0, 100.0, 1000)
        assert (np.diff(log_i0(x)) > 0).all()
