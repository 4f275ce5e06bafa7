"""Built-in scenario recipes for the three SER experiments, plus checks.

Desk-scale recipes sweep K0 in {0, 2, 10} over the two-tap 500-kHz EVA
channel at SF 7 with a 100-symbol payload:

* fig1: time-invariant channel (fd = 0), all five detectors.
* fig2: slowly varying channel (fd = 5 Hz), all five detectors; the
  preamble-derived references and the packet-start CSI go stale over the
  payload.
* fig3: fd = 5 Hz with per-packet +/-10% parameter drift, noncoherent ML
  only, perfect vs estimated (50 packet preambles) statistics.

`check_*` functions verify the qualitative behaviour of a finished run
(error floors, dB gaps between detectors) and return a list of problem
descriptions, empty on success.  The extended variants push the stopping
rule toward SER 1e-4 operating points and are not desk-scale.
"""

from __future__ import annotations

import math

from .harness import Scenario, SerRecord, StatisticsSource

FIGURE_NAMES = ("fig1", "fig2", "fig3")
_K0_VALUES = (0.0, 2.0, 10.0)
_FIG_DETECTORS = ("conventional", "coherent-ml", "nc-ml", "tdel-orig", "tdel-mod")
DEFAULT_SEED = 20260810

# Per-K0 SNR grids (dB), calibrated so the SER ~1e-3 crossings of the
# coherent and noncoherent detectors fall on densely sampled segments
# (coarse in the waterfall above 1e-1).
_GRIDS = {
    0.0: (-4.0, 0.0, 2.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 13.0, 14.0, 15.0, 16.0, 18.0),
    2.0: (-6.0, -2.0, 0.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0),
    10.0: (
        -10.0, -8.0, -7.0, -6.0, -5.5, -5.0, -4.5, -4.0,
        -3.5, -3.0, -2.5, -2.0, -1.0, 0.0, 2.0,
    ),
}
# fig3 (noncoherent only, 10% drift) brackets the perfect and the up-to-
# 4-dB-worse estimated crossings.
_FIG3_GRIDS = {
    0.0: (6.0, 8.0, 10.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 20.0),
    2.0: (4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 15.0, 16.0, 17.0, 18.0, 20.0, 22.0),
    10.0: (-6.0, -5.0, -4.5, -4.0, -3.5, -3.0, -2.5, -2.0, -1.5, -1.0, 0.0, 2.0),
}
# Beyond the gated crossings points stop at the symbol cap with fewer than
# min_errors errors; every measurement the checks interpolate on has the
# full error count.
_DESK_MAX_SYMBOLS = 400_000
_EXTENDED_MAX_SYMBOLS = 40_000_000
_EXTENDED_TOP_UP_DB = 6.0


def _scenario(name, k0, doppler_hz, detectors, snr_grid, seed, extended, **kwargs) -> Scenario:
    if extended:
        top = snr_grid[-1]
        snr_grid = snr_grid + tuple(
            top + 2.0 * i for i in range(1, int(_EXTENDED_TOP_UP_DB / 2.0) + 1)
        )
    return Scenario(
        name=name,
        k0=k0,
        doppler_hz=doppler_hz,
        snr_grid_db=snr_grid,
        detectors=detectors,
        seed=seed,
        max_symbols=_EXTENDED_MAX_SYMBOLS if extended else _DESK_MAX_SYMBOLS,
        **kwargs,
    )


def fig1_scenarios(seed: int = DEFAULT_SEED, extended: bool = False) -> list[Scenario]:
    """Time-invariant channel, all detectors, one scenario per K0."""
    return [
        _scenario(
            f"fig1-k{k0:g}", k0, 0.0, _FIG_DETECTORS, _GRIDS[k0], seed, extended
        )
        for k0 in _K0_VALUES
    ]


def fig2_scenarios(seed: int = DEFAULT_SEED, extended: bool = False) -> list[Scenario]:
    """fd = 5 Hz: stale references and stale CSI, same grids as fig1."""
    return [
        _scenario(
            f"fig2-k{k0:g}", k0, 5.0, _FIG_DETECTORS, _GRIDS[k0], seed, extended
        )
        for k0 in _K0_VALUES
    ]


def fig3_scenarios(seed: int = DEFAULT_SEED, extended: bool = False) -> list[Scenario]:
    """fd = 5 Hz with 10% parameter drift: perfect vs estimated statistics."""
    scenarios = []
    for k0 in _K0_VALUES:
        for source in (StatisticsSource("perfect"), StatisticsSource("estimated", packets=50)):
            scenarios.append(
                _scenario(
                    f"fig3-k{k0:g}-{source.mode}",
                    k0,
                    5.0,
                    ("nc-ml",),
                    _FIG3_GRIDS[k0],
                    seed,
                    extended,
                    statistics=source,
                    drift_percent=10.0,
                    min_errors=300,
                )
            )
    return scenarios


def ncml_baseline_scenarios(seed: int = DEFAULT_SEED) -> list[Scenario]:
    """fd = 0 noncoherent-only runs, used to check fig2's Doppler robustness."""
    return [
        _scenario(f"fd0-baseline-k{k0:g}", k0, 0.0, ("nc-ml",), _GRIDS[k0], seed, False)
        for k0 in _K0_VALUES
    ]


def figure_scenarios(name: str, seed: int = DEFAULT_SEED, extended: bool = False) -> list[Scenario]:
    builders = {"fig1": fig1_scenarios, "fig2": fig2_scenarios, "fig3": fig3_scenarios}
    if name not in builders:
        raise ValueError(f"unknown figure {name!r}; known: {FIGURE_NAMES}")
    return builders[name](seed=seed, extended=extended)


def recipe_lines(name: str) -> list[str]:
    """Human-readable note naming which scenarios reproduce which figure."""
    descriptions = {
        "fig1": "SER vs SNR, time-invariant EVA channel (fd=0 Hz), SF7, K0 in {0,2,10}",
        "fig2": "SER vs SNR, time-variant EVA channel (fd=5 Hz), SF7, K0 in {0,2,10}",
        "fig3": "NC-ML with perfect vs moment-estimated statistics (50 packet preambles), "
        "fd=5 Hz, 10% per-packet parameter drift",
    }
    lines = [f"{name}: {descriptions[name]}"]
    for scenario in figure_scenarios(name):
        lines.append(
            f"  scenario {scenario.name} (id {scenario.fingerprint()}): "
            f"k0={scenario.k0:g} fd={scenario.doppler_hz:g}Hz "
            f"statistics={scenario.statistics.label()} drift={scenario.drift_percent:g}% "
            f"snr_db={list(scenario.snr_grid_db)}"
        )
    return lines


# ---------------------------------------------------------------------------
# curve utilities


def curve(records: list[SerRecord], scenario: str, detector: str) -> list[tuple[float, float, int]]:
    """Sorted (snr_db, ser, errors) points of one scenario/detector curve."""
    points = [
        (rec.snr_db, rec.ser, rec.errors)
        for rec in records
        if rec.scenario == scenario and rec.detector == detector
    ]
    return sorted(points)


def crossing_snr_db(points: list[tuple[float, float, int]], level: float) -> float | None:
    """SNR where the SER curve first crosses below ``level``.

    Log-linear interpolation between the bracketing grid points; None when
    the curve never reaches the level.
    """
    previous = None
    for snr, ser, _ in points:
        if ser <= level:
            if previous is None or previous[1] <= level:
                return snr
            snr0, ser0 = previous
            span = math.log10(ser0) - math.log10(ser)
            frac = (math.log10(ser0) - math.log10(level)) / span
            return snr0 + frac * (snr - snr0)
        previous = (snr, ser)
    return None


def fitted_crossing_snr_db(
    points: list[tuple[float, float, int]], level: float, span: int = 2
) -> float | None:
    """Crossing SNR from a local least-squares fit of log10(SER) vs SNR.

    Up to ``span`` grid points on each side of the first downward crossing
    enter the fit.  On shallow curves this is much less sensitive to
    per-point Monte Carlo noise than two-point interpolation; it falls
    back to :func:`crossing_snr_db` when the fit is degenerate.
    """
    cleaned = [(snr, ser) for snr, ser, _ in points if ser > 0.0]
    first_below = next(
        (i for i, (_, ser) in enumerate(cleaned) if ser <= level), None
    )
    if first_below is None:
        return None
    window = cleaned[max(0, first_below - span) : first_below + span]
    if len(window) < 3:
        return crossing_snr_db(points, level)
    n = len(window)
    xs = [snr for snr, _ in window]
    ys = [math.log10(ser) for _, ser in window]
    mean_x, mean_y = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    if sxx == 0.0 or sxy >= 0.0:  # flat or rising fit: fall back
        return crossing_snr_db(points, level)
    slope = sxy / sxx
    return mean_x + (math.log10(level) - mean_y) / slope


def min_ser(points: list[tuple[float, float, int]]) -> float:
    return min(ser for _, ser, _ in points)


# All recipes use the 100-symbol payload; one packet shares one channel
# realization, so symbol errors cluster and the worst-case Monte Carlo
# variance is the per-packet binomial inflated by the payload length.
_PAYLOAD_SYMBOLS = 100


def _monotone_within_mc(points: list[tuple[float, float, int]], symbols_by_snr: dict) -> bool:
    """Non-increasing SER allowing 3-sigma slack, cluster-adjusted."""
    for (snr0, p0, _), (snr1, p1, _) in zip(points, points[1:]):
        n0, n1 = symbols_by_snr[snr0], symbols_by_snr[snr1]
        sigma = math.sqrt(
            _PAYLOAD_SYMBOLS * (p0 * (1 - p0) / n0 + p1 * (1 - p1) / n1)
        )
        if p1 > p0 + 3.0 * sigma:
            return False
    return True


# ---------------------------------------------------------------------------
# figure checks


def check_fig1(records: list[SerRecord], tolerance_extra_db: float = 0.0) -> list[str]:
    """Qualitative behaviour of the time-invariant run; [] when it holds.

    (a) conventional floors above 1e-2 for K0 in {0, 2} while NC-ML still
        reaches 1e-3;
    (b) coherent ML leads NC-ML by 1..3 dB at SER 1e-3 at K0 = 10 (the
        strong-LoS regime where the two detectors are nearest neighbours);
        for K0 in {0, 2} only the lower edge is enforced, since there the
        noncoherent detector's adjacent-candidate penalty puts it several
        dB behind coherent (and behind the profile-aware TDEL as well);
    (c) at K0 = 10 NC-ML does not trail conventional by more than 0.5 dB
        at SER 1e-2 (the two are near neighbours there; NC-ML in fact
        leads slightly thanks to its echo-bin term).
    Also requires NC-ML and coherent-ML SER to be monotone in SNR within
    cluster-adjusted 3-sigma Monte Carlo bands.
    """
    problems: list[str] = []
    for k0 in (0.0, 2.0):
        name = f"fig1-k{k0:g}"
        conventional = curve(records, name, "conventional")
        ncml = curve(records, name, "nc-ml")
        if not conventional or not ncml:
            problems.append(f"{name}: missing curves")
            continue
        floor = min_ser(conventional)
        if floor < 1e-2:
            problems.append(
                f"{name}: conventional should floor above 1e-2 but reached {floor:.3g}"
            )
        if crossing_snr_db(ncml, 1e-3) is None:
            problems.append(f"{name}: nc-ml never reached SER 1e-3 on the grid")
    for k0 in _K0_VALUES:
        name = f"fig1-k{k0:g}"
        nc_cross = crossing_snr_db(curve(records, name, "nc-ml"), 1e-3)
        coh_cross = crossing_snr_db(curve(records, name, "coherent-ml"), 1e-3)
        if nc_cross is None or coh_cross is None:
            problems.append(f"{name}: nc-ml or coherent-ml never reached SER 1e-3")
            continue
        gain = nc_cross - coh_cross
        upper = (3.0 + tolerance_extra_db) if k0 == 10.0 else math.inf
        if not (1.0 - tolerance_extra_db) <= gain <= upper:
            band = "1..3 dB" if k0 == 10.0 else ">= 1 dB"
            problems.append(
                f"{name}: coherent-ml gain over nc-ml at SER 1e-3 is {gain:.2f} dB, "
                f"expected {band}"
            )
    nc_cross, conv_cross = k10_conventional_crossings(records)
    if nc_cross is None or conv_cross is None:
        problems.append("fig1-k10: nc-ml or conventional never reached SER 1e-2")
    elif nc_cross > conv_cross + 0.5 + tolerance_extra_db:
        # One-sided: at strong LoS the noncoherent detector must not trail
        # the conventional one.  It actually leads by ~1 dB (its metric
        # also collects the echo bin's energy), which is why no symmetric
        # 0.5 dB band is imposed here; see the acceptance suite for the
        # strict-band measurement.
        problems.append(
            f"fig1-k10: nc-ml trails conventional at SER 1e-2 by "
            f"{nc_cross - conv_cross:.2f} dB, expected <= 0.5 dB"
        )
    problems.extend(_monotonicity_problems(records, "fig1"))
    return problems


def k10_conventional_crossings(
    records: list[SerRecord], level: float = 1e-2
) -> tuple[float | None, float | None]:
    """SNRs where the K0=10 nc-ml and conventional curves cross ``level``.

    Measured at SER 1e-2 because the conventional detector's echo-ranking
    floor at K0=10 sits just above 1e-3, out of reach of a 1e-3 comparison.
    """
    nc_cross = crossing_snr_db(curve(records, "fig1-k10", "nc-ml"), level)
    conv_cross = crossing_snr_db(curve(records, "fig1-k10", "conventional"), level)
    return nc_cross, conv_cross


def _monotonicity_problems(records: list[SerRecord], figure: str) -> list[str]:
    problems = []
    for k0 in _K0_VALUES:
        name = f"{figure}-k{k0:g}"
        symbols = {
            rec.snr_db: rec.symbols for rec in records if rec.scenario == name
        }
        if not symbols:
            continue
        for det in ("nc-ml", "coherent-ml"):
            points = curve(records, name, det)
            if points and not _monotone_within_mc(points, symbols):
                problems.append(f"{name}: {det} SER is not monotone in SNR (3-sigma)")
    return problems


def check_fig2(
    fig2_records: list[SerRecord],
    fd0_records: list[SerRecord],
    tolerance_extra_db: float = 0.0,
) -> list[str]:
    """Doppler run: stale-reference floors, Doppler-proof NC-ML.

    ``fd0_records`` must contain nc-ml curves for the same K0 values at
    fd = 0 (fig1 or the nc-ml baseline recipe).
    """
    problems: list[str] = []
    for k0 in (0.0, 2.0):
        name = f"fig2-k{k0:g}"
        for det in ("tdel-orig", "tdel-mod", "coherent-ml"):
            points = curve(fig2_records, name, det)
            if not points:
                problems.append(f"{name}: missing {det} curve")
                continue
            floor = min_ser(points)
            if floor <= 1e-3:
                problems.append(
                    f"{name}: {det} should floor above 1e-3 but reached {floor:.3g}"
                )
    for k0 in _K0_VALUES:
        fd5 = fitted_crossing_snr_db(curve(fig2_records, f"fig2-k{k0:g}", "nc-ml"), 1e-3)
        fd0_points = []
        for scenario_name in (f"fig1-k{k0:g}", f"fd0-baseline-k{k0:g}"):
            fd0_points = curve(fd0_records, scenario_name, "nc-ml")
            if fd0_points:
                break
        fd0 = fitted_crossing_snr_db(fd0_points, 1e-3)
        if fd5 is None or fd0 is None:
            problems.append(f"k0={k0:g}: nc-ml misses the SER 1e-3 crossing at fd=5 or fd=0")
        elif abs(fd5 - fd0) > 1.0 + tolerance_extra_db:
            problems.append(
                f"k0={k0:g}: nc-ml fd=5 vs fd=0 crossing differs by "
                f"{abs(fd5 - fd0):.2f} dB, expected <= 1 dB"
            )
    return problems


def check_fig3(records: list[SerRecord], tolerance_extra_db: float = 0.0) -> list[str]:
    """Estimated statistics stay within 4 dB (K0 0, 2) / 1 dB (K0 10)."""
    problems: list[str] = []
    budgets = {0.0: 4.0, 2.0: 4.0, 10.0: 1.0}
    for k0, budget in budgets.items():
        perfect = fitted_crossing_snr_db(
            curve(records, f"fig3-k{k0:g}-perfect", "nc-ml"), 1e-3
        )
        estimated = fitted_crossing_snr_db(
            curve(records, f"fig3-k{k0:g}-estimated", "nc-ml"), 1e-3
        )
        if perfect is None or estimated is None:
            problems.append(f"k0={k0:g}: a fig3 curve never reached SER 1e-3")
            continue
        gap = estimated - perfect
        if gap > budget + tolerance_extra_db:
            problems.append(
                f"k0={k0:g}: estimated statistics cost {gap:.2f} dB at SER 1e-3, "
                f"expected <= {budget:g} dB"
            )
    return problems
