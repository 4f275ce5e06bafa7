"""Command-line front end.

Subcommands:

* run      -- execute a scenario file (JSON) and write CSV results.
* figures  -- run the built-in fig1/fig2/fig3 recipes.
* bench    -- per-symbol detection timing across spreading factors.
* estimate -- build a channel-statistics file from simulated preambles.

`figures --check` re-verifies the qualitative pass bands and exits
nonzero on any violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import recipes
from .estimation import save_statistics
from .harness import (
    DETECTOR_IDS,
    Scenario,
    StatisticsSource,
    _estimate_point_statistics,
    _PointJob,
    _PACKETS_PER_BATCH,
    benchmark_detectors,
    emit_results,
    growth_exponent,
    growth_ratios,
    run_scenario,
    scenario_from_file,
    snr_db_to_noise_var,
)


def _add_workers(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--workers", type=int, default=1, help="parallel worker processes (default 1)"
    )


def _cmd_run(args) -> int:
    scenario = scenario_from_file(args.scenario)
    records = run_scenario(scenario, workers=args.workers)
    paths = emit_results(records, args.out, basename=args.basename)
    print(f"wrote {paths['results']}")
    return 0


def _cmd_figures(args) -> int:
    names = recipes.FIGURE_NAMES if "all" in args.figure else tuple(dict.fromkeys(args.figure))
    failures: list[str] = []
    records_by_figure = {}
    for name in names:
        records: list = []
        for scenario in recipes.figure_scenarios(name, seed=args.seed, extended=args.extended):
            print(f"running {scenario.name} ...", flush=True)
            records.extend(run_scenario(scenario, workers=args.workers))
        records_by_figure[name] = records
        paths = emit_results(
            records, args.out, basename=name, recipe_lines=recipes.recipe_lines(name)
        )
        print(f"wrote {paths['results']}")
    if args.check:
        tolerance = 1.5 if args.extended else 0.0
        if "fig1" in records_by_figure:
            failures += recipes.check_fig1(records_by_figure["fig1"], tolerance)
        if "fig2" in records_by_figure:
            fd0 = records_by_figure.get("fig1")
            if fd0 is None:
                print("fig2 check: running fd=0 nc-ml baseline for comparison", flush=True)
                fd0 = []
                for scenario in recipes.ncml_baseline_scenarios(seed=args.seed):
                    fd0.extend(run_scenario(scenario, workers=args.workers))
            failures += recipes.check_fig2(records_by_figure["fig2"], fd0, tolerance)
        if "fig3" in records_by_figure:
            failures += recipes.check_fig3(records_by_figure["fig3"], tolerance)
        for failure in failures:
            print(f"CHECK FAILED: {failure}", file=sys.stderr)
        if failures:
            return 1
        print("all figure checks passed")
    return 0


def _cmd_bench(args) -> int:
    sf_values = tuple(range(args.sf_min, args.sf_max + 1))
    rows = benchmark_detectors(sf_values=sf_values, symbols=args.symbols, repeats=args.repeats)
    print(f"{'sf':>3} {'M':>5} {'detector':<14} {'us/symbol':>10}")
    for row in rows:
        print(f"{row.sf:>3} {row.m_size:>5} {row.detector:<14} {row.per_symbol_s * 1e6:>10.3f}")
    exponent = growth_exponent(rows, "nc-ml")
    ratios = growth_ratios(rows, "nc-ml")
    print(f"nc-ml growth exponent (time ~ M^x): {exponent:.2f}")
    print("nc-ml per-SF-step ratios: " + ", ".join(f"{r:.2f}" for r in ratios))
    if args.out:
        lines = ["sf,m_size,detector,per_symbol_s"]
        lines += [f"{r.sf},{r.m_size},{r.detector},{r.per_symbol_s}" for r in rows]
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    if args.check and (exponent > 1.4 or max(ratios) > 2.6):
        print("CHECK FAILED: nc-ml per-symbol cost grows faster than M log M allows",
              file=sys.stderr)
        return 1
    return 0


def _cmd_estimate(args) -> int:
    scenario = Scenario(
        name="estimate",
        sf=args.sf,
        k0=args.k0,
        doppler_hz=args.doppler,
        snr_grid_db=(args.snr_db,),
        detectors=("nc-ml",),
        statistics=StatisticsSource("estimated", packets=args.packets),
        drift_percent=args.drift_percent,
        seed=args.seed,
        preamble_symbols=args.preambles,
    )
    profile = scenario.channel_profile()
    job = _PointJob(
        m_size=scenario.config.m_size,
        symbol_duration_s=scenario.config.symbol_duration_s,
        profile=profile,
        num_taps=profile.num_taps,
        sigma2=snr_db_to_noise_var(args.snr_db),
        stats=None,
        detectors=scenario.detectors,
        payload_symbols=scenario.payload_symbols,
        preamble_symbols=scenario.preamble_symbols,
        drift=scenario.drift_percent / 100.0,
        seed=scenario.seed,
        stream_key=scenario.stream_key(),
        point_index=0,
        batch_size=_PACKETS_PER_BATCH,
    )
    stats = _estimate_point_statistics(job, args.packets)
    save_statistics(stats, args.out)
    print(
        f"estimated from {args.packets} packets x {args.preambles} preambles: "
        f"k0={stats.k0:.4g} noise_var={stats.noise_var:.4g} "
        f"tap_powers={np.array2string(stats.tap_powers, precision=5)}"
    )
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorafade",
        description="LoRa PHY Monte Carlo simulator: detectors for Rician multipath fading",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario file")
    run_p.add_argument("scenario", help="scenario JSON file")
    run_p.add_argument("-o", "--out", default="results", help="output directory")
    run_p.add_argument("--basename", default="results", help="output file basename")
    _add_workers(run_p)
    run_p.set_defaults(fn=_cmd_run)

    fig_p = sub.add_parser("figures", help="run built-in figure recipes")
    fig_p.add_argument(
        "figure", nargs="+", choices=(*recipes.FIGURE_NAMES, "all"), help="which figure(s)"
    )
    fig_p.add_argument("-o", "--out", default="results", help="output directory")
    fig_p.add_argument("--seed", type=int, default=recipes.DEFAULT_SEED)
    fig_p.add_argument(
        "--extended",
        action="store_true",
        help="deeper stopping rule and higher SNR grid (hours, not desk scale)",
    )
    fig_p.add_argument(
        "--check", action="store_true", help="verify pass bands; exit nonzero on violation"
    )
    _add_workers(fig_p)
    fig_p.set_defaults(fn=_cmd_figures)

    bench_p = sub.add_parser("bench", help="per-symbol detection timing")
    bench_p.add_argument("--sf-min", type=int, default=7)
    bench_p.add_argument("--sf-max", type=int, default=11)
    bench_p.add_argument("--symbols", type=int, default=512)
    bench_p.add_argument("--repeats", type=int, default=5)
    bench_p.add_argument("-o", "--out", default=None, help="optional CSV output path")
    bench_p.add_argument("--check", action="store_true")
    bench_p.set_defaults(fn=_cmd_bench)

    est_p = sub.add_parser("estimate", help="write a statistics file from simulated preambles")
    est_p.add_argument("-o", "--out", default="statistics.txt")
    est_p.add_argument("--sf", type=int, default=7)
    est_p.add_argument("--k0", type=float, default=0.0)
    est_p.add_argument("--snr-db", type=float, default=10.0)
    est_p.add_argument("--doppler", type=float, default=0.0)
    est_p.add_argument("--drift-percent", type=float, default=0.0)
    est_p.add_argument("--packets", type=int, default=50)
    est_p.add_argument("--preambles", type=int, default=8)
    est_p.add_argument("--seed", type=int, default=1)
    est_p.set_defaults(fn=_cmd_estimate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
