"""Seeded Monte Carlo SER engine, result records and CSV emission.

A scenario fixes the link (SF, bandwidth, delay profile, K0, Doppler), an
SNR grid, a detector set and a stopping rule.  Packets are simulated one
evolving channel realization at a time (preamble of upchirps followed by
uniform random payload symbols); every detector sees the exact same
received samples.

Reproducibility: each packet owns an RNG stream derived from
(seed, scenario fingerprint, SNR index, stream tag, packet index), so the
full result set is a pure function of the scenario regardless of how many
workers execute it.  Packets are processed in fixed-size batches and the
stopping rule is evaluated on cumulative counts in batch order, which
keeps the set of counted packets worker-independent.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import (
    EVA,
    ChannelProfile,
    PathTable,
    apply_channel_batch,
    complex_awgn,
    profile_from_path_table,
    realize_packet,
)
from .detectors import (
    ChannelStatistics,
    build_tdel_reference,
    coherent_metrics,
    nc_ml_metrics,
    tdel_metrics,
)
from .estimation import NOISE_VAR_FLOOR, StatisticAccumulator, estimate_statistics
from .modem import LoRaConfig, basic_upchirp, dechirp_and_transform

DETECTOR_IDS = (
    "conventional",
    "coherent-ml",
    "coherent-ml-genie",
    "nc-ml",
    "tdel-orig",
    "tdel-mod",
)

NAMED_PROFILES = {"eva": EVA}

# Columns of the results CSV, in order.  Wall time is deliberately kept out
# of the results file (it is the one non-reproducible quantity) and goes to
# a separate timings file.
RESULT_COLUMNS = (
    "scenario",
    "scenario_id",
    "k0",
    "doppler_hz",
    "statistics",
    "drift_percent",
    "detector",
    "snr_db",
    "symbols",
    "errors",
    "ser",
)
TIMING_COLUMNS = ("scenario", "scenario_id", "snr_db", "wall_time_s")

_STREAM_MEASURE = 1
_STREAM_ESTIMATE = 2
_PACKETS_PER_BATCH = 64


@dataclass(frozen=True)
class StatisticsSource:
    """Where the noncoherent detector's statistics come from.

    mode "perfect" hands over the scenario's true average parameters;
    "estimated" runs a moment-based estimation over ``packets`` dedicated
    preamble-only packets per SNR point before the measurement.
    """

    mode: str = "perfect"
    packets: int = 50

    def __post_init__(self):
        if self.mode not in ("perfect", "estimated"):
            raise ValueError(f"unknown statistics mode {self.mode!r}")
        if self.mode == "estimated" and self.packets < 1:
            raise ValueError("estimated statistics need at least one packet")

    def label(self) -> str:
        return "perfect" if self.mode == "perfect" else f"estimated:{self.packets}"


@dataclass(frozen=True)
class Scenario:
    """One Monte Carlo experiment: link, channel, grid and stopping rule."""

    name: str
    sf: int = 7
    bandwidth_hz: float = 500e3
    profile: str | PathTable = "eva"
    k0: float = 0.0
    doppler_hz: float = 0.0
    snr_grid_db: tuple[float, ...] = ()
    payload_symbols: int = 100
    preamble_symbols: int = 8
    detectors: tuple[str, ...] = ("conventional", "coherent-ml", "nc-ml", "tdel-orig", "tdel-mod")
    statistics: StatisticsSource = field(default_factory=StatisticsSource)
    drift_percent: float = 0.0
    seed: int = 1
    min_errors: int = 200
    max_symbols: int = 10_000_000

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if not self.snr_grid_db:
            raise ValueError("SNR grid is empty")
        if self.payload_symbols < 1:
            raise ValueError("payload must contain at least one symbol")
        if self.preamble_symbols < 1:
            raise ValueError("need at least one preamble symbol")
        unknown = [d for d in self.detectors if d not in DETECTOR_IDS]
        if unknown:
            raise ValueError(f"unknown detector id(s) {unknown}; known: {DETECTOR_IDS}")
        if not self.detectors:
            raise ValueError("detector set is empty")
        if isinstance(self.profile, str) and self.profile not in NAMED_PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; known: {tuple(NAMED_PROFILES)}")
        if self.k0 < 0 or self.doppler_hz < 0 or self.drift_percent < 0:
            raise ValueError("k0, doppler_hz and drift_percent must be non-negative")
        if self.min_errors < 1:
            raise ValueError("min_errors must be positive")
        if self.max_symbols < self.min_errors:
            raise ValueError("max_symbols must be at least min_errors")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        LoRaConfig(self.sf, self.bandwidth_hz)  # range check

    @property
    def config(self) -> LoRaConfig:
        return LoRaConfig(self.sf, self.bandwidth_hz)

    def path_table(self) -> PathTable:
        return NAMED_PROFILES[self.profile] if isinstance(self.profile, str) else self.profile

    def channel_profile(self) -> ChannelProfile:
        return profile_from_path_table(
            self.path_table(), self.bandwidth_hz, self.k0, self.doppler_hz
        )

    def to_json_dict(self) -> dict:
        table = self.path_table()
        profile = (
            self.profile
            if isinstance(self.profile, str)
            else {"delays_ns": list(table.delays_ns), "powers_db": list(table.relative_powers_db)}
        )
        stats = (
            "perfect"
            if self.statistics.mode == "perfect"
            else {"mode": "estimated", "packets": self.statistics.packets}
        )
        return {
            "name": self.name,
            "sf": self.sf,
            "bandwidth_hz": self.bandwidth_hz,
            "profile": profile,
            "k0": self.k0,
            "doppler_hz": self.doppler_hz,
            "snr_grid_db": list(self.snr_grid_db),
            "payload_symbols": self.payload_symbols,
            "preamble_symbols": self.preamble_symbols,
            "detectors": list(self.detectors),
            "statistics": stats,
            "drift_percent": self.drift_percent,
            "seed": self.seed,
            "min_errors": self.min_errors,
            "max_symbols": self.max_symbols,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Scenario":
        data = dict(data)
        profile = data.get("profile", "eva")
        if isinstance(profile, dict):
            data["profile"] = PathTable(
                tuple(profile["delays_ns"]), tuple(profile["powers_db"])
            )
        stats = data.get("statistics", "perfect")
        if isinstance(stats, str):
            data["statistics"] = StatisticsSource(mode=stats)
        else:
            data["statistics"] = StatisticsSource(
                mode=stats.get("mode", "perfect"), packets=stats.get("packets", 50)
            )
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario field(s) {sorted(unknown)}")
        if "snr_grid_db" in data:
            data["snr_grid_db"] = tuple(data["snr_grid_db"])
        if "detectors" in data:
            data["detectors"] = tuple(data["detectors"])
        return cls(**data)

    def fingerprint(self) -> str:
        """Content hash over the fully resolved scenario (profile inlined)."""
        resolved = self.to_json_dict()
        table = self.path_table()
        resolved["profile"] = {
            "delays_ns": list(table.delays_ns),
            "powers_db": list(table.relative_powers_db),
        }
        blob = json.dumps(resolved, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def stream_key(self) -> int:
        """Hash of the physical parameters only, keying the RNG streams.

        Detector set, statistics source, name and stopping rule are
        excluded, so every packet's channel/noise/payload draws depend only
        on the physics: detectors always see the same received samples, and
        perfect-vs-estimated comparisons are paired experiments.
        """
        table = self.path_table()
        physics = {
            "sf": self.sf,
            "bandwidth_hz": self.bandwidth_hz,
            "delays_ns": list(table.delays_ns),
            "powers_db": list(table.relative_powers_db),
            "k0": self.k0,
            "doppler_hz": self.doppler_hz,
            "payload_symbols": self.payload_symbols,
            "preamble_symbols": self.preamble_symbols,
            "drift_percent": self.drift_percent,
        }
        blob = json.dumps(physics, sort_keys=True).encode()
        return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def scenario_from_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return Scenario.from_json_dict(json.load(fh))


def scenario_to_file(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_json_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class SerRecord:
    """One Monte Carlo result row."""

    scenario: str
    scenario_id: str
    k0: float
    doppler_hz: float
    statistics: str
    drift_percent: float
    detector: str
    snr_db: float
    symbols: int
    errors: int
    ser: float
    wall_time_s: float


def snr_db_to_noise_var(snr_db: float) -> float:
    """SNR is defined against unit-power chirps: sigma^2 = 10^(-SNR/10)."""
    return 0.0 if math.isinf(snr_db) and snr_db > 0 else 10.0 ** (-snr_db / 10.0)


# ---------------------------------------------------------------------------
# packet simulation


@dataclass(frozen=True)
class _PointJob:
    """Everything a worker needs to simulate one batch of packets."""

    m_size: int
    symbol_duration_s: float
    profile: ChannelProfile
    num_taps: int
    sigma2: float
    stats: ChannelStatistics | None
    detectors: tuple[str, ...]
    payload_symbols: int
    preamble_symbols: int
    drift: float
    seed: int
    stream_key: int
    point_index: int
    batch_size: int


def _packet_rng(job: _PointJob, stream: int, packet_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(
            [job.seed, job.stream_key, job.point_index, stream, packet_index]
        )
    )


def _drifted_profile(job: _PointJob, rng: np.random.Generator) -> ChannelProfile:
    if job.drift == 0.0:
        return job.profile
    low, high = 1.0 - job.drift, 1.0 + job.drift
    power_factors = rng.uniform(low, high, job.num_taps)
    k0_factor = rng.uniform(low, high)
    return job.profile.scaled(power_factors, k0_factor)


# Packets are simulated in stacked (packets, symbols, M) arrays; the chunk
# size only trades memory against vectorisation and never affects results
# (every packet owns an index-derived RNG stream).
_CHUNK_PACKETS = 16


def _draw_packets(job: _PointJob, stream: int, start: int, count: int, num_symbols: int):
    """Per-packet random draws, stacked: taps, payload symbols, noise."""
    n_payload = num_symbols - job.preamble_symbols
    taps = np.empty((count, num_symbols, job.num_taps), dtype=complex)
    payload = np.empty((count, max(n_payload, 0)), dtype=np.intp)
    noise = np.empty((count, num_symbols, job.m_size), dtype=complex)
    for p in range(count):
        rng = _packet_rng(job, stream, start + p)
        profile = _drifted_profile(job, rng)
        taps[p] = realize_packet(profile, num_symbols, job.symbol_duration_s, rng)
        if n_payload > 0:
            payload[p] = rng.integers(0, job.m_size, n_payload)
        noise[p] = complex_awgn((num_symbols, job.m_size), job.sigma2, rng)
    return taps, payload, noise


def _received_spectra(job: _PointJob, taps, payload, noise, num_symbols: int):
    """Modulate (preamble = symbol 0), apply the circular channel, dechirp."""
    symbols = np.zeros((taps.shape[0], num_symbols), dtype=np.intp)
    if payload.size:
        symbols[:, job.preamble_symbols :] = payload
    chirp = basic_upchirp(job.m_size)
    tx = chirp[(np.arange(job.m_size)[None, None, :] + symbols[:, :, None]) % job.m_size]
    rx = taps[:, :, 0, None] * tx
    for tap in range(1, taps.shape[2]):
        rx += taps[:, :, tap, None] * np.roll(tx, tap, axis=2)
    rx += noise
    return dechirp_and_transform(rx)


def _chunk_references(preamble_spectra: np.ndarray, variant: str, num_taps: int) -> np.ndarray:
    """Per-packet TDEL reference templates; same rules as build_tdel_reference."""
    mean = preamble_spectra.mean(axis=1)
    if variant == "original":
        amplitude = np.abs(mean)
        return np.where(amplitude >= 0.25 * amplitude.max(axis=1, keepdims=True), mean, 0.0)
    refs = np.zeros_like(mean)
    cols = (-np.arange(num_taps)) % mean.shape[1]
    refs[:, cols] = mean[:, cols]
    return refs


def _detect_chunk(job: _PointJob, taps, payload, spectra, counts: dict) -> None:
    preamble = spectra[:, : job.preamble_symbols]
    received = spectra[:, job.preamble_symbols :]
    received_fft = None
    for det in job.detectors:
        if det == "conventional":
            metric = received.real**2 + received.imag**2
        elif det == "coherent-ml":
            metric = coherent_metrics(received, taps[:, 0:1, :])  # packet-start CSI
        elif det == "coherent-ml-genie":
            metric = coherent_metrics(received, taps[:, job.preamble_symbols :, :])
        elif det == "nc-ml":
            metric = nc_ml_metrics(received, job.stats)
        elif det in ("tdel-orig", "tdel-mod"):
            if received_fft is None:
                received_fft = np.fft.fft(received, axis=-1)
            variant = "original" if det == "tdel-orig" else "modified"
            refs = _chunk_references(preamble, variant, job.num_taps)
            cross = received_fft * np.conj(np.fft.fft(refs, axis=-1))[:, None, :]
            metric = np.abs(np.fft.ifft(cross, axis=-1))
        else:  # pragma: no cover - scenario validation rejects these
            raise ValueError(f"unknown detector {det!r}")
        decisions = np.argmax(metric, axis=-1)
        counts[det] += int(np.count_nonzero(decisions != payload))


def _simulate_batch(job: _PointJob, batch_index: int) -> tuple[dict, int]:
    counts = dict.fromkeys(job.detectors, 0)
    num_symbols = job.preamble_symbols + job.payload_symbols
    start = batch_index * job.batch_size
    done = 0
    while done < job.batch_size:
        count = min(_CHUNK_PACKETS, job.batch_size - done)
        taps, payload, noise = _draw_packets(
            job, _STREAM_MEASURE, start + done, count, num_symbols
        )
        spectra = _received_spectra(job, taps, payload, noise, num_symbols)
        _detect_chunk(job, taps, payload, spectra, counts)
        done += count
    return counts, job.batch_size * job.payload_symbols


def _estimate_point_statistics(job: _PointJob, packets: int) -> ChannelStatistics:
    acc = StatisticAccumulator(job.m_size)
    done = 0
    while done < packets:
        count = min(_CHUNK_PACKETS, packets - done)
        taps, payload, noise = _draw_packets(
            job, _STREAM_ESTIMATE, done, count, job.preamble_symbols
        )
        acc.accumulate(_received_spectra(job, taps, payload, noise, job.preamble_symbols))
        done += count
    return estimate_statistics(acc, job.num_taps).statistics


# ---------------------------------------------------------------------------
# scenario driver


def _stop_reached(job: _PointJob, counts: dict, symbols: int, scenario: Scenario) -> bool:
    if symbols >= scenario.max_symbols:
        return True
    return min(counts[d] for d in job.detectors) >= scenario.min_errors


def _run_point(scenario: Scenario, job: _PointJob, executor, workers: int):
    counts = dict.fromkeys(job.detectors, 0)
    symbols = 0
    max_batches = max(
        1, math.ceil(scenario.max_symbols / (job.batch_size * job.payload_symbols))
    )
    if executor is None:
        for batch_index in range(max_batches):
            batch_counts, batch_symbols = _simulate_batch(job, batch_index)
            for det, n in batch_counts.items():
                counts[det] += n
            symbols += batch_symbols
            if _stop_reached(job, counts, symbols, scenario):
                break
        return counts, symbols

    window = max(2 * workers, 2)
    futures: dict[int, object] = {}
    next_index = 0
    current = 0
    stopped = False
    while current < max_batches and not stopped:
        while len(futures) < window and next_index < max_batches:
            futures[next_index] = executor.submit(_simulate_batch, job, next_index)
            next_index += 1
        batch_counts, batch_symbols = futures.pop(current).result()
        current += 1
        for det, n in batch_counts.items():
            counts[det] += n
        symbols += batch_symbols
        stopped = _stop_reached(job, counts, symbols, scenario)
    for leftover in futures.values():
        leftover.cancel()
    return counts, symbols


def run_scenario(scenario: Scenario, workers: int = 1) -> list[SerRecord]:
    """Run every (SNR, detector) cell of the scenario.

    Deterministic: records are bit-identical for a given scenario
    regardless of ``workers`` (wall_time_s aside).
    """
    profile = scenario.channel_profile()
    config = scenario.config
    fingerprint = scenario.fingerprint()
    stream_key = scenario.stream_key()
    records: list[SerRecord] = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for point_index, snr_db in enumerate(scenario.snr_grid_db):
            started = time.perf_counter()
            sigma2 = snr_db_to_noise_var(snr_db)
            job = _PointJob(
                m_size=config.m_size,
                symbol_duration_s=config.symbol_duration_s,
                profile=profile,
                num_taps=profile.num_taps,
                sigma2=sigma2,
                stats=None,
                detectors=scenario.detectors,
                payload_symbols=scenario.payload_symbols,
                preamble_symbols=scenario.preamble_symbols,
                drift=scenario.drift_percent / 100.0,
                seed=scenario.seed,
                stream_key=stream_key,
                point_index=point_index,
                batch_size=_PACKETS_PER_BATCH,
            )
            if "nc-ml" in scenario.detectors:
                if scenario.statistics.mode == "perfect":
                    stats = ChannelStatistics(
                        tap_powers=profile.tap_powers,
                        k0=scenario.k0,
                        noise_var=max(sigma2, NOISE_VAR_FLOOR),
                        m_size=config.m_size,
                    )
                else:
                    stats = _estimate_point_statistics(job, scenario.statistics.packets)
                job = replace(job, stats=stats)
            counts, symbols = _run_point(scenario, job, executor, workers)
            wall = time.perf_counter() - started
            for det in scenario.detectors:
                records.append(
                    SerRecord(
                        scenario=scenario.name,
                        scenario_id=fingerprint,
                        k0=scenario.k0,
                        doppler_hz=scenario.doppler_hz,
                        statistics=scenario.statistics.label(),
                        drift_percent=scenario.drift_percent,
                        detector=det,
                        snr_db=snr_db,
                        symbols=symbols,
                        errors=counts[det],
                        ser=counts[det] / symbols,
                        wall_time_s=wall,
                    )
                )
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)
    return records


# ---------------------------------------------------------------------------
# emission


def results_csv_text(records: list[SerRecord]) -> str:
    """The deterministic results table as CSV text (header + one row each)."""
    lines = [",".join(RESULT_COLUMNS)]
    for rec in records:
        lines.append(
            ",".join(
                str(getattr(rec, column)) for column in RESULT_COLUMNS
            )
        )
    return "\n".join(lines) + "\n"


def emit_results(
    records: list[SerRecord],
    out_dir,
    basename: str = "results",
    recipe_lines: list[str] | None = None,
) -> dict[str, Path]:
    """Write results, timings and (optionally) a recipe description.

    ``<basename>.csv`` holds the deterministic columns in RESULT_COLUMNS
    order; ``<basename>_timings.csv`` holds per-point wall times;
    ``<basename>_recipe.txt`` is written when recipe lines are supplied.
    """
    if not records:
        raise ValueError("no records to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"results": out_dir / f"{basename}.csv"}
    paths["results"].write_text(results_csv_text(records), encoding="utf-8")

    timings = out_dir / f"{basename}_timings.csv"
    seen = set()
    with open(timings, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_COLUMNS)
        for rec in records:
            key = (rec.scenario_id, rec.snr_db)
            if key in seen:
                continue
            seen.add(key)
            writer.writerow([rec.scenario, rec.scenario_id, rec.snr_db, rec.wall_time_s])
    paths["timings"] = timings

    if recipe_lines is not None:
        recipe = out_dir / f"{basename}_recipe.txt"
        recipe.write_text("\n".join(recipe_lines) + "\n", encoding="utf-8")
        paths["recipe"] = recipe
    return paths


# ---------------------------------------------------------------------------
# complexity benchmark


@dataclass(frozen=True)
class BenchmarkRow:
    sf: int
    m_size: int
    detector: str
    per_symbol_s: float


def benchmark_detectors(
    sf_values=(7, 8, 9, 10, 11),
    symbols: int = 512,
    repeats: int = 5,
    seed: int = 0,
) -> list[BenchmarkRow]:
    """Per-symbol detection time (dechirp + DFT + decision) per detector.

    Channel simulation is excluded: the timed path starts from received
    samples.  The reported figure is the best of ``repeats`` passes over a
    ``symbols``-strong batch, divided by the batch size.
    """
    rng = np.random.default_rng(seed)
    rows: list[BenchmarkRow] = []
    for sf in sf_values:
        if not 7 <= sf <= 12:
            raise ValueError("benchmark spreading factors must lie in 7..12")
        m = 1 << sf
        received = rng.standard_normal((symbols, m)) + 1j * rng.standard_normal((symbols, m))
        taps = np.array([1.0 + 0.2j, 0.3 - 0.1j])
        stats = ChannelStatistics(
            tap_powers=np.array([0.93, 0.07]), k0=2.0, noise_var=0.1, m_size=m
        )
        reference = build_tdel_reference(
            dechirp_and_transform(apply_channel_batch(
                basic_upchirp(m)[None, :], taps[None, :], 0.0, rng
            )),
            "modified",
            num_taps=2,
        )

        def run(det: str):
            spectra = dechirp_and_transform(received)
            if det == "conventional":
                metric = spectra.real**2 + spectra.imag**2
            elif det == "coherent-ml":
                metric = coherent_metrics(spectra, taps)
            elif det == "nc-ml":
                metric = nc_ml_metrics(spectra, stats)
            else:
                metric = tdel_metrics(spectra, reference)
            return np.argmax(metric, axis=-1)

        for det in ("conventional", "coherent-ml", "nc-ml", "tdel"):
            run(det)  # warm caches
            best = min(
                _timed(run, det) for _ in range(repeats)
            )
            rows.append(BenchmarkRow(sf=sf, m_size=m, detector=det, per_symbol_s=best / symbols))
    return rows


def _timed(fn, *args) -> float:
    start = time.perf_counter()
    fn(*args)
    return time.perf_counter() - start


def growth_ratios(rows: list[BenchmarkRow], detector: str) -> list[float]:
    """time(SF+1)/time(SF) for consecutive spreading factors."""
    times = {row.sf: row.per_symbol_s for row in rows if row.detector == detector}
    sfs = sorted(times)
    return [times[b] / times[a] for a, b in zip(sfs, sfs[1:])]


def growth_exponent(rows: list[BenchmarkRow], detector: str) -> float:
    """Least-squares slope of log2(per-symbol time) vs log2(M)."""
    pairs = [(row.m_size, row.per_symbol_s) for row in rows if row.detector == detector]
    if len(pairs) < 2:
        raise ValueError("need at least two spreading factors")
    x = np.log2([m for m, _ in pairs])
    y = np.log2([t for _, t in pairs])
    return float(np.polyfit(x, y, 1)[0])
