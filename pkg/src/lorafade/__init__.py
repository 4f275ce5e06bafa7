"""LoRa chirp-spread-spectrum PHY simulation over Rician multipath fading.

Modem, channel, detector, estimation and Monte Carlo layers; see the
README for the CLI and the figure recipes.
"""

from .bessel import log_i0
from .channel import (
    EVA,
    ChannelProfile,
    PathTable,
    apply_channel,
    apply_channel_batch,
    apply_channel_stream,
    complex_awgn,
    profile_from_path_table,
    realize_packet,
)
from .detectors import (
    ChannelStatistics,
    DetectionDecision,
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
from .estimation import (
    EstimationResult,
    StatisticAccumulator,
    estimate_statistics,
    load_statistics,
    save_statistics,
)
from .harness import (
    DETECTOR_IDS,
    BenchmarkRow,
    Scenario,
    SerRecord,
    StatisticsSource,
    benchmark_detectors,
    emit_results,
    growth_exponent,
    growth_ratios,
    results_csv_text,
    run_scenario,
    scenario_from_file,
    scenario_to_file,
    snr_db_to_noise_var,
)
from .modem import (
    LoRaConfig,
    LoRaSymbol,
    basic_upchirp,
    dechirp_and_transform,
    modulate,
    modulate_batch,
)

__version__ = "0.1.0"

__all__ = [
    "EVA",
    "BenchmarkRow",
    "ChannelProfile",
    "ChannelStatistics",
    "DETECTOR_IDS",
    "DetectionDecision",
    "EstimationResult",
    "LoRaConfig",
    "LoRaSymbol",
    "PathTable",
    "Scenario",
    "SerRecord",
    "StatisticAccumulator",
    "StatisticsSource",
    "TdelReference",
    "apply_channel",
    "apply_channel_batch",
    "apply_channel_stream",
    "basic_upchirp",
    "benchmark_detectors",
    "build_tdel_reference",
    "coherent_log_likelihood",
    "coherent_metrics",
    "complex_awgn",
    "dechirp_and_transform",
    "detect_conventional",
    "detect_coherent_ml",
    "detect_nc_ml",
    "detect_tdel",
    "emit_results",
    "estimate_statistics",
    "growth_exponent",
    "growth_ratios",
    "load_statistics",
    "log_i0",
    "modulate",
    "modulate_batch",
    "nc_log_likelihood",
    "nc_ml_metrics",
    "profile_from_path_table",
    "realize_packet",
    "results_csv_text",
    "run_scenario",
    "save_statistics",
    "scenario_from_file",
    "scenario_to_file",
    "snr_db_to_noise_var",
    "tdel_metrics",
]
