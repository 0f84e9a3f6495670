"""Empirical checks of identifiability and of the optimisation landscape."""

from .covering import CoveringError, CoveringReport, DeltaNet, build_net, covering_net_check, spread
from .saddle import (
    VERDICTS,
    LocalMinReport,
    SaddleCertificate,
    ScanReport,
    Thresholds,
    calibrate_thresholds,
    generate_points,
    landscape_scan,
    local_min_global_check,
    random_rayleigh_min,
    saddle_certificate,
)
from .stability import (
    ConcentrationReport,
    CrossTermReport,
    DegenerateSampleError,
    StabilityEstimate,
    concentration_experiment,
    concentration_trend,
    count_inversions,
    cross_term_experiment,
    cross_term_statistic,
    ratio_v,
    stability_estimate,
)

__all__ = [
    "CoveringError",
    "CoveringReport",
    "DeltaNet",
    "build_net",
    "covering_net_check",
    "spread",
    "VERDICTS",
    "LocalMinReport",
    "SaddleCertificate",
    "ScanReport",
    "Thresholds",
    "calibrate_thresholds",
    "generate_points",
    "landscape_scan",
    "local_min_global_check",
    "random_rayleigh_min",
    "saddle_certificate",
    "ConcentrationReport",
    "CrossTermReport",
    "DegenerateSampleError",
    "StabilityEstimate",
    "concentration_experiment",
    "concentration_trend",
    "count_inversions",
    "cross_term_experiment",
    "cross_term_statistic",
    "ratio_v",
    "stability_estimate",
]
