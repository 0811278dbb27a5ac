"""Time-varying reduced-rank vector autoregression.

Fits ``y_t = W G (x_t' kron V)' z_t`` to a multivariate time series by
alternating least squares, exposing spatial modes (W, V) and temporal
modes (X). Includes an exact-DMD baseline and synthetic generators.
"""
from .dataset import (
    LagPairs,
    SynthSpec,
    TimeSeriesMatrix,
    lag_embed,
    load_csv,
    load_matrix,
    save_csv,
    synth_multiresolution,
    synth_planted_var,
)
from .dmd import DmdResult, dmd_frequency_report, fit_dmd
from .model import FactorSet, FitConfig, FitReport, coefficient_at, fit, initialize, objective, one_step_predict

__version__ = "0.1.0"

__all__ = [
    "DmdResult",
    "FactorSet",
    "FitConfig",
    "FitReport",
    "LagPairs",
    "SynthSpec",
    "TimeSeriesMatrix",
    "coefficient_at",
    "dmd_frequency_report",
    "fit",
    "fit_dmd",
    "initialize",
    "lag_embed",
    "load_csv",
    "load_matrix",
    "objective",
    "one_step_predict",
    "save_csv",
    "synth_multiresolution",
    "synth_planted_var",
]
