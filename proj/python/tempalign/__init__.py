"""Time-resolved alignment of model layers with evoked sensor responses."""

from ._core import (
    ConfigError,
    Error,
    PcaModel,
    RidgeModel,
    __version__,
    alignment_curves,
    bandpass,
    default_alphas,
    design_bandpass,
    fit_pca,
    fit_ridge,
    loo_errors,
    make_folds,
    pearson_p,
    resample,
    run_pipeline,
    selftest,
    synth,
    t_max,
    temporal_score,
)

__all__ = [
    "ConfigError",
    "Error",
    "PcaModel",
    "RidgeModel",
    "__version__",
    "alignment_curves",
    "bandpass",
    "default_alphas",
    "design_bandpass",
    "fit_pca",
    "fit_ridge",
    "loo_errors",
    "make_folds",
    "pearson_p",
    "resample",
    "run_pipeline",
    "selftest",
    "synth",
    "t_max",
    "temporal_score",
]
