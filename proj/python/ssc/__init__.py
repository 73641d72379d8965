"""Python bindings for the slide classification pipeline."""

from ._ssc import (
    ConfigError,
    DegenerateGeometry,
    Error,
    IoError,
    RandomForest,
    background_mask,
    bootstrap_ci,
    config_defaults,
    delaunay,
    feature_names,
    generate_slide,
    lr_trace,
    negative_weight_at,
    roc_auc,
    run_stage,
    stats4,
)

__all__ = [
    "ConfigError",
    "DegenerateGeometry",
    "Error",
    "IoError",
    "RandomForest",
    "background_mask",
    "bootstrap_ci",
    "config_defaults",
    "delaunay",
    "feature_names",
    "generate_slide",
    "lr_trace",
    "negative_weight_at",
    "roc_auc",
    "run_stage",
    "stats4",
]
