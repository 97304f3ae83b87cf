"""Experiment orchestration: configs, seed streams, pipeline, grid, CLI."""

from .ablate import AblationResult, ablation_report
from .config import (
    ClstmTrainConfig,
    ConfigError,
    DataConfig,
    ExperimentConfig,
    GanTrainConfig,
    Toggles,
    WelmConfig,
)
from .grid import GridResult, aggregate, record_metrics, run_grid, write_summary
from .pipeline import LeakageError, RunRecord, dataset_for_cell, run_pipeline
from .seeds import SeedTree, derive_seed

__all__ = [
    "AblationResult",
    "ablation_report",
    "aggregate",
    "ClstmTrainConfig",
    "ConfigError",
    "DataConfig",
    "dataset_for_cell",
    "derive_seed",
    "ExperimentConfig",
    "GanTrainConfig",
    "GridResult",
    "LeakageError",
    "record_metrics",
    "RunRecord",
    "run_grid",
    "run_pipeline",
    "SeedTree",
    "Toggles",
    "WelmConfig",
    "write_summary",
]
