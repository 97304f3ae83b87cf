"""Labeled burst datasets: synthesis, ingestion, noise, scenarios, folds."""

from .augment import balance_with_classic, classic_augment, negate, time_reverse
from .fddb import (
    BadMagicError,
    DataFormatError,
    TruncatedPayloadError,
    UnknownLabelError,
    ingest_flat,
    read_flat,
    write_bursts,
    write_flat,
)
from .noise import add_awgn, awgn_variance, measured_snr_db
from .scenario import (
    assign_splits,
    build_scenario,
    kfold_split,
    largest_remainder,
    scenario_counts,
)
from .synth import PoolSource, ShortfallError, SynthParams, SynthSource, synthesize_burst
from .types import (
    CLASS_BY_NAME,
    CLASS_ORDER,
    FAULT_CLASSES,
    Burst,
    ConditionClass,
    LabeledDataset,
    ScenarioSpec,
)

__all__ = [
    "BadMagicError",
    "Burst",
    "CLASS_BY_NAME",
    "CLASS_ORDER",
    "ConditionClass",
    "DataFormatError",
    "FAULT_CLASSES",
    "LabeledDataset",
    "PoolSource",
    "ScenarioSpec",
    "ShortfallError",
    "SynthParams",
    "SynthSource",
    "TruncatedPayloadError",
    "UnknownLabelError",
    "add_awgn",
    "assign_splits",
    "awgn_variance",
    "balance_with_classic",
    "build_scenario",
    "classic_augment",
    "ingest_flat",
    "kfold_split",
    "largest_remainder",
    "measured_snr_db",
    "negate",
    "read_flat",
    "scenario_counts",
    "synthesize_burst",
    "time_reverse",
    "write_bursts",
    "write_flat",
]
