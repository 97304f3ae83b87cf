"""Core dataset types: bursts, condition classes, scenarios, labeled sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ConditionClass(Enum):
    """Machine health conditions; OUT3 is the designated minority class."""

    HEALTH = "health"
    INNER = "inner"
    BALL = "ball"
    OUT1 = "out1"
    OUT2 = "out2"
    OUT3 = "out3"

    def __str__(self) -> str:
        return self.value


CLASS_ORDER = tuple(ConditionClass)
FAULT_CLASSES = tuple(c for c in CLASS_ORDER if c is not ConditionClass.HEALTH)
CLASS_BY_NAME = {c.value: c for c in CLASS_ORDER}


@dataclass
class Burst:
    """One fixed-length vibration window; the atomic classification unit.

    ``samples`` has shape [channels, length].  Provenance distinguishes
    measured data from generated or transformed training material.
    """

    samples: np.ndarray
    label: ConditionClass
    sample_rate: float = 12000.0
    burst_id: int = -1
    provenance: str = "real"

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"burst samples must be [channels, length], got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("burst contains non-finite samples")
        self.samples = arr

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    def power(self) -> float:
        return float(np.mean(self.samples**2))

    def replace_samples(self, samples: np.ndarray, provenance: str | None = None) -> "Burst":
        return Burst(
            samples=samples,
            label=self.label,
            sample_rate=self.sample_rate,
            burst_id=self.burst_id,
            provenance=self.provenance if provenance is None else provenance,
        )


@dataclass(frozen=True)
class ScenarioSpec:
    """Class-share recipe: health takes 80 - minority%, the four ordinary
    fault classes 5% each, and the minority class the remaining share."""

    n_total: int
    minority_share: float
    snr_db: float | None = None
    seed: int = 0
    minority: ConditionClass = ConditionClass.OUT3

    def __post_init__(self):
        if self.n_total < 1:
            raise ValueError("n_total must be positive")
        if not (0.0 < self.minority_share < 80.0):
            raise ValueError(
                f"minority share must lie in (0, 80), got {self.minority_share}"
            )

    @property
    def shares(self) -> dict[ConditionClass, float]:
        shares = {ConditionClass.HEALTH: 80.0 - self.minority_share}
        for cls in FAULT_CLASSES:
            shares[cls] = self.minority_share if cls is self.minority else 5.0
        total = sum(shares.values())
        if abs(total - 100.0) > 1e-9:
            raise ValueError(f"class shares sum to {total}, expected 100")
        return shares


SPLIT_NAMES = ("train", "val", "test")


@dataclass
class LabeledDataset:
    """Ordered bursts plus a disjoint train/val/test assignment and an
    optional fold index per burst.  Treated as immutable after construction;
    augmentation produces a new instance via :meth:`with_added`."""

    bursts: list[Burst]
    split: np.ndarray
    folds: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.split = np.asarray(self.split)
        if len(self.bursts) != len(self.split):
            raise ValueError("split assignment length does not match burst count")
        bad = set(np.unique(self.split)) - set(SPLIT_NAMES)
        if bad:
            raise ValueError(f"unknown split tags {sorted(bad)}")
        if self.folds is not None:
            self.folds = np.asarray(self.folds, dtype=np.int64)
            if len(self.folds) != len(self.bursts):
                raise ValueError("fold assignment length does not match burst count")

    def __len__(self) -> int:
        return len(self.bursts)

    def indices(self, split: str | None = None) -> np.ndarray:
        if split is None:
            return np.arange(len(self.bursts))
        return np.flatnonzero(self.split == split)

    def subset(self, split: str) -> list[Burst]:
        return [self.bursts[i] for i in self.indices(split)]

    def class_counts(self, split: str | None = None) -> dict[ConditionClass, int]:
        counts = {cls: 0 for cls in CLASS_ORDER}
        for i in self.indices(split):
            counts[self.bursts[i].label] += 1
        return counts

    def next_burst_id(self) -> int:
        return max((b.burst_id for b in self.bursts), default=-1) + 1

    def with_added(self, new_bursts: list[Burst], split: str = "train") -> "LabeledDataset":
        split_arr = np.concatenate([self.split, np.full(len(new_bursts), split, dtype=self.split.dtype)])
        folds = None
        if self.folds is not None:
            # appended bursts never join the evaluation folds
            folds = np.concatenate([self.folds, np.full(len(new_bursts), -1, dtype=np.int64)])
        return LabeledDataset(list(self.bursts) + list(new_bursts), split_arr, folds, dict(self.meta))
