"""Materialize imbalance scenarios and stratified fold assignments."""

from __future__ import annotations

import numpy as np

from .noise import add_awgn
from .types import (
    CLASS_ORDER,
    Burst,
    ConditionClass,
    LabeledDataset,
    ScenarioSpec,
)


def largest_remainder(fractions, total: int) -> list[int]:
    """Integer counts summing to ``total`` with per-entry error < 1.

    Floors the exact quotas, then hands the leftover units to the largest
    fractional remainders (ties broken by position) so exact quotas are
    reproduced exactly.
    """
    raw = [f * total for f in fractions]
    base = [int(np.floor(r + 1e-9)) for r in raw]
    leftover = total - sum(base)
    if leftover < 0:
        raise ValueError("fractions sum to more than 1")
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def scenario_counts(spec: ScenarioSpec) -> dict[ConditionClass, int]:
    shares = spec.shares
    counts = largest_remainder([shares[c] / 100.0 for c in CLASS_ORDER], spec.n_total)
    return dict(zip(CLASS_ORDER, counts))


def assign_splits(
    bursts: list[Burst],
    fracs: tuple[float, float, float],
    rng: np.random.Generator,
) -> np.ndarray:
    """Stratified train/val/test tags; per class the split counts follow the
    largest-remainder rule, so train shares track the scenario within one
    burst per class."""
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {fracs}")
    tags = np.empty(len(bursts), dtype="<U5")
    by_class: dict[ConditionClass, list[int]] = {}
    for i, b in enumerate(bursts):
        by_class.setdefault(b.label, []).append(i)
    for cls in CLASS_ORDER:
        idx = np.array(by_class.get(cls, []), dtype=np.int64)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        n_train, n_val, n_test = largest_remainder(fracs, idx.size)
        tags[idx[:n_train]] = "train"
        tags[idx[n_train : n_train + n_val]] = "val"
        tags[idx[n_train + n_val :]] = "test"
    return tags


def build_scenario(
    spec: ScenarioSpec,
    source,
    split_fracs: tuple[float, float, float] = (0.7, 0.15, 0.15),
) -> LabeledDataset:
    """Materialize a scenario: draw per-class bursts from ``source``, assign
    stratified splits, then (if requested) inject AWGN identically across all
    splits.  Fully determined by ``spec.seed``."""
    counts = scenario_counts(spec)
    rng_draw = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xD47A]))
    bursts: list[Burst] = []
    for cls in CLASS_ORDER:
        supplied = source.supply(cls, counts[cls], rng_draw)
        for b in supplied:
            b.burst_id = len(bursts)
            bursts.append(b)
    rng_split = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x59117]))
    split = assign_splits(bursts, split_fracs, rng_split)
    if spec.snr_db is not None:
        rng_noise = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x4015E]))
        bursts = [add_awgn(b, spec.snr_db, rng_noise) for b in bursts]
    meta = {
        "minority": spec.minority.value,
        "minority_share": spec.minority_share,
        "snr_db": spec.snr_db,
        "n_total": spec.n_total,
        "seed": spec.seed,
    }
    return LabeledDataset(bursts, split, meta=meta)


def kfold_split(dataset: LabeledDataset, k: int, seed: int) -> np.ndarray:
    """Stratified fold assignment over the whole dataset: per-class fold
    sizes differ by at most one.  Every class must have at least k samples."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    counts = dataset.class_counts()
    for cls in CLASS_ORDER:
        if 0 < counts[cls] < k:
            raise ValueError(
                f"class {cls.value!r} has {counts[cls]} samples, fewer than k={k}"
            )
    rng = np.random.default_rng(seed)
    folds = np.full(len(dataset), -1, dtype=np.int64)
    by_class: dict[ConditionClass, list[int]] = {}
    for i, b in enumerate(dataset.bursts):
        by_class.setdefault(b.label, []).append(i)
    for cls in CLASS_ORDER:
        idx = np.array(by_class.get(cls, []), dtype=np.int64)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = np.arange(idx.size) % k
    return folds
