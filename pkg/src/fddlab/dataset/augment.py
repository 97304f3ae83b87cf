"""Label-preserving classic augmentation: flips, sign mirror, white noise."""

from __future__ import annotations

import numpy as np

from .noise import add_awgn
from .types import Burst, ConditionClass, FAULT_CLASSES, LabeledDataset


def time_reverse(burst: Burst) -> Burst:
    return burst.replace_samples(burst.samples[:, ::-1].copy())


def negate(burst: Burst) -> Burst:
    return burst.replace_samples(-burst.samples)


def classic_augment(
    burst: Burst,
    rng: np.random.Generator,
    snr_range: tuple[float, float] = (10.0, 30.0),
) -> Burst:
    """Uniformly pick one of time reversal, amplitude negation, or AWGN at a
    rate drawn from ``snr_range``; the label is preserved."""
    choice = int(rng.integers(3))
    if choice == 0:
        out = time_reverse(burst)
    elif choice == 1:
        out = negate(burst)
    else:
        out = add_awgn(burst, float(rng.uniform(*snr_range)), rng)
    return out.replace_samples(out.samples, provenance="augmented")


def balance_with_classic(
    dataset: LabeledDataset,
    rng: np.random.Generator,
    snr_range: tuple[float, float] = (10.0, 30.0),
) -> LabeledDataset:
    """Top up every under-represented fault class in the train split with
    classic-augmented copies until it matches the largest fault class.
    Validation and test splits are untouched."""
    counts = dataset.class_counts("train")
    target = max(counts[c] for c in FAULT_CLASSES)
    train_by_class: dict[ConditionClass, list[Burst]] = {c: [] for c in FAULT_CLASSES}
    for i in dataset.indices("train"):
        b = dataset.bursts[i]
        if b.label in train_by_class:
            train_by_class[b.label].append(b)
    new_bursts: list[Burst] = []
    next_id = dataset.next_burst_id()
    for cls in FAULT_CLASSES:
        pool = train_by_class[cls]
        deficit = target - counts[cls]
        if deficit <= 0:
            continue
        if not pool:
            raise ValueError(f"no train bursts of class {cls.value!r} to augment")
        for j in range(deficit):
            src = pool[int(rng.integers(len(pool)))]
            aug = classic_augment(src, rng, snr_range)
            aug.burst_id = next_id
            next_id += 1
            new_bursts.append(aug)
    return dataset.with_added(new_bursts, split="train")
