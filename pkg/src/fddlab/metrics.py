"""Classification metrics: confusion matrices, macro averages, rank AUC."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class EvalReport:
    classes: list[str]
    accuracy: float
    macro_recall: float
    macro_f1: float
    macro_auc: float
    confusion: np.ndarray  # [C, C] counts, rows = true class
    normalized_confusion: np.ndarray  # row-stochastic for nonempty classes
    per_class: dict[str, dict[str, float]]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            "accuracy": self.accuracy,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "macro_auc": self.macro_auc,
            "confusion": self.confusion.tolist(),
            "normalized_confusion": self.normalized_confusion.tolist(),
            "per_class": self.per_class,
            "metadata": self.metadata,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    def confusion_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\pred"] + self.classes)
            for name, row in zip(self.classes, self.confusion):
                writer.writerow([name] + [int(v) for v in row])


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_auc(is_positive: np.ndarray, scores: np.ndarray) -> float:
    """One-vs-rest AUC from the rank statistic; invariant under any strictly
    monotone transform of the scores."""
    n_pos = int(is_positive.sum())
    n_neg = len(is_positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = _average_ranks(scores)
    pos_rank_sum = float(ranks[is_positive].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(
    y_true,
    y_pred,
    scores: np.ndarray | None = None,
    classes: list | None = None,
    metadata: dict | None = None,
) -> EvalReport:
    """Confusion counts plus accuracy and macro-averaged recall/F1/AUC.

    Classes absent from the true labels are excluded from the macro averages
    with a warning.  ``scores`` columns must follow ``classes`` order; without
    scores the AUC fields are NaN.
    """
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError(f"{len(y_true)} true labels vs {len(y_pred)} predictions")
    if classes is None:
        classes = sorted(set(y_true) | set(y_pred), key=str)
    classes = list(classes)
    names = [str(c) for c in classes]
    index = {c: i for i, c in enumerate(classes)}
    n_cls = len(classes)

    confusion = np.zeros((n_cls, n_cls), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[index[t], index[p]] += 1
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    diag = np.diag(confusion).astype(np.float64)

    normalized = np.zeros((n_cls, n_cls))
    nonempty = support > 0
    normalized[nonempty] = confusion[nonempty] / support[nonempty, None]

    per_class: dict[str, dict[str, float]] = {}
    recalls, f1s, aucs = [], [], []
    true_idx = np.array([index[t] for t in y_true])
    for i, name in enumerate(names):
        if support[i] == 0:
            warnings.warn(
                f"class {name!r} absent from true labels; excluded from macro averages",
                RuntimeWarning,
                stacklevel=2,
            )
            per_class[name] = {
                "precision": float("nan"),
                "recall": float("nan"),
                "f1": float("nan"),
                "auc": float("nan"),
                "support": 0,
            }
            continue
        recall = diag[i] / support[i]
        precision = diag[i] / predicted[i] if predicted[i] > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        auc = (
            rank_auc(true_idx == i, np.asarray(scores)[:, i])
            if scores is not None
            else float("nan")
        )
        per_class[name] = {
            "precision": float(precision),
            "recall": float(recall),
            "f1": float(f1),
            "auc": float(auc),
            "support": int(support[i]),
        }
        recalls.append(recall)
        f1s.append(f1)
        if not np.isnan(auc):
            aucs.append(auc)

    return EvalReport(
        classes=names,
        accuracy=float(diag.sum() / max(1, len(y_true))),
        macro_recall=float(np.mean(recalls)) if recalls else float("nan"),
        macro_f1=float(np.mean(f1s)) if f1s else float("nan"),
        macro_auc=float(np.mean(aucs)) if aucs else float("nan"),
        confusion=confusion,
        normalized_confusion=normalized,
        per_class=per_class,
        metadata=metadata or {},
    )
