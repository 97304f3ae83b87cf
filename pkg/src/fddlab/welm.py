"""Extreme learning machine: frozen random hidden layer, closed-form ridge
output weights, and an optional per-sample weighting scheme that gives every
class equal total weight (each sample weighs 1/class-count)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

HIDDEN_ACTIVATIONS = {
    "sigmoid": lambda z: 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0))),
    "tanh": np.tanh,
    "relu": lambda z: np.maximum(z, 0.0),
    "identity": lambda z: z,
}


class SolverFailure(RuntimeError):
    """Ridge system could not be factorized; carries a condition estimate."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


@dataclass
class ElmModel:
    hidden_w: np.ndarray  # [features, hidden]
    hidden_b: np.ndarray  # [hidden]
    activation: str
    reg_c: float
    weighted: bool
    classes: list
    seed: int
    beta: np.ndarray | None = None  # [hidden, n_classes]
    meta: dict = field(default_factory=dict)

    @property
    def hidden_size(self) -> int:
        return self.hidden_w.shape[1]


def build_hidden_matrix(features: np.ndarray, model: ElmModel) -> np.ndarray:
    """H[i, j] = activation(a_j . x_i + b_j)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.hidden_w.shape[0]:
        raise ValueError(
            f"features shape {features.shape} incompatible with hidden weights "
            f"{model.hidden_w.shape}"
        )
    act = HIDDEN_ACTIVATIONS[model.activation]
    return act(features @ model.hidden_w + model.hidden_b)


def class_weights(labels) -> np.ndarray:
    """Per-sample weights w_i = 1 / (count of samples sharing i's class), so
    minority samples carry the largest weights."""
    labels = list(labels)
    if not labels:
        raise ValueError("cannot weight an empty label list")
    counts: dict = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    return np.array([1.0 / counts[lab] for lab in labels])


def solve_beta(
    h: np.ndarray,
    targets: np.ndarray,
    reg_c: float,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Closed-form ridge output weights.

    The branch follows the shapes: with N >= K the K x K normal equations are
    solved, otherwise the N x N dual system.  Per-sample weights enter as the
    diagonal matrix W; 1/C is added to the inverted matrix's diagonal.
    """
    h = np.asarray(h, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if reg_c <= 0:
        raise ValueError(f"regularization C must be positive, got {reg_c}")
    n, k = h.shape
    if targets.shape[0] != n:
        raise ValueError(f"{targets.shape[0]} target rows for {n} samples")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (n,):
            raise ValueError(f"weights shape {weights.shape} != ({n},)")
        if np.any(weights <= 0):
            raise ValueError("all per-sample weights must be positive")
    lam = 1.0 / reg_c
    if n >= k:
        if weights is None:
            gram = h.T @ h
            rhs = h.T @ targets
        else:
            gram = h.T @ (weights[:, None] * h)
            rhs = h.T @ (weights[:, None] * targets)
        gram[np.diag_indices_from(gram)] += lam
        return _solve_spd(gram, rhs)
    # dual branch: beta = H^T (I/C + [W] H H^T)^{-1} [W] Y
    outer = h @ h.T
    if weights is None:
        system = outer.copy()
        rhs = targets.copy()
        system[np.diag_indices_from(system)] += lam
        return h.T @ _solve_spd(system, rhs)
    system = weights[:, None] * outer
    system[np.diag_indices_from(system)] += lam
    try:
        dual = np.linalg.solve(system, weights[:, None] * targets)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(
            "weighted dual system is numerically singular despite the ridge term",
            condition=float(np.linalg.cond(system)),
        ) from exc
    return h.T @ dual


def _solve_spd(system: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = cho_factor(system, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(
            "ridge system is not positive definite",
            condition=float(np.linalg.cond(system)),
        ) from exc
    return cho_solve(factor, rhs, check_finite=False)


def one_hot(labels, classes: list) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    out = np.zeros((len(labels), len(classes)))
    for row, lab in enumerate(labels):
        out[row, index[lab]] = 1.0
    return out


def fit_welm(
    features: np.ndarray,
    labels,
    hidden: int = 150,
    reg_c: float = 100.0,
    weighted: bool = False,
    seed: int = 0,
    activation: str = "sigmoid",
    classes: list | None = None,
) -> ElmModel:
    """Initialize the frozen hidden layer from uniform(-1, 1), build H, and
    solve the (optionally weighted) ridge system."""
    features = np.asarray(features, dtype=np.float64)
    labels = list(labels)
    if classes is None:
        classes = sorted(set(labels), key=str)
    if hidden < 1:
        raise ValueError("need at least one hidden node")
    if features.shape[0] < len(classes):
        raise ValueError(
            f"{features.shape[0]} samples cannot cover {len(classes)} classes"
        )
    rng = np.random.default_rng(seed)
    model = ElmModel(
        hidden_w=rng.uniform(-1.0, 1.0, size=(features.shape[1], hidden)),
        hidden_b=rng.uniform(-1.0, 1.0, size=hidden),
        activation=activation,
        reg_c=float(reg_c),
        weighted=bool(weighted),
        classes=list(classes),
        seed=int(seed),
    )
    h = build_hidden_matrix(features, model)
    y = one_hot(labels, model.classes)
    w = class_weights(labels) if weighted else None
    model.beta = solve_beta(h, y, reg_c, w)
    return model


def predict(model: ElmModel, features: np.ndarray):
    """Scores = H beta; the label is the argmax per row (first index wins
    ties).  Returns (labels, scores)."""
    if model.beta is None:
        raise RuntimeError("model has no solved output weights")
    scores = build_hidden_matrix(features, model) @ model.beta
    picks = np.argmax(scores, axis=1)
    return [model.classes[i] for i in picks], scores


def model_arrays(model: ElmModel) -> dict[str, np.ndarray]:
    if model.beta is None:
        raise RuntimeError("cannot persist an unsolved model")
    return {
        "hidden_w": model.hidden_w,
        "hidden_b": model.hidden_b,
        "beta": model.beta,
        "reg_c": np.array([model.reg_c]),
        "weighted": np.array([1.0 if model.weighted else 0.0]),
        "seed": np.array([float(model.seed)]),
    }


def model_from_arrays(arrays: dict[str, np.ndarray], classes: list, activation: str = "sigmoid") -> ElmModel:
    return ElmModel(
        hidden_w=arrays["hidden_w"],
        hidden_b=arrays["hidden_b"],
        activation=activation,
        reg_c=float(arrays["reg_c"][0]),
        weighted=bool(arrays["weighted"][0]),
        classes=list(classes),
        seed=int(arrays["seed"][0]),
        beta=arrays["beta"],
    )
