"""Dual-path deep feature extractor over time-frequency tensors.

Path 1 convolves the channel rows and runs an LSTM over the resulting
feature sequence, keeping the final hidden state.  Path 2 stacks three
conv/ReLU/batchnorm/maxpool blocks, flattens, and applies one dense layer.
The two outputs are concatenated into the feature vector handed to the
downstream classifier.

The trunk is trained with a temporary softmax head under class-weighted
cross-entropy; after the epoch budget the head is dropped and the model is
frozen, because the closed-form classifier that follows cannot backpropagate
into the trunk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Adam,
    BatchNormState,
    LstmWeights,
    Tensor,
    affine,
    batchnorm,
    broadcast_to,
    concat,
    conv1d,
    exp,
    getitem,
    glorot_uniform,
    init_lstm,
    log,
    lstm_seq,
    maxpool1d,
    no_grad,
    relu,
    reshape,
    transpose,
    tsum,
)
from .wgan import TrainingDiverged


def conv_out_len(length: int, width: int) -> int:
    return length - width + 1


def pool_out_len(length: int, pool: int) -> int:
    return (length - pool) // pool + 1


@dataclass(frozen=True)
class ClstmConfig:
    in_channels: int
    width: int
    n_classes: int = 6
    path1_filters: int = 32
    path1_width: int = 9
    lstm_hidden: int = 32
    path2_blocks: tuple[tuple[int, int, int], ...] = ((16, 9, 4), (32, 9, 4), (64, 9, 4))
    dense: int = 96
    epochs: int = 50
    batch_size: int = 32
    step_size: float = 1e-3
    decay1: float = 0.9
    decay2: float = 0.999
    weighted: bool = True
    seed: int = 0
    bn_eps: float = 1e-5

    def __post_init__(self):
        if min(self.path1_filters, self.path1_width, self.lstm_hidden, self.dense) < 1:
            raise ValueError("all widths must be positive")
        if self.path1_width > self.width:
            raise ValueError("path-1 filter wider than the input tensor")
        length = self.width
        for i, (filters, width, pool) in enumerate(self.path2_blocks):
            if width > length:
                raise ValueError(
                    f"path-2 block {i}: filter width {width} exceeds running length {length}"
                )
            length = conv_out_len(length, width)
            if pool > length:
                raise ValueError(
                    f"path-2 block {i}: pool {pool} exceeds running length {length}"
                )
            length = pool_out_len(length, pool)

    @property
    def feature_dim(self) -> int:
        return self.lstm_hidden + self.dense

    def path2_lengths(self) -> list[tuple[int, int]]:
        """(post-conv, post-pool) running lengths per block."""
        out = []
        length = self.width
        for filters, width, pool in self.path2_blocks:
            after_conv = conv_out_len(length, width)
            after_pool = pool_out_len(after_conv, pool)
            out.append((after_conv, after_pool))
            length = after_pool
        return out

    def path2_flat_dim(self) -> int:
        return self.path2_blocks[-1][0] * self.path2_lengths()[-1][1]


class ClstmModel:
    def __init__(self, config: ClstmConfig, rng: np.random.Generator):
        self.config = config
        c = config
        self.frozen = False

        fan_in = c.in_channels * c.path1_width
        self.p1_filters = Tensor(
            glorot_uniform(rng, fan_in, c.path1_filters, (c.path1_filters, c.in_channels, c.path1_width)),
            requires_grad=True,
        )
        self.p1_bias = Tensor(np.zeros(c.path1_filters), requires_grad=True)
        self.lstm: LstmWeights = init_lstm(rng, c.path1_filters, c.lstm_hidden)

        self.p2_filters: list[Tensor] = []
        self.p2_biases: list[Tensor] = []
        self.p2_scales: list[Tensor] = []
        self.p2_shifts: list[Tensor] = []
        self.bn_states: list[BatchNormState] = []
        ch_in = c.in_channels
        for filters, width, _pool in c.path2_blocks:
            fan_in = ch_in * width
            self.p2_filters.append(
                Tensor(glorot_uniform(rng, fan_in, filters, (filters, ch_in, width)), requires_grad=True)
            )
            self.p2_biases.append(Tensor(np.zeros(filters), requires_grad=True))
            self.p2_scales.append(Tensor(np.ones(filters), requires_grad=True))
            self.p2_shifts.append(Tensor(np.zeros(filters), requires_grad=True))
            self.bn_states.append(BatchNormState())
            ch_in = filters
        flat = c.path2_flat_dim()
        self.dense_w = Tensor(glorot_uniform(rng, flat, c.dense, (flat, c.dense)), requires_grad=True)
        self.dense_b = Tensor(np.zeros(c.dense), requires_grad=True)

        # temporary classification head, discarded on freeze
        self.head_w: Tensor | None = Tensor(
            glorot_uniform(rng, c.feature_dim, c.n_classes, (c.feature_dim, c.n_classes)),
            requires_grad=True,
        )
        self.head_b: Tensor | None = Tensor(np.zeros(c.n_classes), requires_grad=True)

    def trunk_params(self) -> list[Tensor]:
        out = [self.p1_filters, self.p1_bias, *self.lstm.params()]
        for i in range(len(self.p2_filters)):
            out.extend([self.p2_filters[i], self.p2_biases[i], self.p2_scales[i], self.p2_shifts[i]])
        out.extend([self.dense_w, self.dense_b])
        return out

    def params(self) -> list[Tensor]:
        out = self.trunk_params()
        if self.head_w is not None:
            out.extend([self.head_w, self.head_b])
        return out

    def _bn_over_channels(self, x: Tensor, block: int, training: bool) -> Tensor:
        """Batchnorm per channel across batch and time of [N, C, L]."""
        n, ch, length = x.shape
        flat = reshape(transpose(x, (0, 2, 1)), (n * length, ch))
        normed = batchnorm(
            flat,
            self.p2_scales[block],
            self.p2_shifts[block],
            self.bn_states[block],
            eps=self.config.bn_eps,
            training=training,
        )
        return transpose(reshape(normed, (n, length, ch)), (0, 2, 1))

    def forward(self, x: Tensor, training: bool) -> Tensor:
        """Feature vectors [N, lstm_hidden + dense] for tensors [N, C, F]."""
        c = self.config
        if x.ndim != 3 or x.shape[1] != c.in_channels or x.shape[2] != c.width:
            raise ValueError(
                f"expected input [N, {c.in_channels}, {c.width}], got {x.shape}"
            )
        n = x.shape[0]

        maps = conv1d(x, self.p1_filters, self.p1_bias, activation="relu")
        hidden_seq = lstm_seq(maps, self.lstm)
        p1 = getitem(hidden_seq, (slice(None), slice(None), hidden_seq.shape[2] - 1))

        cur = x
        for i, (_filters, _width, pool) in enumerate(c.path2_blocks):
            cur = conv1d(cur, self.p2_filters[i], self.p2_biases[i], activation="identity")
            cur = relu(cur)
            cur = self._bn_over_channels(cur, i, training)
            cur = maxpool1d(cur, pool)
        flat = reshape(cur, (n, c.path2_flat_dim()))
        p2 = relu(affine(flat, self.dense_w, self.dense_b))

        return concat([p1, p2], axis=1)

    def logits(self, features: Tensor) -> Tensor:
        if self.head_w is None:
            raise RuntimeError("classification head has been discarded")
        return affine(features, self.head_w, self.head_b)

    def freeze(self) -> None:
        self.frozen = True
        self.head_w = None
        self.head_b = None

    # -- persistence ---------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {
            "p1/filters": self.p1_filters.data,
            "p1/bias": self.p1_bias.data,
            "p1/lstm_wx": self.lstm.wx.data,
            "p1/lstm_wh": self.lstm.wh.data,
            "p1/lstm_b": self.lstm.bias.data,
            "dense/w": self.dense_w.data,
            "dense/b": self.dense_b.data,
            "frozen": np.array([1.0 if self.frozen else 0.0]),
        }
        for i, state in enumerate(self.bn_states):
            out[f"p2/{i}/filters"] = self.p2_filters[i].data
            out[f"p2/{i}/bias"] = self.p2_biases[i].data
            out[f"p2/{i}/scale"] = self.p2_scales[i].data
            out[f"p2/{i}/shift"] = self.p2_shifts[i].data
            if state.running_mean is not None:
                out[f"p2/{i}/running_mean"] = state.running_mean
                out[f"p2/{i}/running_var"] = state.running_var
        return out

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        self.p1_filters.data = arrays["p1/filters"]
        self.p1_bias.data = arrays["p1/bias"]
        self.lstm.wx.data = arrays["p1/lstm_wx"]
        self.lstm.wh.data = arrays["p1/lstm_wh"]
        self.lstm.bias.data = arrays["p1/lstm_b"]
        self.dense_w.data = arrays["dense/w"]
        self.dense_b.data = arrays["dense/b"]
        for i, state in enumerate(self.bn_states):
            self.p2_filters[i].data = arrays[f"p2/{i}/filters"]
            self.p2_biases[i].data = arrays[f"p2/{i}/bias"]
            self.p2_scales[i].data = arrays[f"p2/{i}/scale"]
            self.p2_shifts[i].data = arrays[f"p2/{i}/shift"]
            if f"p2/{i}/running_mean" in arrays:
                state.running_mean = arrays[f"p2/{i}/running_mean"]
                state.running_var = arrays[f"p2/{i}/running_var"]
        self.frozen = bool(arrays["frozen"][0])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def weighted_cross_entropy(logits: Tensor, labels: np.ndarray, sample_weights: np.ndarray) -> Tensor:
    """Mean of per-sample weighted negative log-likelihoods."""
    n, n_cls = logits.shape
    shift = Tensor(logits.data.max(axis=1, keepdims=True))  # constant: exact gradient
    shifted = logits - broadcast_to(shift, (n, n_cls))
    log_z = log(tsum(exp(shifted), axis=1, keepdims=True))
    log_probs = shifted - broadcast_to(log_z, (n, n_cls))
    mask = np.zeros((n, n_cls))
    mask[np.arange(n), labels] = sample_weights
    return -tsum(log_probs * Tensor(mask)) / float(sample_weights.sum())


@dataclass
class TrainCurves:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)


def train_clstm(
    tensors: np.ndarray,
    labels: np.ndarray,
    config: ClstmConfig,
    val_tensors: np.ndarray | None = None,
    val_labels: np.ndarray | None = None,
) -> tuple[ClstmModel, TrainCurves]:
    """Train the trunk end to end behind a temporary softmax head, then
    freeze.  Labels are integer class indices.  Class weights are the inverse
    class counts when ``config.weighted`` is set."""
    tensors = np.asarray(tensors, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = tensors.shape[0]
    if n != labels.shape[0]:
        raise ValueError(f"{n} tensors but {labels.shape[0]} labels")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC15]))
    model = ClstmModel(config, rng)
    opt = Adam(model.params(), config.step_size, config.decay1, config.decay2)

    counts = np.bincount(labels, minlength=config.n_classes).astype(np.float64)
    if config.weighted:
        class_w = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    else:
        class_w = np.ones(config.n_classes)
    curves = TrainCurves()

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        hits = 0
        seen = 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            if batch.size == 1 and n > 1:
                continue  # skip degenerate batchnorm batches
            xb = Tensor(tensors[batch])
            yb = labels[batch]
            feats = model.forward(xb, training=True)
            logits = model.logits(feats)
            loss = weighted_cross_entropy(logits, yb, class_w[yb])
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"training loss became non-finite at epoch {epoch}",
                    {"epoch": epoch, "curves": curves},
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(value)
            hits += int(np.sum(logits.data.argmax(axis=1) == yb))
            seen += batch.size
        curves.train_loss.append(float(np.mean(epoch_losses)))
        curves.train_acc.append(hits / max(1, seen))
        if val_tensors is not None and len(val_tensors):
            with no_grad():
                feats = model.forward(Tensor(val_tensors), training=False)
                vloss = weighted_cross_entropy(
                    model.logits(feats), np.asarray(val_labels, dtype=np.int64), class_w[val_labels]
                )
            curves.val_loss.append(float(vloss.data))

    model.freeze()
    return model, curves


def extract_features(model: ClstmModel, tensors: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Eval-mode feature vectors for a frozen model; batch companions cannot
    influence each other because batchnorm uses the stored running stats."""
    if not model.frozen:
        raise RuntimeError("extract_features requires a frozen model")
    tensors = np.asarray(tensors, dtype=np.float64)
    chunks = []
    with no_grad():
        for start in range(0, tensors.shape[0], batch_size):
            xb = Tensor(tensors[start : start + batch_size])
            chunks.append(model.forward(xb, training=False).data)
    return np.concatenate(chunks, axis=0)
