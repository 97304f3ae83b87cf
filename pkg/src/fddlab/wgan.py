"""Wasserstein GAN with gradient penalty for minority-class burst synthesis.

The generator is a five-layer autoencoder-shaped MLP over raw bursts; the
critic stacks three conv/LSTM blocks into an unconstrained scalar score (no
batch normalization anywhere, since the penalty needs per-sample input
gradients).  Training alternates several critic updates per generator update,
each on fresh real samples, fresh latent draws, and fresh interpolation
coefficients.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import (
    Adam,
    LstmWeights,
    Tensor,
    affine,
    backward,
    conv1d,
    getitem,
    glorot_uniform,
    init_lstm,
    leaky_relu,
    lstm_seq,
    lstm_seq_composed,
    mul,
    neg,
    no_grad,
    reshape,
    sqrt,
    sub,
    tmean,
    tsum,
)
from .dataset.types import Burst, ConditionClass, FAULT_CLASSES, LabeledDataset


class TrainingDiverged(RuntimeError):
    """Raised when a loss turns non-finite; carries a diagnostics snapshot."""

    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass(frozen=True)
class GanConfig:
    burst_len: int
    penalty_coef: float = 10.0
    critic_iters: int = 5
    batch_size: int = 32
    step_size: float = 1e-4
    decay1: float = 0.0
    decay2: float = 0.9
    epochs: int = 200
    seed: int = 0
    critic_channels: tuple[int, ...] = (16, 32, 64)
    critic_width: int = 9
    critic_hidden: int = 32
    generator_slope: float = 0.2

    def __post_init__(self):
        if self.penalty_coef < 0:
            raise ValueError("gradient penalty coefficient must be >= 0")
        if self.critic_iters < 1:
            raise ValueError("need at least one critic iteration per generator step")
        if self.batch_size < 2:
            raise ValueError("interpolation needs pairs; batch size must be >= 2")
        length = self.burst_len
        for _ in self.critic_channels:
            if self.critic_width > length:
                raise ValueError(
                    f"critic filter width {self.critic_width} exceeds running length {length}"
                )
            length = length - self.critic_width + 1


class GeneratorNet:
    """Five affine layers with output widths l, l/2, l/4, l/2, l; leaky
    hidden activations and a linear output over the signal domain."""

    def __init__(self, latent_len: int, rng: np.random.Generator, slope: float = 0.2):
        self.latent_len = latent_len
        self.slope = slope
        self.trained = False
        half = max(1, latent_len // 2)
        quarter = max(1, latent_len // 4)
        widths = [latent_len, half, quarter, half, latent_len]
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        fan_in = latent_len
        for fan_out in widths:
            self.weights.append(
                Tensor(glorot_uniform(rng, fan_in, fan_out, (fan_in, fan_out)), requires_grad=True)
            )
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
            fan_in = fan_out

    def params(self) -> list[Tensor]:
        return [t for pair in zip(self.weights, self.biases) for t in pair]

    def forward(self, z: Tensor) -> Tensor:
        cur = z
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            cur = affine(cur, w, b)
            if i != last:
                cur = leaky_relu(cur, self.slope)
        return cur

    def sample_array(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.latent_len))
        with no_grad():
            return self.forward(Tensor(z)).data

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"gen/w{i}"] = w.data
            out[f"gen/b{i}"] = b.data
        out["gen/trained"] = np.array([1.0 if self.trained else 0.0])
        return out

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        for i in range(len(self.weights)):
            self.weights[i].data = np.asarray(arrays[f"gen/w{i}"], dtype=np.float64)
            self.biases[i].data = np.asarray(arrays[f"gen/b{i}"], dtype=np.float64)
        self.trained = bool(arrays.get("gen/trained", np.zeros(1))[0])


class CriticNet:
    """Three conv -> LSTM blocks, then a scalar affine head.

    ``forward(..., differentiable=True)`` routes the LSTMs through the
    step-composed implementation so the score's input gradient stays on the
    tape (needed once per penalty evaluation).
    """

    def __init__(self, config: GanConfig, rng: np.random.Generator):
        self.config = config
        self.conv_filters: list[Tensor] = []
        self.conv_biases: list[Tensor] = []
        self.lstms: list[LstmWeights] = []
        ch_in = 1
        for ch_out in config.critic_channels:
            fan_in = ch_in * config.critic_width
            self.conv_filters.append(
                Tensor(
                    glorot_uniform(rng, fan_in, ch_out, (ch_out, ch_in, config.critic_width)),
                    requires_grad=True,
                )
            )
            self.conv_biases.append(Tensor(np.zeros(ch_out), requires_grad=True))
            self.lstms.append(init_lstm(rng, ch_out, config.critic_hidden))
            ch_in = config.critic_hidden
        self.head_w = Tensor(
            glorot_uniform(rng, config.critic_hidden, 1, (config.critic_hidden, 1)),
            requires_grad=True,
        )
        self.head_b = Tensor(np.zeros(1), requires_grad=True)

    def params(self) -> list[Tensor]:
        out = []
        for f, b, lstm in zip(self.conv_filters, self.conv_biases, self.lstms):
            out.extend([f, b])
            out.extend(lstm.params())
        out.extend([self.head_w, self.head_b])
        return out

    def forward(self, x: Tensor, differentiable: bool = False) -> Tensor:
        """Scores [N] for a batch of signals [N, L]."""
        n = x.shape[0]
        cur = reshape(x, (n, 1, x.shape[1]))
        run_lstm = lstm_seq_composed if differentiable else lstm_seq
        for filt, bias, lstm in zip(self.conv_filters, self.conv_biases, self.lstms):
            cur = conv1d(cur, filt, bias, activation="leaky_relu")
            cur = run_lstm(cur, lstm)
        final_h = getitem(cur, (slice(None), slice(None), cur.shape[2] - 1))
        scores = affine(final_h, self.head_w, self.head_b)
        return reshape(scores, (n,))


# ---------------------------------------------------------------------------
# loss pieces
# ---------------------------------------------------------------------------


def interpolate(real: np.ndarray, fake: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Per-sample convex mixture delta*real + (1-delta)*fake."""
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.shape != fake.shape:
        raise ValueError(f"real {real.shape} and fake {fake.shape} batches differ")
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (real.shape[0],):
        raise ValueError(f"need one mixing coefficient per sample, got {delta.shape}")
    if np.any(delta < 0.0) or np.any(delta > 1.0):
        raise ValueError("mixing coefficients must lie in [0, 1]")
    return delta[:, None] * real + (1.0 - delta[:, None]) * fake


def gradient_penalty(
    critic: CriticNet, mixed: np.ndarray, coef: float
) -> tuple[Tensor, np.ndarray]:
    """coef * mean((||d score / d input||_2 - 1)^2) over the batch, built
    with a live tape so it can be differentiated w.r.t. critic weights.

    Returns the penalty tensor and the per-sample gradient norms.  A zero
    input gradient is valid and contributes coef * 1.
    """
    x_hat = Tensor(np.asarray(mixed, dtype=np.float64), requires_grad=True)
    total = tsum(critic.forward(x_hat, differentiable=True))
    # the critic has no batch coupling, so d total / d x_hat is per-sample;
    # a constant critic legitimately yields zero gradients here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        (grads,) = backward(total, [x_hat], create_graph=True)
    norms = sqrt(tsum(mul(grads, grads), axis=1))
    gap = sub(norms, Tensor(1.0))
    penalty = mul(tmean(mul(gap, gap)), Tensor(float(coef)))
    return penalty, norms.data.copy()


def critic_loss(
    critic: CriticNet,
    real: np.ndarray,
    fake: np.ndarray,
    mixed: np.ndarray,
    coef: float,
) -> tuple[Tensor, dict]:
    """mean D(fake) - mean D(real) + gradient penalty."""
    if real.shape != fake.shape:
        raise ValueError(f"real {real.shape} and fake {fake.shape} batches differ")
    score_fake = tmean(critic.forward(Tensor(fake)))
    score_real = tmean(critic.forward(Tensor(real)))
    penalty, norms = gradient_penalty(critic, mixed, coef)
    loss = sub(score_fake, score_real) + penalty
    info = {
        "score_real": float(score_real.data),
        "score_fake": float(score_fake.data),
        "penalty": float(penalty.data),
        "grad_norms": norms,
    }
    return loss, info


def generator_loss(critic: CriticNet, generator: GeneratorNet, z: np.ndarray) -> Tensor:
    """mean of -D(G(z))."""
    fake = generator.forward(Tensor(np.asarray(z, dtype=np.float64)))
    return tmean(neg(critic.forward(fake)))


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class GanHistory:
    critic_loss: list[float] = field(default_factory=list)
    generator_loss: list[float] = field(default_factory=list)
    mean_grad_norm: list[float] = field(default_factory=list)
    iter_grad_norms: list[float] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "critic_loss", "generator_loss", "mean_gradient_norm"])
            rows = zip(self.critic_loss, self.generator_loss, self.mean_grad_norm)
            for epoch, (c, g, n) in enumerate(rows):
                writer.writerow([epoch, repr(c), repr(g), repr(n)])


def train_wgan_gp(
    bursts: list[Burst] | np.ndarray, config: GanConfig
) -> tuple[GeneratorNet, CriticNet, GanHistory]:
    """Alternating critic/generator optimization.

    Per epoch: ``critic_iters`` critic updates, each on a fresh real batch,
    fresh latent batch, and fresh per-sample mixing draws, then one generator
    update.  Both nets use Adam.  Raises :class:`TrainingDiverged` the moment
    a loss goes non-finite.
    """
    if isinstance(bursts, np.ndarray):
        data = np.asarray(bursts, dtype=np.float64)
    else:
        data = np.stack([b.samples[0] for b in bursts])
    if data.ndim != 2 or data.shape[1] != config.burst_len:
        raise ValueError(
            f"training data of shape {data.shape} does not match burst length {config.burst_len}"
        )
    if data.shape[0] < config.batch_size:
        raise ValueError(
            f"{data.shape[0]} real samples cannot fill batches of {config.batch_size}"
        )

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x6A4]))
    generator = GeneratorNet(config.burst_len, rng, config.generator_slope)
    critic = CriticNet(config, rng)
    opt_c = Adam(critic.params(), config.step_size, config.decay1, config.decay2)
    opt_g = Adam(generator.params(), config.step_size, config.decay1, config.decay2)
    history = GanHistory()

    for epoch in range(config.epochs):
        epoch_c_losses = []
        epoch_norms = []
        for _ in range(config.critic_iters):
            real = data[rng.integers(0, data.shape[0], size=config.batch_size)]
            z = rng.standard_normal((config.batch_size, config.burst_len))
            delta = rng.uniform(0.0, 1.0, size=config.batch_size)
            with no_grad():
                fake = generator.forward(Tensor(z)).data
            mixed = interpolate(real, fake, delta)
            loss, info = critic_loss(critic, real, fake, mixed, config.penalty_coef)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"critic loss became non-finite at epoch {epoch}",
                    {"epoch": epoch, "info": info, "history": history},
                )
            opt_c.zero_grad()
            loss.backward()
            opt_c.step()
            epoch_c_losses.append(value)
            epoch_norms.extend(float(v) for v in info["grad_norms"])

        z = rng.standard_normal((config.batch_size, config.burst_len))
        g_loss = generator_loss(critic, generator, z)
        g_value = float(g_loss.data)
        if not np.isfinite(g_value):
            raise TrainingDiverged(
                f"generator loss became non-finite at epoch {epoch}",
                {"epoch": epoch, "history": history},
            )
        opt_g.zero_grad()
        # gradients also reach the critic parameters; only the generator steps
        for p in critic.params():
            p.grad = None
        g_loss.backward()
        opt_g.step()

        history.critic_loss.append(float(np.mean(epoch_c_losses)))
        history.generator_loss.append(g_value)
        history.mean_grad_norm.append(float(np.mean(epoch_norms)))
        history.iter_grad_norms.extend(epoch_norms)

    generator.trained = True
    return generator, critic, history


# ---------------------------------------------------------------------------
# balancing
# ---------------------------------------------------------------------------


def sample_fake_bursts(
    generator: GeneratorNet,
    cls: ConditionClass,
    count: int,
    rng: np.random.Generator,
    sample_rate: float,
    start_id: int = 0,
) -> list[Burst]:
    if not generator.trained:
        raise ValueError("generator has not been trained")
    arr = generator.sample_array(count, rng)
    return [
        Burst(
            samples=arr[i][None, :],
            label=cls,
            sample_rate=sample_rate,
            burst_id=start_id + i,
            provenance="synthetic",
        )
        for i in range(count)
    ]


def balance_with_fakes(
    dataset: LabeledDataset,
    generators: dict[ConditionClass, GeneratorNet],
    rng: np.random.Generator,
) -> LabeledDataset:
    """Generate fakes until every fault class in the train split matches the
    largest fault class.  Real samples and labels are never touched, and the
    val/test splits receive nothing."""
    counts = dataset.class_counts("train")
    target = max(counts[c] for c in FAULT_CLASSES)
    sample_rate = dataset.bursts[0].sample_rate if dataset.bursts else 12000.0
    new_bursts: list[Burst] = []
    next_id = dataset.next_burst_id()
    for cls in FAULT_CLASSES:
        deficit = target - counts[cls]
        if deficit <= 0:
            continue
        gen = generators.get(cls)
        if gen is None or not gen.trained:
            raise ValueError(
                f"class {cls.value!r} needs {deficit} fakes but has no trained generator"
            )
        fakes = sample_fake_bursts(gen, cls, deficit, rng, sample_rate, next_id)
        next_id += deficit
        new_bursts.extend(fakes)
    return dataset.with_added(new_bursts, split="train")
