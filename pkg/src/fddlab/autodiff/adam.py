"""Bias-corrected Adam with per-parameter moment state."""

from __future__ import annotations

import logging

import numpy as np

from .tensor import Tensor

log = logging.getLogger(__name__)


class Adam:
    """Standard Adam update over a list of leaf tensors.

    A parameter whose gradient contains non-finite values is skipped for
    that step (the step counter still advances) and the skip is counted.
    """

    def __init__(
        self,
        params: list[Tensor],
        step_size: float = 1e-3,
        decay1: float = 0.9,
        decay2: float = 0.999,
        eps: float = 1e-8,
    ):
        # decay1 = 0 (no first-moment smoothing) is a legitimate setting for
        # adversarial training, so only decay2 is required to be strictly > 0
        if not (0.0 <= decay1 < 1.0 and 0.0 < decay2 < 1.0):
            raise ValueError("decay rates must lie in [0, 1) and (0, 1)")
        self.params = list(params)
        self.step_size = float(step_size)
        self.decay1 = float(decay1)
        self.decay2 = float(decay2)
        self.eps = float(eps)
        self.step_count = 0
        self.skipped = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, grads: list[np.ndarray] | None = None) -> None:
        """Apply one update using ``grads`` or the accumulated ``.grad``."""
        if grads is None:
            grads = [p.grad for p in self.params]
        if len(grads) != len(self.params):
            raise ValueError(
                f"got {len(grads)} gradients for {len(self.params)} parameters"
            )
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.decay1**t
        bc2 = 1.0 - self.decay2**t
        for k, (p, g) in enumerate(zip(self.params, grads)):
            if g is None:
                continue
            g = np.asarray(g, dtype=np.float64)
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter {p.data.shape}"
                )
            if not np.all(np.isfinite(g)):
                self.skipped += 1
                log.warning(
                    "adam: non-finite gradient for parameter %d, update skipped (%d total)",
                    k,
                    self.skipped,
                )
                continue
            self.m[k] = self.decay1 * self.m[k] + (1.0 - self.decay1) * g
            self.v[k] = self.decay2 * self.v[k] + (1.0 - self.decay2) * g * g
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            p.data = p.data - self.step_size * m_hat / (np.sqrt(v_hat) + self.eps)
