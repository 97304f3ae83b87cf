"""Parameterized vibration-burst synthesizer.

Healthy bursts are a shaft-frequency sinusoid over a broadband noise floor.
Fault bursts add an impulse train at the class's characteristic frequency,
each impulse ringing an exponentially decaying resonance.  The three
outer-race variants share one characteristic frequency and differ only in
the depth and phase of their load-zone amplitude modulation, which makes
them deliberately confusable at low sample counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .types import Burst, ConditionClass


@dataclass(frozen=True)
class SynthParams:
    sample_rate: float = 12000.0
    burst_len: int = 800
    channels: int = 1
    shaft_hz: float = 29.95
    shaft_amp: float = 0.4
    noise_floor: float = 0.05
    resonance_hz: float = 3000.0
    ring_decay_s: float = 0.0025
    impulse_amp: float = 1.0
    inner_hz: float = 162.2
    ball_hz: float = 70.6
    outer_hz: float = 107.36
    cage_ratio: float = 0.4  # ball-spin modulation frequency / shaft
    timing_jitter: float = 0.02  # std as a fraction of impulse spacing
    amp_jitter: float = 0.1
    channel_attenuation: float = 0.8
    # (modulation depth, modulation phase) per class
    modulation: dict = field(
        default_factory=lambda: {
            ConditionClass.INNER: (0.7, 0.0),
            ConditionClass.BALL: (0.5, 0.0),
            ConditionClass.OUT1: (0.1, 0.0),
            ConditionClass.OUT2: (0.55, math.pi / 2),
            ConditionClass.OUT3: (1.0, math.pi),
        }
    )

    def __post_init__(self):
        for name in ("sample_rate", "shaft_hz", "resonance_hz", "inner_hz", "ball_hz", "outer_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.burst_len < 1 or self.channels < 1:
            raise ValueError("burst_len and channels must be >= 1")

    def impulse_hz(self, cls: ConditionClass) -> float:
        if cls is ConditionClass.INNER:
            return self.inner_hz
        if cls is ConditionClass.BALL:
            return self.ball_hz
        return self.outer_hz

    def modulation_hz(self, cls: ConditionClass) -> float:
        return self.shaft_hz * self.cage_ratio if cls is ConditionClass.BALL else self.shaft_hz


def synthesize_burst(
    cls: ConditionClass,
    params: SynthParams,
    rng: np.random.Generator,
    burst_id: int = -1,
) -> Burst:
    """Generate one burst of the given condition class.

    The random draws (phases, impulse schedule, noise) come from ``rng`` in
    a fixed order, so an identical generator state reproduces the burst
    bit for bit.
    """
    fs, n = params.sample_rate, params.burst_len
    t = np.arange(n) / fs
    shaft_phase = rng.uniform(0.0, 2.0 * math.pi)
    base = params.shaft_amp * np.sin(2.0 * math.pi * params.shaft_hz * t + shaft_phase)

    impulse = np.zeros(n)
    if cls is not ConditionClass.HEALTH:
        f_imp = params.impulse_hz(cls)
        spacing = fs / f_imp
        depth, mod_phase = params.modulation[cls]
        f_mod = params.modulation_hz(cls)
        offset = rng.uniform(0.0, spacing)
        ring_len = int(6.0 * params.ring_decay_s * fs) + 1
        k = -int(np.ceil(ring_len / spacing)) - 1  # tails from before the window
        while True:
            pos = offset + k * spacing + rng.normal(0.0, params.timing_jitter * spacing)
            k += 1
            if pos >= n:
                break
            if pos + ring_len < 0:
                continue
            t_k = pos / fs
            env = (1.0 - depth) + depth * 0.5 * (
                1.0 + math.cos(2.0 * math.pi * f_mod * t_k + shaft_phase + mod_phase)
            )
            amp = params.impulse_amp * env * (1.0 + params.amp_jitter * rng.normal())
            start = max(0, int(math.ceil(pos)))
            stop = min(n, int(math.ceil(pos)) + ring_len)
            if stop <= start:
                continue
            rel = (np.arange(start, stop) - pos) / fs
            impulse[start:stop] += (
                amp
                * np.exp(-rel / params.ring_decay_s)
                * np.sin(2.0 * math.pi * params.resonance_hz * rel)
            )

    rows = []
    for ch in range(params.channels):
        gain = params.channel_attenuation**ch
        noise = params.noise_floor * rng.standard_normal(n)
        rows.append(gain * (base + impulse) + noise)
    return Burst(
        samples=np.stack(rows),
        label=cls,
        sample_rate=fs,
        burst_id=burst_id,
        provenance="real",
    )


class SynthSource:
    """Burst supplier backed by the synthesizer; never runs short."""

    def __init__(self, params: SynthParams):
        self.params = params

    def supply(self, cls: ConditionClass, count: int, rng: np.random.Generator) -> list[Burst]:
        return [synthesize_burst(cls, self.params, rng) for _ in range(count)]


class PoolSource:
    """Burst supplier drawing without replacement from a fixed pool."""

    def __init__(self, bursts: list[Burst]):
        self.by_class: dict[ConditionClass, list[Burst]] = {}
        for b in bursts:
            self.by_class.setdefault(b.label, []).append(b)

    def supply(self, cls: ConditionClass, count: int, rng: np.random.Generator) -> list[Burst]:
        pool = self.by_class.get(cls, [])
        if len(pool) < count:
            raise ShortfallError(cls, needed=count, available=len(pool))
        order = rng.permutation(len(pool))[:count]
        return [pool[i] for i in sorted(order)]


class ShortfallError(ValueError):
    """A source cannot supply the requested number of bursts for a class."""

    def __init__(self, cls: ConditionClass, needed: int, available: int):
        self.cls = cls
        super().__init__(
            f"class {cls.value!r}: need {needed} bursts, only {available} available"
        )
