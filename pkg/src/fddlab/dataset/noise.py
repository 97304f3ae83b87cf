"""Additive white Gaussian noise at a requested signal-to-noise ratio."""

from __future__ import annotations

import numpy as np

from .types import Burst


def awgn_variance(signal_power: float, snr_db: float) -> float:
    """Noise variance that realizes ``snr_db`` for the given signal power."""
    return signal_power / (10.0 ** (snr_db / 10.0))


def add_awgn(burst: Burst, snr_db: float, rng: np.random.Generator) -> Burst:
    """Return a copy of the burst with i.i.d. zero-mean Gaussian noise whose
    variance is signal power / 10^(snr/10).  Rejects all-zero bursts, for
    which the ratio is undefined."""
    power = burst.power()
    if power == 0.0:
        raise ValueError("cannot add noise at a fixed SNR to an all-zero burst")
    sigma = np.sqrt(awgn_variance(power, snr_db))
    noise = rng.normal(0.0, sigma, size=burst.samples.shape)
    return burst.replace_samples(burst.samples + noise)


def measured_snr_db(clean: np.ndarray, noisy: np.ndarray) -> float:
    """Empirical 10*log10(P_signal / P_noise) of a noisy copy."""
    p_sig = float(np.mean(clean**2))
    p_noise = float(np.mean((noisy - clean) ** 2))
    return 10.0 * np.log10(p_sig / p_noise)
