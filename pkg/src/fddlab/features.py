"""Time-frequency feature tensors and auxiliary statistical features.

Each burst becomes a (scales + 1) x width matrix per sensor channel: the
wavelet scalogram rows ordered from smallest to largest scale, then one
resampled FFT-magnitude row.  Rows are standardized with statistics frozen
on the training set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .autodiff.checkpoint import load_tensors, save_tensors
from .dataset.types import Burst

STD_EPS = 1e-12


# ---------------------------------------------------------------------------
# FFT magnitude
# ---------------------------------------------------------------------------


@dataclass
class SpectralRow:
    values: np.ndarray  # length B/2: DC through the bin below Nyquist
    burst_id: int


def _fft_magnitude_array(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    if n % 2 != 0:
        raise ValueError(f"burst length must be even for a one-sided spectrum, got {n}")
    spectrum = np.fft.fft(x)
    # real input must be conjugate-symmetric; guards against upstream NaNs
    asym = np.max(np.abs(spectrum[1:] - np.conj(spectrum[-1:0:-1])))
    scale = max(1.0, float(np.max(np.abs(spectrum))))
    if asym / scale > 1e-10:
        raise ValueError(f"spectrum asymmetry {asym:.3e} exceeds tolerance for real input")
    return np.abs(spectrum[: n // 2])


def fft_magnitude(burst: Burst, channel: int = 0) -> SpectralRow:
    """One-sided magnitude spectrum (DC through Nyquist-1) of one channel."""
    return SpectralRow(_fft_magnitude_array(burst.samples[channel]), burst.burst_id)


# ---------------------------------------------------------------------------
# Morlet scalogram
# ---------------------------------------------------------------------------


@dataclass
class Scalogram:
    values: np.ndarray  # [scales, width]
    burst_id: int
    degenerate: np.ndarray  # bool per row: wavelet support exceeded the burst


def morlet_scales(
    n_scales: int, fmin_hz: float, sample_rate: float, omega0: float = 6.0
) -> np.ndarray:
    """Log-spaced scales (ascending, i.e. high to low frequency) whose center
    frequencies span fmin through Nyquist."""
    if n_scales < 1:
        raise ValueError("need at least one scale")
    freqs = np.logspace(np.log10(fmin_hz), np.log10(sample_rate / 2.0), n_scales)[::-1]
    return omega0 * sample_rate / (2.0 * np.pi * freqs)


def scale_center_frequencies(
    scales: np.ndarray, sample_rate: float, omega0: float = 6.0
) -> np.ndarray:
    return omega0 * sample_rate / (2.0 * np.pi * np.asarray(scales))


def _morlet_bank(scales: np.ndarray, n: int, omega0: float) -> tuple[np.ndarray, np.ndarray]:
    """Frequency-domain Morlet filters [S, n] plus a per-row degeneracy mask.

    A scale whose effective support (8 scale samples, i.e. +/- 4 sigma of the
    Gaussian envelope) exceeds the burst is zeroed out.
    """
    omega = 2.0 * np.pi * np.arange(n) / n
    bank = np.zeros((len(scales), n))
    half = n // 2
    degenerate = np.zeros(len(scales), dtype=bool)
    for i, a in enumerate(scales):
        if 8.0 * a > n:
            degenerate[i] = True
            continue
        w = omega[1 : half + 1]
        bank[i, 1 : half + 1] = (
            np.sqrt(a) * np.pi**-0.25 * np.exp(-0.5 * (a * w - omega0) ** 2)
        )
    return bank, degenerate


def cwt_scalogram(
    burst: Burst,
    scales: np.ndarray,
    width: int,
    omega0: float = 6.0,
    channel: int = 0,
) -> Scalogram:
    """Wavelet magnitudes by frequency-domain convolution, decimated to
    ``width`` uniformly spaced time columns."""
    x = burst.samples[channel]
    n = x.shape[0]
    if width > n:
        raise ValueError(f"width {width} exceeds burst length {n}")
    scales = np.asarray(scales, dtype=np.float64)
    bank, degenerate = _morlet_bank(scales, n, omega0)
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} of {len(scales)} scales exceed the burst "
            "support; those scalogram rows are zero",
            RuntimeWarning,
            stacklevel=2,
        )
    spectrum = np.fft.fft(x)
    coeffs = np.fft.ifft(spectrum[None, :] * bank, axis=1)
    cols = (np.arange(width) * n) // width
    return Scalogram(np.abs(coeffs)[:, cols], burst.burst_id, degenerate)


# ---------------------------------------------------------------------------
# tensor assembly and the standardizing pipeline
# ---------------------------------------------------------------------------


@dataclass
class FeatureTensor:
    values: np.ndarray  # [rows, width]
    burst_id: int


def resample_row(row: np.ndarray, width: int) -> np.ndarray:
    n = row.shape[0]
    if n == width:
        return row.copy()
    return np.interp(np.linspace(0.0, n - 1.0, width), np.arange(n), row)


def assemble_tensor(
    fft_row: SpectralRow,
    scalogram: Scalogram,
    stats: "RowStats | None" = None,
) -> FeatureTensor:
    """Stack scalogram rows plus the FFT row (resampled to the scalogram
    width); standardize per row when pipeline statistics are supplied."""
    if fft_row.burst_id != scalogram.burst_id:
        raise ValueError(
            f"provenance mismatch: fft row from burst {fft_row.burst_id}, "
            f"scalogram from burst {scalogram.burst_id}"
        )
    width = scalogram.values.shape[1]
    stacked = np.vstack([scalogram.values, resample_row(fft_row.values, width)[None, :]])
    if stats is not None:
        stacked = stats.apply(stacked)
    if not np.all(np.isfinite(stacked)):
        raise ValueError("assembled tensor contains non-finite values")
    return FeatureTensor(stacked, fft_row.burst_id)


@dataclass
class RowStats:
    mean: np.ndarray  # [rows]
    std: np.ndarray  # [rows]

    def apply(self, tensor: np.ndarray) -> np.ndarray:
        denom = np.where(self.std > STD_EPS, self.std, 1.0)
        out = (tensor - self.mean[:, None]) / denom[:, None]
        out[self.std <= STD_EPS, :] = 0.0
        return out


@dataclass(frozen=True)
class FeatureConfig:
    n_scales: int = 32
    width: int = 256
    omega0: float = 6.0
    fmin_hz: float = 5.0

    def rows(self, channels: int) -> int:
        return channels * (self.n_scales + 1)


class FeaturePipeline:
    """Burst -> standardized feature tensor, with train-frozen row statistics.

    ``fit`` must see the (augmented) training bursts only; transforms of val
    and test bursts then reuse the stored statistics, so no evaluation data
    leaks into the standardization.
    """

    def __init__(self, config: FeatureConfig, sample_rate: float):
        self.config = config
        self.sample_rate = float(sample_rate)
        self.scales = morlet_scales(config.n_scales, config.fmin_hz, sample_rate, config.omega0)
        self.stats: RowStats | None = None

    def raw_tensor(self, burst: Burst) -> np.ndarray:
        blocks = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for ch in range(burst.channels):
                scal = cwt_scalogram(burst, self.scales, self.config.width, self.config.omega0, ch)
                row = fft_magnitude(burst, ch)
                blocks.append(assemble_tensor(row, scal).values)
        return np.vstack(blocks)

    def fit(self, train_bursts: list[Burst]) -> "FeaturePipeline":
        if not train_bursts:
            raise ValueError("cannot fit feature statistics on an empty training set")
        acc = np.stack([self.raw_tensor(b) for b in train_bursts])
        self.stats = RowStats(mean=acc.mean(axis=(0, 2)), std=acc.std(axis=(0, 2)))
        return self

    def transform(self, burst: Burst) -> FeatureTensor:
        if self.stats is None:
            raise RuntimeError("pipeline must be fitted on the training set first")
        values = self.stats.apply(self.raw_tensor(burst))
        return FeatureTensor(values, burst.burst_id)

    def transform_stack(self, bursts: list[Burst]) -> np.ndarray:
        return np.stack([self.transform(b).values for b in bursts])

    def state_arrays(self) -> dict[str, np.ndarray]:
        if self.stats is None:
            raise RuntimeError("pipeline not fitted")
        return {"row_mean": self.stats.mean, "row_std": self.stats.std, "scales": self.scales}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.stats = RowStats(mean=arrays["row_mean"], std=arrays["row_std"])


def save_tensor_cache(path, tensors: dict[int, np.ndarray], config_hash: str) -> None:
    """Persist per-burst tensors keyed by burst id and pipeline-config hash."""
    named = {f"{config_hash}/burst{bid}": t for bid, t in tensors.items()}
    save_tensors(path, named)


def load_tensor_cache(path, config_hash: str) -> dict[int, np.ndarray]:
    out = {}
    prefix = f"{config_hash}/burst"
    for name, arr in load_tensors(path).items():
        if name.startswith(prefix):
            out[int(name[len(prefix) :])] = arr
    return out


# ---------------------------------------------------------------------------
# statistical features
# ---------------------------------------------------------------------------


@dataclass
class StatFeatureVector:
    mean: float
    std: float
    rms: float
    kurtosis: float
    skewness: float
    crest: float
    peak_to_peak: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mean, self.std, self.rms, self.kurtosis, self.skewness, self.crest, self.peak_to_peak]
        )


def stat_features(burst: Burst, channel: int = 0) -> StatFeatureVector:
    """Seven moment/shape statistics of one channel; the crest factor is
    undefined for an all-zero signal."""
    x = burst.samples[channel]
    rms = float(np.sqrt(np.mean(x**2)))
    if rms == 0.0:
        raise ValueError("crest factor undefined for an all-zero burst")
    mean = float(np.mean(x))
    centered = x - mean
    m2 = float(np.mean(centered**2))
    std = float(np.sqrt(m2))
    if m2 > 0.0:
        kurt = float(np.mean(centered**4) / m2**2)
        skew = float(np.mean(centered**3) / m2**1.5)
    else:
        kurt = 0.0
        skew = 0.0
    return StatFeatureVector(
        mean=mean,
        std=std,
        rms=rms,
        kurtosis=kurt,
        skewness=skew,
        crest=float(np.max(np.abs(x)) / rms),
        peak_to_peak=float(np.max(x) - np.min(x)),
    )
