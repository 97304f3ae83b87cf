"""Experiment configuration: nested dataclasses, JSON round-trip, hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..dataset.synth import SynthParams
from ..dataset.types import CLASS_BY_NAME, ConditionClass
from ..features import FeatureConfig


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class DataConfig:
    source: str = "synth"  # "synth" or "fddb"
    fddb_path: str | None = None
    manifest: dict = field(default_factory=dict)  # label id (int) -> class name
    n_total: int = 3000
    split: tuple[float, float, float] = (0.7, 0.15, 0.15)
    stride: int | None = None
    synth: SynthParams = field(default_factory=SynthParams)

    @property
    def burst_len(self) -> int:
        return self.synth.burst_len

    @property
    def sample_rate(self) -> float:
        return self.synth.sample_rate

    @property
    def channels(self) -> int:
        return self.synth.channels

    def manifest_classes(self) -> dict[int, ConditionClass]:
        if not self.manifest:
            # files written by this package label classes by enum position
            return {i: cls for i, cls in enumerate(ConditionClass)}
        return {int(k): CLASS_BY_NAME[v] for k, v in self.manifest.items()}


@dataclass(frozen=True)
class GanTrainConfig:
    penalty_coef: float = 10.0
    critic_iters: int = 5
    batch_size: int = 32
    step_size: float = 1e-4
    decay1: float = 0.0
    decay2: float = 0.9
    epochs: int = 200
    critic_channels: tuple[int, ...] = (16, 32, 64)
    critic_width: int = 9
    critic_hidden: int = 32
    generator_slope: float = 0.2


@dataclass(frozen=True)
class ClstmTrainConfig:
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


@dataclass(frozen=True)
class WelmConfig:
    hidden: int = 150
    reg_c: float = 100.0
    activation: str = "sigmoid"


@dataclass(frozen=True)
class Toggles:
    gan: bool = True
    classic: bool = False
    weighting: bool = True
    model: str = "clstm_welm"  # or "welm_stat": FFT + statistical features only

    def __post_init__(self):
        if self.model not in ("clstm_welm", "welm_stat"):
            raise ConfigError(f"unknown model variant {self.model!r}")

    def as_dict(self) -> dict:
        return {"gan": self.gan, "classic": self.classic, "weighting": self.weighting, "model": self.model}


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    gan: GanTrainConfig = field(default_factory=GanTrainConfig)
    clstm: ClstmTrainConfig = field(default_factory=ClstmTrainConfig)
    welm: WelmConfig = field(default_factory=WelmConfig)
    toggles: Toggles = field(default_factory=Toggles)
    alphas: tuple[float, ...] = (4.0, 1.0, 0.25)
    snrs: tuple[float, ...] = (10.0, 50.0, 100.0)
    repetitions: int = 3
    kfolds: int = 1
    classic_snr_range: tuple[float, float] = (10.0, 30.0)
    out_dir: str = "out"
    master_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not self.alphas or not self.snrs:
            raise ConfigError("the alpha x SNR grid must be non-empty")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.kfolds < 1:
            raise ConfigError("kfolds must be >= 1 (1 = plain train/val/test split)")
        if self.data.source not in ("synth", "fddb"):
            raise ConfigError(f"unknown data source {self.data.source!r}")
        if self.data.source == "fddb" and not self.data.fddb_path:
            raise ConfigError("fddb source requires data.fddb_path")

    def grid_points(self) -> list[tuple[float, float]]:
        return [(a, s) for a in self.alphas for s in self.snrs]

    def fold_ids(self) -> list[int]:
        return list(range(self.kfolds)) if self.kfolds >= 2 else [0]

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        def convert(obj):
            if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
                raw = {}
                for f in dataclasses.fields(obj):
                    raw[f.name] = convert(getattr(obj, f.name))
                return raw
            if isinstance(obj, dict):
                return {_key_str(k): convert(v) for k, v in obj.items()}
            if isinstance(obj, (list, tuple)):
                return [convert(v) for v in obj]
            return obj

        return convert(self)

    def canonical_json(self) -> str:
        resolved = self.to_dict()
        resolved.pop("out_dir", None)
        resolved.pop("jobs", None)
        return json.dumps(resolved, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        try:
            return _experiment_from_dict(raw)
        except (TypeError, ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad configuration: {exc}") from exc

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(raw)


def _key_str(k):
    if isinstance(k, ConditionClass):
        return k.value
    return str(k)


def _tupled(seq, depth: int = 1):
    if depth <= 1:
        return tuple(seq)
    return tuple(_tupled(s, depth - 1) for s in seq)


def _experiment_from_dict(raw: dict) -> ExperimentConfig:
    kwargs = {}
    if "data" in raw:
        d = dict(raw["data"])
        if "synth" in d:
            s = dict(d["synth"])
            if "modulation" in s:
                s["modulation"] = {
                    CLASS_BY_NAME[name]: tuple(val) for name, val in s["modulation"].items()
                }
            d["synth"] = SynthParams(**s)
        if "split" in d:
            d["split"] = tuple(d["split"])
        if "manifest" in d:
            d["manifest"] = {int(k): v for k, v in d["manifest"].items()}
        kwargs["data"] = DataConfig(**d)
    if "features" in raw:
        kwargs["features"] = FeatureConfig(**raw["features"])
    if "gan" in raw:
        g = dict(raw["gan"])
        if "critic_channels" in g:
            g["critic_channels"] = tuple(g["critic_channels"])
        kwargs["gan"] = GanTrainConfig(**g)
    if "clstm" in raw:
        c = dict(raw["clstm"])
        if "path2_blocks" in c:
            c["path2_blocks"] = _tupled(c["path2_blocks"], depth=2)
        kwargs["clstm"] = ClstmTrainConfig(**c)
    if "welm" in raw:
        kwargs["welm"] = WelmConfig(**raw["welm"])
    if "toggles" in raw:
        kwargs["toggles"] = Toggles(**raw["toggles"])
    for name in ("repetitions", "kfolds", "out_dir", "master_seed", "jobs"):
        if name in raw:
            kwargs[name] = raw[name]
    if "alphas" in raw:
        kwargs["alphas"] = tuple(raw["alphas"])
    if "snrs" in raw:
        kwargs["snrs"] = tuple(raw["snrs"])
    if "classic_snr_range" in raw:
        kwargs["classic_snr_range"] = tuple(raw["classic_snr_range"])
    return ExperimentConfig(**kwargs)
