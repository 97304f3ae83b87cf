"""One grid cell end to end: scenario, noise, augmentation, features,
trunk training, closed-form classification, evaluation.

Test-fold bursts never reach generator training, standardization fitting,
trunk training, or classifier fitting; provenance and split tags are
asserted at every stage boundary.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff.checkpoint import save_tensors
from ..clstm import ClstmConfig, extract_features, train_clstm
from ..dataset import (
    CLASS_ORDER,
    FAULT_CLASSES,
    LabeledDataset,
    PoolSource,
    ScenarioSpec,
    SynthSource,
    balance_with_classic,
    ingest_flat,
    kfold_split,
)
from ..dataset.scenario import build_scenario
from ..features import FeaturePipeline, _fft_magnitude_array, stat_features
from ..metrics import evaluate
from ..welm import fit_welm, model_arrays, predict
from ..wgan import GanConfig, balance_with_fakes, train_wgan_gp
from .config import ExperimentConfig
from .seeds import SeedTree

CLASS_NAMES = [c.value for c in CLASS_ORDER]
CLASS_INDEX = {c: i for i, c in enumerate(CLASS_ORDER)}


class LeakageError(AssertionError):
    """Evaluation data reached a training-only stage."""


@dataclass
class RunRecord:
    config_hash: str
    alpha: float
    snr: float | None
    repetition: int
    fold: int
    status: str  # "ok" | "failed"
    toggles: dict
    stage: str | None = None  # failing stage when status == "failed"
    error: str | None = None
    report: dict | None = None
    artifacts: dict = field(default_factory=dict)  # file names inside the cell dir
    wall_clock_s: float | None = None  # kept out of the serialized record

    def key(self) -> tuple:
        return (self.alpha, self.snr, self.repetition, self.fold)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("wall_clock_s", None)  # durations are not reproducible bytes
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @staticmethod
    def load(path) -> "RunRecord":
        raw = json.loads(Path(path).read_text())
        return RunRecord(**raw)


# ---------------------------------------------------------------------------
# stage helpers
# ---------------------------------------------------------------------------


def _assert_training_material(bursts, stage: str) -> None:
    for b in bursts:
        if getattr(b, "_split_tag", "train") != "train":
            raise LeakageError(f"{stage}: burst {b.burst_id} from split {b._split_tag!r}")


def _tag_splits(ds: LabeledDataset) -> None:
    # annotate bursts so downstream stages can assert provenance cheaply
    for i, b in enumerate(ds.bursts):
        b._split_tag = str(ds.split[i])


def dataset_for_cell(
    cfg: ExperimentConfig, alpha: float, snr: float | None, tree: SeedTree, fold: int
) -> LabeledDataset:
    """Materialize the scenario and resolve the fold into train/test tags."""
    spec = ScenarioSpec(
        n_total=cfg.data.n_total,
        minority_share=alpha,
        snr_db=snr,
        seed=tree.seed("scenario"),
    )
    if cfg.data.source == "synth":
        source = SynthSource(cfg.data.synth)
    else:
        pool = ingest_flat(
            cfg.data.fddb_path,
            cfg.data.manifest_classes(),
            burst_len=cfg.data.burst_len,
            stride=cfg.data.stride,
            seed=tree.seed("ingest"),
        )
        source = PoolSource(pool.bursts)
    ds = build_scenario(spec, source, cfg.data.split)
    if cfg.kfolds >= 2:
        folds = kfold_split(ds, cfg.kfolds, tree.seed("folds"))
        tags = np.where(folds == fold, "test", "train").astype("<U5")
        ds = LabeledDataset(ds.bursts, tags, folds, dict(ds.meta))
    _tag_splits(ds)
    return ds


def _augment(
    cfg: ExperimentConfig,
    ds: LabeledDataset,
    tree: SeedTree,
    cell_dir: Path | None,
    artifacts: dict,
) -> LabeledDataset:
    if cfg.toggles.gan:
        counts = ds.class_counts("train")
        target = max(counts[c] for c in FAULT_CLASSES)
        generators = {}
        for cls in FAULT_CLASSES:
            if counts[cls] >= target:
                continue
            minority = [b for b in ds.subset("train") if b.label is cls]
            _assert_training_material(minority, "gan-train")
            if any(b.provenance != "real" for b in minority):
                raise LeakageError("gan-train: non-real bursts in generator input")
            gan_cfg = GanConfig(
                burst_len=cfg.data.burst_len,
                seed=tree.seed(f"gan-{cls.value}"),
                penalty_coef=cfg.gan.penalty_coef,
                critic_iters=cfg.gan.critic_iters,
                batch_size=min(cfg.gan.batch_size, max(2, len(minority))),
                step_size=cfg.gan.step_size,
                decay1=cfg.gan.decay1,
                decay2=cfg.gan.decay2,
                epochs=cfg.gan.epochs,
                critic_channels=cfg.gan.critic_channels,
                critic_width=cfg.gan.critic_width,
                critic_hidden=cfg.gan.critic_hidden,
                generator_slope=cfg.gan.generator_slope,
            )
            generator, _critic, history = train_wgan_gp(minority, gan_cfg)
            generators[cls] = generator
            if cell_dir is not None:
                loss_csv = cell_dir / f"gan_{cls.value}_loss.csv"
                history.to_csv(loss_csv)
                ckpt = cell_dir / f"gan_{cls.value}.fddw"
                save_tensors(ckpt, generator.state_dict())
                artifacts[f"gan_{cls.value}_loss"] = loss_csv.name
                artifacts[f"gan_{cls.value}_checkpoint"] = ckpt.name
        if generators:
            ds = balance_with_fakes(ds, generators, tree.rng("gan-sample"))
            _tag_splits(ds)
    if cfg.toggles.classic:
        ds = balance_with_classic(ds, tree.rng("classic"), cfg.classic_snr_range)
        _tag_splits(ds)
    return ds


def _labels_int(bursts) -> np.ndarray:
    return np.array([CLASS_INDEX[b.label] for b in bursts], dtype=np.int64)


def _labels_named(bursts) -> list[str]:
    return [b.label.value for b in bursts]


def _stat_fft_matrix(bursts) -> np.ndarray:
    rows = []
    for b in bursts:
        mag = _fft_magnitude_array(b.samples[0])
        rows.append(np.concatenate([mag, stat_features(b).as_array()]))
    return np.stack(rows)


def _column_standardize(train: np.ndarray, *others: np.ndarray):
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    denom = np.where(std > 1e-12, std, 1.0)

    def apply(m):
        out = (m - mean) / denom
        out[:, std <= 1e-12] = 0.0
        return out

    return tuple(apply(m) for m in (train, *others))


def run_pipeline(
    cfg: ExperimentConfig,
    alpha: float,
    snr: float | None,
    repetition: int,
    fold: int = 0,
    cell_dir: Path | None = None,
) -> RunRecord:
    """Execute all stages for one cell; a stage failure produces a failed
    record naming the stage instead of raising."""
    tree = SeedTree(cfg.master_seed).at(f"alpha={alpha}", f"snr={snr}", f"rep={repetition}")
    if cfg.kfolds >= 2:
        tree = tree.at(f"fold={fold}")
    record = RunRecord(
        config_hash=cfg.config_hash(),
        alpha=alpha,
        snr=snr,
        repetition=repetition,
        fold=fold,
        status="ok",
        toggles=cfg.toggles.as_dict(),
    )
    if cell_dir is not None:
        cell_dir = Path(cell_dir)
        cell_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    stage = "scenario"
    try:
        ds = dataset_for_cell(cfg, alpha, snr, tree, fold)

        stage = "augment"
        ds = _augment(cfg, ds, tree, cell_dir, record.artifacts)
        train_bursts = ds.subset("train")
        val_bursts = ds.subset("val")
        test_bursts = ds.subset("test")
        if any(b.provenance != "real" for b in val_bursts + test_bursts):
            raise LeakageError("synthetic material leaked into val/test")
        if not test_bursts:
            raise ValueError("cell has no test bursts")

        stage = "features"
        _assert_training_material(train_bursts, "standardization/classifier-fit")
        if cfg.toggles.model == "clstm_welm":
            pipe = FeaturePipeline(cfg.features, cfg.data.sample_rate)
            pipe.fit(train_bursts)  # train-only statistics
            x_train = pipe.transform_stack(train_bursts)
            x_val = pipe.transform_stack(val_bursts) if val_bursts else None
            x_test = pipe.transform_stack(test_bursts)
            if cell_dir is not None:
                stats_path = cell_dir / "feature_stats.fddw"
                save_tensors(stats_path, pipe.state_arrays())
                record.artifacts["feature_stats"] = stats_path.name

            stage = "clstm-train"
            clstm_cfg = ClstmConfig(
                in_channels=cfg.features.rows(cfg.data.channels),
                width=cfg.features.width,
                n_classes=len(CLASS_ORDER),
                path1_filters=cfg.clstm.path1_filters,
                path1_width=cfg.clstm.path1_width,
                lstm_hidden=cfg.clstm.lstm_hidden,
                path2_blocks=cfg.clstm.path2_blocks,
                dense=cfg.clstm.dense,
                epochs=cfg.clstm.epochs,
                batch_size=cfg.clstm.batch_size,
                step_size=cfg.clstm.step_size,
                decay1=cfg.clstm.decay1,
                decay2=cfg.clstm.decay2,
                weighted=cfg.toggles.weighting,
                seed=tree.seed("clstm"),
            )
            model, curves = train_clstm(
                x_train,
                _labels_int(train_bursts),
                clstm_cfg,
                val_tensors=x_val,
                val_labels=_labels_int(val_bursts) if val_bursts else None,
            )
            if cell_dir is not None:
                ckpt = cell_dir / "clstm.fddw"
                save_tensors(ckpt, model.state_dict())
                record.artifacts["clstm_checkpoint"] = ckpt.name
                curve_path = cell_dir / "clstm_curves.csv"
                _write_curves(curve_path, curves)
                record.artifacts["clstm_curves"] = curve_path.name

            stage = "extract"
            feats_train = extract_features(model, x_train)
            feats_test = extract_features(model, x_test)
        else:  # welm_stat: FFT magnitudes plus statistical features, no trunk
            m_train = _stat_fft_matrix(train_bursts)
            m_test = _stat_fft_matrix(test_bursts)
            feats_train, feats_test = _column_standardize(m_train, m_test)

        stage = "welm-fit"
        elm = fit_welm(
            feats_train,
            _labels_named(train_bursts),
            hidden=cfg.welm.hidden,
            reg_c=cfg.welm.reg_c,
            weighted=cfg.toggles.weighting,
            seed=tree.seed("welm"),
            activation=cfg.welm.activation,
            classes=CLASS_NAMES,
        )
        if cell_dir is not None:
            ckpt = cell_dir / "welm.fddw"
            save_tensors(ckpt, model_arrays(elm))
            record.artifacts["welm_checkpoint"] = ckpt.name

        stage = "evaluate"
        y_pred, scores = predict(elm, feats_test)
        report = evaluate(
            _labels_named(test_bursts),
            y_pred,
            scores,
            classes=CLASS_NAMES,
            metadata={
                "alpha": alpha,
                "snr": snr,
                "repetition": repetition,
                "fold": fold,
                "minority": ds.meta.get("minority", "out3"),
                "seed_path": list(tree.path),
            },
        )
        record.report = report.to_dict()
        if cell_dir is not None:
            report.to_json(cell_dir / "report.json")
            report.confusion_to_csv(cell_dir / "confusion.csv")
            record.artifacts["report"] = "report.json"
            record.artifacts["confusion"] = "confusion.csv"
    except Exception as exc:  # recorded, grid continues
        record.status = "failed"
        record.stage = stage
        record.error = f"{type(exc).__name__}: {exc}"
    record.wall_clock_s = time.perf_counter() - started
    if cell_dir is not None:
        record.save(cell_dir / "record.json")
        (cell_dir / "timing.log").write_text(f"wall_clock_s={record.wall_clock_s:.3f}\n")
    return record


def _write_curves(path, curves) -> None:
    lines = ["epoch,train_loss,val_loss"]
    for i, tl in enumerate(curves.train_loss):
        vl = curves.val_loss[i] if i < len(curves.val_loss) else ""
        lines.append(f"{i},{tl!r},{vl!r}" if vl != "" else f"{i},{tl!r},")
    Path(path).write_text("\n".join(lines) + "\n")
