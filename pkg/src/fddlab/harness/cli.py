"""Command-line entry point.

Exit codes: 0 success, 1 single-run failure, 2 configuration error,
3 partial grid failure, 4 data-file error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from ..autodiff.checkpoint import load_tensors, save_tensors
from ..dataset import CLASS_BY_NAME, DataFormatError, write_bursts
from ..features import FeaturePipeline, save_tensor_cache
from ..wgan import GanConfig, GeneratorNet, sample_fake_bursts, train_wgan_gp
from .ablate import ablation_report
from .config import ConfigError, ExperimentConfig, Toggles
from .grid import cell_dir_for, record_metrics, run_grid, write_summary
from .pipeline import RunRecord, dataset_for_cell, run_pipeline
from .seeds import SeedTree

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_DATA = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fddlab",
        description="Fault detection and diagnosis workbench for vibration bursts",
    )
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--jobs", type=int, help="concurrent grid cells")
    sub = parser.add_subparsers(dest="command", required=True)

    def cell_args(p, rep_fold=True):
        p.add_argument("--alpha", type=float, help="minority share in percent")
        p.add_argument("--snr", type=float, help="noise level in dB (omit for clean)")
        if rep_fold:
            p.add_argument("--rep", type=int, default=0)
            p.add_argument("--fold", type=int, default=0)

    p = sub.add_parser("synth", help="materialize a scenario and write an FDDB file")
    cell_args(p, rep_fold=False)
    p.add_argument("--path", required=True)

    p = sub.add_parser("gan-train", help="train the minority-class generator")
    cell_args(p, rep_fold=False)
    p.add_argument("--class-name", default="out3")

    p = sub.add_parser("gan-sample", help="sample bursts from a trained generator")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--class-name", default="out3")
    p.add_argument("--path", required=True)
    p.add_argument("--sample-rate", type=float, default=12000.0)

    p = sub.add_parser("features", help="compute and cache feature tensors")
    cell_args(p, rep_fold=False)

    p = sub.add_parser("train", help="run one full pipeline cell")
    cell_args(p)

    p = sub.add_parser("evaluate", help="report metrics for one cell (runs it if needed)")
    cell_args(p)

    sub.add_parser("grid", help="run the whole alpha x SNR grid")

    p = sub.add_parser("ablate", help="paired comparison of one toggle")
    p.add_argument("--toggle", required=True, choices=["gan", "classic", "weighting"])

    sub.add_parser("report", help="re-aggregate cached run records")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _cell_point(cfg: ExperimentConfig, args) -> tuple[float, float | None]:
    alpha = args.alpha if args.alpha is not None else cfg.alphas[0]
    snr = args.snr  # None means clean
    return alpha, snr


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return _dispatch(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_DATA


def _dispatch(cfg: ExperimentConfig, args) -> int:
    out = Path(cfg.out_dir)
    if args.command == "synth":
        alpha, snr = _cell_point(cfg, args)
        tree = SeedTree(cfg.master_seed).at(f"alpha={alpha}", f"snr={snr}", "rep=0")
        ds = dataset_for_cell(cfg, alpha, snr, tree, fold=0)
        write_bursts(args.path, ds.bursts, cfg.data.sample_rate)
        print(f"wrote {len(ds.bursts)} bursts to {args.path}")
        return EXIT_OK

    if args.command == "gan-train":
        alpha, snr = _cell_point(cfg, args)
        cls = CLASS_BY_NAME[args.class_name]
        tree = SeedTree(cfg.master_seed).at(f"alpha={alpha}", f"snr={snr}", "rep=0")
        ds = dataset_for_cell(cfg, alpha, snr, tree, fold=0)
        pool = [b for b in ds.subset("train") if b.label is cls]
        gan_cfg = GanConfig(
            burst_len=cfg.data.burst_len,
            seed=tree.seed(f"gan-{cls.value}"),
            batch_size=min(cfg.gan.batch_size, max(2, len(pool))),
            penalty_coef=cfg.gan.penalty_coef,
            critic_iters=cfg.gan.critic_iters,
            step_size=cfg.gan.step_size,
            decay1=cfg.gan.decay1,
            decay2=cfg.gan.decay2,
            epochs=cfg.gan.epochs,
            critic_channels=cfg.gan.critic_channels,
            critic_width=cfg.gan.critic_width,
            critic_hidden=cfg.gan.critic_hidden,
            generator_slope=cfg.gan.generator_slope,
        )
        generator, _critic, history = train_wgan_gp(pool, gan_cfg)
        out.mkdir(parents=True, exist_ok=True)
        ckpt = out / f"gan_{cls.value}.fddw"
        save_tensors(ckpt, generator.state_dict())
        history.to_csv(out / f"gan_{cls.value}_loss.csv")
        print(f"trained on {len(pool)} bursts; checkpoint {ckpt}")
        return EXIT_OK

    if args.command == "gan-sample":
        arrays = load_tensors(args.checkpoint)
        latent_len = arrays["gen/w0"].shape[0]
        generator = GeneratorNet(latent_len, np.random.default_rng(0))
        generator.load_state_dict(arrays)
        cls = CLASS_BY_NAME[args.class_name]
        rng = np.random.default_rng(cfg.master_seed)
        bursts = sample_fake_bursts(generator, cls, args.count, rng, args.sample_rate)
        write_bursts(args.path, bursts, args.sample_rate)
        print(f"wrote {args.count} synthetic bursts to {args.path}")
        return EXIT_OK

    if args.command == "features":
        alpha, snr = _cell_point(cfg, args)
        tree = SeedTree(cfg.master_seed).at(f"alpha={alpha}", f"snr={snr}", "rep=0")
        ds = dataset_for_cell(cfg, alpha, snr, tree, fold=0)
        pipe = FeaturePipeline(cfg.features, cfg.data.sample_rate)
        pipe.fit(ds.subset("train"))
        tensors = {b.burst_id: pipe.transform(b).values for b in ds.bursts}
        out.mkdir(parents=True, exist_ok=True)
        cache = out / "feature_cache.fddw"
        save_tensor_cache(cache, tensors, cfg.config_hash())
        save_tensors(out / "feature_stats.fddw", pipe.state_arrays())
        print(f"cached {len(tensors)} tensors to {cache}")
        return EXIT_OK

    if args.command in ("train", "evaluate"):
        alpha, snr = _cell_point(cfg, args)
        cdir = cell_dir_for(out, cfg, alpha, snr, args.rep, args.fold)
        marker = cdir / "record.json"
        if args.command == "evaluate" and marker.exists():
            record = RunRecord.load(marker)
        else:
            record = run_pipeline(cfg, alpha, snr, args.rep, args.fold, cdir)
        if record.status != "ok":
            print(f"run failed at stage {record.stage}: {record.error}", file=sys.stderr)
            return EXIT_RUN_FAILED
        metrics = record_metrics(record)
        print(json.dumps(metrics, indent=2, sort_keys=True))
        print(f"record: {marker}")
        return EXIT_OK

    if args.command == "grid":
        result = run_grid(cfg)
        print(f"{len(result.records)} runs, {result.failed} failed; summary {result.summary_path}")
        return EXIT_OK if result.ok else EXIT_PARTIAL

    if args.command == "ablate":
        rc = EXIT_OK
        records = []
        for setting in (True, False):
            toggles = dataclasses.replace(cfg.toggles, **{args.toggle: setting})
            variant = dataclasses.replace(cfg, toggles=toggles)
            result = run_grid(variant, write_heatmaps=False)
            if not result.ok:
                rc = EXIT_PARTIAL
            records.extend(result.records)
        report = ablation_report(records, args.toggle)
        out.mkdir(parents=True, exist_ok=True)
        report.pairs_to_csv(out / f"ablate_{args.toggle}_pairs.csv")
        report.summary_to_csv(out / f"ablate_{args.toggle}_summary.csv")
        print(f"ablation tables in {out}")
        return rc

    if args.command == "report":
        records = []
        for alpha, snr in cfg.grid_points():
            for rep in range(cfg.repetitions):
                for fold in cfg.fold_ids():
                    marker = cell_dir_for(out, cfg, alpha, snr, rep, fold) / "record.json"
                    if marker.exists():
                        records.append(RunRecord.load(marker))
        if not records:
            print("no cached run records found", file=sys.stderr)
            return EXIT_RUN_FAILED
        write_summary(out / "grid_summary.csv", cfg, records)
        print(f"aggregated {len(records)} records into {out / 'grid_summary.csv'}")
        return EXIT_OK

    raise ConfigError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
