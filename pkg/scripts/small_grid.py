#!/usr/bin/env python3
"""Run a small imbalance x noise grid end to end and print the summary.

Uses reduced burst length and network sizes so the whole grid (four cells,
generator training included) finishes in roughly ten minutes on a laptop;
pass --full-defaults to use the paper-scale module defaults instead (much
slower).
"""

import argparse
from pathlib import Path

from fddlab.dataset.synth import SynthParams
from fddlab.features import FeatureConfig
from fddlab.harness import ExperimentConfig, run_grid
from fddlab.harness.config import ClstmTrainConfig, DataConfig, GanTrainConfig, WelmConfig


def desk_config(out_dir: str, seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        data=DataConfig(
            n_total=600,
            split=(0.6, 0.1, 0.3),
            synth=SynthParams(
                sample_rate=3000.0,
                burst_len=192,
                resonance_hz=1000.0,
                ring_decay_s=0.004,
                noise_floor=0.08,
            ),
        ),
        features=FeatureConfig(n_scales=20, width=96, fmin_hz=130.0),
        gan=GanTrainConfig(
            epochs=50, critic_iters=2, step_size=1e-3,
            critic_channels=(6, 8, 10), critic_width=33, critic_hidden=8,
        ),
        clstm=ClstmTrainConfig(
            path1_filters=16, path1_width=7, lstm_hidden=16,
            path2_blocks=((8, 7, 3), (12, 5, 3), (16, 3, 2)), dense=32,
            epochs=8,
        ),
        welm=WelmConfig(hidden=150, reg_c=100.0),
        alphas=(4.0, 1.0),
        snrs=(10.0, 50.0),
        repetitions=1,
        out_dir=out_dir,
        master_seed=seed,
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/small_grid")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--full-defaults", action="store_true")
    args = parser.parse_args()

    if args.full_defaults:
        cfg = ExperimentConfig(out_dir=args.out, master_seed=args.seed)
    else:
        cfg = desk_config(args.out, args.seed)
    result = run_grid(cfg)
    print(f"{len(result.records)} runs, {result.failed} failed")
    print(Path(result.summary_path).read_text())


if __name__ == "__main__":
    main()
