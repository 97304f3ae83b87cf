import numpy as np
import pytest

from fddlab.dataset.synth import SynthParams
from fddlab.features import FeatureConfig
from fddlab.harness.config import (
    ClstmTrainConfig,
    DataConfig,
    ExperimentConfig,
    GanTrainConfig,
    Toggles,
    WelmConfig,
)


def tiny_experiment(**overrides) -> ExperimentConfig:
    """Smallest configuration that still runs every pipeline stage."""
    base = dict(
        data=DataConfig(
            n_total=240,
            synth=SynthParams(
                sample_rate=4000.0,
                burst_len=160,
                resonance_hz=1200.0,
                ring_decay_s=0.004,
            ),
        ),
        features=FeatureConfig(n_scales=12, width=64, fmin_hz=40.0),
        gan=GanTrainConfig(
            epochs=4,
            critic_iters=2,
            batch_size=8,
            critic_channels=(4, 6),
            critic_width=7,
            critic_hidden=8,
        ),
        clstm=ClstmTrainConfig(
            path1_filters=8,
            path1_width=5,
            lstm_hidden=8,
            path2_blocks=((6, 5, 3), (8, 5, 3)),
            dense=16,
            epochs=2,
            batch_size=16,
        ),
        welm=WelmConfig(hidden=40),
        alphas=(4.0,),
        snrs=(20.0,),
        repetitions=1,
        master_seed=7,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture
def tiny_cfg():
    return tiny_experiment()


@pytest.fixture(autouse=True)
def _stable_numpy_printing():
    with np.printoptions(precision=8):
        yield
