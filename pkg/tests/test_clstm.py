"""Dual-path extractor: shape contracts, training sanity, determinism."""

import numpy as np
import pytest

from fddlab.autodiff import Tensor, no_grad
from fddlab.clstm import ClstmConfig, ClstmModel, extract_features, train_clstm

TINY = dict(
    in_channels=4,
    width=16,
    n_classes=2,
    path1_filters=4,
    path1_width=3,
    lstm_hidden=4,
    path2_blocks=((4, 3, 2), (4, 3, 2)),
    dense=8,
    epochs=25,
    batch_size=8,
    step_size=1e-2,
    seed=0,
)


def tiny_config(**overrides):
    cfg = dict(TINY)
    cfg.update(overrides)
    return ClstmConfig(**cfg)


def separable_data(n_per_class=20, seed=0):
    """Class 0 lights up channel 0, class 1 lights up channel 2."""
    rng = np.random.default_rng(seed)
    tensors, labels = [], []
    for cls, channel in ((0, 0), (1, 2)):
        for _ in range(n_per_class):
            t = 0.1 * rng.normal(size=(4, 16))
            t[channel] += 1.0
            tensors.append(t)
            labels.append(cls)
    return np.stack(tensors), np.array(labels)


class TestShapes:
    def test_feature_dim_is_concatenation(self):
        cfg = tiny_config()
        assert cfg.feature_dim == cfg.lstm_hidden + cfg.dense
        cfg2 = tiny_config(lstm_hidden=32, dense=96)
        assert cfg2.feature_dim == 128

    def test_paper_scale_walkthrough(self):
        cfg = ClstmConfig(
            in_channels=33, width=256,
            path2_blocks=((16, 9, 4), (32, 9, 4), (64, 9, 4)),
        )
        assert cfg.path2_lengths() == [(248, 62), (54, 13), (5, 1)]
        assert cfg.path2_flat_dim() == 64

    def test_invalid_pool_rejected(self):
        with pytest.raises(ValueError, match="pool"):
            ClstmConfig(in_channels=4, width=16, path2_blocks=((4, 3, 2), (4, 5, 16)))

    def test_forward_output_shape(self):
        cfg = tiny_config()
        model = ClstmModel(cfg, np.random.default_rng(0))
        out = model.forward(Tensor(np.random.default_rng(1).normal(size=(3, 4, 16))), training=True)
        assert out.shape == (3, cfg.feature_dim)

    def test_wrong_input_shape_rejected(self):
        model = ClstmModel(tiny_config(), np.random.default_rng(0))
        with pytest.raises(ValueError, match="expected input"):
            model.forward(Tensor(np.zeros((2, 3, 16))), training=True)


class TestTraining:
    def test_separable_toy_reaches_perfect_accuracy(self):
        tensors, labels = separable_data()
        model, curves = train_clstm(tensors, labels, tiny_config(epochs=50))
        assert model.frozen
        assert curves.train_acc[-1] == 1.0

    def test_loss_does_not_diverge_across_seeds(self):
        tensors, labels = separable_data(n_per_class=12)
        good = 0
        for seed in range(10):
            _, curves = train_clstm(tensors, labels, tiny_config(epochs=8, seed=seed))
            if curves.train_loss[-1] <= curves.train_loss[0]:
                good += 1
        assert good >= 9

    def test_same_seed_identical_parameters(self):
        tensors, labels = separable_data(n_per_class=8)
        m1, _ = train_clstm(tensors, labels, tiny_config(epochs=3))
        m2, _ = train_clstm(tensors, labels, tiny_config(epochs=3))
        s1, s2 = m1.state_dict(), m2.state_dict()
        assert set(s1) == set(s2)
        for name in s1:
            assert np.array_equal(s1[name], s2[name]), name

    def test_validation_curve_recorded(self):
        tensors, labels = separable_data(n_per_class=8)
        _, curves = train_clstm(
            tensors, labels, tiny_config(epochs=3), val_tensors=tensors[:6], val_labels=labels[:6]
        )
        assert len(curves.val_loss) == 3


class TestExtraction:
    def frozen_model(self):
        tensors, labels = separable_data(n_per_class=8)
        model, _ = train_clstm(tensors, labels, tiny_config(epochs=2))
        return model, tensors

    def test_requires_frozen(self):
        model = ClstmModel(tiny_config(), np.random.default_rng(0))
        with pytest.raises(RuntimeError, match="frozen"):
            extract_features(model, np.zeros((1, 4, 16)))

    def test_head_discarded_after_freeze(self):
        model, _ = self.frozen_model()
        assert model.head_w is None
        with pytest.raises(RuntimeError, match="discarded"):
            model.logits(Tensor(np.zeros((1, model.config.feature_dim))))

    def test_deterministic_and_batch_invariant(self):
        model, tensors = self.frozen_model()
        feats_full = extract_features(model, tensors[:12], batch_size=12)
        feats_again = extract_features(model, tensors[:12], batch_size=12)
        assert np.array_equal(feats_full, feats_again)
        feats_single = extract_features(model, tensors[:12], batch_size=1)
        assert np.max(np.abs(feats_full - feats_single)) < 1e-10

    def test_identical_rows_for_identical_tensors(self):
        model, tensors = self.frozen_model()
        batch = np.stack([tensors[0], tensors[0], tensors[3]])
        feats = extract_features(model, batch)
        assert np.array_equal(feats[0], feats[1])

    def test_zero_tensor_finite_features(self):
        model, _ = self.frozen_model()
        feats = extract_features(model, np.zeros((2, 4, 16)))
        assert np.all(np.isfinite(feats))

    def test_checkpoint_round_trip(self, tmp_path):
        from fddlab.autodiff import load_tensors, save_tensors

        model, tensors = self.frozen_model()
        path = tmp_path / "clstm.fddw"
        save_tensors(path, model.state_dict())
        clone = ClstmModel(model.config, np.random.default_rng(99))
        clone.load_state_dict(load_tensors(path))
        assert clone.frozen
        a = extract_features(model, tensors[:4])
        b = extract_features(clone, tensors[:4])
        assert np.array_equal(a, b)
