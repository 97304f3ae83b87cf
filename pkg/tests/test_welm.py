"""Closed-form ELM algebra, weighting scheme, statistical behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fddlab.welm import (
    ElmModel,
    build_hidden_matrix,
    class_weights,
    fit_welm,
    model_arrays,
    model_from_arrays,
    one_hot,
    predict,
    solve_beta,
)


def random_instance(seed, n=30, p=4, k=12, n_classes=3):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, p))
    labels = [f"c{rng.integers(n_classes)}" for _ in range(n)]
    classes = sorted(set(labels))
    return x, labels, classes


class TestHiddenMatrix:
    def test_identity_embedding(self):
        x = np.random.default_rng(0).uniform(-1, 1, (5, 3))
        model = ElmModel(
            hidden_w=np.eye(3), hidden_b=np.zeros(3), activation="identity",
            reg_c=1.0, weighted=False, classes=["a"], seed=0,
        )
        np.testing.assert_array_equal(build_hidden_matrix(x, model), x)

    def test_zero_weights_sigmoid_half(self):
        model = ElmModel(
            hidden_w=np.zeros((4, 6)), hidden_b=np.zeros(6), activation="sigmoid",
            reg_c=1.0, weighted=False, classes=["a"], seed=0,
        )
        h = build_hidden_matrix(np.random.default_rng(1).normal(size=(3, 4)), model)
        np.testing.assert_allclose(h, 0.5)

    def test_matches_scalar_evaluation(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, (4, 3))
        model = ElmModel(
            hidden_w=rng.uniform(-1, 1, (3, 5)), hidden_b=rng.uniform(-1, 1, 5),
            activation="sigmoid", reg_c=1.0, weighted=False, classes=["a"], seed=0,
        )
        h = build_hidden_matrix(x, model)
        for i in range(4):
            for j in range(5):
                z = sum(x[i, f] * model.hidden_w[f, j] for f in range(3)) + model.hidden_b[j]
                assert abs(h[i, j] - 1.0 / (1.0 + np.exp(-z))) < 1e-12


class TestClassWeights:
    def test_adopted_scheme(self):
        w = class_weights(["A", "A", "A", "B"])
        np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 3, 1.0])

    def test_balanced_labels_equal_weights(self):
        w = class_weights(["A", "B", "A", "B"])
        assert len(set(w.tolist())) == 1

    @given(n_maj=st.integers(2, 60), n_min=st.integers(1, 30))
    @settings(max_examples=30, deadline=None)
    def test_ratio_matches_count_ratio(self, n_maj, n_min):
        w = class_weights(["maj"] * n_maj + ["min"] * n_min)
        assert w[-1] / w[0] == pytest.approx(n_maj / n_min)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            class_weights([])


class TestSolveBeta:
    def test_interpolation_at_large_c(self):
        rng = np.random.default_rng(3)
        h = rng.uniform(0.1, 1.0, (20, 20)) + np.eye(20)  # comfortably invertible
        y = one_hot([f"c{i % 4}" for i in range(20)], ["c0", "c1", "c2", "c3"])
        beta = solve_beta(h, y, reg_c=1e12)
        assert np.max(np.abs(h @ beta - y)) < 1e-6

    def test_branch_equivalence_square_system(self):
        rng = np.random.default_rng(4)
        h = rng.uniform(-1, 1, (20, 20))
        y = rng.uniform(-1, 1, (20, 3))
        lam = 1.0 / 100.0
        primal = np.linalg.solve(h.T @ h + lam * np.eye(20), h.T @ y)
        dual = h.T @ np.linalg.solve(h @ h.T + lam * np.eye(20), y)
        assert np.max(np.abs(primal - dual)) < 1e-8
        assert np.max(np.abs(solve_beta(h, y, 100.0) - primal)) < 1e-10

    def test_identity_weights_degenerate_to_unweighted(self):
        rng = np.random.default_rng(5)
        for n, k in ((25, 10), (10, 25)):  # both branch shapes
            h = rng.uniform(-1, 1, (n, k))
            y = rng.uniform(-1, 1, (n, 2))
            plain = solve_beta(h, y, 50.0)
            weighted = solve_beta(h, y, 50.0, weights=np.ones(n))
            assert np.max(np.abs(plain - weighted)) < 1e-10

    def test_weighted_normal_equations_residual(self):
        rng = np.random.default_rng(6)
        n, k = 40, 15
        h = rng.uniform(-1, 1, (n, k))
        y = one_hot([f"c{i % 3}" for i in range(n)], ["c0", "c1", "c2"])
        w = rng.uniform(0.5, 2.0, n)
        c = 100.0
        beta = solve_beta(h, y, c, weights=w)
        residual = (np.eye(k) / c + h.T @ (w[:, None] * h)) @ beta - h.T @ (w[:, None] * y)
        assert np.max(np.abs(residual)) < 1e-8

    def test_dual_branch_weighted_residual(self):
        rng = np.random.default_rng(7)
        n, k = 12, 30
        h = rng.uniform(-1, 1, (n, k))
        y = one_hot([f"c{i % 2}" for i in range(n)], ["c0", "c1"])
        w = rng.uniform(0.5, 2.0, n)
        c = 100.0
        beta = solve_beta(h, y, c, weights=w)
        # beta = H^T a where (I/C + W H H^T) a = W y
        a = np.linalg.solve(np.eye(n) / c + w[:, None] * (h @ h.T), w[:, None] * y)
        assert np.max(np.abs(beta - h.T @ a)) < 1e-10

    def test_monotone_residual_in_c(self):
        rng = np.random.default_rng(8)
        h = rng.uniform(-1, 1, (30, 10))
        y = one_hot([f"c{i % 3}" for i in range(30)], ["c0", "c1", "c2"])
        residuals = []
        for c in (1.0, 1e2, 1e4, 1e6):
            beta = solve_beta(h, y, c)
            residuals.append(float(np.linalg.norm(h @ beta - y)))
        assert all(a >= b - 1e-12 for a, b in zip(residuals, residuals[1:]))

    def test_weight_scaling_with_matching_c_rescaling(self):
        rng = np.random.default_rng(9)
        h = rng.uniform(-1, 1, (25, 8))
        labels = [f"c{i % 2}" for i in range(25)]
        y = one_hot(labels, ["c0", "c1"])
        w = class_weights(labels)
        scale = 3.7
        beta_a = solve_beta(h, y, 100.0, weights=w)
        beta_b = solve_beta(h, y, 100.0 / scale, weights=scale * w)
        assert np.max(np.abs(beta_a - beta_b)) < 1e-10

    def test_invalid_inputs(self):
        h = np.ones((4, 2))
        y = np.ones((4, 1))
        with pytest.raises(ValueError, match="positive"):
            solve_beta(h, y, 0.0)
        with pytest.raises(ValueError, match="weights"):
            solve_beta(h, y, 1.0, weights=np.array([1.0, -1.0, 1.0, 1.0]))


class TestFitPredict:
    def test_same_seed_identical_model(self):
        x, labels, classes = random_instance(1)
        a = fit_welm(x, labels, hidden=20, seed=5, classes=classes)
        b = fit_welm(x, labels, hidden=20, seed=5, classes=classes)
        assert np.array_equal(a.hidden_w, b.hidden_w)
        assert np.array_equal(a.beta, b.beta)

    def test_interpolation_implies_perfect_training_accuracy(self):
        rng = np.random.default_rng(10)
        x = rng.uniform(-1, 1, (20, 20))
        labels = [f"c{i % 4}" for i in range(20)]
        model = fit_welm(x, labels, hidden=20, reg_c=1e10, seed=3, activation="identity")
        preds, _ = predict(model, x)
        assert preds == labels

    def test_xor_statistic(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        labels = ["a", "b", "b", "a"]
        wins = sum(
            predict(fit_welm(x, labels, hidden=20, reg_c=1e6, seed=s), x)[0] == labels
            for s in range(100)
        )
        assert wins >= 95

    def test_row_permutation_invariance(self):
        x, labels, classes = random_instance(11)
        model = fit_welm(x, labels, hidden=15, seed=7, classes=classes)
        perm = np.random.default_rng(12).permutation(len(labels))
        shuffled = fit_welm(x[perm], [labels[i] for i in perm], hidden=15, seed=7, classes=classes)
        assert np.max(np.abs(model.beta - shuffled.beta)) < 1e-10

    def test_weighted_lifts_minority_recall(self):
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = np.vstack([rng.normal(0.0, 1.0, (500, 2)), rng.normal(1.6, 1.0, (10, 2))])
            labels = ["maj"] * 500 + ["min"] * 10
            probe = rng.normal(1.6, 1.0, (200, 2))
            recalls = {}
            for weighted in (False, True):
                model = fit_welm(x, labels, hidden=60, reg_c=10.0, weighted=weighted, seed=seed)
                preds, _ = predict(model, probe)
                recalls[weighted] = np.mean([p == "min" for p in preds])
            wins += recalls[True] >= recalls[False]
        assert wins >= 16

    def test_single_hidden_node_still_solves(self):
        x, labels, classes = random_instance(13)
        model = fit_welm(x, labels, hidden=1, seed=0, classes=classes)
        preds, scores = predict(model, x)
        assert len(preds) == len(labels)
        assert scores.shape == (len(labels), len(classes))

    def test_tie_break_first_index(self):
        model = ElmModel(
            hidden_w=np.zeros((2, 3)), hidden_b=np.zeros(3), activation="identity",
            reg_c=1.0, weighted=False, classes=["a", "b"], seed=0,
            beta=np.zeros((3, 2)),
        )
        preds, _ = predict(model, np.ones((2, 2)))
        assert preds == ["a", "a"]

    def test_unsolved_model_rejected(self):
        model = ElmModel(
            hidden_w=np.ones((2, 3)), hidden_b=np.zeros(3), activation="sigmoid",
            reg_c=1.0, weighted=False, classes=["a"], seed=0,
        )
        with pytest.raises(RuntimeError, match="no solved"):
            predict(model, np.ones((1, 2)))

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError, match="cover"):
            fit_welm(np.ones((2, 2)), ["a", "b"], classes=["a", "b", "c"])

    def test_persistence_round_trip(self, tmp_path):
        from fddlab.autodiff import load_tensors, save_tensors

        x, labels, classes = random_instance(14)
        model = fit_welm(x, labels, hidden=10, reg_c=42.0, weighted=True, seed=9, classes=classes)
        path = tmp_path / "elm.fddw"
        save_tensors(path, model_arrays(model))
        restored = model_from_arrays(load_tensors(path), classes)
        assert restored.reg_c == 42.0
        assert restored.weighted is True
        p1, s1 = predict(model, x)
        p2, s2 = predict(restored, x)
        assert p1 == p2
        assert np.array_equal(s1, s2)
