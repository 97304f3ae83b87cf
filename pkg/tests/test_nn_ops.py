"""Network building blocks: shapes, worked examples, gradient checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fddlab.autodiff import (
    BatchNormState,
    ShapeError,
    Tensor,
    affine,
    backward,
    batchnorm,
    conv1d,
    init_lstm,
    lstm_seq,
    lstm_seq_composed,
    lstm_step,
    maxpool1d,
    tsum,
)
from fddlab.autodiff.nn import LstmWeights
from helpers import gradcheck, naive_conv1d, naive_matmul


def rand(shape, seed, low=-1.0, high=1.0):
    return np.random.default_rng(seed).uniform(low, high, size=shape)


class TestAffine:
    def test_identity_case(self):
        out = affine(Tensor([[1.0, 2.0]]), Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([0.0, 0.0]))
        np.testing.assert_array_equal(out.data, [[1.0, 2.0]])

    def test_hand_computed(self):
        out = affine(Tensor([[1.0, 1.0]]), Tensor([[2.0], [3.0]]), Tensor([1.0]))
        np.testing.assert_array_equal(out.data, [[6.0]])

    def test_matches_naive_matmul(self):
        x = rand((3, 4), 0)
        w = rand((4, 2), 1)
        b = rand(2, 2)
        out = affine(Tensor(x), Tensor(w), Tensor(b))
        expected = naive_matmul(x, w) + b
        assert np.max(np.abs(out.data - expected)) < 1e-12

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError, match="does not match"):
            affine(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))), Tensor(np.ones(2)))
        with pytest.raises(ShapeError, match="bias"):
            affine(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))), Tensor(np.ones(3)))

    def test_gradcheck(self):
        gradcheck(
            lambda x, w, b: tsum(affine(x, w, b) ** 2.0),
            [rand((3, 4), 5), rand((4, 2), 6), rand(2, 7)],
        )


class TestConv1d:
    def test_output_length_800_64(self):
        out = conv1d(Tensor(rand((1, 800), 0)), Tensor(rand((1, 1, 64), 1)), Tensor(np.zeros(1)))
        assert out.shape == (1, 737)

    def test_width_one_identity_filter(self):
        out = conv1d(Tensor([[1.0, 2.0, 3.0]]), Tensor([[[1.0]]]), Tensor([0.0]))
        np.testing.assert_array_equal(out.data, [[1.0, 2.0, 3.0]])

    def test_matches_sliding_window_oracle(self):
        x = rand((3, 20), 2)
        f = rand((4, 3, 5), 3)
        b = rand(4, 4)
        out = conv1d(Tensor(x), Tensor(f), Tensor(b))
        assert np.max(np.abs(out.data - naive_conv1d(x, f, b))) < 1e-12

    def test_filter_wider_than_signal_rejected(self):
        with pytest.raises(ShapeError, match="empty"):
            conv1d(Tensor(rand((1, 4), 0)), Tensor(rand((1, 1, 5), 1)), Tensor(np.zeros(1)))

    @given(length=st.integers(1, 40), width=st.integers(1, 40))
    @settings(max_examples=40, deadline=None)
    def test_length_closed_form(self, length, width):
        if width > length:
            return
        out = conv1d(
            Tensor(np.zeros((1, length))), Tensor(np.zeros((2, 1, width))), Tensor(np.zeros(2))
        )
        assert out.shape == (2, length - width + 1)

    def test_gradcheck(self):
        gradcheck(
            lambda x, f, b: tsum(conv1d(x, f, b, "tanh") ** 2.0),
            [rand((2, 2, 9), 8), rand((3, 2, 4), 9), rand(3, 10)],
        )


class TestMaxPool:
    def test_by_definition(self):
        out = maxpool1d(Tensor([[1.0, 3.0, 2.0, 5.0]]), 2)
        np.testing.assert_array_equal(out.data, [[3.0, 5.0]])

    def test_length_736_pool_4(self):
        out = maxpool1d(Tensor(rand((1, 736), 0)), 4)
        assert out.shape == (1, 184)

    def test_gradient_routes_to_argmax(self):
        x = Tensor(np.array([[[1.0, 3.0, 2.0, 5.0]]]), requires_grad=True)
        (g,) = backward(tsum(maxpool1d(x, 2)), [x])
        np.testing.assert_array_equal(g.data.ravel(), [0.0, 1.0, 0.0, 1.0])

    def test_tie_routes_to_first_index(self):
        x = Tensor(np.array([[[2.0, 2.0]]]), requires_grad=True)
        (g,) = backward(tsum(maxpool1d(x, 2)), [x])
        np.testing.assert_array_equal(g.data.ravel(), [1.0, 0.0])

    def test_pool_longer_than_signal_rejected(self):
        with pytest.raises(ShapeError, match="empty"):
            maxpool1d(Tensor(np.zeros((1, 3))), 4)

    @given(length=st.integers(1, 60), pool=st.integers(1, 60))
    @settings(max_examples=40, deadline=None)
    def test_length_closed_form(self, length, pool):
        if pool > length:
            return
        out = maxpool1d(Tensor(np.zeros((1, length))), pool)
        assert out.shape == (1, (length - pool) // pool + 1)

    def test_gradcheck(self):
        x = rand((2, 3, 10), 11)
        x += np.arange(x.size).reshape(x.shape) * 1e-3  # break ties away from fd step
        gradcheck(lambda t: tsum(maxpool1d(t, 3) ** 2.0), [x])


class TestBatchNorm:
    def test_constant_column_is_zeroed(self):
        state = BatchNormState()
        x = Tensor(np.full((4, 2), 3.0))
        out = batchnorm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)), state)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_unit_variance_then_scale_shift(self):
        state = BatchNormState()
        x = Tensor(np.array([[-1.0], [1.0]]))
        out = batchnorm(x, Tensor([2.0]), Tensor([3.0]), state, eps=1e-14)
        np.testing.assert_allclose(out.data.ravel(), [1.0, 5.0], atol=1e-6)

    def test_normalized_moments(self):
        state = BatchNormState()
        x = rand((64, 5), 12, low=-2.0, high=2.0)
        out = batchnorm(Tensor(x), Tensor(np.ones(5)), Tensor(np.zeros(5)), state, eps=1e-8)
        assert np.max(np.abs(out.data.mean(axis=0))) < 1e-10
        assert np.max(np.abs(out.data.var(axis=0) - 1.0)) < 1e-6

    def test_eval_uses_running_statistics(self):
        state = BatchNormState(momentum=1.0)
        train_x = rand((32, 3), 13)
        batchnorm(Tensor(train_x), Tensor(np.ones(3)), Tensor(np.zeros(3)), state)
        x = rand((4, 3), 14)
        out = batchnorm(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)), state, training=False)
        expected = (x - train_x.mean(axis=0)) / np.sqrt(train_x.var(axis=0) + 1e-8)
        np.testing.assert_allclose(out.data, expected, atol=1e-10)

    def test_eval_without_stats_rejected(self):
        with pytest.raises(ValueError, match="running statistics"):
            batchnorm(
                Tensor(np.ones((2, 2))), Tensor(np.ones(2)), Tensor(np.zeros(2)),
                BatchNormState(), training=False,
            )

    def test_single_sample_batch_warns(self):
        with pytest.warns(RuntimeWarning, match="degenerate"):
            batchnorm(
                Tensor(np.ones((1, 2))), Tensor(np.ones(2)), Tensor(np.zeros(2)),
                BatchNormState(),
            )

    def test_gradcheck(self):
        def run(x, scale, shift):
            return tsum(batchnorm(x, scale, shift, BatchNormState(), eps=1e-3) ** 2.0)

        gradcheck(run, [rand((6, 3), 15), rand(3, 16), rand(3, 17)])


class ScalarLstm:
    """Independent scalar-by-scalar evaluation of one LSTM cell."""

    @staticmethod
    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    @classmethod
    def step(cls, x, h, c, wx, wh, b, hidden):
        n = x.shape[0]
        h_new = np.zeros((n, hidden))
        c_new = np.zeros((n, hidden))
        for row in range(n):
            z = np.array(
                [
                    sum(x[row, i] * wx[i, j] for i in range(x.shape[1]))
                    + sum(h[row, i] * wh[i, j] for i in range(hidden))
                    + b[j]
                    for j in range(4 * hidden)
                ]
            )
            for j in range(hidden):
                i_g = cls.sig(z[j])
                f_g = cls.sig(z[hidden + j])
                g_g = np.tanh(z[2 * hidden + j])
                o_g = cls.sig(z[3 * hidden + j])
                c_new[row, j] = f_g * c[row, j] + i_g * g_g
                h_new[row, j] = o_g * np.tanh(c_new[row, j])
        return h_new, c_new


class TestLstm:
    def test_zero_weights_fixed_point(self):
        weights = LstmWeights(
            wx=Tensor(np.zeros((3, 8))), wh=Tensor(np.zeros((2, 8))), bias=Tensor(np.zeros(8))
        )
        h, c = lstm_step(Tensor(np.ones((4, 3))), Tensor(np.zeros((4, 2))), Tensor(np.zeros((4, 2))), weights)
        np.testing.assert_allclose(c.data, 0.0)
        np.testing.assert_allclose(h.data, 0.0)

    def test_gate_saturation_preserves_cell(self):
        hidden = 2
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1e3  # forget gate -> 1
        bias[:hidden] = -1e3  # input gate -> 0
        weights = LstmWeights(
            wx=Tensor(np.zeros((3, 4 * hidden))),
            wh=Tensor(np.zeros((hidden, 4 * hidden))),
            bias=Tensor(bias),
        )
        c0 = np.array([[0.3, -0.7]])
        _, c1 = lstm_step(Tensor(np.ones((1, 3))), Tensor(np.zeros((1, hidden))), Tensor(c0), weights)
        np.testing.assert_allclose(c1.data, c0, atol=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(21)
        hidden, n_in, n = 3, 4, 2
        weights = init_lstm(rng, n_in, hidden)
        x = rng.uniform(-1, 1, (n, n_in))
        h0 = rng.uniform(-1, 1, (n, hidden))
        c0 = rng.uniform(-1, 1, (n, hidden))
        h, c = lstm_step(Tensor(x), Tensor(h0), Tensor(c0), weights)
        h_ref, c_ref = ScalarLstm.step(
            x, h0, c0, weights.wx.data, weights.wh.data, weights.bias.data, hidden
        )
        assert np.max(np.abs(h.data - h_ref)) < 1e-12
        assert np.max(np.abs(c.data - c_ref)) < 1e-12

    def test_fused_sequence_matches_composed(self):
        rng = np.random.default_rng(22)
        weights = init_lstm(rng, 3, 5)
        x = rng.uniform(-1, 1, (4, 3, 7))
        fused = lstm_seq(Tensor(x), weights)
        composed = lstm_seq_composed(Tensor(x), weights)
        assert np.max(np.abs(fused.data - composed.data)) < 1e-14

    def test_fused_gradients_match_composed(self):
        rng = np.random.default_rng(23)
        weights = init_lstm(rng, 2, 3)
        x = rng.uniform(-1, 1, (2, 2, 6))
        params = [weights.wx, weights.wh, weights.bias]

        xt1 = Tensor(x, requires_grad=True)
        g_fused = backward(tsum(lstm_seq(xt1, weights) ** 2.0), [xt1] + params)
        xt2 = Tensor(x, requires_grad=True)
        g_comp = backward(tsum(lstm_seq_composed(xt2, weights) ** 2.0), [xt2] + params)
        for a, b in zip(g_fused, g_comp):
            assert np.max(np.abs(a.data - b.data)) < 1e-11

    def test_fused_refuses_higher_order(self):
        weights = init_lstm(np.random.default_rng(0), 2, 2)
        x = Tensor(np.ones((1, 2, 3)), requires_grad=True)
        loss = tsum(lstm_seq(x, weights))
        with pytest.raises(RuntimeError, match="first-order"):
            backward(loss, [x], create_graph=True)

    def test_step_gradcheck(self):
        rng = np.random.default_rng(24)
        wx = rng.uniform(-1, 1, (3, 8))
        wh = rng.uniform(-1, 1, (2, 8))
        b = rng.uniform(-1, 1, 8)
        x = rng.uniform(-1, 1, (2, 3))
        h0 = rng.uniform(-1, 1, (2, 2))
        c0 = rng.uniform(-1, 1, (2, 2))

        def run(tx, th, tc, twx, twh, tb):
            h, c = lstm_step(tx, th, tc, LstmWeights(twx, twh, tb))
            return tsum(h ** 2.0) + tsum(c ** 2.0)

        gradcheck(run, [x, h0, c0, wx, wh, b])


def test_conv_into_lstm_chain_gradcheck():
    """Gradients flow correctly through the conv -> LSTM composition."""
    rng = np.random.default_rng(42)
    x = rng.uniform(-1, 1, (2, 2, 10))
    f = rng.uniform(-1, 1, (3, 2, 3))
    b = rng.uniform(-1, 1, 3)
    wx = rng.uniform(-1, 1, (3, 8))
    wh = rng.uniform(-1, 1, (2, 8))
    bias = rng.uniform(-1, 1, 8)

    def chain(tx, tf, tb, twx, twh, tbias):
        maps = conv1d(tx, tf, tb, activation="relu")
        hidden = lstm_seq(maps, LstmWeights(twx, twh, tbias))
        return tsum(hidden ** 2.0)

    gradcheck(chain, [x, f, b, wx, wh, bias])
