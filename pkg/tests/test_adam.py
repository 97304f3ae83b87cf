"""Adam optimizer: bias-corrected steps, skip rules."""

import numpy as np
import pytest

from fddlab.autodiff import Adam, Tensor


def make_param(value=0.5):
    return Tensor(np.array([value]), requires_grad=True)


class TestAdam:
    def test_first_step_magnitude(self):
        # g=1 with fresh state: bias correction gives m_hat = v_hat = 1, so
        # the parameter moves by step_size/(1 + eps) ~ step_size
        p = make_param(0.5)
        opt = Adam([p], step_size=1e-3, decay1=0.9, decay2=0.999, eps=1e-8)
        opt.step([np.array([1.0])])
        assert abs((0.5 - p.data[0]) - 1e-3) < 1e-8

    def test_zero_gradient_leaves_parameters(self):
        p = make_param(0.25)
        opt = Adam([p], step_size=1e-3)
        opt.step([np.array([0.0])])
        assert p.data[0] == 0.25

    def test_two_identical_steps_same_magnitude(self):
        p = make_param(0.0)
        opt = Adam([p], step_size=1e-3, decay1=0.9, decay2=0.999)
        opt.step([np.array([1.0])])
        first = -p.data[0]
        opt.step([np.array([1.0])])
        second = -p.data[0] - first
        assert abs(second - first) < 1e-6

    def test_non_finite_gradient_skipped_and_counted(self):
        p, q = make_param(1.0), make_param(2.0)
        opt = Adam([p, q], step_size=1e-3)
        opt.step([np.array([np.nan]), np.array([1.0])])
        assert p.data[0] == 1.0  # skipped
        assert q.data[0] != 2.0  # applied
        assert opt.skipped == 1
        assert opt.step_count == 1

    def test_step_count_strictly_increases(self):
        p = make_param()
        opt = Adam([p])
        for expected in range(1, 4):
            opt.step([np.array([0.1])])
            assert opt.step_count == expected

    def test_shape_mismatch_rejected(self):
        opt = Adam([make_param()])
        with pytest.raises(ValueError, match="shape"):
            opt.step([np.zeros(3)])

    def test_bad_decay_rejected(self):
        with pytest.raises(ValueError):
            Adam([make_param()], decay2=1.0)

    def test_gradient_descends_quadratic(self):
        p = Tensor(np.array([3.0]), requires_grad=True)
        opt = Adam([p], step_size=0.1)
        for _ in range(200):
            opt.zero_grad()
            loss = (p * p).sum()
            loss.backward()
            opt.step()
        assert abs(p.data[0]) < 0.05
