"""
Tests for the autograd tensor core.
"""

import numpy as np
import pytest

from swgan_inpaint.core import tensor as T
from swgan_inpaint.core.gradcheck import check_gradients
from swgan_inpaint.core.tensor import Tensor, backward, default_dtype, no_grad
from swgan_inpaint.errors import GradientError, ShapeError
from swgan_inpaint.ml.losses import l1_feature_loss
from swgan_inpaint.nn.functional import conv2d


def test_elementwise_examples():
    """Zero annihilation and the additive identity."""
    assert np.array_equal(T.mul(Tensor([1.0, 0.0]), Tensor([5.0, 7.0])).data, [5.0, 0.0])
    x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
    assert np.array_equal(T.add(x, T.zeros_like(x)).data, x.data)


def test_broadcast_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as excinfo:
        T.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))
    assert "(2, 3)" in str(excinfo.value)
    assert "(4,)" in str(excinfo.value)


def test_matmul_examples():
    a = Tensor(np.random.default_rng(1).normal(size=(2, 3)))
    assert np.array_equal(T.matmul(Tensor(np.eye(2)), a).data, a.data)
    out = T.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
    assert np.array_equal(out.data, [[3.0], [7.0]])
    with pytest.raises(ShapeError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_reductions():
    assert T.reduce_mean(Tensor([2.0, 2.0, 2.0, 2.0])).item() == 2.0
    assert T.reduce_sum(Tensor(np.ones((3, 4)))).item() == 12.0
    assert T.reduce_sum(Tensor(np.ones((2, 3, 4))), axes=(0, 2)).shape == (3,)
    with pytest.raises(ShapeError):
        T.reduce_mean(Tensor(np.ones((2, 3))), axes=2)


def test_nonlinearities():
    assert T.tanh(Tensor(0.0)).item() == 0.0
    assert T.leaky_relu(Tensor(-1.0), 0.2).item() == pytest.approx(-0.2)
    assert T.square(Tensor(-3.0)).item() == 9.0


def test_abs_gradient_including_zero():
    x = Tensor([-2.0, 3.0, 0.0], requires_grad=True)
    backward(T.reduce_sum(T.abs_(x)))
    assert np.array_equal(x.grad, [-1.0, 1.0, 0.0])


def test_leaky_relu_gradient_at_zero_takes_slope():
    x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
    backward(T.reduce_sum(T.leaky_relu(x, 0.2)))
    assert np.allclose(x.grad, [0.2, 0.2, 1.0])


def test_backward_mean_gradient():
    x = Tensor(np.ones(4), requires_grad=True)
    backward(T.reduce_mean(x))
    assert np.array_equal(x.grad, [0.25, 0.25, 0.25, 0.25])


def test_backward_fan_out_accumulates():
    x = Tensor([1.5, -2.0], requires_grad=True)
    backward(T.reduce_sum(x + x))
    assert np.array_equal(x.grad, [2.0, 2.0])


def test_backward_twice_doubles_leaf_gradients():
    rng = np.random.default_rng(2)
    x = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
    w = rng.normal(size=(3, 3))
    backward(T.reduce_sum(T.tanh(x) * w))
    first = x.grad.copy()
    backward(T.reduce_sum(T.tanh(x) * w))
    assert np.array_equal(x.grad, 2 * first)
    x.zero_grad()
    assert x.grad is None


def test_non_scalar_backward_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(GradientError):
        backward(x * 2.0)


def test_broadcast_gradient_preserves_mass():
    rng = np.random.default_rng(3)
    a = Tensor(rng.normal(size=(1, 5)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    upstream = rng.normal(size=(4, 5))
    backward(T.reduce_sum((a + b) * upstream))
    assert a.grad.shape == (1, 5)
    assert a.grad.sum() == pytest.approx(upstream.sum())
    assert np.allclose(a.grad[0], upstream.sum(axis=0))


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.requires_grad
    assert y.is_leaf


def test_default_dtype_context():
    with default_dtype(np.float32):
        assert Tensor([1.0]).dtype == np.float32
    assert Tensor([1.0]).dtype == np.float64


def test_forward_is_pure():
    rng = np.random.default_rng(4)
    x, w = rng.normal(size=(1, 2, 6, 6)), rng.normal(size=(3, 2, 3, 3))
    first = conv2d(Tensor(x), Tensor(w), padding=2, dilation=2).data
    second = conv2d(Tensor(x), Tensor(w), padding=2, dilation=2).data
    assert np.array_equal(first, second)


def test_mul_and_matmul_match_finite_differences():
    rng = np.random.default_rng(5)
    mul = check_gradients("mul", T.mul, [rng.normal(size=(2, 2)), rng.normal(size=(2, 2))], tolerance=1e-6)
    matmul = check_gradients(
        "matmul", T.matmul, [rng.normal(size=(3, 4)), rng.normal(size=(4, 2))], tolerance=1e-6
    )
    mean = check_gradients("reduce_mean", T.reduce_mean, [rng.normal(size=(4, 5))], tolerance=1e-6)
    assert mul.passed and matmul.passed and mean.passed


def test_composite_l1_of_conv_matches_finite_differences():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(1, 2, 8, 8))
    w = rng.normal(size=(3, 2, 3, 3))
    with no_grad():
        base = conv2d(Tensor(x), Tensor(w), padding=2, dilation=2).data
    # keep every residual well away from the |.| kink
    target = base + rng.uniform(0.1, 1.0, size=base.shape) * rng.choice([-1.0, 1.0], size=base.shape)

    def objective(inp, weight):
        return l1_feature_loss(conv2d(inp, weight, padding=2, dilation=2), Tensor(target))

    result = check_gradients("l1_conv", objective, [x, w])
    assert result.passed, result
