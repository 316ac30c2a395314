"""Network forward/backward checks.

The small fixtures are worked out by hand. NTK-parameterized net with
W0 = [[1,-1],[2,0]], W1 = [[1,3]] (both layers scaled 1/sqrt(2)) at
x = (1,2):

  pre0 = (1*1 - 1*2, 2*1 + 0) / sqrt2 = (-1/sqrt2, sqrt2)
  h    = (0, sqrt2)                      (ReLU)
  f    = (1*0 + 3*sqrt2) / sqrt2 = 3

  df/dW1 = h / sqrt2 = (0, 1)
  df/dpre0 = (W1 / sqrt2) * mask = (0, 3/sqrt2)
  df/dW0 = outer(df/dpre0, x / sqrt2) rows -> (0, 0) and (3/2, 3)

so the flat Jacobian is [0, 0, 1.5, 3, 0, 1].
"""

import numpy as np
import pytest

from crcal import (
    NetworkSpec,
    ParamVector,
    accuracy,
    finite_diff_jacobian,
    forward,
    forward_batch,
    grad_mse,
    init_network,
    jacobian,
    jacobian_batch,
    mse_loss,
    one_hot,
    predict_classes,
    softmax,
    vjp_batch,
)


def tiny_spec():
    return NetworkSpec(input_dim=2, hidden_widths=(2,), num_classes=1)


def tiny_params(spec):
    return ParamVector(np.array([1.0, -1.0, 2.0, 0.0, 1.0, 3.0]), spec.layer_offsets)


class TestForward:
    def test_hand_computed_value(self):
        spec = tiny_spec()
        out = forward(tiny_params(spec), spec, np.array([1.0, 2.0]))
        assert out.shape == (1,)
        assert out[0] == pytest.approx(3.0, abs=1e-14)

    def test_hand_computed_with_bias(self):
        # W0=[[2]], b0=[-1]; W1=[[3]], b1=[0.5]; fan_in 1 so scale is 1
        spec = NetworkSpec(1, (1,), 1, use_bias=True)
        params = ParamVector(np.array([2.0, -1.0, 3.0, 0.5]), spec.layer_offsets)
        assert forward(params, spec, np.array([2.0]))[0] == pytest.approx(9.5, abs=1e-14)

    def test_relu_kills_negative_preactivation(self):
        spec = NetworkSpec(1, (1,), 1, ntk_parameterization=False)
        params = ParamVector(np.array([-1.0, 1.0]), spec.layer_offsets)
        assert forward(params, spec, np.array([1.0]))[0] == 0.0

    def test_linear_model_is_exact_matmul(self):
        spec = NetworkSpec(3, (), 2, ntk_parameterization=False)
        W = np.arange(6, dtype=np.float64).reshape(2, 3)
        params = ParamVector(W.ravel(), spec.layer_offsets)
        X = np.random.default_rng(0).standard_normal((5, 3))
        assert np.allclose(forward_batch(params, spec, X), X @ W.T, atol=1e-15)

    def test_ntk_scaling_divides_by_sqrt_fan_in(self):
        spec_ntk = NetworkSpec(4, (), 1)
        spec_std = NetworkSpec(4, (), 1, ntk_parameterization=False)
        params = ParamVector(np.ones(4), spec_ntk.layer_offsets)
        x = np.ones(4)
        assert forward(params, spec_ntk, x)[0] == pytest.approx(4.0 / 2.0, abs=1e-14)
        assert forward(params, spec_std, x)[0] == pytest.approx(4.0, abs=1e-14)

    def test_batch_matches_single(self):
        spec = NetworkSpec(3, (8, 5), 4, use_bias=True)
        params = init_network(spec, 0)
        X = np.random.default_rng(1).standard_normal((6, 3))
        batch = forward_batch(params, spec, X)
        for i in range(6):
            assert np.allclose(batch[i], forward(params, spec, X[i]), atol=1e-14)

    def test_input_shape_validation(self):
        spec = tiny_spec()
        with pytest.raises(ValueError):
            forward_batch(tiny_params(spec), spec, np.ones((4, 3)))
        with pytest.raises(ValueError):
            forward(tiny_params(spec), spec, np.ones((2, 2)))


class TestJacobian:
    def test_hand_computed_rows(self):
        spec = tiny_spec()
        jac = jacobian(tiny_params(spec), spec, np.array([1.0, 2.0]))
        assert jac.values.shape == (1, 6)
        assert np.allclose(jac.values[0], [0.0, 0.0, 1.5, 3.0, 0.0, 1.0], atol=1e-14)

    def test_hand_computed_with_bias(self):
        spec = NetworkSpec(1, (1,), 1, use_bias=True)
        params = ParamVector(np.array([2.0, -1.0, 3.0, 0.5]), spec.layer_offsets)
        jac = jacobian(params, spec, np.array([2.0]))
        assert np.allclose(jac.values[0], [6.0, 3.0, 3.0, 1.0], atol=1e-14)

    def test_matches_finite_difference(self):
        rng = np.random.default_rng(42)
        spec = NetworkSpec(3, (16, 8), 2, use_bias=True)
        for _ in range(5):
            params = init_network(spec, rng.integers(1 << 31))
            x = rng.standard_normal(3)
            exact = jacobian(params, spec, x).values
            approx = finite_diff_jacobian(params, spec, x, h=1e-5).values
            denom = max(np.abs(exact).max(), 1.0)
            assert np.abs(exact - approx).max() <= 1e-4 * denom

    def test_relu_mask_zero_at_exact_zero_preactivation(self):
        # pre-activation exactly 0: subgradient convention gives 0 rows
        spec = NetworkSpec(1, (1,), 1, ntk_parameterization=False)
        params = ParamVector(np.array([0.0, 1.0]), spec.layer_offsets)
        jac = jacobian(params, spec, np.array([1.0]))
        assert np.all(jac.values == 0.0)

    def test_last_layer_scope_is_suffix_of_full(self):
        spec = NetworkSpec(2, (7,), 3, use_bias=True)
        params = init_network(spec, 5)
        X = np.random.default_rng(2).standard_normal((4, 2))
        full = jacobian_batch(params, spec, X, scope="full")
        last = jacobian_batch(params, spec, X, scope="last_layer")
        start, length = params.last_layer_range
        assert last.shape == (4, 3, length)
        assert np.array_equal(full[:, :, start : start + length], last)

    def test_unknown_scope_rejected(self):
        spec = tiny_spec()
        with pytest.raises(ValueError):
            jacobian_batch(tiny_params(spec), spec, np.ones((1, 2)), scope="middle")

    def test_finite_diff_requires_positive_h(self):
        spec = tiny_spec()
        with pytest.raises(ValueError):
            finite_diff_jacobian(tiny_params(spec), spec, np.ones(2), h=0.0)


class TestVjpAndGrad:
    def test_vjp_equals_cotangent_times_jacobian(self):
        spec = NetworkSpec(3, (10,), 4, use_bias=True)
        params = init_network(spec, 9)
        rng = np.random.default_rng(3)
        X = rng.standard_normal((5, 3))
        cot = rng.standard_normal((5, 4))
        jac = jacobian_batch(params, spec, X)
        expected = np.einsum("nc,ncp->p", cot, jac)
        assert np.allclose(vjp_batch(params, spec, X, cot), expected, atol=1e-12)

    def test_grad_mse_is_vjp_of_residual(self):
        spec = NetworkSpec(2, (6,), 3)
        params = init_network(spec, 1)
        rng = np.random.default_rng(4)
        X = rng.standard_normal((7, 2))
        Y = one_hot(rng.integers(0, 3, size=7), 3)
        f = forward_batch(params, spec, X)
        expected = vjp_batch(params, spec, X, f - Y)
        assert np.allclose(grad_mse(params, spec, X, Y), expected, atol=1e-13)

    def test_grad_mse_descends_the_loss(self):
        spec = NetworkSpec(2, (6,), 3)
        params = init_network(spec, 1)
        rng = np.random.default_rng(4)
        X = rng.standard_normal((7, 2))
        Y = one_hot(rng.integers(0, 3, size=7), 3)
        g = grad_mse(params, spec, X, Y)
        before = mse_loss(forward_batch(params, spec, X), Y)
        stepped = params.with_values(params.values - 1e-4 * g)
        after = mse_loss(forward_batch(stepped, spec, X), Y)
        assert after < before

    def test_vjp_cotangent_shape_checked(self):
        spec = tiny_spec()
        with pytest.raises(ValueError):
            vjp_batch(tiny_params(spec), spec, np.ones((2, 2)), np.ones((3, 1)))


class TestLossAndHeads:
    def test_mse_half_sum_convention(self):
        # single sample, one output: f=0, y=2 -> L = 0.5*4 = 2
        assert mse_loss(np.array([[0.0]]), np.array([[2.0]])) == pytest.approx(2.0)

    def test_mse_sums_over_samples_and_classes(self):
        out = np.zeros((3, 2))
        tgt = np.ones((3, 2))
        assert mse_loss(out, tgt) == pytest.approx(3.0)

    def test_one_hot(self):
        Y = one_hot([0, 2, 1], 3)
        assert Y.dtype == np.float64
        assert np.array_equal(Y, [[1, 0, 0], [0, 0, 1], [0, 1, 0]])

    def test_one_hot_single_class_column(self):
        # C=1 keeps the raw class index as a float column
        Y = one_hot([0, 1, 1], 1)
        assert Y.shape == (3, 1)
        assert np.array_equal(Y.ravel(), [0.0, 1.0, 1.0])

    def test_one_hot_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            one_hot([0, 3], 3)

    def test_softmax_rows_sum_to_one(self):
        logits = np.array([[1.0, 2.0, 3.0], [1000.0, 1000.0, 999.0]])
        p = softmax(logits)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p > 0)
        assert p[1, 0] == pytest.approx(p[1, 1])

    def test_predict_argmax(self):
        spec = NetworkSpec(2, (), 3, ntk_parameterization=False)
        W = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
        params = ParamVector(W.ravel(), spec.layer_offsets)
        X = np.array([[2.0, 0.0], [0.0, 2.0], [-3.0, -3.0]])
        assert np.array_equal(predict_classes(params, spec, X), [0, 1, 2])

    def test_predict_scalar_threshold(self):
        # C=1 thresholds the single output at 0.5
        spec = NetworkSpec(1, (), 1, ntk_parameterization=False)
        params = ParamVector(np.array([1.0]), spec.layer_offsets)
        X = np.array([[0.2], [0.8]])
        assert np.array_equal(predict_classes(params, spec, X), [0, 1])

    def test_accuracy(self):
        spec = NetworkSpec(2, (), 3, ntk_parameterization=False)
        W = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
        params = ParamVector(W.ravel(), spec.layer_offsets)
        X = np.array([[2.0, 0.0], [0.0, 2.0]])
        assert accuracy(params, spec, X, np.array([0, 2])) == pytest.approx(0.5)


class TestSpecAndParams:
    def test_num_params_accounting(self):
        spec = NetworkSpec(3, (5, 4), 2)
        assert spec.num_params == 3 * 5 + 5 * 4 + 4 * 2
        spec_b = NetworkSpec(3, (5, 4), 2, use_bias=True)
        assert spec_b.num_params == (3 * 5 + 5) + (5 * 4 + 4) + (4 * 2 + 2)

    def test_init_deterministic(self):
        spec = NetworkSpec(2, (4,), 2)
        a = init_network(spec, 123)
        b = init_network(spec, 123)
        c = init_network(spec, 124)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_init_scale_multiplies(self):
        spec1 = NetworkSpec(2, (4,), 2, init_scale=1.0)
        spec2 = NetworkSpec(2, (4,), 2, init_scale=0.5)
        assert np.allclose(init_network(spec2, 7).values, 0.5 * init_network(spec1, 7).values)

    def test_param_vector_validation(self):
        spec = tiny_spec()
        with pytest.raises(ValueError):
            ParamVector(np.ones(5), spec.layer_offsets)  # wrong length
        with pytest.raises(ValueError):
            ParamVector(np.ones((2, 3)), spec.layer_offsets)  # not flat

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            NetworkSpec(0, (), 2)
        with pytest.raises(ValueError):
            NetworkSpec(2, (-1,), 2)
        with pytest.raises(ValueError):
            NetworkSpec(2, (), 0)
        with pytest.raises(ValueError):
            NetworkSpec(2, (), 2, activation="tanh")

    def test_layer_views_share_memory(self):
        spec = tiny_spec()
        params = tiny_params(spec)
        params.layer(0)[0] = 42.0
        assert params.values[0] == 42.0
