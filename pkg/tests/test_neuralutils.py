import numpy as np
import pytest

from contracts import ContractViolationError
from neuralutils import (
    AdamState,
    Approximator,
    adam_step,
    clip_by_global_norm,
    global_norm,
    parameter_distance,
    sigmoid,
)


def make_net(sizes=(3, 5, 4, 2), dropout_rate=0.0, seed=0):
    return Approximator(
        sizes,
        dropout_rate=dropout_rate,
        init_rng=np.random.default_rng(seed),
        dropout_rng=np.random.default_rng(seed + 1),
    )


def numeric_param_gradient(net, inputs, upstream, h=1e-5):
    grads = []
    for param in net.parameters():
        grad = np.zeros_like(param)
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + h
            plus = np.sum(net.forward(inputs) * upstream)
            param[index] = original - h
            minus = np.sum(net.forward(inputs) * upstream)
            param[index] = original
            grad[index] = (plus - minus) / (2 * h)
        grads.append(grad)
    return grads


def test_sigmoid_does_not_overflow():
    np.testing.assert_allclose(sigmoid(np.array([-1000.0, 0.0, 1000.0])), [0.0, 0.5, 1.0])


def test_glorot_initialization_bounds():
    net = Approximator.mlp(12, 6, hidden=128, init_rng=np.random.default_rng(3))
    assert net.layer_sizes == (12, 128, 128, 6)
    limit = np.sqrt(6.0 / (12 + 128))
    assert np.all(np.abs(net.weights[0]) <= limit)
    assert all(np.all(b == 0.0) for b in net.biases)


def test_forward_shapes():
    net = make_net()
    assert net.forward(np.zeros(3)).shape == (2,)
    assert net.forward(np.zeros((5, 3))).shape == (5, 2)


def test_forward_rejects_wrong_width():
    with pytest.raises(ContractViolationError):
        make_net().forward(np.zeros(4))


def test_dropout_only_in_train_mode():
    net = make_net(sizes=(3, 64, 64, 1), dropout_rate=0.15)
    x = np.array([0.1, -0.2, 0.3])
    np.testing.assert_array_equal(net.forward(x), net.forward(x))
    assert not np.allclose(net.forward(x, train=True), net.forward(x))


def test_parameter_gradients_match_finite_differences():
    net = make_net()
    rng = np.random.default_rng(5)
    inputs = rng.uniform(-1, 1, size=(4, 3))
    upstream = rng.normal(size=(4, 2))
    net.forward(inputs)
    analytic = net.grad_params(upstream)
    numeric = numeric_param_gradient(net, inputs, upstream)
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=1e-6, atol=1e-9)


def test_input_gradient_matches_finite_differences():
    net = make_net(sizes=(3, 6, 6, 1))
    x = np.array([0.3, -0.7, 0.2])
    analytic = net.grad_input(x)
    h = 1e-5
    numeric = np.array(
        [
            (net.forward(x + h * e)[0] - net.forward(x - h * e)[0]) / (2 * h)
            for e in np.eye(3)
        ]
    )
    np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-9)


def test_input_gradient_of_a_batch():
    net = make_net(sizes=(3, 6, 6, 1))
    xs = np.array([[0.3, -0.7, 0.2], [0.0, 0.1, 0.9]])
    batch = net.grad_input(xs)
    assert batch.shape == (2, 3)
    np.testing.assert_allclose(batch[1], net.grad_input(xs[1]))


def test_input_gradient_needs_scalar_output():
    with pytest.raises(ContractViolationError):
        make_net().grad_input(np.zeros(3))


def test_backward_needs_a_forward_pass():
    with pytest.raises(ContractViolationError):
        make_net().grad_params(np.zeros(2))


def test_soft_update():
    target, source = make_net(seed=0), make_net(seed=10)
    before = [p.copy() for p in target.parameters()]
    target.soft_update_from(source, 0.25)
    for old, new, src in zip(before, target.parameters(), source.parameters()):
        np.testing.assert_allclose(new, 0.75 * old + 0.25 * src)
    target.soft_update_from(source, 1.0)
    assert parameter_distance(target, source) == pytest.approx(0.0, abs=1e-12)


def test_copy_is_independent():
    net = make_net()
    clone = net.copy()
    clone.parameters()[0][...] += 1.0
    assert parameter_distance(net, clone) > 0.0


def test_clip_by_global_norm():
    grads = [np.array([3.0]), np.array([4.0])]
    clipped, norm = clip_by_global_norm(grads, 1.0)
    assert norm == pytest.approx(5.0)
    assert global_norm(clipped) == pytest.approx(1.0)
    unclipped, _ = clip_by_global_norm(grads, 0.0)
    assert global_norm(unclipped) == pytest.approx(5.0)


def test_adam_first_step_is_learning_rate_sized():
    params = [np.array([1.0, -1.0])]
    opt = AdamState.zeros_like(params, learning_rate=0.001)
    adam_step(params, [np.array([0.5, -2.0])], opt)
    np.testing.assert_allclose(params[0], [0.999, -0.999], rtol=1e-6)
    assert opt.step_count == 1


def test_adam_minimizes_a_quadratic():
    params = [np.array([2.0])]
    opt = AdamState.zeros_like(params, learning_rate=0.05)
    for _ in range(500):
        adam_step(params, [2.0 * params[0]], opt)
    assert abs(params[0][0]) < 0.1


def directional_value(net, inputs, direction):
    return float(net.grad_input(inputs) @ direction)


def test_directional_gradient_matches_finite_differences():
    net = make_net(sizes=(4, 6, 5, 1), seed=11)
    rng = np.random.default_rng(12)
    inputs, direction = rng.normal(size=4), rng.normal(size=4)
    value, analytic = net.directional_grad_params(inputs, direction)
    assert value == pytest.approx(directional_value(net, inputs, direction), rel=1e-12, abs=1e-14)
    h = 1e-5
    for param, grad in zip(net.parameters(), analytic):
        assert grad.shape == param.shape
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + h
            plus = directional_value(net, inputs, direction)
            param[index] = original - h
            minus = directional_value(net, inputs, direction)
            param[index] = original
            assert grad[index] == pytest.approx((plus - minus) / (2 * h), rel=1e-5, abs=1e-8)


def test_directional_gradient_ignores_output_bias():
    net = make_net(sizes=(2, 3, 3, 1), seed=3)
    _, grads = net.directional_grad_params(np.ones(2), np.array([1.0, -1.0]))
    assert np.all(grads[-1] == 0.0)


def test_directional_gradient_keeps_the_forward_cache():
    net = make_net(sizes=(3, 4, 4, 1), seed=5)
    inputs = np.array([0.1, -0.2, 0.3])
    net.forward(inputs)
    before = net.grad_params(np.ones(1))
    net.directional_grad_params(np.zeros(3), np.ones(3))
    for left, right in zip(before, net.grad_params(np.ones(1))):
        np.testing.assert_array_equal(left, right)


def test_directional_gradient_needs_scalar_output():
    with pytest.raises(ContractViolationError):
        make_net().directional_grad_params(np.zeros(3), np.zeros(3))
