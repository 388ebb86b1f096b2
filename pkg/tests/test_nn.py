import numpy as np
import pytest

from evsched.nn import AdamState, DenseNet, adam_step, soft_update


def fd_grad(f, params, eps=1e-6):
    """Central finite differences of a scalar function of the flat params."""
    g = np.zeros_like(params)
    for i in range(params.size):
        old = params[i]
        params[i] = old + eps
        hi = f()
        params[i] = old - eps
        lo = f()
        params[i] = old
        g[i] = (hi - lo) / (2.0 * eps)
    return g


def test_net_shapes_and_param_count():
    net = DenseNet((3, 5, 2))
    assert net.n_params == (3 + 1) * 5 + (5 + 1) * 2
    assert net.n_layers == 2
    out = net.forward(np.zeros(3))
    assert out.shape == (2,)
    out = net.forward(np.zeros((7, 3)))
    assert out.shape == (7, 2)
    with pytest.raises(ValueError):
        net.forward(np.zeros((7, 4)))
    with pytest.raises(ValueError):
        DenseNet((3,))


def test_forward_relu_hand_computed():
    net = DenseNet((2, 2, 1))
    # first layer: w = [[1, -1], [0, 2]], b = [0.5, -3]; second: w = [[1], [1]], b = [0]
    net.params[:] = [1, -1, 0, 2, 0.5, -3, 1, 1, 0]
    out = net.forward(np.array([2.0, 1.0]))
    # z1 = [2*1+1*0+0.5, 2*(-1)+1*2-3] = [2.5, -3]; relu -> [2.5, 0]; out = 2.5
    assert out[0] == 2.5


def test_backward_matches_fd_on_mse():
    rng = np.random.default_rng(3)
    net = DenseNet((4, 8, 3), rng)
    x = rng.normal(size=(6, 4))
    y = rng.normal(size=(6, 3))

    def loss():
        pred = net.forward(x)
        return float(np.mean((pred - y) ** 2))

    pred, cache = net.forward_cached(x)
    upstream = (2.0 / (6 * 3)) * (pred - y)
    grads, _ = net.backward(cache, upstream)
    fd = fd_grad(loss, net.params)
    np.testing.assert_allclose(grads, fd, rtol=1e-6, atol=1e-9)


def test_backward_input_grad_matches_fd():
    rng = np.random.default_rng(4)
    net = DenseNet((3, 6, 1), rng)
    x0 = rng.normal(size=(2, 3))

    pred, cache = net.forward_cached(x0)
    grads, x_grad = net.backward(cache, np.ones((2, 1)), need_input_grad=True)
    assert x_grad.shape == (2, 3)
    eps = 1e-6
    for i in range(2):
        for j in range(3):
            xp = x0.copy()
            xp[i, j] += eps
            xm = x0.copy()
            xm[i, j] -= eps
            fd = (net.forward(xp).sum() - net.forward(xm).sum()) / (2 * eps)
            assert x_grad[i, j] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_copy_is_independent():
    rng = np.random.default_rng(5)
    net = DenseNet((2, 3, 1), rng)
    clone = net.copy()
    np.testing.assert_array_equal(net.params, clone.params)
    clone.params[0] += 1.0
    assert net.params[0] != clone.params[0]


def test_adam_first_step_is_signed_lr():
    params = np.array([1.0, -2.0, 0.0])
    grads = np.array([0.5, -0.25, 0.0])
    state = AdamState.for_params(params)
    adam_step(params, grads, state, lr=0.1)
    # after bias correction the first step is lr * g / (|g| + eps)
    expected = np.array([1.0, -2.0, 0.0]) - 0.1 * grads / (np.abs(grads) + 1e-8)
    np.testing.assert_allclose(params, expected)
    assert state.step == 1


def test_adam_skips_nonfinite_gradient():
    params = np.array([1.0])
    state = AdamState.for_params(params)
    adam_step(params, np.array([np.nan]), state, lr=0.1)
    assert params[0] == 1.0
    assert state.step == 0  # moments untouched


def test_adam_shape_mismatch():
    params = np.zeros(3)
    state = AdamState.for_params(params)
    with pytest.raises(ValueError):
        adam_step(params, np.zeros(2), state, lr=0.1)


def test_adam_converges_on_quadratic():
    rng = np.random.default_rng(0)
    target = rng.normal(size=5)
    params = np.zeros(5)
    state = AdamState.for_params(params)
    for _ in range(2000):
        adam_step(params, 2.0 * (params - target), state, lr=0.01)
    np.testing.assert_allclose(params, target, atol=1e-4)


def test_soft_update_polyak():
    target = np.array([0.0, 10.0])
    online = np.array([1.0, 0.0])
    soft_update(target, online, 0.1)
    np.testing.assert_allclose(target, [0.1, 9.0])
    soft_update(target, online, 1.0)
    np.testing.assert_allclose(target, online)
    with pytest.raises(ValueError):
        soft_update(target, online, 1.5)
