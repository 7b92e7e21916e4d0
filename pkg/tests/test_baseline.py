import numpy as np
import pytest

from illsnet.baseline import (
    ADAM_EPSILON,
    AdamState,
    adam_step,
    backprop_gradients,
    train_adam,
)
from illsnet.datagen import InitScheme, gen_synthetic, get_preset, init_params
from illsnet.network import Activation, Dataset, MlpParams, forward_pass, mse_loss

ACT = Activation()


def finite_difference_gradients(net, act, data, eps=1e-5):
    """Central-difference oracle for the full-batch MSE gradient."""

    def loss_at(layers):
        _, preds = forward_pass(MlpParams(layers), act, data.inputs)
        return mse_loss(preds, data.targets)

    grads = []
    for li, (w, b) in enumerate(net.layers):
        gw = np.zeros_like(w)
        gb = np.zeros_like(b)
        for idx in np.ndindex(*w.shape):
            plus = [(ww.copy(), bb.copy()) for ww, bb in net.layers]
            plus[li][0][idx] += eps
            minus = [(ww.copy(), bb.copy()) for ww, bb in net.layers]
            minus[li][0][idx] -= eps
            gw[idx] = (loss_at(plus) - loss_at(minus)) / (2 * eps)
        for j in range(b.size):
            plus = [(ww.copy(), bb.copy()) for ww, bb in net.layers]
            plus[li][1][j] += eps
            minus = [(ww.copy(), bb.copy()) for ww, bb in net.layers]
            minus[li][1][j] -= eps
            gb[j] = (loss_at(plus) - loss_at(minus)) / (2 * eps)
        grads.append((gw, gb))
    return grads


def random_problem(seed, topo):
    net = init_params(topo, InitScheme.CUSTOM, seed)
    rng = np.random.default_rng(1000 + seed)
    x = rng.uniform(-1, 1, (23, topo[0]))
    y = rng.uniform(-0.9, 0.9, 23)
    return net, Dataset(x, y)


def grads_match(analytic, numeric, tol):
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        if np.max(np.abs(aw - nw) / (1.0 + np.abs(aw))) > tol:
            return False
        if np.max(np.abs(ab - nb) / (1.0 + np.abs(ab))) > tol:
            return False
    return True


def test_zero_network_zero_targets():
    net = MlpParams([(np.zeros((2, 2)), np.zeros(2)), (np.zeros((2, 1)), np.zeros(1))])
    data = Dataset(np.array([[0.5, -0.5], [0.1, 0.9]]), np.zeros(2))
    for gw, gb in backprop_gradients(net, ACT, data):
        assert np.all(gw == 0.0)
        assert np.all(gb == 0.0)


def test_gradients_match_finite_differences():
    for seed in range(6):
        topo = (3, 2, 1) if seed % 2 == 0 else (2, 2, 2, 1)
        net, data = random_problem(seed, topo)
        analytic = backprop_gradients(net, ACT, data)
        numeric = finite_difference_gradients(net, ACT, data)
        assert grads_match(analytic, numeric, 1e-6)


def test_gradient_sign_symmetry():
    # flipping layer-0 weights/biases and layer-1 weights preserves the
    # function, so the gradients flip exactly alongside the parameters
    net, data = random_problem(3, (3, 2, 1))
    flipped_layers = [(w.copy(), b.copy()) for w, b in net.layers]
    flipped_layers[0] = (-flipped_layers[0][0], -flipped_layers[0][1])
    flipped_layers[1] = (-flipped_layers[1][0], flipped_layers[1][1])
    flipped = MlpParams(flipped_layers)

    g = backprop_gradients(net, ACT, data)
    gf = backprop_gradients(flipped, ACT, data)
    assert np.allclose(gf[0][0], -g[0][0], atol=1e-12)
    assert np.allclose(gf[0][1], -g[0][1], atol=1e-12)
    assert np.allclose(gf[1][0], -g[1][0], atol=1e-12)
    assert np.allclose(gf[1][1], g[1][1], atol=1e-12)
    # and the finite-difference oracle agrees on the flipped point
    numeric = finite_difference_gradients(flipped, ACT, data)
    assert grads_match(gf, numeric, 1e-6)


def test_adam_zero_gradient_is_identity():
    net, _ = random_problem(0, (3, 2, 1))
    zero = [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.layers]
    state = AdamState.fresh(net, lr=0.01)
    stepped, new_state = adam_step(net, zero, state)
    for (w0, b0), (w1, b1) in zip(net.layers, stepped.layers):
        assert np.array_equal(w0, w1)
        assert np.array_equal(b0, b1)
    assert new_state.step_count == 1


def test_adam_first_step_magnitude():
    net = MlpParams([(np.array([[0.5]]), np.array([0.2]))])
    g = 0.37
    grads = [(np.array([[g]]), np.array([0.0]))]
    state = AdamState.fresh(net, lr=0.01)
    stepped, _ = adam_step(net, grads, state)
    # bias correction makes m_hat = g and v_hat = g^2 on the first step
    expected = 0.5 - 0.01 * g / (abs(g) + ADAM_EPSILON)
    assert stepped.layers[0][0][0, 0] == pytest.approx(expected, rel=1e-12)


def test_adam_two_steps_constant_gradient():
    beta1, beta2 = 0.9, 0.999
    lr, g = 0.05, -0.8
    net = MlpParams([(np.array([[1.0]]), np.array([0.0]))])
    grads = [(np.array([[g]]), np.array([0.0]))]
    state = AdamState.fresh(net, lr=lr)
    # hand-evaluated recursion for two steps
    theta = 1.0
    m = v = 0.0
    for t in (1, 2):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)
    stepped, state = adam_step(net, grads, state)
    stepped, state = adam_step(stepped, grads, state)
    assert stepped.layers[0][0][0, 0] == pytest.approx(theta, rel=1e-12)
    # each update has magnitude close to lr
    assert abs(1.0 - theta) == pytest.approx(2 * lr, rel=1e-6)


def test_train_lr_zero_constant_trace():
    preset = get_preset("set2-one-layer")
    data = gen_synthetic(preset, 0)
    net = init_params(preset.topology, InitScheme.CUSTOM, 0)
    _, trace = train_adam(net, ACT, data, 0.0, 25, seed=0)
    assert np.all(trace.losses == trace.losses[0])


def test_train_deterministic():
    preset = get_preset("set2-one-layer")
    data = gen_synthetic(preset, 0)
    net = init_params(preset.topology, InitScheme.CUSTOM, 1)
    _, t1 = train_adam(net, ACT, data, 1e-3, 30, seed=5)
    _, t2 = train_adam(net, ACT, data, 1e-3, 30, seed=5)
    assert np.array_equal(t1.losses, t2.losses)
    assert len(t1.losses) == 31


def test_plain_gradient_descent_small_lr_descends():
    # the analytic gradient is a descent direction: plain GD with a small
    # step never increases the full-batch loss
    for seed in range(5):
        net, data = random_problem(seed + 20, (3, 2, 1))
        params = net.copy()
        last = None
        for _ in range(50):
            _, preds = forward_pass(params, ACT, data.inputs)
            loss = mse_loss(preds, data.targets)
            if last is not None:
                assert loss <= last + 1e-12
            last = loss
            grads = backprop_gradients(params, ACT, data)
            params = MlpParams(
                [(w - 1e-4 * gw, b - 1e-4 * gb)
                 for (w, b), (gw, gb) in zip(params.layers, grads)]
            )
