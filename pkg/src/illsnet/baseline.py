"""Gradient-descent baseline: reverse-mode gradients plus Adam.

Hand-rolled so the comparison does not depend on any autodiff framework.
Training is full batch; the dataset is reshuffled each epoch with the
run's seeded generator even though a full-batch MSE is order-invariant.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .network import Activation, Dataset, MlpParams, forward_pass, mse_loss
from .traces import TrainTrace

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass
class AdamState:
    """Per-parameter moment estimates, matching the network's shapes."""

    first_moment: list
    second_moment: list
    step_count: int
    lr: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def fresh(cls, net: MlpParams, lr: float) -> "AdamState":
        zeros = lambda: [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.layers]
        return cls(first_moment=zeros(), second_moment=zeros(), step_count=0, lr=lr)


def backprop_gradients(net: MlpParams, act: Activation, data: Dataset):
    """Analytic gradient of the full-batch MSE for every weight and bias.

    Returns a list of (dW, db) pairs shaped like net.layers. The bias
    gradient respects the ``h @ w - b`` convention (d input / d b = -1).
    """
    hidden, preds = forward_pass(net, act, data.inputs)
    n = data.n_samples

    # delta holds dLoss/d(layer input) for the layer being processed.
    delta = ((2.0 / n) * (preds - data.targets) * act.derivative_from_output(preds))[:, None]
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        below = hidden.activations[i - 1] if i > 0 else data.inputs
        grads[i] = (below.T @ delta, -delta.sum(axis=0))
        if i > 0:
            w, _ = net.layers[i]
            delta = (delta @ w.T) * act.derivative_from_output(below)
    return grads


def adam_step(net: MlpParams, grads, state: AdamState):
    """One Adam update with bias correction; returns new params and state."""
    if len(grads) != len(net.layers):
        raise DimensionMismatch("gradient structure does not match the network")
    t = state.step_count + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t

    new_layers = []
    new_m = []
    new_v = []
    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(
        net.layers, grads, state.first_moment, state.second_moment
    ):
        mw = state.beta1 * mw + (1.0 - state.beta1) * gw
        mb = state.beta1 * mb + (1.0 - state.beta1) * gb
        vw = state.beta2 * vw + (1.0 - state.beta2) * (gw * gw)
        vb = state.beta2 * vb + (1.0 - state.beta2) * (gb * gb)
        w = w - state.lr * (mw / bc1) / (np.sqrt(vw / bc2) + state.epsilon)
        b = b - state.lr * (mb / bc1) / (np.sqrt(vb / bc2) + state.epsilon)
        new_layers.append((w, b))
        new_m.append((mw, mb))
        new_v.append((vw, vb))
    new_state = AdamState(
        first_moment=new_m,
        second_moment=new_v,
        step_count=t,
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )
    return MlpParams(new_layers), new_state


def train_adam(net: MlpParams, act: Activation, data: Dataset, lr: float,
               max_epochs: int, seed: int, param_hook=None):
    """Full-batch Adam training from ``net``.

    Trace layout matches the ILLS trainer: pre-update loss per epoch plus
    one final loss.
    """
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    rng = np.random.default_rng(seed)
    params = net.copy()
    state = AdamState.fresh(params, lr)
    losses = np.empty(max_epochs + 1)
    hook_values = [] if param_hook is not None else None
    for epoch in range(max_epochs):
        if param_hook is not None:
            hook_values.append(param_hook(params))
        # Loss is recorded in the original sample order so that traces of
        # different trainers agree bitwise at epoch 0; the gradient batch
        # is the reshuffled full set (order-invariant up to rounding).
        _, preds = forward_pass(params, act, data.inputs)
        losses[epoch] = mse_loss(preds, data.targets)
        order = rng.permutation(data.n_samples)
        batch = Dataset(inputs=data.inputs[order], targets=data.targets[order])
        grads = backprop_gradients(params, act, batch)
        params, state = adam_step(params, grads, state)
    _, preds = forward_pass(params, act, data.inputs)
    losses[-1] = mse_loss(preds, data.targets)
    if param_hook is not None:
        hook_values.append(param_hook(params))
    trace = TrainTrace(
        losses=losses,
        param_abs_errors=np.asarray(hook_values) if hook_values is not None else None,
    )
    return params, trace
