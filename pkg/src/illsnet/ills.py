"""Iterative linear least-squares (ILLS) training.

One epoch alternates two kinds of linear solves instead of following a
loss gradient:

* parameter fits: given current hidden activations, each layer's weights
  and biases are the exact least-squares solution mapping the activations
  below onto the inverse-activation targets for the layer;
* activation updates: hidden activations move a small, normalised step
  along the linearised direction that best matches the layer above,
  obtained by solving for proposed deviations (alphas, betas) of the
  producing layer's parameters.

Parameters are rewritten wholesale by the fits; only the hidden
activations carry the learning rate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .linalg import lstsq
from .network import Activation, Dataset, MlpParams, forward_pass, mse_loss
from .traces import TrainTrace


@dataclass(frozen=True)
class IllsConfig:
    """Training hyperparameters.

    rho is the activation step size in (0, 1]; norm_floor keeps the
    shared normalisation divisor away from zero; clamp_margin keeps
    updated activations strictly inside the invertible range.
    """

    rho: float
    max_epochs: int
    norm_floor: float = 1e-12
    clamp_margin: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.norm_floor <= 0.0 or self.clamp_margin <= 0.0:
            raise ValueError("norm_floor and clamp_margin must be positive")


@dataclass(frozen=True)
class DeviationSolution:
    """Proposed parameter deviations for one hidden layer.

    alphas has shape (fan_in, width): alphas[m, j] perturbs the weight
    from source m into neuron j. betas has length width.
    """

    alphas: np.ndarray
    betas: np.ndarray


def required_input_targets(act: Activation, values) -> np.ndarray:
    """Pre-activation input each neuron needs to emit ``values``.

    Elementwise inverse activation; values at or beyond the range limits
    are clipped inward by the activation's margin first.
    """
    return act.invert(values)


def fit_layer_params(h_prev, required_inputs):
    """Least-squares fit of one layer's weights and biases.

    For each output neuron k independently, solves the design
    ``[h_prev | -1]`` against column k of ``required_inputs`` and stacks
    the results into a (fan_in, fan_out) weight matrix and fan_out bias
    vector. The trailing -1 column carries the bias under the
    ``h @ w - b`` input convention.
    """
    h_prev = np.asarray(h_prev, dtype=np.float64)
    required_inputs = np.asarray(required_inputs, dtype=np.float64)
    if required_inputs.ndim == 1:
        required_inputs = required_inputs[:, None]
    if h_prev.ndim != 2 or required_inputs.shape[0] != h_prev.shape[0]:
        raise DimensionMismatch(
            f"h_prev {h_prev.shape} vs required_inputs {required_inputs.shape}"
        )
    n, fan_in = h_prev.shape
    fan_out = required_inputs.shape[1]
    design = np.hstack([h_prev, -np.ones((n, 1))])
    weights = np.empty((fan_in, fan_out))
    biases = np.empty(fan_out)
    for k in range(fan_out):
        sol = lstsq(design, required_inputs[:, k])
        weights[:, k] = sol.coefficients[:fan_in]
        biases[k] = sol.coefficients[fan_in]
    return weights, biases


def build_deviation_system(h_below, h_layer, next_weights_column, residual, act: Activation):
    """Assemble the linear system for one destination neuron's residual.

    Unknowns are the deviations of ALL parameters of the layer producing
    ``h_layer``: width blocks of (fan_in + 1) columns, ordered alphas
    for sources 0..fan_in-1 then beta, per neuron j. Column block j is
    ``w_next[j] * f'(h_layer[:, j])`` times ``[h_below | -1]``, so a
    saturated neuron (zero derivative) contributes dead columns and the
    minimum-norm solve leaves it alone.
    """
    h_below = np.asarray(h_below, dtype=np.float64)
    h_layer = np.asarray(h_layer, dtype=np.float64)
    next_weights_column = np.asarray(next_weights_column, dtype=np.float64)
    residual = np.asarray(residual, dtype=np.float64)
    if h_below.ndim != 2 or h_layer.ndim != 2 or h_below.shape[0] != h_layer.shape[0]:
        raise DimensionMismatch(
            f"h_below {h_below.shape} vs h_layer {h_layer.shape}"
        )
    n, fan_in = h_below.shape
    width = h_layer.shape[1]
    if next_weights_column.shape != (width,):
        raise DimensionMismatch(
            f"next_weights_column has shape {next_weights_column.shape}, expected ({width},)"
        )
    if residual.shape != (n,):
        raise DimensionMismatch(f"residual has shape {residual.shape}, expected ({n},)")

    block = fan_in + 1
    deriv = act.derivative_from_output(h_layer)
    a = np.empty((n, width * block))
    for j in range(width):
        scale = next_weights_column[j] * deriv[:, j]
        start = j * block
        a[:, start:start + fan_in] = scale[:, None] * h_below
        a[:, start + fan_in] = -scale
    return a, residual.copy()


def solve_deviations(a, rhs, fan_in, width) -> DeviationSolution:
    """Minimum-norm solve of a deviation system, unpacked per neuron."""
    sol = lstsq(a, rhs)
    block = fan_in + 1
    alphas = np.empty((fan_in, width))
    betas = np.empty(width)
    for j in range(width):
        alphas[:, j] = sol.coefficients[j * block:j * block + fan_in]
        betas[j] = sol.coefficients[j * block + fan_in]
    return DeviationSolution(alphas=alphas, betas=betas)


def deviations_to_delta_h(dev: DeviationSolution, h_below, h_layer, act: Activation) -> np.ndarray:
    """Linearised activation change implied by parameter deviations.

    delta_h[n, j] = f'(h_layer[n, j]) * (h_below[n, :] @ alphas[:, j] - betas[j]).
    """
    h_below = np.asarray(h_below, dtype=np.float64)
    h_layer = np.asarray(h_layer, dtype=np.float64)
    if h_below.shape[0] != h_layer.shape[0]:
        raise DimensionMismatch(
            f"h_below {h_below.shape} vs h_layer {h_layer.shape}"
        )
    if dev.alphas.shape != (h_below.shape[1], h_layer.shape[1]):
        raise DimensionMismatch(
            f"alphas {dev.alphas.shape} do not match layer shapes"
        )
    deriv = act.derivative_from_output(h_layer)
    return deriv * (h_below @ dev.alphas - dev.betas)


def apply_hidden_update(h_layer, delta_h, rho, norm_floor, clamp_margin) -> np.ndarray:
    """Normalised activation step, clamped back into the open range.

    The divisor is the max absolute entry over the ENTIRE delta matrix
    (one common constant for the layer, so the normalised step lies in
    [-1, 1] for every neuron), floored at norm_floor.
    """
    h_layer = np.asarray(h_layer, dtype=np.float64)
    delta_h = np.asarray(delta_h, dtype=np.float64)
    if h_layer.shape != delta_h.shape:
        raise DimensionMismatch(f"h {h_layer.shape} vs delta_h {delta_h.shape}")
    divisor = max(float(np.max(np.abs(delta_h))), norm_floor)
    step = h_layer + rho * delta_h / divisor
    return np.clip(step, -1.0 + clamp_margin, 1.0 - clamp_margin)


def run_epoch(net: MlpParams, act: Activation, data: Dataset, cfg: IllsConfig):
    """One full training epoch; returns updated params and the loss
    measured BEFORE any update (so epoch 0 reports the initialisation).

    Order of operations: forward pass; exact fit of the output layer to
    the inverted targets; then for each hidden layer from the top down,
    one normalised activation update per destination neuron in the layer
    above (residuals recomputed after each update) followed by a fit of
    the layer's own parameters. The input matrix is never updated, only
    the first layer's parameters.
    """
    hidden, preds = forward_pass(net, act, data.inputs)
    epoch_loss = mse_loss(preds, data.targets)

    h = [a.copy() for a in hidden.activations]
    layers = [(w.copy(), b.copy()) for w, b in net.layers]
    n_layers = len(layers)

    targets_h = required_input_targets(act, data.targets)
    below_out = h[-1] if n_layers > 1 else data.inputs
    layers[-1] = fit_layer_params(below_out, targets_h)

    for j in range(n_layers - 2, -1, -1):
        below = h[j - 1] if j > 0 else data.inputs
        w_next, b_next = layers[j + 1]
        fan_in = below.shape[1]
        width = h[j].shape[1]
        for k in range(w_next.shape[1]):
            if j + 1 == n_layers - 1:
                required = targets_h
            else:
                required = required_input_targets(act, h[j + 1][:, k])
            current = h[j] @ w_next[:, k] - b_next[k]
            residual = required - current
            a, rhs = build_deviation_system(below, h[j], w_next[:, k], residual, act)
            dev = solve_deviations(a, rhs, fan_in, width)
            delta = deviations_to_delta_h(dev, below, h[j], act)
            h[j] = apply_hidden_update(
                h[j], delta, cfg.rho, cfg.norm_floor, cfg.clamp_margin
            )
        layers[j] = fit_layer_params(below, required_input_targets(act, h[j]))

    return MlpParams(layers), epoch_loss


def train_ills(net: MlpParams, act: Activation, data: Dataset, cfg: IllsConfig, param_hook=None):
    """Run ``cfg.max_epochs`` epochs from ``net``.

    The trace records the pre-update loss of every epoch plus one final
    post-training loss (length max_epochs + 1). ``param_hook``, if given,
    is called with the parameters at the same instants and its returned
    floats are collected alongside.
    """
    params = net.copy()
    losses = np.empty(cfg.max_epochs + 1)
    hook_values = [] if param_hook is not None else None
    for epoch in range(cfg.max_epochs):
        if param_hook is not None:
            hook_values.append(param_hook(params))
        params, losses[epoch] = run_epoch(params, act, data, cfg)
    _, preds = forward_pass(params, act, data.inputs)
    losses[-1] = mse_loss(preds, data.targets)
    if param_hook is not None:
        hook_values.append(param_hook(params))
    trace = TrainTrace(
        losses=losses,
        param_abs_errors=np.asarray(hook_values) if hook_values is not None else None,
    )
    return params, trace
