"""Feedforward network representation, invertible activation, forward pass.

A network maps an (N, d) input matrix to a length-N prediction vector
through layers ``h <- f(h_prev @ W - b)``. Note the sign convention: the
stored bias enters the neuron input with a minus, so a neuron's total
input is ``sum_k w_k h_k - b``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput

TANH = "tanh"


@dataclass(frozen=True)
class Activation:
    """Invertible elementwise activation, currently hyperbolic tangent.

    ``clip_margin`` controls how far values sitting on the closed output
    range are pulled inward before inversion, keeping ``invert`` finite:
    for tanh, |invert(v)| <= atanh(1 - clip_margin) (about 7.254 at the
    default margin).
    """

    kind: str = TANH
    clip_margin: float = 1e-6

    def __post_init__(self):
        if self.kind != TANH:
            raise ValueError(f"unsupported activation kind: {self.kind!r}")
        if not 0.0 < self.clip_margin < 1.0:
            raise ValueError("clip_margin must be in (0, 1)")

    def apply(self, z):
        z = np.asarray(z, dtype=np.float64)
        if not np.all(np.isfinite(z)):
            raise NonFiniteInput("activation input contains NaN or infinity")
        return np.tanh(z)

    def invert(self, v):
        v = np.asarray(v, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("inverse-activation input contains NaN or infinity")
        clipped = np.clip(v, -1.0 + self.clip_margin, 1.0 - self.clip_margin)
        return np.arctanh(clipped)

    def derivative_from_output(self, h):
        # d tanh(z) / dz expressed through the output: 1 - tanh(z)^2.
        h = np.asarray(h, dtype=np.float64)
        if not np.all(np.isfinite(h)):
            raise NonFiniteInput("activation output contains NaN or infinity")
        return 1.0 - h * h


@dataclass
class MlpParams:
    """All weights and biases of a scalar-output feedforward network.

    ``layers[i]`` is a pair ``(weights, biases)`` with weights of shape
    (fan_in, fan_out) and biases of length fan_out. Consecutive layers
    must chain (fan_out of layer i == fan_in of layer i+1) and the final
    fan_out is 1.
    """

    layers: list

    def __post_init__(self):
        cleaned = []
        for idx, (w, b) in enumerate(self.layers):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise DimensionMismatch(
                    f"layer {idx}: weights {w.shape} incompatible with biases {b.shape}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NonFiniteInput(f"layer {idx} contains NaN or infinite parameters")
            if cleaned and cleaned[-1][0].shape[1] != w.shape[0]:
                raise DimensionMismatch(
                    f"layer {idx}: fan_in {w.shape[0]} does not match previous fan_out"
                )
            cleaned.append((w, b))
        if not cleaned:
            raise DimensionMismatch("network needs at least one layer")
        if cleaned[-1][0].shape[1] != 1:
            raise DimensionMismatch("final layer must have a single output neuron")
        self.layers = cleaned

    @property
    def topology(self):
        """Layer widths, inputs first: (d, w_1, ..., 1)."""
        widths = [self.layers[0][0].shape[0]]
        widths.extend(w.shape[1] for w, _ in self.layers)
        return tuple(widths)

    def copy(self):
        return MlpParams([(w.copy(), b.copy()) for w, b in self.layers])


def params_to_json(net: MlpParams) -> str:
    """Serialise parameters to the interchange JSON document.

    Weights are nested fan_in-major: ``weights[i][j]`` is the weight from
    input neuron i to output neuron j of the layer.
    """
    doc = {
        "layers": [
            {"weights": w.tolist(), "biases": b.tolist()} for w, b in net.layers
        ]
    }
    return json.dumps(doc, indent=2)


def params_from_json(text: str) -> MlpParams:
    doc = json.loads(text)
    layers = [(layer["weights"], layer["biases"]) for layer in doc["layers"]]
    return MlpParams(layers)


@dataclass
class Dataset:
    """Training inputs (N, d) and scalar targets (N,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 2 or self.targets.ndim != 1:
            raise DimensionMismatch("inputs must be (N, d) and targets (N,)")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DimensionMismatch(
                f"{self.inputs.shape[0]} input rows vs {self.targets.shape[0]} targets"
            )
        if self.inputs.shape[0] < 1:
            raise DimensionMismatch("dataset needs at least one sample")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise NonFiniteInput("dataset contains NaN or infinite values")

    @property
    def n_samples(self):
        return self.inputs.shape[0]


@dataclass
class HiddenState:
    """Per-sample activation estimates for every hidden layer.

    ``activations[i]`` is the (N, width_i) matrix of layer-i outputs; the
    output layer is excluded. Owned by a single training run.
    """

    activations: list = field(default_factory=list)

    def copy(self):
        return HiddenState([a.copy() for a in self.activations])


def forward_pass(net: MlpParams, act: Activation, inputs):
    """Run the network on an (N, d) input matrix.

    Returns ``(HiddenState, predictions)`` where predictions is the
    length-N vector from the final single-neuron layer.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise DimensionMismatch(f"inputs must be 2-d, got shape {inputs.shape}")
    if inputs.shape[1] != net.layers[0][0].shape[0]:
        raise DimensionMismatch(
            f"inputs have {inputs.shape[1]} features, first layer expects "
            f"{net.layers[0][0].shape[0]}"
        )
    if not np.all(np.isfinite(inputs)):
        raise NonFiniteInput("inputs contain NaN or infinity")

    h = inputs
    hidden = []
    for w, b in net.layers:
        h = act.apply(h @ w - b)
        hidden.append(h)
    predictions = hidden.pop()[:, 0]
    return HiddenState(hidden), predictions


def mse_loss(predictions, targets) -> float:
    """Mean squared error (1/N) sum (pred - target)^2."""
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise DimensionMismatch(
            f"predictions {predictions.shape} vs targets {targets.shape}"
        )
    diff = predictions - targets
    return float(np.mean(diff * diff))
