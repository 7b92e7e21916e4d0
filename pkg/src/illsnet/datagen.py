"""Dataset construction: synthetic ground-truth networks, the airline
passengers series, windowing, normalisation, and parameter initialisers.

All randomness flows through numpy's default generator (PCG64) seeded
explicitly, so every dataset and every initial parameter set is a pure
function of (preset, seed).
"""

import enum
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DegenerateSeries, EmptySeries, ParseError, SeriesTooShort
from .network import Activation, Dataset, MlpParams, forward_pass

AIRLINE_RESOURCE = "airline_passengers.csv"


class InitScheme(enum.Enum):
    """Parameter initialisation distributions.

    DEFAULT_FAN_IN: weights and biases uniform on (-1/sqrt(fan_in),
    +1/sqrt(fan_in)), the usual linear-layer default.

    CUSTOM: weight magnitudes uniform on [0.25, 0.75] with a fair-coin
    sign (so the support is [-0.75, -0.25] U [0.25, 0.75]) and biases
    uniform on [-0.1, 0.1]; keeps every tanh unit away from both the
    dead zone and saturation.
    """

    DEFAULT_FAN_IN = "default"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ExperimentPreset:
    """A benchmark problem: topology, optional ground truth, sample count."""

    name: str
    topology: tuple
    true_params: MlpParams | None
    n_samples: int


def _preset_params(layers):
    return MlpParams([(np.array(w, dtype=np.float64), np.array(b, dtype=np.float64))
                      for w, b in layers])


def make_presets() -> dict:
    """The four benchmark problems with their ground-truth parameters.

    Weight matrices are fan_in x fan_out: entry [m, k] feeds source
    neuron m into destination neuron k.
    """
    set1 = _preset_params([
        ([[-0.5, -1.0], [0.0, 1.0]], [1.0, -1.0]),
        ([[2.0, -0.5], [0.5, 2.0]], [0.0, 2.0]),
        ([[1.0], [-1.0]], [-1.0]),
    ])
    set2 = _preset_params([
        ([[1.0, 0.0], [2.0, 3.0], [-1.0, -2.0]], [1.0, -2.0]),
        ([[3.0], [-2.0]], [0.0]),
    ])
    set3 = _preset_params([
        ([[-2.0, 4.0], [0.0, -1.0], [3.0, 2.0]], [0.0, 2.0]),
        ([[-3.0], [-1.0]], [-1.0]),
    ])
    presets = [
        ExperimentPreset("set1-two-layer", (2, 2, 2, 1), set1, 100),
        ExperimentPreset("set2-one-layer", (3, 2, 1), set2, 100),
        ExperimentPreset("set3-one-layer", (3, 2, 1), set3, 100),
        ExperimentPreset("airline", (3, 2, 1), None, 141),
    ]
    return {p.name: p for p in presets}


PRESETS = make_presets()


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}"
        ) from None


def init_params(topology, scheme: InitScheme, seed: int) -> MlpParams:
    """Draw a parameter set for the given layer widths.

    Draw order is fixed (per layer: weights, then the extra sign draw for
    the custom scheme, then biases) so a seed identifies one parameter
    set exactly.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(topology[:-1], topology[1:]):
        if scheme is InitScheme.DEFAULT_FAN_IN:
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=fan_out)
        elif scheme is InitScheme.CUSTOM:
            magnitude = rng.uniform(0.25, 0.75, size=(fan_in, fan_out))
            sign = np.where(rng.random(size=(fan_in, fan_out)) < 0.5, -1.0, 1.0)
            w = sign * magnitude
            b = rng.uniform(-0.1, 0.1, size=fan_out)
        else:
            raise ValueError(f"unknown init scheme: {scheme!r}")
        layers.append((w, b))
    return MlpParams(layers)


def gen_synthetic(preset: ExperimentPreset, seed: int) -> Dataset:
    """Inputs uniform on [-1, 1]^d, targets from the preset's ground truth."""
    if preset.true_params is None:
        raise ValueError(f"preset {preset.name!r} has no ground-truth parameters")
    rng = np.random.default_rng(seed)
    d = preset.topology[0]
    inputs = rng.uniform(-1.0, 1.0, size=(preset.n_samples, d))
    _, targets = forward_pass(preset.true_params, Activation(), inputs)
    return Dataset(inputs=inputs, targets=targets)


def load_series_csv(path) -> np.ndarray:
    """Read an ordered value series from a "month,count" CSV with header."""
    values = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if lineno == 1 or not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"{path}: row {lineno}: expected 2 fields, got {len(parts)}")
            try:
                values.append(float(parts[1]))
            except ValueError:
                raise ParseError(
                    f"{path}: row {lineno}: cannot parse count {parts[1]!r}"
                ) from None
    if not values:
        raise EmptySeries(f"{path}: no data rows")
    return np.asarray(values, dtype=np.float64)


@dataclass(frozen=True)
class SeriesTransform:
    """Affine map used to normalise a series, kept for inversion."""

    min: float
    max: float
    lo: float = -0.8
    hi: float = 0.8

    def denormalize(self, values):
        values = np.asarray(values, dtype=np.float64)
        return self.min + (values - self.lo) * (self.max - self.min) / (self.hi - self.lo)


def normalize_series(series, lo=-0.8, hi=0.8):
    """Map [min, max] of the series affinely onto [lo, hi].

    The default target range keeps normalised values comfortably inside
    tanh's invertible zone (|atanh(0.8)| is about 1.1), so inversion of
    real-data targets never hits the clipping path.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise EmptySeries("cannot normalise an empty series")
    smin = float(series.min())
    smax = float(series.max())
    if smax == smin:
        raise DegenerateSeries("series is constant; normalisation undefined")
    transform = SeriesTransform(min=smin, max=smax, lo=lo, hi=hi)
    normalized = lo + (series - smin) * (hi - lo) / (smax - smin)
    return normalized, transform


def make_windows(series, input_len=3) -> Dataset:
    """Sliding windows: input_len successive values in, the next one out.

    A length-L series yields L - input_len samples.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.size <= input_len:
        raise SeriesTooShort(
            f"need more than {input_len} points, got {series.size}"
        )
    n = series.size - input_len
    inputs = np.empty((n, input_len))
    for offset in range(input_len):
        inputs[:, offset] = series[offset:offset + n]
    targets = series[input_len:]
    return Dataset(inputs=inputs, targets=targets.copy())


def airline_series() -> np.ndarray:
    """The packaged monthly airline passenger counts (144 months)."""
    ref = resources.files(__package__) / "data" / AIRLINE_RESOURCE
    with resources.as_file(ref) as path:
        return load_series_csv(path)


def build_dataset(preset: ExperimentPreset, data_seed: int) -> Dataset:
    """Dataset for a preset: synthetic draw, or the normalised windowed
    airline series (which ignores the seed; it is a fixed public set)."""
    if preset.true_params is not None:
        return gen_synthetic(preset, data_seed)
    normalized, _ = normalize_series(airline_series())
    return make_windows(normalized, input_len=3)
