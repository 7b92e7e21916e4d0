"""Training scalar-output tanh networks by iterative linear least squares,
with a from-scratch backprop/Adam baseline and an experiment harness."""

from .baseline import AdamState, adam_step, backprop_gradients, train_adam
from .datagen import (
    ExperimentPreset,
    InitScheme,
    PRESETS,
    build_dataset,
    gen_synthetic,
    get_preset,
    init_params,
    load_series_csv,
    make_windows,
    normalize_series,
)
from .harness import emit_csv, emit_svg, param_abs_error, run_experiment
from .ills import (
    DeviationSolution,
    IllsConfig,
    apply_hidden_update,
    build_deviation_system,
    deviations_to_delta_h,
    fit_layer_params,
    required_input_targets,
    run_epoch,
    solve_deviations,
    train_ills,
)
from .linalg import LeastSquaresSolution, lstsq, matvec, transpose
from .network import (
    Activation,
    Dataset,
    HiddenState,
    MlpParams,
    forward_pass,
    mse_loss,
    params_from_json,
    params_to_json,
)
from .traces import AggregateCurve, TrainTrace, aggregate_traces, divergence_epoch

__version__ = "0.1.0"
