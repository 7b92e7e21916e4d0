"""Result containers shared by the trainers and the experiment harness."""

from dataclasses import dataclass, replace

import numpy as np

# A run counts as diverged once its loss exceeds this multiple of the
# epoch-0 loss (or stops being finite).
DIVERGENCE_FACTOR = 10.0


@dataclass
class TrainTrace:
    """Loss series for one (algo, lr, init, seed, preset) cell.

    losses has length epochs + 1: the pre-update loss of each epoch plus
    the final post-training loss. param_abs_errors, when present, is
    aligned with losses. The cell-id fields are filled by the harness;
    trainers leave them None.
    """

    losses: np.ndarray
    param_abs_errors: np.ndarray | None = None
    preset: str | None = None
    algo: str | None = None
    init: str | None = None
    lr: float | None = None
    seed: int | None = None
    diverged_epoch: int | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_epoch is not None

    def cell_id(self):
        return (self.preset, self.algo, self.init, self.lr, self.seed)


def divergence_epoch(losses) -> int | None:
    """First epoch where the loss is non-finite or above 10x its start."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        return None
    threshold = DIVERGENCE_FACTOR * losses[0]
    for i, value in enumerate(losses):
        if not np.isfinite(value) or (np.isfinite(threshold) and value > threshold):
            return i
    return None


def with_cell_id(trace: TrainTrace, preset, algo, init, lr, seed) -> TrainTrace:
    """Attach the sweep-cell identity and the divergence flag."""
    return replace(
        trace,
        preset=preset,
        algo=algo,
        init=init,
        lr=lr,
        seed=seed,
        diverged_epoch=divergence_epoch(trace.losses),
    )


@dataclass
class AggregateCurve:
    """Pointwise mean/std of the traces sharing a (preset, algo, init, lr).

    std uses the population formula (divide by n): the seed set is a
    fixed design, not a sample.
    """

    preset: str
    algo: str
    init: str
    lr: float
    mean: np.ndarray
    std: np.ndarray
    n_seeds: int

    def cell_id(self):
        return (self.preset, self.algo, self.init, self.lr)


def aggregate_traces(traces) -> list:
    """Group traces by cell (minus seed) and average pointwise."""
    groups = {}
    for t in traces:
        groups.setdefault((t.preset, t.algo, t.init, t.lr), []).append(t)
    curves = []
    for (preset, algo, init, lr), members in sorted(groups.items()):
        stacked = np.vstack([m.losses for m in members])
        curves.append(
            AggregateCurve(
                preset=preset,
                algo=algo,
                init=init,
                lr=lr,
                mean=stacked.mean(axis=0),
                std=stacked.std(axis=0, ddof=0),
                n_seeds=stacked.shape[0],
            )
        )
    return curves
