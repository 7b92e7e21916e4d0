"""Experiment runner and CLI.

Sweeps algorithm x learning-rate x initialisation x seed over a preset,
aggregates loss curves over seeds, and writes deterministic CSV and SVG
artifacts. For a fixed (init, seed) every cell starts from the one shared
parameter draw, so epoch-0 losses agree bitwise across cells.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import baseline, datagen, ills
from .errors import NonFiniteInput, TopologyMismatch
from .network import Activation, params_from_json, params_to_json
from .traces import AggregateCurve, TrainTrace, aggregate_traces, with_cell_id

ALGO_ILLS = "ills"
ALGO_ADAM = "adam"

DEFAULT_ILLS_RHOS = [0.01, 0.05, 0.1]
DEFAULT_ADAM_LRS = [1e-4, 5e-4, 1e-3, 1e-2]
DEFAULT_SEEDS = list(range(10))
DEFAULT_EPOCHS = 10_000


class ConfigError(ValueError):
    """Invalid sweep configuration or CLI arguments."""


def param_abs_error(estimated, truth) -> float:
    """Euclidean distance between elementwise |parameters|.

    Parameters are flattened in a fixed order: layer by layer, weights in
    row-major order then biases. Comparing absolute values makes the
    metric blind to the sign-flip symmetry of odd activations, under
    which (theta, -theta) pairs realise the same function.
    """
    if estimated.topology != truth.topology:
        raise TopologyMismatch(
            f"topologies differ: {estimated.topology} vs {truth.topology}"
        )
    diffs = []
    for (we, be), (wt, bt) in zip(estimated.layers, truth.layers):
        diffs.append((np.abs(we) - np.abs(wt)).ravel())
        diffs.append(np.abs(be) - np.abs(bt))
    return float(np.linalg.norm(np.concatenate(diffs)))


def _lr_grid(lrs, algos):
    """Accept one shared learning-rate list or a per-algorithm mapping."""
    if isinstance(lrs, dict):
        grid = {}
        for algo in algos:
            if algo not in lrs or not lrs[algo]:
                raise ConfigError(f"no learning rates configured for algo {algo!r}")
            grid[algo] = [float(v) for v in lrs[algo]]
        return grid
    lrs = [float(v) for v in lrs]
    if not lrs:
        raise ConfigError("empty learning-rate list")
    return {algo: lrs for algo in algos}


def _run_cell(algo, lr, init_label, seed, epochs, start_params, data, truth):
    act = Activation()
    hook = None
    if truth is not None:
        hook = lambda p: param_abs_error(p, truth)
    if algo == ALGO_ILLS:
        cfg = ills.IllsConfig(rho=lr, max_epochs=epochs)
        _, trace = ills.train_ills(start_params, act, data, cfg, param_hook=hook)
    elif algo == ALGO_ADAM:
        _, trace = baseline.train_adam(
            start_params, act, data, lr, epochs, seed, param_hook=hook
        )
    else:
        raise ConfigError(f"unknown algorithm {algo!r}")
    return trace


def run_experiment(preset, algos, lrs, inits, seeds, epochs,
                   data_seed=0, workers=1):
    """Run the full sweep grid; returns (traces, aggregate curves).

    ``preset`` may be a name or an ExperimentPreset. ``lrs`` is a list
    shared by all algorithms or a mapping {algo: [rates]}. Each (init,
    seed) pair draws ONE initial parameter set handed to every (algo, lr)
    cell. Divergent cells are flagged on their traces, never fatal.
    """
    if isinstance(preset, str):
        preset = datagen.get_preset(preset)
    algos = list(algos)
    inits = list(inits)
    seeds = [int(s) for s in seeds]
    if not algos or not inits or not seeds:
        raise ConfigError("algos, inits and seeds must all be non-empty")
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    grid = _lr_grid(lrs, algos)
    init_schemes = {label: datagen.InitScheme(label) for label in inits}

    data = datagen.build_dataset(preset, data_seed)
    truth = preset.true_params

    jobs = []
    for init_label, scheme in init_schemes.items():
        for seed in seeds:
            start = datagen.init_params(preset.topology, scheme, seed)
            for algo in algos:
                for lr in grid[algo]:
                    jobs.append((algo, lr, init_label, seed, start))

    def run(job):
        algo, lr, init_label, seed, start = job
        trace = _run_cell(algo, lr, init_label, seed, epochs, start, data, truth)
        return with_cell_id(trace, preset.name, algo, init_label, lr, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(run, jobs))
    else:
        traces = [run(job) for job in jobs]

    traces.sort(key=TrainTrace.cell_id)
    return traces, aggregate_traces(traces)


def _fmt(value) -> str:
    """Shortest round-trip decimal form, for byte-stable CSV output."""
    return repr(float(value))


def emit_csv(traces, aggregates, out_dir):
    """Write traces.csv and aggregates.csv; returns the file paths."""
    if not traces or not aggregates:
        raise ValueError("nothing to write")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with_errors = any(t.param_abs_errors is not None for t in traces)
    traces_path = out_dir / "traces.csv"
    with open(traces_path, "w", encoding="utf-8", newline="\n") as f:
        header = "preset,algo,init,lr,seed,epoch,loss"
        f.write(header + (",param_abs_error\n" if with_errors else "\n"))
        for t in sorted(traces, key=TrainTrace.cell_id):
            prefix = f"{t.preset},{t.algo},{t.init},{_fmt(t.lr)},{t.seed}"
            for epoch, loss in enumerate(t.losses):
                row = f"{prefix},{epoch},{_fmt(loss)}"
                if with_errors:
                    err = "" if t.param_abs_errors is None else _fmt(t.param_abs_errors[epoch])
                    row += f",{err}"
                f.write(row + "\n")

    agg_path = out_dir / "aggregates.csv"
    with open(agg_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("preset,algo,init,lr,epoch,mean_loss,std_loss,n_seeds\n")
        for c in sorted(aggregates, key=AggregateCurve.cell_id):
            prefix = f"{c.preset},{c.algo},{c.init},{_fmt(c.lr)}"
            for epoch in range(len(c.mean)):
                f.write(
                    f"{prefix},{epoch},{_fmt(c.mean[epoch])},"
                    f"{_fmt(c.std[epoch])},{c.n_seeds}\n"
                )
    return [traces_path, agg_path]


_PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
]

_SVG_W, _SVG_H = 760, 480
_ML, _MR, _MT, _MB = 70, 190, 30, 50


def emit_svg(aggregates, out_path):
    """Render aggregate loss curves: one polyline per curve plus a
    translucent +-1 std band, on a logarithmic epoch axis."""
    aggregates = sorted(aggregates, key=AggregateCurve.cell_id)
    if not aggregates:
        raise ValueError("nothing to plot")

    # Epochs are plotted as log10(epoch + 1) so epoch 0 has a home.
    n_points = max(len(c.mean) for c in aggregates)
    xmax = max(np.log10(n_points), 1e-9)

    los, his = [], []
    for c in aggregates:
        lo = c.mean - c.std
        hi = c.mean + c.std
        los.append(lo[np.isfinite(lo)])
        his.append(hi[np.isfinite(hi)])
    los = np.concatenate(los) if any(a.size for a in los) else np.array([0.0])
    his = np.concatenate(his) if any(a.size for a in his) else np.array([1.0])
    ymin = float(los.min()) if los.size else 0.0
    ymax = float(his.max()) if his.size else 1.0
    if ymax <= ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    pad = 0.05 * (ymax - ymin)
    ymin -= pad
    ymax += pad

    plot_w = _SVG_W - _ML - _MR
    plot_h = _SVG_H - _MT - _MB

    def sx(epoch):
        return _ML + plot_w * np.log10(epoch + 1.0) / xmax

    def sy(value):
        return _MT + plot_h * (ymax - value) / (ymax - ymin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{_ML}" y1="{_MT + plot_h}" x2="{_ML + plot_w}" y2="{_MT + plot_h}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + plot_h}" stroke="black"/>',
    ]

    # Decade ticks on the epoch axis.
    decade = 1
    while decade <= n_points:
        x = sx(decade - 1)
        parts.append(
            f'<line x1="{x:.2f}" y1="{_MT + plot_h}" x2="{x:.2f}" y2="{_MT + plot_h + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{_MT + plot_h + 18}" font-size="11" text-anchor="middle">{decade - 1}</text>'
        )
        decade *= 10
    for frac in (0.0, 0.5, 1.0):
        value = ymin + frac * (ymax - ymin)
        y = sy(value)
        parts.append(
            f'<line x1="{_ML - 5}" y1="{y:.2f}" x2="{_ML}" y2="{y:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{value:.3g}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w / 2:.2f}" y="{_SVG_H - 12}" font-size="12" text-anchor="middle">epoch</text>'
    )
    parts.append(
        f'<text x="16" y="{_MT + plot_h / 2:.2f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {_MT + plot_h / 2:.2f})">training loss</text>'
    )

    for idx, c in enumerate(aggregates):
        color = _PALETTE[idx % len(_PALETTE)]
        epochs = np.arange(len(c.mean))
        finite = np.isfinite(c.mean) & np.isfinite(c.std)
        e = epochs[finite]
        mean = c.mean[finite]
        std = c.std[finite]
        if e.size:
            upper = [f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(e, mean + std)]
            lower = [f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(e[::-1], (mean - std)[::-1])]
            parts.append(
                f'<polygon points="{" ".join(upper + lower)}" fill="{color}" '
                'fill-opacity="0.18" stroke="none"/>'
            )
            pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(e, mean))
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        label = f"{c.algo} lr={c.lr:g} init={c.init}"
        ly = _MT + 16 * (idx + 1)
        lx = _ML + plot_w + 14
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="3"/>'
        )
        parts.append(
            f'<text x="{lx + 24}" y="{ly}" font-size="11">{label}</text>'
        )

    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return out_path


def load_aggregates_csv(path):
    """Read back an aggregates.csv written by emit_csv."""
    rows = {}
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        expected = ["preset", "algo", "init", "lr", "epoch", "mean_loss", "std_loss", "n_seeds"]
        if header != expected:
            raise ConfigError(f"{path}: unexpected header {header}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            preset, algo, init, lr, epoch, mean, std, n_seeds = line.split(",")
            key = (preset, algo, init, float(lr), int(n_seeds))
            rows.setdefault(key, []).append((int(epoch), float(mean), float(std)))
    curves = []
    for (preset, algo, init, lr, n_seeds), entries in sorted(rows.items()):
        entries.sort()
        curves.append(
            AggregateCurve(
                preset=preset,
                algo=algo,
                init=init,
                lr=lr,
                mean=np.array([e[1] for e in entries]),
                std=np.array([e[2] for e in entries]),
                n_seeds=n_seeds,
            )
        )
    return curves


def load_experiment_config(path):
    """Parse a TOML sweep description, applying the default grids."""
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "preset" not in doc:
        raise ConfigError(f"{path}: missing required key 'preset'")
    algos = doc.get("algos", [ALGO_ILLS, ALGO_ADAM])
    lrs = doc.get("lrs")
    if lrs is None:
        lrs = {ALGO_ILLS: DEFAULT_ILLS_RHOS, ALGO_ADAM: DEFAULT_ADAM_LRS}
        lrs = {a: lrs[a] for a in algos if a in lrs}
    return {
        "preset": doc["preset"],
        "algos": algos,
        "lrs": lrs,
        "inits": doc.get("inits", [s.value for s in datagen.InitScheme]),
        "seeds": doc.get("seeds", DEFAULT_SEEDS),
        "epochs": int(doc.get("epochs", DEFAULT_EPOCHS)),
        "data_seed": int(doc.get("data_seed", 0)),
        "workers": int(doc.get("workers", 1)),
    }


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser():
    parser = _Parser(prog="illsnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a preset's dataset as CSV")
    p.add_argument("--preset", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-json", default=None,
                   help="JSON parameter file overriding the preset's ground truth")
    p.add_argument("--dump-truth", default=None,
                   help="also write the ground-truth parameters as JSON")

    p = sub.add_parser("train", help="train one sweep cell")
    p.add_argument("--preset", required=True)
    p.add_argument("--algo", required=True, choices=[ALGO_ILLS, ALGO_ADAM])
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--init", required=True,
                   choices=[s.value for s in datagen.InitScheme])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--save-params", default=None,
                   help="write the final parameters as JSON")

    p = sub.add_parser("experiment", help="run a sweep described by a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("plot", help="render an aggregates.csv as SVG")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    return parser


def _cmd_gen_data(args):
    preset = datagen.get_preset(args.preset)
    if args.truth_json is not None:
        truth = params_from_json(Path(args.truth_json).read_text(encoding="utf-8"))
        preset = datagen.ExperimentPreset(
            preset.name, truth.topology, truth, preset.n_samples
        )
    if args.dump_truth is not None:
        if preset.true_params is None:
            raise ConfigError(f"preset {preset.name!r} has no ground-truth parameters")
        Path(args.dump_truth).write_text(
            params_to_json(preset.true_params), encoding="utf-8"
        )
    data = datagen.build_dataset(preset, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    d = data.inputs.shape[1]
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(f"x{i + 1}" for i in range(d)) + ",y\n")
        for row, target in zip(data.inputs, data.targets):
            f.write(",".join(_fmt(v) for v in row) + f",{_fmt(target)}\n")
    return 0


def _cmd_train(args):
    preset = datagen.get_preset(args.preset)
    data = datagen.build_dataset(preset, args.data_seed)
    scheme = datagen.InitScheme(args.init)
    start = datagen.init_params(preset.topology, scheme, args.seed)
    act = Activation()
    hook = None
    if preset.true_params is not None:
        truth = preset.true_params
        hook = lambda p: param_abs_error(p, truth)
    if args.algo == ALGO_ILLS:
        cfg = ills.IllsConfig(rho=args.lr, max_epochs=args.epochs)
        params, trace = ills.train_ills(start, act, data, cfg, param_hook=hook)
    else:
        params, trace = baseline.train_adam(
            start, act, data, args.lr, args.epochs, args.seed, param_hook=hook
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        f.write("epoch,loss" + (",param_abs_error\n" if hook else "\n"))
        for epoch, loss in enumerate(trace.losses):
            row = f"{epoch},{_fmt(loss)}"
            if hook:
                row += f",{_fmt(trace.param_abs_errors[epoch])}"
            f.write(row + "\n")
    if args.save_params:
        Path(args.save_params).write_text(params_to_json(params), encoding="utf-8")
    return 0


def _cmd_experiment(args):
    cfg = load_experiment_config(args.config)
    if args.workers is not None:
        cfg["workers"] = args.workers
    traces, aggregates = run_experiment(
        cfg["preset"], cfg["algos"], cfg["lrs"], cfg["inits"], cfg["seeds"],
        cfg["epochs"], data_seed=cfg["data_seed"], workers=cfg["workers"],
    )
    paths = emit_csv(traces, aggregates, args.out_dir)
    for path in paths:
        print(path)
    return 0


def _cmd_plot(args):
    curves = load_aggregates_csv(args.infile)
    out = emit_svg(curves, args.out)
    print(out)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "gen-data": _cmd_gen_data,
            "train": _cmd_train,
            "experiment": _cmd_experiment,
            "plot": _cmd_plot,
        }[args.command]
        return handler(args)
    except (NonFiniteInput, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
