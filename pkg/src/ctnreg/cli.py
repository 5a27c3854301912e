"""Command-line harness.

Subcommands: ``train`` (one fit), ``sweep`` (one fit per weight on a grid),
``compare`` (sweeps for several regularizer kinds on identical data),
``gen-synth`` (write synthetic train/test CSVs), and ``export-features``
(recompute model outputs for a dataset from saved weights).

Configuration comes from flat-key JSON (``--config``) with command-line
flags overriding file values.  Every run writes ``report.json`` plus the
delimited tables and PNG figures for its command into ``--out``.
"""

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, dnn, mlr, report
from .errors import ConfigError, InvalidInputError, NumericalError
from .regularizers import REGULARIZER_KINDS, RegularizerSpec

PAPER_LAMBDA_GRID = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)

DEFAULTS = {
    "model": "mlr",
    "reg": "none",
    "lam": 0.0,
    "mu": None,
    "train_csv": None,
    "test_csv": None,
    "label_col": "label",
    "standardize": False,
    "seed": 0,
    "out": "out",
    "workers": 1,
    "grid": list(PAPER_LAMBDA_GRID),
    "kinds": ["none", "l1", "l2", "tikhonov", "coupled"],
    "max_iters": 2000,
    "step_tol": 1e-4,
    "grad_tol": 1e-4,
    "hidden": [256],
    "outer_iters": 25,
    "epochs_per_outer": 2,
    "epochs": 100,
    "batch_size": 128,
    "r0": 0.01,
    "momentum": 0.9,
    "synth_train_per_class": None,
    "synth_test_per_class": None,
    "synth_classes": None,
    "synth_features": None,
    "synth_rank": None,
    "synth_noise": 0.0,
    "model_dir": None,
    "data_csv": None,
}


def _parse_floats(value):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(",") if v != ""]


def _parse_ints(value):
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v != ""]


def _parse_kinds(value):
    kinds = value if isinstance(value, (list, tuple)) else str(value).split(",")
    kinds = [k.strip() for k in kinds if k.strip()]
    for k in kinds:
        if k not in REGULARIZER_KINDS:
            raise ConfigError(f"unknown regularizer kind {k!r}")
    return kinds


@dataclass
class RunConfig:
    """Resolved run configuration; see DEFAULTS for the key set."""

    values: dict = field(default_factory=dict)

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key) from None

    def echo(self):
        """JSON-safe copy for the report."""
        return {k: self.values[k] for k in sorted(self.values)}


def resolve_config(args):
    """Merge defaults, the optional config file, and explicit flags."""
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad JSON in {path}: {exc}") from exc
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    values["grid"] = _parse_floats(values["grid"])
    values["hidden"] = _parse_ints(values["hidden"])
    values["kinds"] = _parse_kinds(values["kinds"])
    if values["model"] not in ("mlr", "mlp"):
        raise ConfigError(f"model must be mlr or mlp, got {values['model']!r}")
    if values["reg"] not in REGULARIZER_KINDS:
        raise ConfigError(f"unknown regularizer {values['reg']!r}")
    if values["mu"] is not None:
        values["mu"] = float(values["mu"])
        if values["model"] != "mlp":
            raise ConfigError("mu only applies to the mlp model")
    cfg = RunConfig(values=values)
    return cfg


def _label_col(cfg):
    col = cfg.label_col
    if isinstance(col, str):
        try:
            return int(col)
        except ValueError:
            return col
    return col


def _synth_requested(cfg):
    keys = ("synth_train_per_class", "synth_test_per_class", "synth_classes",
            "synth_features", "synth_rank")
    return any(cfg.values[k] is not None for k in keys)


def load_data(cfg):
    """Resolve (train, test-or-None) from CSV paths or the synthetic spec."""
    if cfg.train_csv:
        train = dataio.load_csv(cfg.train_csv, _label_col(cfg))
        test = None
        if cfg.test_csv:
            test = dataio.load_csv(
                cfg.test_csv, _label_col(cfg), class_names=train.class_names
            )
        return train, test
    if _synth_requested(cfg):
        needed = ("synth_train_per_class", "synth_test_per_class", "synth_classes",
                  "synth_features", "synth_rank")
        missing = [k for k in needed if cfg.values[k] is None]
        if missing:
            raise ConfigError(f"synthetic data spec incomplete; missing {missing}")
        return dataio.gen_synthetic_split(
            int(cfg.synth_train_per_class),
            int(cfg.synth_test_per_class),
            int(cfg.synth_classes),
            int(cfg.synth_features),
            int(cfg.synth_rank),
            float(cfg.synth_noise),
            int(cfg.seed),
        )
    raise ConfigError("no data: give --train-csv or a synthetic spec")


def _accuracy_from_logits(logits, y):
    return float(np.mean(np.argmax(logits, axis=1) == np.argmax(y, axis=1)))


def fit_one(model, kind, lam, mu, train, cfg):
    """Fit one model at one regularization weight; return (row, predictor).

    ``predictor(x) -> logits`` closes over the fitted parameters.  The row
    carries accuracies, trajectory, and stopping diagnostics.
    """
    reg = RegularizerSpec(kind=kind, lam=float(lam))
    if model == "mlr":
        w, fit_report = mlr.fit(
            train.x, train.y, reg,
            max_iters=int(cfg.max_iters),
            step_tol=float(cfg.step_tol),
            grad_tol=float(cfg.grad_tol),
        )
        trajectory = fit_report.objective_trajectory
        stop_reason = fit_report.stop_reason
        iterations = fit_report.iterations
        params = ("mlr", w)

        def predictor(x, w=w):
            return x @ w.T

    else:
        if kind == "coupled":
            if mu is None:
                raise ConfigError("the coupled mlp model needs --mu")
            theta, _, alt_report = dnn.alternating_minimize(
                train.x, train.y, float(lam), float(mu),
                hidden_sizes=tuple(cfg.hidden),
                max_outer=int(cfg.outer_iters),
                epochs_per_outer=int(cfg.epochs_per_outer),
                r0=float(cfg.r0),
                momentum=float(cfg.momentum),
                batch_size=int(cfg.batch_size),
                seed=int(cfg.seed),
            )
            trajectory = alt_report.objective_history
            stop_reason = alt_report.stop_reason
            iterations = alt_report.outer_iters
        else:
            theta, losses = dnn.fit_mlp_sgd(
                train.x, train.y,
                hidden_sizes=tuple(cfg.hidden),
                reg=reg,
                epochs=int(cfg.epochs),
                r0=float(cfg.r0),
                momentum=float(cfg.momentum),
                batch_size=int(cfg.batch_size),
                seed=int(cfg.seed),
            )
            trajectory = losses
            stop_reason = "epochs"
            iterations = int(cfg.epochs)
        params = ("mlp", theta)

        def predictor(x, theta=theta):
            return dnn.mlp_forward(theta, x)

    row = {
        "kind": kind,
        "lam": float(lam),
        "stop_reason": stop_reason,
        "iterations": iterations,
        "objective_trajectory": [float(v) for v in trajectory],
    }
    return row, predictor, params


def _evaluate(row, predictor, train, test):
    row["train_accuracy"] = _accuracy_from_logits(predictor(train.x), train.y)
    row["test_accuracy"] = (
        _accuracy_from_logits(predictor(test.x), test.y) if test is not None else None
    )
    return row


def _sweep_task(payload):
    """Worker for one grid point; importable so process pools can pickle it."""
    (model, kind, lam, mu, train, test, values) = payload
    cfg = RunConfig(values=values)
    try:
        row, predictor, params = fit_one(model, kind, lam, mu, train, cfg)
        _evaluate(row, predictor, train, test)
        return row, params
    except (InvalidInputError, NumericalError) as exc:
        return {"kind": kind, "lam": float(lam), "error": str(exc)}, None


def run_sweep(model, kind, mu, train, test, cfg):
    """One fit per grid weight; returns (rows, best_row, best_params)."""
    grid = sorted(float(v) for v in cfg.grid)
    if not grid:
        raise ConfigError("empty lambda grid")
    payloads = [(model, kind, lam, mu, train, test, cfg.values) for lam in grid]
    workers = int(cfg.workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_task, payloads))
    else:
        outcomes = [_sweep_task(p) for p in payloads]
    rows = []
    best_row, best_params = None, None
    metric = "test_accuracy" if test is not None else "train_accuracy"
    for row, params in outcomes:
        row["best"] = False
        rows.append(row)
        if "error" in row:
            continue
        # strict inequality keeps the smaller weight on ties (grid ascending)
        if best_row is None or row[metric] > best_row[metric]:
            best_row, best_params = row, params
    if best_row is None:
        raise NumericalError("every grid point failed")
    best_row["best"] = True
    return rows, best_row, best_params


def _save_model(out_dir, params, class_names, scaler):
    kind, obj = params
    if kind == "mlr":
        payload = {
            "model": "mlr",
            "w": [[float(v) for v in row] for row in obj],
            "class_names": class_names,
        }
        if scaler is not None:
            payload["standardize_mean"] = [float(v) for v in scaler.mean]
            payload["standardize_scale"] = [float(v) for v in scaler.scale]
        return report.write_json_report(Path(out_dir) / "model.json", payload)
    extra = {"class_names": class_names}
    if scaler is not None:
        extra["standardize_mean"] = [float(v) for v in scaler.mean]
        extra["standardize_scale"] = [float(v) for v in scaler.scale]
    return dnn.save_checkpoint(obj, Path(out_dir) / "checkpoint", extra=extra)


def _load_model(model_dir):
    """Load weights saved by ``train``; returns (predictor, class_names, scaler)."""
    model_dir = Path(model_dir)
    model_json = model_dir / "model.json"
    checkpoint = model_dir / "checkpoint"
    if model_json.exists():
        with open(model_json, encoding="utf-8") as fh:
            payload = json.load(fh)
        w = np.array(payload["w"], dtype=float)

        def predictor(x, w=w):
            return x @ w.T

        scaler = None
        if "standardize_mean" in payload:
            scaler = dataio.FeatureStandardizer(
                mean=np.array(payload["standardize_mean"]),
                scale=np.array(payload["standardize_scale"]),
            )
        return predictor, payload.get("class_names"), scaler
    if (checkpoint / "manifest.json").exists():
        theta, manifest = dnn.load_checkpoint(checkpoint)

        def predictor(x, theta=theta):
            return dnn.mlp_forward(theta, x)

        extra = manifest.get("extra", {})
        scaler = None
        if "standardize_mean" in extra:
            scaler = dataio.FeatureStandardizer(
                mean=np.array(extra["standardize_mean"]),
                scale=np.array(extra["standardize_scale"]),
            )
        return predictor, extra.get("class_names"), scaler
    raise ConfigError(f"no model.json or checkpoint/ under {model_dir}")


def _export_eval_features(out_dir, predictor, train, test):
    evaluation = test if test is not None else train
    features = predictor(evaluation.x)
    return dataio.export_features(
        features, evaluation.labels, Path(out_dir) / "features.csv"
    )


def cmd_train(cfg):
    t0 = time.perf_counter()
    out_dir = Path(cfg.out)
    train, test = load_data(cfg)
    scaler = None
    if cfg.standardize:
        train, scaler = dataio.standardize(train)
        if test is not None:
            test = scaler.apply(test)
    row, predictor, params = fit_one(
        cfg.model, cfg.reg, cfg.lam, cfg.mu, train, cfg
    )
    _evaluate(row, predictor, train, test)
    _export_eval_features(out_dir, predictor, train, test)
    _save_model(out_dir, params, train.class_names, scaler)
    report.plot_objective_trajectory(
        row["objective_trajectory"], out_dir / "trajectory.png",
        title=f"{cfg.model} / {cfg.reg}",
    )
    payload = {
        "command": "train",
        "config": cfg.echo(),
        "train_accuracy": row["train_accuracy"],
        "test_accuracy": row["test_accuracy"],
        "stop_reason": row["stop_reason"],
        "iterations": row["iterations"],
        "objective_trajectory": row["objective_trajectory"],
        "wall_clock_sec": time.perf_counter() - t0,
    }
    report.write_json_report(out_dir / "report.json", payload)
    test_text = (
        f"{row['test_accuracy']:.4f}" if row["test_accuracy"] is not None else "n/a"
    )
    print(
        f"train: {cfg.model}/{cfg.reg} lam={float(cfg.lam):g} "
        f"train_acc={row['train_accuracy']:.4f} test_acc={test_text} "
        f"({row['stop_reason']}, {row['iterations']} iters)"
    )
    return 0


SWEEP_COLUMNS = ("lam", "train_accuracy", "test_accuracy", "stop_reason",
                 "iterations", "best", "error")


def cmd_sweep(cfg):
    t0 = time.perf_counter()
    out_dir = Path(cfg.out)
    if cfg.reg == "none":
        raise ConfigError("sweep needs a weighted regularizer; 'none' has no weight")
    train, test = load_data(cfg)
    scaler = None
    if cfg.standardize:
        train, scaler = dataio.standardize(train)
        if test is not None:
            test = scaler.apply(test)
    rows, best_row, best_params = run_sweep(
        cfg.model, cfg.reg, cfg.mu, train, test, cfg
    )
    table_rows = [
        {k: row.get(k, "") for k in SWEEP_COLUMNS} for row in rows
    ]
    report.write_table_csv(out_dir / "sweep_table.csv", table_rows, SWEEP_COLUMNS)
    ok = [r for r in rows if "error" not in r]
    report.plot_sweep(
        [r["lam"] for r in ok],
        [r["train_accuracy"] for r in ok],
        [r["test_accuracy"] for r in ok] if test is not None
        else [r["train_accuracy"] for r in ok],
        out_dir / "sweep_accuracy.png",
        best_lambda=best_row["lam"],
    )

    def predictor(x, params=best_params):
        kind, obj = params
        return x @ obj.T if kind == "mlr" else dnn.mlp_forward(obj, x)

    _export_eval_features(out_dir, predictor, train, test)
    payload = {
        "command": "sweep",
        "config": cfg.echo(),
        "per_lambda": [
            {k: row.get(k) for k in SWEEP_COLUMNS if k in row} for row in rows
        ],
        "best_lambda": best_row["lam"],
        "best_train_accuracy": best_row["train_accuracy"],
        "best_test_accuracy": best_row["test_accuracy"],
        "wall_clock_sec": time.perf_counter() - t0,
    }
    report.write_json_report(out_dir / "report.json", payload)
    print(f"sweep: {cfg.model}/{cfg.reg} best lam={best_row['lam']:g} "
          f"train_acc={best_row['train_accuracy']:.4f} "
          f"test_acc={best_row['test_accuracy'] if best_row['test_accuracy'] is not None else float('nan'):.4f}")
    return 0


COMPARE_COLUMNS = ("kind", "train_accuracy", "test_accuracy", "best_lambda")


def _format_accuracy(value):
    return "n/a" if value is None else f"{100.0 * value:.2f}%"


def cmd_compare(cfg):
    t0 = time.perf_counter()
    out_dir = Path(cfg.out)
    kinds = cfg.kinds
    if len(kinds) < 2:
        raise ConfigError("compare needs at least 2 regularizer kinds")
    train, test = load_data(cfg)
    scaler = None
    if cfg.standardize:
        train, scaler = dataio.standardize(train)
        if test is not None:
            test = scaler.apply(test)
    table = []
    detail = {}
    for kind in kinds:
        if kind == "none":
            row, predictor, _ = fit_one(cfg.model, "none", 0.0, cfg.mu, train, cfg)
            _evaluate(row, predictor, train, test)
            table.append({
                "kind": kind,
                "train_accuracy": row["train_accuracy"],
                "test_accuracy": row["test_accuracy"],
                "best_lambda": 0.0,
            })
            detail[kind] = [dict(row, best=True)]
        else:
            rows, best_row, _ = run_sweep(cfg.model, kind, cfg.mu, train, test, cfg)
            table.append({
                "kind": kind,
                "train_accuracy": best_row["train_accuracy"],
                "test_accuracy": best_row["test_accuracy"],
                "best_lambda": best_row["lam"],
            })
            detail[kind] = [
                {k: row.get(k) for k in SWEEP_COLUMNS if k in row} for row in rows
            ]
    report.write_table_csv(out_dir / "compare_table.csv", table, COMPARE_COLUMNS)
    report.plot_compare(
        [r["kind"] for r in table],
        [r["train_accuracy"] for r in table],
        [r["test_accuracy"] if r["test_accuracy"] is not None else 0.0 for r in table],
        out_dir / "compare_accuracy.png",
    )
    payload = {
        "command": "compare",
        "config": cfg.echo(),
        "rows": table,
        "per_kind": detail,
        "wall_clock_sec": time.perf_counter() - t0,
    }
    report.write_json_report(out_dir / "report.json", payload)
    print(f"{'Model':<16}{'Training':>10}{'Testing':>10}  lambda")
    for r in table:
        name = cfg.model if r["kind"] == "none" else f"{cfg.model}-{r['kind']}"
        print(
            f"{name:<16}{_format_accuracy(r['train_accuracy']):>10}"
            f"{_format_accuracy(r['test_accuracy']):>10}  {r['best_lambda']:g}"
        )
    return 0


def cmd_gen_synth(cfg):
    out_dir = Path(cfg.out)
    if not _synth_requested(cfg):
        raise ConfigError("gen-synth needs the synth_* spec")
    train, test = load_data(RunConfig(values={**cfg.values, "train_csv": None}))
    dataio.write_csv(train, out_dir / "train.csv")
    dataio.write_csv(test, out_dir / "test.csv")
    print(f"gen-synth: wrote {train.n} train and {test.n} test rows to {out_dir}")
    return 0


def cmd_export_features(cfg):
    out_dir = Path(cfg.out)
    if not cfg.model_dir:
        raise ConfigError("export-features needs --model-dir")
    data_csv = cfg.data_csv or cfg.train_csv
    if not data_csv:
        raise ConfigError("export-features needs --data-csv")
    predictor, class_names, scaler = _load_model(cfg.model_dir)
    data = dataio.load_csv(data_csv, _label_col(cfg), class_names=class_names)
    if scaler is not None:
        data = scaler.apply(data)
    path = dataio.export_features(
        predictor(data.x), data.labels, out_dir / "features.csv"
    )
    print(f"export-features: wrote {data.n} rows to {path}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat-key JSON config; flags override it")
    common.add_argument("--model", choices=("mlr", "mlp"))
    common.add_argument("--reg", choices=REGULARIZER_KINDS)
    common.add_argument("--lambda", dest="lam", type=float,
                        help="regularizer weight")
    common.add_argument("--mu", type=float, help="penalty parameter (mlp only)")
    common.add_argument("--train-csv", dest="train_csv")
    common.add_argument("--test-csv", dest="test_csv")
    common.add_argument("--label-col", dest="label_col",
                        help="label column name or index")
    common.add_argument("--standardize", action="store_const", const=True,
                        default=None, help="center/scale features on train stats")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="parallel grid fits")
    common.add_argument("--grid", help="comma-separated lambda grid")
    common.add_argument("--kinds", help="comma-separated kinds for compare")
    common.add_argument("--max-iters", dest="max_iters", type=int)
    common.add_argument("--hidden", help="comma-separated hidden layer sizes")
    common.add_argument("--outer-iters", dest="outer_iters", type=int)
    common.add_argument("--epochs-per-outer", dest="epochs_per_outer", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--batch-size", dest="batch_size", type=int)
    common.add_argument("--r0", type=float, help="SGD base learning rate")
    common.add_argument("--momentum", type=float)
    common.add_argument("--synth-train-per-class", dest="synth_train_per_class", type=int)
    common.add_argument("--synth-test-per-class", dest="synth_test_per_class", type=int)
    common.add_argument("--synth-classes", dest="synth_classes", type=int)
    common.add_argument("--synth-features", dest="synth_features", type=int)
    common.add_argument("--synth-rank", dest="synth_rank", type=int)
    common.add_argument("--synth-noise", dest="synth_noise", type=float)
    common.add_argument("--model-dir", dest="model_dir")
    common.add_argument("--data-csv", dest="data_csv")

    parser = argparse.ArgumentParser(
        prog="ctnreg",
        description="Train and compare coupled-tensor-norm-regularized classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="fit one model").set_defaults(fn=cmd_train)
    sub.add_parser("sweep", parents=[common], help="fit over a lambda grid").set_defaults(fn=cmd_sweep)
    sub.add_parser("compare", parents=[common], help="sweep several regularizers").set_defaults(fn=cmd_compare)
    sub.add_parser("gen-synth", parents=[common], help="write synthetic CSVs").set_defaults(fn=cmd_gen_synth)
    sub.add_parser("export-features", parents=[common],
                   help="export model outputs for a dataset").set_defaults(fn=cmd_export_features)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.fn(cfg)
    except (InvalidInputError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
