"""Command-line interface: ``mipnn <command> [flags]``.

Exit codes: 0 success, 1 invalid configuration or a failed ``verify``, 2 the
training model is infeasible, 3 the time limit passed without a solution,
4 any other error (missing files, solver failures, parse errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from mipnn import __version__, network
from mipnn.data import Schema, fit_encode, load_csv, save_encoded, subsample, synthetic_tables, write_synthetic
from mipnn.errors import ConfigError, MipnnError
from mipnn.experiments import (
    MODELS,
    ExperimentConfig,
    load_datasets,
    run_experiment,
    summarize,
    train_network,
    write_results,
)
from mipnn.mip import OBJECTIVES, build_training_model, expected_counts, linearize_indicators
from mipnn.solve import Status, export_mps

log = logging.getLogger("mipnn")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NO_INCUMBENT, EXIT_ERROR = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v for v in text.replace(" ", "").split(",") if v]


def _optional_fraction(text: str):
    if text.lower() == "none":
        return None
    return float(text)


# -- configuration ---------------------------------------------------------------

# flag destination -> configuration key; flags default to None so only given ones override
SOLVER_FLAGS = {
    "hidden": "hidden",
    "time_limit": "time_limit",
    "accuracy_stop": "accuracy_stop",
    "backend": "backend",
    "solver_cmd": "solver_cmd",
    "form": "form",
    "data": "data",
    "margin": "margin",
    "eps": "eps",
    "pwl_spacing": "pwl_spacing",
    "warm_start": "warm_start",
    "learning_rate": "learning_rate",
    "epochs": "epochs",
    "batch_size": "batch_size",
}


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON configuration file; flags override its values")
    p.add_argument("--data", help="encoded dataset directory written by prep-data (default: bundled synthetic data)")
    p.add_argument("--hidden", type=_int_list, help="hidden layer widths, e.g. 16 or 8,8")
    p.add_argument("--time-limit", type=float, help="seconds per run (default 600)")
    p.add_argument("--accuracy-stop", type=_optional_fraction, help="stop at this training accuracy, or 'none'")
    p.add_argument("--backend", choices=("builtin", "external"))
    p.add_argument("--solver-cmd", help="external solver command template (default: $MIPNN_SOLVER_CMD)")
    p.add_argument("--form", choices=("indicator", "linearized"), help="model form for the built-in solver")
    p.add_argument("--margin", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--pwl-spacing", type=float)
    p.add_argument("--no-warm-start", dest="warm_start", action="store_const", const=False)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)


def _read_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    return doc


def _config(args, extra: dict) -> ExperimentConfig:
    doc = _read_config_file(args.config)
    for dest, key in SOLVER_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            doc[key] = value
    for key, value in extra.items():
        if value is not None:
            doc[key] = value
    return ExperimentConfig.from_dict(doc)


# -- commands ----------------------------------------------------------------------


def _pick(flag, doc: dict, key: str, default):
    """Flag value, else the first configured value, else ``default``."""
    if flag is not None:
        return flag
    value = doc.get(key)
    if isinstance(value, list):
        value = value[0] if value else None
    return default if value is None else value


def cmd_train(args) -> int:
    base = _read_config_file(args.config)
    model = _pick(args.objective, base, "models", "sat-margin")
    p = _pick(args.p, base, "p_values", 1)
    n = _pick(args.n, base, "sample_counts", 20)
    seed = _pick(args.seed, base, "seeds", 0)
    config = _config(args, {"models": [model], "p_values": [p], "sample_counts": [n], "seeds": [seed]})
    datasets = load_datasets(config.data)
    result = train_network(config, datasets, model, p, n, seed)
    record = result.record

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if result.network is not None:
        network.save(result.network, out / "network.json")
    if result.history is not None:
        result.history.save(out / "history.csv")
    (out / "run.json").write_text(json.dumps(record.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    acc = lambda v: "n/a" if v is None else f"{v:.4f}"
    print(
        f"{model} P={p} n={n} seed={seed}: status={record.status} objective={record.objective_value} "
        f"train_acc={acc(record.train_acc)} test_acc={acc(record.test_acc)} time={record.wall_time_s:.2f}s"
    )
    print(f"wrote {out}")
    if record.status == str(Status.INFEASIBLE):
        return EXIT_INFEASIBLE
    if result.network is None:
        return EXIT_NO_INCUMBENT if record.status == str(Status.TIME_LIMIT) else EXIT_ERROR
    return EXIT_OK


def cmd_eval(args) -> int:
    net = network.load(args.network)
    datasets = load_datasets(args.data)
    data = datasets.train if args.split == "train" else datasets.test
    value = network.accuracy(net, data, args.seed)
    print(json.dumps({"network": str(args.network), "split": args.split, "samples": len(data), "accuracy": value}))
    return EXIT_OK


def cmd_export(args) -> int:
    config = _config(args, {"models": [args.objective], "p_values": [args.p], "sample_counts": [args.n]})
    datasets = load_datasets(config.data)
    if args.n > len(datasets.train):
        raise ConfigError(f"{args.n} samples requested but the training set has {len(datasets.train)}")
    sub = subsample(datasets.train, args.n, args.seed)
    sizes = [sub.n_features, *config.hidden, sub.n_classes]
    pwl = config.pwl()
    model, _ = build_training_model(sub, sizes, args.p, args.objective, eps=config.eps, margin=config.margin, pwl=pwl)
    stats = model.stats()
    expected = expected_counts(sizes, args.n, args.objective, pwl)
    linear = linearize_indicators(model)
    export_mps(linear, args.out)
    print(f"architecture {sizes}, P={args.p}, {args.n} samples, objective {args.objective}")
    agree = True
    for key in ("variables", "binary", "integer", "continuous", "linear_constraints", "indicator_constraints"):
        same = stats[key] == expected[key]
        agree &= same
        print(f"  {key:22s} {stats[key]:>9d}  closed form {expected[key]:>9d}{'' if same else '  MISMATCH'}")
    rows = len(linear.constraints)
    agree &= rows == expected["linearized_constraints"]
    print(f"  {'rows after big-M':22s} {rows:>9d}  closed form {expected['linearized_constraints']:>9d}")
    print(f"wrote {args.out}")
    return EXIT_OK if agree else EXIT_ERROR


def _experiment(kind, args) -> int:
    extra = {
        "models": args.models if kind == "exp1" else None,
        "p_values": args.p,
        "sample_counts": args.n,
        "seeds": args.seeds,
        "jobs": args.jobs,
    }
    if kind == "exp2":
        defaults = {"models": ["sat-margin"], "p_values": [1, 3, 7, 15], "sample_counts": [10, 20]}
        doc = _read_config_file(args.config)
        for key, value in defaults.items():
            if key not in doc and extra.get(key) is None:
                extra[key] = value
    config = _config(args, extra)
    datasets = load_datasets(config.data)

    def progress(r):
        acc = "n/a" if r.train_acc is None else f"{r.train_acc:.3f}"
        print(f"  {r.model:12s} P={r.p:<3d} n={r.n_samples:<4d} seed={r.seed:<3d} {r.status:17s} train_acc={acc} "
              f"time={r.wall_time_s:.2f}s", flush=True)

    records = run_experiment(kind, config, datasets, progress=progress)
    paths = write_results(records, args.out, config, kind)
    print(summarize(records).to_string(index=False))
    print(f"wrote {paths['results']} and {paths['summary']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from mipnn.verify import run_verification

    return run_verification(
        arch=args.arch,
        p_bound=args.p,
        n_samples=args.samples,
        seeds=range(args.seed, args.seed + args.datasets),
        objectives=args.objectives,
        forms=("indicator", "linearized") if args.form == "both" else (args.form,),
        big_m_scale=args.bigm_scale,
        time_limit=args.time_limit,
        counterexample_path=args.counterexample,
    )


def _schema_path(text: str):
    if text == "adult":
        return resources.files("mipnn") / "schemas" / "adult.json"
    return Path(text)


def cmd_prep(args) -> int:
    out = Path(args.out)
    if args.synthetic:
        raw_dir = out / "raw"
        write_synthetic(raw_dir)
        train_raw, test_raw, schema = synthetic_tables()
    else:
        if not (args.train and args.test and args.schema):
            raise ConfigError("prep-data needs --train, --test and --schema (or --synthetic)")
        with _schema_path(args.schema).open(encoding="utf-8") as fh:
            doc = json.load(fh)
        schema = Schema.from_list(doc["columns"] if isinstance(doc, dict) else doc)
        header = not args.no_header
        train_raw = load_csv(args.train, schema, header=header)
        test_raw = load_csv(args.test, schema, header=header)
    train, test = fit_encode(train_raw, test_raw, schema)
    save_encoded(train, out / "train")
    save_encoded(test, out / "test")
    print(f"train: {len(train)} rows kept, {train_raw.dropped} dropped (missing), {train_raw.rejected + train.rejected} rejected")
    print(f"test:  {len(test)} rows kept, {test_raw.dropped} dropped (missing), {test_raw.rejected + test.rejected} rejected")
    print(f"{train.n_features} encoded features, classes {list(train.class_names)}")
    print(f"wrote {out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mipnn", description="Train integer-valued neural networks with mixed-integer programming.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one network")
    p.add_argument("--objective", choices=MODELS, help="training objective, or gd for the baseline")
    p.add_argument("--p", type=int, help="parameter bound P")
    p.add_argument("--n", type=int, help="training samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="mipnn-run", help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a saved network")
    p.add_argument("--network", required=True)
    p.add_argument("--data")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--seed", type=int, default=0, help="tie-break seed")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-mps", help="write the linearized training model as MPS")
    p.add_argument("--objective", choices=OBJECTIVES, default="sat-margin")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="MPS file to write")
    _add_config_flags(p)
    p.set_defaults(func=cmd_export)

    for name, help_text in (("exp1", "objectives and GD across sample counts"), ("exp2", "sat-margin across P values")):
        p = sub.add_parser(name, help=help_text)
        if name == "exp1":
            p.add_argument("--models", type=_str_list, help=f"subset of {','.join(MODELS)}")
        p.add_argument("--p", type=_int_list, help="parameter bounds" if name == "exp2" else "parameter bound for the MIP models")
        p.add_argument("--n", type=_int_list, help="sample counts, comma-separated")
        p.add_argument("--seeds", type=_int_list)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", default=f"mipnn-{name}", help="output directory")
        _add_config_flags(p)
        p.set_defaults(func=lambda a, kind=name: _experiment(kind, a))

    p = sub.add_parser("verify", help="compare the built-in solver with exhaustive enumeration")
    p.add_argument("--arch", type=_int_list, default=[2, 2, 2])
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--samples", type=int, default=3)
    p.add_argument("--datasets", type=int, default=5, help="number of random datasets")
    p.add_argument("--seed", type=int, default=0, help="seed of the first dataset")
    p.add_argument("--objectives", type=_str_list, default=list(OBJECTIVES))
    p.add_argument("--form", choices=("indicator", "linearized", "both"), default="both")
    p.add_argument("--bigm-scale", type=float, default=1.0, help="fault injection: scale every big-M")
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--counterexample", help="also write the first counterexample to this JSON file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("prep-data", help="encode CSV train/test files for training")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--schema", help="schema JSON file, or 'adult' for the bundled Adult schema")
    p.add_argument("--no-header", action="store_true", help="the CSV files have no header row")
    p.add_argument("--synthetic", action="store_true", help="encode the bundled synthetic dataset instead")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mipnn: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MipnnError, ValueError, OSError) as exc:
        print(f"mipnn: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
