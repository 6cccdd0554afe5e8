"""Command-line pipeline: ingest -> features -> tune/train -> evaluate/predict.

Every stage reads and writes plain files. Outputs are computed fully in
memory and only then written, so a failing command leaves no partial
artifacts. Exit codes: 0 ok, 2 validation error, 3 data error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from tickforge import eval_report, features, gbtree, market_data, synthetic, tuning
from tickforge.errors import DataError, TickforgeError, ValidationError

log = logging.getLogger("tickforge")

DEFAULT_INTERVAL_MS = 900_000
DEFAULT_TRAIN_FRACTION = 0.8
DEFAULT_HORIZON = 1
DEFAULT_CV_K = 3
DEFAULT_SEED = 42
SEED_ENV = "TICKFORGE_SEED"

EXIT_OK, EXIT_VALIDATION, EXIT_DATA, EXIT_IO = 0, 2, 3, 4


# -- helpers -----------------------------------------------------------------

def _read(path) -> bytes:
    return Path(path).read_bytes()


def _write_all(files: dict[Path, str]) -> None:
    """Write each file via a temp file + rename."""
    for path, text in files.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise


def meta_path(features_path) -> Path:
    p = Path(features_path)
    return p.with_name(p.stem + ".meta.json")


def resolve_seed(cli_seed: int | None, config_seed: int | None = None) -> int:
    """``--seed`` beats ``$TICKFORGE_SEED`` beats the params file beats 42."""
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return DEFAULT_SEED if config_seed is None else config_seed


def load_features(path, horizon: int | None = None) -> features.FeatureMatrix:
    if horizon is None:
        meta = meta_path(path)
        horizon = json.loads(meta.read_text())["horizon"] if meta.exists() else DEFAULT_HORIZON
    return features.from_csv(_read(path), horizon=horizon)


def split_features(fm: features.FeatureMatrix, train_fraction: float):
    sp = market_data.chronological_split(len(fm), train_fraction)
    return fm.slice(slice(0, sp.m_train)), fm.slice(slice(sp.m_train, None))


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_params(source: str, overrides: list[str] | None = None) -> gbtree.Hyperparams:
    """``paper-best``, ``default``, or a JSON file of hyperparameters."""
    if source == "paper-best":
        d = gbtree.BEST_PRESET.to_dict()
    elif source == "default":
        d = gbtree.Hyperparams().to_dict()
    else:
        try:
            d = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"params file {source} is not valid JSON: {exc}") from None
        d = d.get("params", d)
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        d[key.strip()] = _parse_value(value)
    return gbtree.Hyperparams.from_dict(d)


def train_model(fm: features.FeatureMatrix, hp: gbtree.Hyperparams,
                train_fraction: float) -> tuple[gbtree.GbtModel, features.FeatureMatrix]:
    train, _ = split_features(fm, train_fraction)
    X, scaler = features.fit_transform(train.rows)
    model = gbtree.fit(X, train.targets, hp)
    model = gbtree.with_metadata(model, scaler=scaler, feature_names=fm.feature_names,
                                 horizon=fm.horizon, train_fraction=train_fraction)
    return model, train


def check_columns(model: gbtree.GbtModel, fm: features.FeatureMatrix) -> None:
    if len(fm.feature_names) != model.n_features or (
            model.feature_names and tuple(model.feature_names) != tuple(fm.feature_names)):
        raise DataError(
            f"dimension mismatch: model expects {model.n_features} features "
            f"{list(model.feature_names)}, file has {list(fm.feature_names)}"
        )


def evaluate_model(model: gbtree.GbtModel, fm: features.FeatureMatrix,
                   subset: str = "test") -> eval_report.EvalReport:
    check_columns(model, fm)
    if subset != "all":
        if model.train_fraction is None:
            raise ValidationError("model has no train_fraction; use --subset all")
        train, test = split_features(fm, model.train_fraction)
        fm = train if subset == "train" else test
    pred = model.predict_raw(fm.rows)
    return eval_report.evaluate(fm.targets, pred, fm.timestamps)


# -- subcommands -------------------------------------------------------------

def cmd_ingest(args) -> int:
    raw = _read(args.input)
    fmt = args.format or ("csv" if str(args.input).lower().endswith(".csv") else "json")
    parse = market_data.parse_candles_csv if fmt == "csv" else market_data.parse_kline_json
    series = parse(raw, interval_ms=args.interval_ms, allow_gaps=args.allow_gaps)
    if series.gaps:
        log.warning("%d timestamp gap(s) kept at indices %s", len(series.gaps), list(series.gaps[:10]))
    _write_all({Path(args.output): market_data.to_csv(series)})
    print(f"wrote {len(series)} candles to {args.output}")
    return EXIT_OK


def cmd_synth(args) -> int:
    text = synthetic.generate_kline_json(args.n, seed=args.seed)
    _write_all({Path(args.output): text + "\n"})
    print(f"wrote {args.n} synthetic klines to {args.output}")
    return EXIT_OK


def cmd_features(args) -> int:
    series = market_data.parse_candles_csv(_read(args.input), interval_ms=args.interval_ms,
                                           allow_gaps=args.allow_gaps)
    fm = features.assemble(series, args.horizon)
    out = Path(args.output)
    meta = {"horizon": fm.horizon, "interval_ms": series.interval_ms, "rows": len(fm)}
    _write_all({out: features.to_csv(fm), meta_path(out): json.dumps(meta, indent=2) + "\n"})
    print(f"wrote {len(fm)} feature rows (horizon={fm.horizon}) to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    hp = load_params(args.params, args.set)
    hp = gbtree.Hyperparams.from_dict(hp.to_dict(), seed=resolve_seed(args.seed, hp.seed))
    fm = load_features(args.input, args.horizon)
    model, train = train_model(fm, hp, args.train_fraction)
    report = evaluate_model(model, fm, "train")
    out = Path(args.output)
    report_path = Path(args.report) if args.report else out.with_name("train_report.json")
    train_report = {"subset": "train", **report.metrics(), "hyperparams": hp.to_dict()}
    _write_all({out: gbtree.dumps(model),
                report_path: json.dumps(train_report, indent=2) + "\n"})
    print(f"trained {len(model.trees)} trees on {len(train)} rows -> {out}")
    print(eval_report.format_table(report))
    return EXIT_OK


def parse_cv(text: str, k: int):
    if text == "expanding":
        return "expanding", k
    style, _, kk = text.partition(":")
    if style != "shuffled":
        raise ValidationError(f"--cv must be 'expanding' or 'shuffled:k', got {text!r}")
    try:
        return "shuffled", int(kk) if kk else k
    except ValueError:
        raise ValidationError(f"bad fold count in --cv {text!r}") from None


def cmd_tune(args) -> int:
    grid = tuning.reference_grid() if args.grid == "paper" else tuning.ParamGrid.from_json(_read(args.grid))
    style, k = parse_cv(args.cv, args.cv_k)
    seed = resolve_seed(args.seed)
    fm = load_features(args.input)
    train, _ = split_features(fm, args.train_fraction)
    if style == "expanding":
        plan = tuning.make_cv_plan(len(train), k)
    else:
        plan = tuning.make_shuffled_plan(len(train), k, seed)
    result = tuning.grid_search(train.rows, train.targets, grid, plan, seed=seed, jobs=args.jobs)
    out = Path(args.out_dir)
    best = {"params": result.best_params.to_dict(), "mean_cv_rmse": result.best_rmse,
            "cv": {"style": style, "k": k}, "failures": [list(f) for f in result.failures]}
    _write_all({out / "leaderboard.csv": tuning.leaderboard_csv(result),
                out / "best_params.json": json.dumps(best, indent=2) + "\n"})
    print(f"{len(result.leaderboard)} candidates scored; best mean CV RMSE {result.best_rmse:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = gbtree.loads(_read(args.model))
    fm = load_features(args.input, model.horizon)
    report = evaluate_model(model, fm, args.subset)
    eval_report.export_report(report, args.out_dir)
    print(eval_report.format_table(report))
    return EXIT_OK


def cmd_predict(args) -> int:
    model = gbtree.loads(_read(args.model))
    fm = load_features(args.input, model.horizon)
    check_columns(model, fm)
    pred = model.predict_raw(fm.rows)
    lines = ["timestamp,predicted"] + [f"{t},{p!r}" for t, p in zip(fm.timestamps.tolist(), pred.tolist())]
    _write_all({Path(args.output): "\n".join(lines) + "\n"})
    print(f"wrote {len(pred)} predictions to {args.output}")
    return EXIT_OK


def cmd_run(args) -> int:
    """All stages in one go, writing every intermediate file into ``out_dir``."""
    out = Path(args.out_dir)
    fmt = args.format or ("csv" if str(args.input).lower().endswith(".csv") else "json")
    parse = market_data.parse_candles_csv if fmt == "csv" else market_data.parse_kline_json
    series = parse(_read(args.input), interval_ms=args.interval_ms, allow_gaps=args.allow_gaps)
    fm = features.assemble(series, args.horizon)
    hp = load_params(args.params, args.set)
    hp = gbtree.Hyperparams.from_dict(hp.to_dict(), seed=resolve_seed(args.seed, hp.seed))
    model, _ = train_model(fm, hp, args.train_fraction)
    report = evaluate_model(model, fm, "test")
    _write_all({
        out / "candles.csv": market_data.to_csv(series),
        out / "features.csv": features.to_csv(fm),
        meta_path(out / "features.csv"): json.dumps(
            {"horizon": fm.horizon, "interval_ms": series.interval_ms, "rows": len(fm)}, indent=2) + "\n",
        out / "model.json": gbtree.dumps(model),
    })
    eval_report.export_report(report, out)
    print(eval_report.format_table(report))
    return EXIT_OK


# -- argument parsing --------------------------------------------------------

def _add_ingest_opts(p):
    p.add_argument("--format", choices=("json", "csv"), help="input format (default: by extension)")
    p.add_argument("--interval-ms", type=int, default=DEFAULT_INTERVAL_MS)
    p.add_argument("--allow-gaps", action="store_true", help="keep series with timestamp gaps")


def _add_params_opts(p):
    p.add_argument("--params", default="paper-best",
                   help="'paper-best', 'default', or a JSON file (e.g. best_params.json)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one hyperparameter, e.g. --set learning_rate=0.1")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tickforge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse Binance kline JSON or candle CSV into canonical CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="candles.csv")
    _add_ingest_opts(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic kline JSON file")
    p.add_argument("-n", type=int, default=5_000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("-o", "--output", default="klines.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="build the 18-column feature CSV from candles.csv")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="features.csv")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    p.add_argument("--interval-ms", type=int, default=DEFAULT_INTERVAL_MS)
    p.add_argument("--allow-gaps", action="store_true")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit the boosted-tree model on the training split")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="model.json")
    p.add_argument("--report", help="train metrics JSON (default: train_report.json next to model)")
    p.add_argument("--horizon", type=int, default=None, help="override the features sidecar")
    _add_params_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="grid search with chronological CV")
    p.add_argument("input")
    p.add_argument("--grid", default="paper", help="'paper' or a JSON grid file")
    p.add_argument("--cv-k", type=int, default=DEFAULT_CV_K)
    p.add_argument("--cv", default="expanding", help="'expanding' or 'shuffled:k'")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="metrics and plot data for a trained model")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("--subset", choices=("test", "train", "all"), default="test")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="write predictions for every feature row")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="predictions.csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("run", help="ingest, features, train and evaluate in one step")
    p.add_argument("input")
    p.add_argument("--out-dir", default="run")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    _add_ingest_opts(p)
    _add_params_opts(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TickforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
