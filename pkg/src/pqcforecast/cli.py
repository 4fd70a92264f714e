"""Command-line front end: synth, analyze, prepare, train, evaluate, report."""

import argparse
import glob
import json
import logging
import os
import sys

from . import __version__, bilstm, data, metrics, pqc, signals
from .errors import DataError, ForecastError, SchemaError
from .optim import TrainConfig

log = logging.getLogger("pqcforecast")

MODEL_TAGS = {"qnn": "QNN", "bilstm": "BiLSTM"}
TABLE1_ID = "table1"
# output locations and plumbing stay out of embedded configs so reruns into
# different paths are byte-identical
_UNRECORDED = ("func", "verbose", "parser", "out", "loss", "spectrum", "predictions", "best")


def _write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, doc):
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    # re-read so a zero exit status means the artifact parses
    with open(path) as fh:
        json.load(fh)


def _config(args, **extra):
    cfg = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in _UNRECORDED
    }
    cfg.update(extra)
    cfg["package_version"] = __version__
    return cfg


def _load_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open {what}: {exc.strerror}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {what} is not valid JSON ({exc})") from exc


def cmd_synth(args):
    if args.spec:
        doc = _load_json(args.spec, "signal spec")
        doc["seed"] = args.seed
        spec = signals.SignalSpec.from_dict(doc)
        label = args.spec
    elif args.signal_id == TABLE1_ID:
        n = args.n_points or signals.TABLE1_N
        spec = signals.SignalSpec(signals.table1_components(n), n_points=n, seed=args.seed)
        label = TABLE1_ID
    elif args.signal_id in signals.DISTORTIONS:
        spec = signals.preset(
            args.signal_id, seed=args.seed, n_points=args.n_points or signals.DEFAULT_N_POINTS
        )
        label = args.signal_id
    else:
        ids = ", ".join(signals.SIGNAL_IDS + (TABLE1_ID,))
        args.parser.error(f"unknown signal id {args.signal_id!r} (choose from {ids})")
    series = signals.synthesize(spec)
    meta = _config(args, signal=label, spec=spec.to_dict())
    signals.write_series_csv(args.out, series, meta)
    log.info("wrote %d points to %s", len(series), args.out)


def cmd_analyze(args):
    series = signals.read_series_csv(args.input)
    if args.kind == "periodogram":
        result = signals.periodogram(series)
        peaks = signals.extract_peaks(result, args.threshold)
        meta = _config(args, n_used=result.n_used, truncated=result.truncated)
        signals.write_peaks_csv(args.out, peaks, meta)
        if args.spectrum:
            signals.write_periodogram_csv(args.spectrum, result, meta)
        log.info("%d peaks above %g", len(peaks), args.threshold)
    else:
        result = signals.cwt(series, args.noct, args.nvoc, args.alpha)
        meta = _config(args, edge_samples=result.edge.tolist())
        signals.write_cwt_csv(args.out, result, meta)
        log.info("%d scales x %d shifts", *result.coefficients.shape)


def cmd_prepare(args):
    if args.prices:
        prices = data.load_prices(args.prices, args.column)
        series = signals.percent_change(prices) if args.percent_change else signals.Series(prices)
    else:
        series = signals.read_series_csv(args.input)
    ds = data.partition_and_window(
        series,
        window_len=args.window,
        horizon=args.horizon,
        stride=args.stride,
        lo=args.lo,
        hi=args.hi,
        val_fraction=args.val_fraction,
    )
    ds.config = _config(args, **ds.config)
    _write_json(args.out, ds.to_dict())
    data.WindowedDataset.load(args.out)
    log.info("%d train / %d test windows", len(ds.train_x), len(ds.test_x))


def _train_config(args):
    return TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        batch_size=None if args.batch_size == 0 else args.batch_size,
        seed=args.seed,
        clip_norm=args.clip_norm,
    )


def cmd_train(args):
    ds = data.WindowedDataset.from_dict(_load_json(args.data, "dataset"))
    config = _train_config(args)

    def progress(epoch, loss):
        if args.verbose:
            log.info("epoch %d loss %.6f", epoch + 1, loss)

    if args.model == "qnn":
        topo = pqc.PqcTopology(ds.window_len, tuple(args.layers.split(",")))
        model = pqc.PqcModel.initialize(topo, seed=args.seed, output_mode=args.output_mode)
        trained, history = pqc.train(model, ds, config, progress)
    else:
        units = tuple(int(u) for u in args.units.split(","))
        if len(units) != 4:
            args.parser.error("--units needs four comma-separated sizes")
        model = bilstm.BilstmModel.initialize(units, seed=args.seed)
        trained, history = bilstm.train_bilstm(model, ds, config, progress)
    doc = trained.to_dict()
    doc["config"] = _config(args, train=config.to_dict())
    _write_json(args.out, doc)
    _load_model(args.out)
    if args.loss:
        rows = "".join(f"{i + 1},{loss!r}\n" for i, loss in enumerate(history))
        meta = "# " + json.dumps(doc["config"], sort_keys=True) + "\n"
        _write_text(args.loss, meta + "epoch,loss\n" + rows)
    if history:
        log.info("final training loss %.6f", history[-1])


def _load_model(path):
    doc = _load_json(path, "model")
    if doc.get("model") == "bilstm":
        return "bilstm", bilstm.BilstmModel.from_dict(doc)
    if "n_inputs" in doc:
        if doc.get("schema_version") != pqc.SCHEMA_VERSION:
            raise SchemaError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
        return "qnn", pqc.PqcModel.from_dict(doc)
    raise SchemaError(f"{path}: not a QNN or BiLSTM model document")


def predict(kind, model, windows):
    if kind == "qnn":
        return pqc.predict_windows(model, windows)
    return model.predict(windows)


def cmd_evaluate(args):
    kind, model = _load_model(args.model)
    ds = data.WindowedDataset.from_dict(_load_json(args.data, "dataset"))
    if len(ds.test_x) == 0:
        raise DataError("dataset has no test windows", path=args.data)
    pred = predict(kind, model, ds.test_x)
    target = ds.test_y
    if args.space == "original":
        pred, target = ds.scaler.inverse(pred), ds.scaler.inverse(target)
    report = metrics.evaluate(pred, target, args.space)
    signal_id = args.signal_id or ds.config.get("signal_id") or os.path.splitext(
        os.path.basename(args.data)
    )[0]
    extra = {
        "signal_id": signal_id,
        "model": MODEL_TAGS[kind],
        "config": _config(args),
    }
    doc = report.to_dict()
    doc.update(extra)
    _write_json(args.out, doc)
    if args.predictions:
        lines = ["index,target,prediction\n"]
        index = ds.test_index if ds.test_index is not None else range(len(target))
        lines += [f"{i},{t!r},{p!r}\n" for i, t, p in zip(index, target.tolist(), pred.tolist())]
        _write_text(args.predictions, "".join(lines))
    log.info("%s %s mse=%.5f", signal_id, MODEL_TAGS[kind], report.mse)


def _table_order(runs):
    order = {sid: i for i, sid in enumerate(signals.SIGNAL_IDS)}
    model_order = {"BiLSTM": 0, "QNN": 1}
    return sorted(
        runs, key=lambda r: (order.get(r[0], len(order)), r[0], model_order.get(r[1], 2), r[1])
    )


def cmd_report(args):
    paths = sorted(glob.glob(os.path.join(args.dir, "*.json")))
    runs = []
    for path in paths:
        doc = _load_json(path, "report")
        if "mse" not in doc:
            continue
        if doc.get("schema_version") != metrics.SCHEMA_VERSION:
            raise SchemaError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
        try:
            runs.append((doc["signal_id"], doc["model"], metrics.EvalReport.from_dict(doc)))
        except KeyError as exc:
            raise SchemaError(f"{path}: missing {exc}") from exc
    runs = _table_order(runs)
    _write_text(args.out, metrics.report_table(runs))
    if args.best:
        _write_text(args.best, metrics.best_models_csv(runs))
    log.info("%d runs tabulated", len(runs))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pqcforecast",
        description="Quantum-circuit and BiLSTM time-series forecasting benchmark.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="synthesise a benchmark signal")
    p.add_argument("signal_id", nargs="?", help="F0..Q10, or 'table1' for the pure sinusoid sum")
    p.add_argument("--spec", help="JSON signal spec instead of a preset id")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-points", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", parents=[common], help="periodogram peaks or wavelet transform")
    p.add_argument("kind", choices=("periodogram", "cwt"))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=50.0)
    p.add_argument("--spectrum", help="also write the full periodogram here")
    p.add_argument("--noct", type=int, default=12)
    p.add_argument("--nvoc", type=int, default=12)
    p.add_argument("--alpha", type=float, default=2.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("prepare", parents=[common], help="scale and window a series into a dataset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", help="series CSV (t,value)")
    src.add_argument("--prices", help="price CSV with a close column")
    p.add_argument("--column", default="close")
    p.add_argument("--percent-change", action="store_true")
    p.add_argument("--signal-id", help="label stored with the dataset")
    p.add_argument("--window", type=int, default=16)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--stride", type=int, default=None, help="default: window + horizon")
    p.add_argument("--lo", type=float, default=0.2)
    p.add_argument("--hi", type=float, default=0.8)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[common], help="train a QNN or BiLSTM")
    p.add_argument("model", choices=("qnn", "bilstm"))
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss", help="per-epoch loss CSV")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=32, help="0 for full batch")
    p.add_argument("--clip-norm", type=float, default=None)
    p.add_argument("--layers", default=",".join(pqc.DEFAULT_LAYERS))
    p.add_argument("--output-mode", choices=pqc.OUTPUT_MODES, default="centred")
    p.add_argument("--units", default=",".join(map(str, bilstm.REDUCED_UNITS)))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a model on a dataset's test windows")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--signal-id")
    p.add_argument("--space", choices=("scaled", "original"), default="scaled")
    p.add_argument("--predictions", help="per-window predictions CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="tabulate a directory of evaluation reports")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--best", help="per-metric best-model CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    if args.command == "synth" and not (args.signal_id or args.spec):
        parser.error("synth needs a signal id or --spec")
    args.parser = parser
    try:
        args.func(args)
    except (ForecastError, OSError, ValueError, KeyError) as exc:
        print(f"pqcforecast {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
