"""Forecast evaluation statistics and the comparison table."""

import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import SchemaError, UndefinedRatioError

SCHEMA_VERSION = 1
RATIO_EPS = 1e-9
TABLE_COLUMNS = ("signal_id", "model", "mse", "sesd", "mr", "sdr")
METRICS = ("mse", "sesd", "mr", "sdr")


@dataclass
class EvalReport:
    mse: float
    sesd: float
    mr: float
    sdr: float
    n: int
    space: str = "scaled"
    n_ratio_excluded: int = 0

    def to_dict(self):
        doc = {"schema_version": SCHEMA_VERSION}
        doc.update(asdict(self))
        return doc

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(
                float(doc["mse"]),
                float(doc["sesd"]),
                float(doc["mr"]),
                float(doc["sdr"]),
                int(doc["n"]),
                doc.get("space", "scaled"),
                int(doc.get("n_ratio_excluded", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invalid evaluation report: {exc}") from exc


def evaluate(predictions, targets, space="scaled"):
    """MSE, std of squared errors, and mean/std of the prediction/target ratio.

    Standard deviations are population (divide by n).  Pairs whose target is
    within 1e-9 of zero are left out of the ratio statistics and counted.
    """
    yhat = np.asarray(predictions, dtype=float).ravel()
    y = np.asarray(targets, dtype=float).ravel()
    if yhat.shape != y.shape:
        raise ValueError(f"length mismatch: {yhat.size} predictions, {y.size} targets")
    if y.size == 0:
        raise ValueError("need at least one prediction")
    if space not in ("scaled", "original"):
        raise ValueError(f"unknown space {space!r}")
    sq = (yhat - y) ** 2
    keep = np.abs(y) > RATIO_EPS
    if not keep.any():
        raise UndefinedRatioError("all targets are within 1e-9 of zero")
    ratio = yhat[keep] / y[keep]
    return EvalReport(
        mse=float(sq.mean()),
        sesd=float(sq.std()),
        mr=float(ratio.mean()),
        sdr=float(ratio.std()),
        n=int(y.size),
        space=space,
        n_ratio_excluded=int((~keep).sum()),
    )


def report_table(runs):
    """CSV text with one ``signal_id,model,mse,sesd,mr,sdr`` row per run."""
    out = io.StringIO()
    out.write(",".join(TABLE_COLUMNS) + "\n")
    for signal_id, model, rep in runs:
        out.write(
            f"{signal_id},{model},{rep.mse:.5f},{rep.sesd:.5f},{rep.mr:.5f},{rep.sdr:.5f}\n"
        )
    return out.getvalue()


def best_models(runs):
    """Per signal and metric, the model with the best value.

    Lower is better for mse, sesd and sdr; for mr the value closest to 1 wins.
    Returns ``{signal_id: {metric: model}}`` in first-seen signal order.
    """
    grouped = {}
    for signal_id, model, rep in runs:
        grouped.setdefault(signal_id, []).append((model, rep))
    best = {}
    for signal_id, entries in grouped.items():
        best[signal_id] = {}
        for metric in METRICS:
            if metric == "mr":
                key = lambda e: abs(e[1].mr - 1.0)  # noqa: E731
            else:
                key = lambda e, m=metric: getattr(e[1], m)  # noqa: E731
            best[signal_id][metric] = min(entries, key=key)[0]
    return best


def best_models_csv(runs):
    out = io.StringIO()
    out.write("signal_id," + ",".join(f"best_{m}" for m in METRICS) + "\n")
    for signal_id, flags in best_models(runs).items():
        out.write(signal_id + "," + ",".join(flags[m] for m in METRICS) + "\n")
    return out.getvalue()


def save_report(path, report, extra=None):
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def load_report(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc, EvalReport.from_dict(doc)
