"""Price ingestion, min-max scaling and train/test windowing."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateScaleError, SchemaError
from .signals import Series

SCHEMA_VERSION = 1
TRAIN_FRACTION = 0.75


@dataclass(frozen=True)
class ScalerParams:
    data_min: float
    data_max: float
    range_lo: float = 0.2
    range_hi: float = 0.8

    def __post_init__(self):
        if not self.data_max > self.data_min:
            raise DegenerateScaleError("scaler needs data_max > data_min")
        if not 0 <= self.range_lo < self.range_hi <= 1:
            raise ValueError("scaling range must satisfy 0 <= lo < hi <= 1")

    @property
    def slope(self):
        return (self.range_hi - self.range_lo) / (self.data_max - self.data_min)

    def transform(self, x):
        return self.range_lo + self.slope * (np.asarray(x, dtype=float) - self.data_min)

    def inverse(self, y):
        return self.data_min + (np.asarray(y, dtype=float) - self.range_lo) / self.slope

    def to_dict(self):
        return {
            "min": self.data_min,
            "max": self.data_max,
            "lo": self.range_lo,
            "hi": self.range_hi,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(float(doc["min"]), float(doc["max"]), float(doc["lo"]), float(doc["hi"]))


def fit_scaler(train_values, lo=0.2, hi=0.8):
    v = np.asarray(train_values, dtype=float)
    if v.size < 2 or v.min() == v.max():
        raise DegenerateScaleError("cannot fit a scaler to fewer than 2 distinct values")
    return ScalerParams(float(v.min()), float(v.max()), lo, hi)


@dataclass
class WindowedDataset:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    scaler: ScalerParams
    window_len: int = 16
    horizon: int = 1
    stride: int = 17
    val_x: np.ndarray = None
    val_y: np.ndarray = None
    # series index of each target, for adjacency checks and plotting
    train_index: np.ndarray = None
    test_index: np.ndarray = None
    config: dict = field(default_factory=dict)

    @property
    def train_windows(self):
        return list(zip(self.train_x, self.train_y))

    @property
    def test_windows(self):
        return list(zip(self.test_x, self.test_y))

    def to_dict(self):
        def rows(x, y):
            return [{"x": xi.tolist(), "y": float(yi)} for xi, yi in zip(x, y)]

        doc = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "window_len": self.window_len,
            "horizon": self.horizon,
            "stride": self.stride,
            "scaler": self.scaler.to_dict(),
            "train": rows(self.train_x, self.train_y),
            "test": rows(self.test_x, self.test_y),
        }
        if self.val_x is not None and len(self.val_x):
            doc["validation"] = rows(self.val_x, self.val_y)
        return doc

    @classmethod
    def from_dict(cls, doc):
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(
                f"dataset schema_version {doc.get('schema_version')!r} != {SCHEMA_VERSION}"
            )
        try:
            window_len = int(doc.get("window_len", 16))

            def unpack(rows):
                x = np.array([r["x"] for r in rows], dtype=float).reshape(-1, window_len)
                y = np.array([r["y"] for r in rows], dtype=float)
                return x, y

            train_x, train_y = unpack(doc["train"])
            test_x, test_y = unpack(doc["test"])
            val_x, val_y = unpack(doc.get("validation", []))
            scaler = ScalerParams.from_dict(doc["scaler"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invalid dataset document: {exc}") from exc
        return cls(
            train_x,
            train_y,
            test_x,
            test_y,
            scaler,
            window_len=window_len,
            horizon=int(doc.get("horizon", 1)),
            stride=int(doc.get("stride", window_len + 1)),
            val_x=val_x,
            val_y=val_y,
            config=doc.get("config", {}),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _windows(values, offset, window_len, horizon, stride):
    group = window_len + horizon
    starts = np.arange(0, len(values) - group + 1, stride)
    x = np.array([values[s : s + window_len] for s in starts]).reshape(-1, window_len)
    y = np.array([values[s + group - 1] for s in starts], dtype=float)
    return x, y, starts + group - 1 + offset


def partition_and_window(
    series, window_len=16, horizon=1, stride=None, lo=0.2, hi=0.8, val_fraction=0.0
):
    """Split at 3/4, fit the scaler on the training part, scale, then window.

    Each group is ``window_len + horizon`` consecutive points: the first
    ``window_len`` are the input and the last one is the target.  Groups are
    non-overlapping by default; ``stride=1`` gives a sliding window.  Points
    that do not fill a whole group at the end of a partition are dropped.
    """
    values = series.values if isinstance(series, Series) else np.asarray(series, dtype=float)
    group = window_len + horizon
    if stride is None:
        stride = group
    if window_len < 1 or horizon < 1 or stride < 1:
        raise ValueError("window_len, horizon and stride must be positive")
    if len(values) < 4 * group:
        raise ValueError(
            f"series of length {len(values)} is shorter than 4 * {group}"
        )
    if not 0 <= val_fraction < 1:
        raise ValueError("val_fraction must be in [0, 1)")
    split = int(np.floor(TRAIN_FRACTION * len(values)))
    scaler = fit_scaler(values[:split], lo, hi)
    scaled = scaler.transform(values)
    train_x, train_y, train_idx = _windows(scaled[:split], 0, window_len, horizon, stride)
    test_x, test_y, test_idx = _windows(scaled[split:], split, window_len, horizon, stride)
    n_val = int(round(val_fraction * len(train_x)))
    val_x = train_x[len(train_x) - n_val :]
    val_y = train_y[len(train_y) - n_val :]
    if n_val:
        train_x, train_y, train_idx = train_x[:-n_val], train_y[:-n_val], train_idx[:-n_val]
    return WindowedDataset(
        train_x,
        train_y,
        test_x,
        test_y,
        scaler,
        window_len=window_len,
        horizon=horizon,
        stride=stride,
        val_x=val_x,
        val_y=val_y,
        train_index=train_idx,
        test_index=test_idx,
        config={
            "window_len": window_len,
            "horizon": horizon,
            "stride": stride,
            "lo": lo,
            "hi": hi,
            "val_fraction": val_fraction,
            "n_points": len(values),
        },
    )


def load_prices(csv_path, column="close"):
    """Close prices from a CSV with a header; the column match ignores case."""
    try:
        fh = open(csv_path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open: {exc.strerror}", path=csv_path) from exc
    with fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if not header:
            raise DataError("empty file", path=csv_path)
        names = [h.strip().lower() for h in header]
        if column.lower() not in names:
            raise DataError(f"no {column!r} column in header {header}", path=csv_path)
        col = names.index(column.lower())
        prices = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                value = float(row[col])
            except (ValueError, IndexError):
                cell = row[col] if col < len(row) else ""
                raise DataError(f"unparsable close {cell!r}", row=row_no, path=csv_path)
            if not np.isfinite(value) or value <= 0:
                raise DataError(f"non-positive close {value}", row=row_no, path=csv_path)
            prices.append(value)
    if not prices:
        raise DataError("no data rows", path=csv_path)
    return np.array(prices)
