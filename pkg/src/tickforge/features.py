"""Feature matrix assembly and train-fitted standardization."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from tickforge import indicators as ind
from tickforge.errors import DataError, ValidationError
from tickforge.market_data import CandleSeries

FEATURE_NAMES = (
    "CLOSE",
    "VOLUME",
    "QAV",
    "NOT",
    "TBBV",
    "RSI_14",
    "RSI_30",
    "RSI_200",
    "MOM_10",
    "MOM_30",
    "MACD",
    "PROC_9",
    "EMA_10",
    "EMA_30",
    "EMA_200",
    "%K_10",
    "%K_30",
    "%K_200",
)
N_FEATURES = len(FEATURE_NAMES)

_RAW_COLUMNS = {
    "CLOSE": "close",
    "VOLUME": "volume",
    "QAV": "quote_asset_volume",
    "NOT": "num_trades",
    "TBBV": "taker_buy_base_volume",
}


@dataclass(frozen=True)
class FeatureMatrix:
    feature_names: tuple[str, ...]
    rows: np.ndarray
    targets: np.ndarray
    timestamps: np.ndarray
    horizon: int

    def __post_init__(self):
        m = len(self.rows)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.feature_names):
            raise DataError(f"feature matrix shape {self.rows.shape} does not match "
                            f"{len(self.feature_names)} feature names")
        if len(self.targets) != m or len(self.timestamps) != m:
            raise DataError("rows, targets and timestamps differ in length")
        if not (np.all(np.isfinite(self.rows)) and np.all(np.isfinite(self.targets))):
            raise DataError("feature matrix contains non-finite values")

    def __len__(self) -> int:
        return len(self.rows)

    def slice(self, idx) -> FeatureMatrix:
        return FeatureMatrix(self.feature_names, self.rows[idx], self.targets[idx],
                             self.timestamps[idx], self.horizon)


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    stds: np.ndarray
    fitted_on: int

    def to_dict(self) -> dict:
        return {"means": [float(v) for v in self.means],
                "stds": [float(v) for v in self.stds],
                "fitted_on": self.fitted_on}

    @classmethod
    def from_dict(cls, d: dict) -> ScalerParams:
        means = np.asarray(d["means"], dtype=float)
        stds = np.asarray(d["stds"], dtype=float)
        if means.shape != stds.shape or np.any(stds < 0):
            raise DataError("invalid scaler parameters")
        return cls(means, stds, int(d["fitted_on"]))


def indicator_columns(series: CandleSeries) -> dict[str, ind.IndicatorSeries]:
    closes = series.closes
    cols = {}
    for p in (14, 30, 200):
        cols[f"RSI_{p}"] = ind.rsi(closes, p)
    for p in (10, 30):
        cols[f"MOM_{p}"] = ind.momentum(closes, p)
    cols["MACD"] = ind.macd(closes, 12, 26)
    cols["PROC_9"] = ind.proc(closes, 9)
    for p in (10, 30, 200):
        cols[f"EMA_{p}"] = ind.ema(closes, p)
    for p in (10, 30, 200):
        cols[f"%K_{p}"] = ind.stoch_k(series, p)
    return cols


# Lookback of the slowest indicator: RSI_200 needs 200 price changes.
MIN_WARMUP = 200


def assemble(series: CandleSeries, horizon: int = 1) -> FeatureMatrix:
    """Stack the 18 features per bar and attach the close ``horizon`` bars ahead.

    Bars where any indicator is still warming up, and the final ``horizon``
    bars (which have no target), are dropped.
    """
    if int(horizon) != horizon or horizon < 0:
        raise ValidationError(f"horizon must be an integer >= 0, got {horizon!r}")
    m = len(series)
    if m < MIN_WARMUP + 1 + horizon:
        raise DataError(
            f"insufficient history: {m} candles, need at least {MIN_WARMUP + 1 + horizon} "
            f"for horizon {horizon}"
        )
    cols = indicator_columns(series)
    start = max(s.first_valid_index for s in cols.values())
    stop = m - horizon
    out = np.empty((stop - start, N_FEATURES))
    for j, name in enumerate(FEATURE_NAMES):
        if name in _RAW_COLUMNS:
            out[:, j] = np.asarray(series.column(_RAW_COLUMNS[name]), dtype=float)[start:stop]
        else:
            s = cols[name]
            out[:, j] = s.defined[start - s.first_valid_index: stop - s.first_valid_index]
    closes = np.asarray(series.closes, dtype=float)
    targets = closes[start + horizon: stop + horizon]
    stamps = np.asarray(series.open_times, dtype=np.int64)[start:stop]
    return FeatureMatrix(FEATURE_NAMES, out, targets, stamps, int(horizon))


def fit_scaler(train_rows) -> ScalerParams:
    x = np.asarray(train_rows, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("cannot fit a scaler on an empty matrix")
    mu = x.mean(axis=0)
    sigma = np.sqrt(((x - mu) ** 2).mean(axis=0))
    return ScalerParams(mu, sigma, x.shape[0])


def transform(rows, params: ScalerParams) -> np.ndarray:
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2 or x.shape[1] != len(params.means):
        raise DataError(f"expected {len(params.means)} columns, got shape {x.shape}")
    zero = params.stds == 0.0
    safe = np.where(zero, 1.0, params.stds)
    return np.where(zero, 0.0, (x - params.means) / safe)


def fit_transform(train_rows) -> tuple[np.ndarray, ScalerParams]:
    params = fit_scaler(train_rows)
    return transform(train_rows, params), params


def to_csv(fm: FeatureMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["timestamp", *fm.feature_names, "target"])
    for ts, row, y in zip(fm.timestamps.tolist(), fm.rows.tolist(), fm.targets.tolist()):
        writer.writerow([ts, *map(repr, row), repr(y)])
    return buf.getvalue()


def from_csv(raw: bytes | str, horizon: int = 1) -> FeatureMatrix:
    """Read ``timestamp,<features...>,target`` back into a matrix.

    Feature names are taken from the header, so a file with the wrong
    columns loads but is rejected later by the model's dimension check.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(raw, newline=""))
    header = next(reader, None)
    if not header or header[0] != "timestamp" or header[-1] != "target" or len(header) < 3:
        raise DataError("feature CSV header must be timestamp,<features>,target")
    names = tuple(header[1:-1])
    stamps, rows, targets = [], [], []
    for i, rec in enumerate(reader):
        if not rec:
            continue
        if len(rec) != len(header):
            raise DataError(f"record {i}: expected {len(header)} cells, got {len(rec)}")
        try:
            stamps.append(int(rec[0]))
            rows.append([float(v) for v in rec[1:-1]])
            targets.append(float(rec[-1]))
        except ValueError as exc:
            raise DataError(f"record {i}: {exc}") from None
    x = np.asarray(rows, dtype=float).reshape(len(rows), len(names))
    return FeatureMatrix(names, x, np.asarray(targets, dtype=float),
                         np.asarray(stamps, dtype=np.int64), horizon)
