"""Regression metrics and the CSV/JSON exports behind the diagnostic plots."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tickforge.errors import DataError, ValidationError


def _pair(y, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if len(y) != len(y_pred):
        raise ValidationError(f"length mismatch: {len(y)} targets vs {len(y_pred)} predictions")
    if len(y) == 0:
        raise ValidationError("metrics need at least one sample")
    return y, y_pred


def mae(y, y_pred) -> float:
    y, y_pred = _pair(y, y_pred)
    return float(np.mean(np.abs(y - y_pred)))


def rmse(y, y_pred) -> float:
    y, y_pred = _pair(y, y_pred)
    r = np.abs(y - y_pred)
    scale = float(r.max())
    if scale == 0.0 or not math.isfinite(scale):
        return scale
    # scaled to dodge under/overflow in r**2
    r = r / scale
    return scale * math.sqrt(float(np.mean(r * r)))


def r2(y, y_pred) -> float:
    y, y_pred = _pair(y, y_pred)
    if len(y) < 2:
        raise ValidationError("R² needs at least two samples")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValidationError("undefined R²: target is constant")
    ss_res = float(np.sum((y - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class EvalReport:
    mae: float
    rmse: float
    r2: float
    actual: np.ndarray
    predicted: np.ndarray
    timestamps: np.ndarray

    @property
    def n(self) -> int:
        return len(self.actual)

    @property
    def residuals(self) -> np.ndarray:
        return self.actual - self.predicted

    @property
    def pairs(self) -> list[tuple[float, float, int]]:
        return list(zip(self.actual.tolist(), self.predicted.tolist(), self.timestamps.tolist()))

    def metrics(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "r2": self.r2, "n": self.n}


def evaluate(y, y_pred, timestamps=None) -> EvalReport:
    y, y_pred = _pair(y, y_pred)
    if timestamps is None:
        timestamps = np.arange(len(y))
    timestamps = np.asarray(timestamps, dtype=np.int64)
    if len(timestamps) != len(y):
        raise ValidationError("timestamps and targets differ in length")
    return EvalReport(mae(y, y_pred), rmse(y, y_pred), r2(y, y_pred), y, y_pred, timestamps)


def format_table(report: EvalReport) -> str:
    """Plain-text metrics table rounded to 4 decimals."""
    rows = [("MAE", report.mae), ("RMSE", report.rmse), ("R²", report.r2)]
    lines = ["Metric  Value", "------  ----------"]
    lines += [f"{name:<6}  {value:.4f}" for name, value in rows]
    return "\n".join(lines)


def export_report(report: EvalReport, out_dir) -> list[Path]:
    """Write ``metrics.json``, ``residuals.csv`` and ``pred_vs_actual.csv``."""
    if report.n == 0:
        raise DataError("refusing to export an empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "metrics.json", out / "residuals.csv", out / "pred_vs_actual.csv"]

    paths[0].write_text(json.dumps(report.metrics(), indent=2) + "\n")
    ts = report.timestamps.tolist()
    pred = report.predicted.tolist()
    with paths[1].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "predicted", "residual"])
        for t, p, e in zip(ts, pred, report.residuals.tolist()):
            w.writerow([t, repr(p), repr(e)])
    with paths[2].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual", "predicted"])
        for t, a, p in zip(ts, report.actual.tolist(), pred):
            w.writerow([t, repr(a), repr(p)])
    return paths
