"""Technical indicators over close prices and candle ranges.

Each function returns an :class:`IndicatorSeries` aligned with its input.
Warm-up positions have no value; they are never filled with a sentinel.

Conventions:

* EMA is seeded at index ``period - 1`` with the simple mean of the first
  ``period`` closes, then ``ema[t] = k * p[t] + (1 - k) * ema[t-1]`` with
  ``k = 2 / (period + 1)``.
* RSI uses Wilder smoothing and first has a value at index ``period``.
* Stochastic %K over a flat window (high == low) is 50.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tickforge.errors import DataError, ValidationError
from tickforge.market_data import CandleSeries


@dataclass(frozen=True)
class IndicatorSeries:
    name: str
    length: int
    first_valid_index: int
    defined: np.ndarray  # values at first_valid_index .. length - 1

    def __post_init__(self):
        if len(self.defined) != self.length - self.first_valid_index:
            raise ValueError("defined values do not cover the tail of the series")

    @property
    def values(self) -> list[float | None]:
        return [None] * self.first_valid_index + [float(v) for v in self.defined]

    def __getitem__(self, i: int) -> float | None:
        if i < 0:
            i += self.length
        if not 0 <= i < self.length:
            raise IndexError(i)
        if i < self.first_valid_index:
            return None
        return float(self.defined[i - self.first_valid_index])

    def __len__(self) -> int:
        return self.length


def _check_period(period: int) -> None:
    if int(period) != period or period < 1:
        raise ValidationError(f"period must be an integer >= 1, got {period!r}")


def _require(n: int, needed: int, name: str) -> None:
    if n < needed:
        raise DataError(f"insufficient history for {name}: need {needed} values, got {n}")


def _ema_tail(p: np.ndarray, period: int) -> np.ndarray:
    k = 2.0 / (period + 1)
    out = np.empty(len(p) - period + 1)
    prev = float(np.mean(p[:period]))
    out[0] = prev
    for j, price in enumerate(p[period:].tolist(), start=1):
        prev = k * price + (1.0 - k) * prev
        out[j] = prev
    return out


def ema(closes: Sequence[float], period: int) -> IndicatorSeries:
    _check_period(period)
    p = np.asarray(closes, dtype=float)
    _require(len(p), period, f"EMA_{period}")
    return IndicatorSeries(f"EMA_{period}", len(p), period - 1, _ema_tail(p, period))


def rsi(closes: Sequence[float], period: int) -> IndicatorSeries:
    _check_period(period)
    p = np.asarray(closes, dtype=float)
    _require(len(p), period + 1, f"RSI_{period}")
    diff = np.diff(p)
    gains = np.maximum(diff, 0.0).tolist()
    losses = np.maximum(-diff, 0.0).tolist()

    avg_gain = sum(gains[:period]) / period
    avg_loss = sum(losses[:period]) / period
    out = np.empty(len(p) - period)
    out[0] = _rsi_value(avg_gain, avg_loss)
    for j in range(period, len(diff)):
        avg_gain = (avg_gain * (period - 1) + gains[j]) / period
        avg_loss = (avg_loss * (period - 1) + losses[j]) / period
        out[j - period + 1] = _rsi_value(avg_gain, avg_loss)
    return IndicatorSeries(f"RSI_{period}", len(p), period, out)


def _rsi_value(avg_gain: float, avg_loss: float) -> float:
    if avg_loss == 0.0:
        return 100.0
    if avg_gain == 0.0:
        return 0.0
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)


def macd(closes: Sequence[float], fast: int = 12, slow: int = 26) -> IndicatorSeries:
    _check_period(fast)
    _check_period(slow)
    if fast >= slow:
        raise ValidationError(f"MACD needs fast < slow, got fast={fast}, slow={slow}")
    p = np.asarray(closes, dtype=float)
    _require(len(p), slow, "MACD")
    fast_tail = _ema_tail(p, fast)[slow - fast:]
    return IndicatorSeries("MACD", len(p), slow - 1, fast_tail - _ema_tail(p, slow))


def momentum(closes: Sequence[float], period: int) -> IndicatorSeries:
    _check_period(period)
    p = np.asarray(closes, dtype=float)
    _require(len(p), period + 1, f"MOM_{period}")
    return IndicatorSeries(f"MOM_{period}", len(p), period, p[period:] - p[:-period])


def proc(closes: Sequence[float], period: int) -> IndicatorSeries:
    """Percentage price rate of change against the close ``period`` bars back."""
    _check_period(period)
    p = np.asarray(closes, dtype=float)
    _require(len(p), period + 1, f"PROC_{period}")
    ref = p[:-period]
    if np.any(ref == 0.0):
        i = int(np.flatnonzero(ref == 0.0)[0])
        raise DataError(f"PROC_{period}: zero reference price at index {i}")
    return IndicatorSeries(f"PROC_{period}", len(p), period, 100.0 * (p[period:] - ref) / ref)


def stoch_k_arrays(
    closes: Sequence[float],
    highs: Sequence[float],
    lows: Sequence[float],
    period: int,
) -> IndicatorSeries:
    """Stochastic %K: where the close sits in the trailing high-low range."""
    _check_period(period)
    c = np.asarray(closes, dtype=float)
    h = np.asarray(highs, dtype=float)
    lo = np.asarray(lows, dtype=float)
    if not len(c) == len(h) == len(lo):
        raise ValidationError("closes, highs and lows must have equal length")
    _require(len(c), period, f"%K_{period}")
    hh = np.lib.stride_tricks.sliding_window_view(h, period).max(axis=1)
    ll = np.lib.stride_tricks.sliding_window_view(lo, period).min(axis=1)
    span = hh - ll
    cur = c[period - 1:]
    flat = span == 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(flat, 50.0, 100.0 * (cur - ll) / np.where(flat, 1.0, span))
    return IndicatorSeries(f"%K_{period}", len(c), period - 1, k)


def stoch_k(candles: CandleSeries, period: int) -> IndicatorSeries:
    return stoch_k_arrays(candles.closes, candles.column("high"), candles.column("low"), period)
