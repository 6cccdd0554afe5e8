"""Deterministic synthetic klines for offline tests and demos.

Log close follows a slow sine cycle plus a mean-reverting AR(1) walk::

    log p[t] = log(start_price) + amplitude * sin(2*pi*t / cycle) + z[t]
    z[t] = phi * z[t-1] + sigma * eps[t]

so the price keeps revisiting the same range instead of drifting off, which
matters because tree ensembles cannot extrapolate past the prices they saw
in training. Bars are emitted in Binance kline layout with decimal strings.
"""
from __future__ import annotations

import json

import numpy as np

FIFTEEN_MINUTES_MS = 900_000
# 2021-02-01T00:00:00Z
DEFAULT_START_MS = 1_612_137_600_000


def generate_klines(
    n: int,
    seed: int = 7,
    start_price: float = 40_000.0,
    amplitude: float = 0.25,
    cycle: int = 1_500,
    phi: float = 0.998,
    sigma: float = 0.004,
    interval_ms: int = FIFTEEN_MINUTES_MS,
    start_ms: int = DEFAULT_START_MS,
) -> list[list]:
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    z = np.empty(n)
    acc = 0.0
    for i, e in enumerate(rng.standard_normal(n)):
        acc = phi * acc + sigma * e
        z[i] = acc
    close = np.round(start_price * np.exp(amplitude * np.sin(2 * np.pi * t / cycle) + z), 2)
    open_ = np.round(np.concatenate([[start_price], close[:-1]]), 2)
    wick = np.abs(rng.normal(0.0, 0.6 * sigma, size=(2, n)))
    high = np.maximum(np.round(np.maximum(open_, close) * (1 + wick[0]), 2), np.maximum(open_, close))
    low = np.minimum(np.round(np.minimum(open_, close) * (1 - wick[1]), 2), np.minimum(open_, close))
    volume = np.round(rng.lognormal(mean=4.0, sigma=0.5, size=n), 6)
    trades = rng.integers(200, 5_000, size=n)
    typical = (high + low + close) / 3
    qav = np.round(volume * typical, 6)
    taker_share = rng.uniform(0.3, 0.7, size=n)
    tbbv = np.round(volume * taker_share, 6)
    tbqv = np.round(qav * taker_share, 6)

    rows = []
    for i in range(n):
        ot = start_ms + i * interval_ms
        rows.append([
            ot,
            f"{open_[i]:.8f}", f"{high[i]:.8f}", f"{low[i]:.8f}", f"{close[i]:.8f}",
            f"{volume[i]:.8f}",
            ot + interval_ms - 1,
            f"{qav[i]:.8f}",
            int(trades[i]),
            f"{tbbv[i]:.8f}", f"{tbqv[i]:.8f}",
            "0",
        ])
    return rows


def generate_kline_json(n: int, seed: int = 7, **kwargs) -> str:
    return json.dumps(generate_klines(n, seed, **kwargs), separators=(",", ":"))
