"""Candle ingestion: Binance kline JSON, canonical candle CSV, chronological split.

Binance kline rows carry 12 fields in this order::

    open_time, open, high, low, close, volume, close_time,
    quote_asset_volume, num_trades, taker_buy_base_volume,
    taker_buy_quote_volume, ignore

Numeric fields arrive as decimal strings; the trailing ``ignore`` field is
read and dropped.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

from tickforge.errors import DataError, ValidationError

CSV_COLUMNS = (
    "open_time",
    "open",
    "high",
    "low",
    "close",
    "volume",
    "close_time",
    "quote_asset_volume",
    "num_trades",
    "taker_buy_base_volume",
    "taker_buy_quote_volume",
)
KLINE_FIELD_COUNT = 12
_INT_FIELDS = {"open_time", "close_time", "num_trades"}


@dataclass(frozen=True)
class Candle:
    open_time: int
    open: float
    high: float
    low: float
    close: float
    volume: float
    close_time: int
    quote_asset_volume: float
    num_trades: int
    taker_buy_base_volume: float
    taker_buy_quote_volume: float

    def validate(self) -> None:
        """Raise :class:`DataError` if the bar is internally inconsistent."""
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise DataError(f"non-finite value in {f.name}: {v!r}")
        if not (self.low <= self.high
                and self.low <= self.open <= self.high
                and self.low <= self.close <= self.high):
            raise DataError(
                f"OHLC invariant violated at open_time={self.open_time}: "
                f"O={self.open} H={self.high} L={self.low} C={self.close}"
            )
        if self.volume < 0 or self.num_trades < 0 or self.quote_asset_volume < 0:
            raise DataError(f"negative volume or trade count at open_time={self.open_time}")
        if self.close_time <= self.open_time:
            raise DataError(f"close_time <= open_time at open_time={self.open_time}")


@dataclass(frozen=True)
class CandleSeries:
    """Ordered candles sampled every ``interval_ms``.

    ``gaps`` lists indices ``i`` where ``candles[i].open_time`` does not follow
    ``candles[i-1]`` by exactly one interval. It is only non-empty when the
    series was ingested with ``allow_gaps=True``.
    """

    interval_ms: int
    candles: tuple[Candle, ...]
    gaps: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.candles)

    def __getitem__(self, i):
        return self.candles[i]

    def column(self, name: str) -> list:
        return [getattr(c, name) for c in self.candles]

    @property
    def closes(self) -> list[float]:
        return self.column("close")

    @property
    def open_times(self) -> list[int]:
        return self.column("open_time")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    m: int
    m_train: int
    m_test: int

    @property
    def train(self) -> range:
        return range(0, self.m_train)

    @property
    def test(self) -> range:
        return range(self.m_train, self.m)


def _parse_float(value, name: str, row: int) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise DataError(f"record {row}: unparsable {name}: {value!r}") from None
    if not math.isfinite(x):
        raise DataError(f"record {row}: non-finite number in {name}: {value!r}")
    return x


def _parse_int(value, name: str, row: int) -> int:
    if isinstance(value, bool):
        raise DataError(f"record {row}: unparsable {name}: {value!r}")
    if isinstance(value, int):
        return value
    try:
        return int(str(value).strip())
    except ValueError:
        pass
    x = _parse_float(value, name, row)
    if not x.is_integer():
        raise DataError(f"record {row}: {name} must be an integer: {value!r}")
    return int(x)


def _candle_from_values(values: Sequence, row: int) -> Candle:
    kwargs = {}
    for name, v in zip(CSV_COLUMNS, values):
        if name in _INT_FIELDS:
            kwargs[name] = _parse_int(v, name, row)
        else:
            kwargs[name] = _parse_float(v, name, row)
    candle = Candle(**kwargs)
    try:
        candle.validate()
    except DataError as exc:
        raise DataError(f"record {row}: {exc}") from None
    return candle


def build_series(
    candles: Iterable[Candle],
    interval_ms: int | None = None,
    allow_gaps: bool = False,
) -> CandleSeries:
    """Check ordering and spacing, returning an immutable series.

    When ``interval_ms`` is omitted it is taken from the first bar as
    ``close_time - open_time + 1`` (Binance's convention).
    """
    candles = tuple(candles)
    if interval_ms is None:
        interval_ms = candles[0].close_time - candles[0].open_time + 1 if candles else 0
    if candles and interval_ms <= 0:
        raise ValidationError(f"interval_ms must be positive, got {interval_ms}")
    gaps = []
    for i in range(1, len(candles)):
        prev, cur = candles[i - 1].open_time, candles[i].open_time
        if cur <= prev:
            raise DataError(f"record {i}: non-monotone timestamps ({prev} -> {cur})")
        if cur - prev != interval_ms:
            if not allow_gaps:
                raise DataError(
                    f"record {i}: timestamp gap of {cur - prev} ms "
                    f"(expected {interval_ms}); use allow_gaps to keep it"
                )
            gaps.append(i)
    return CandleSeries(interval_ms=interval_ms, candles=candles, gaps=tuple(gaps))


def parse_kline_json(
    raw: bytes | str,
    interval_ms: int | None = None,
    allow_gaps: bool = False,
) -> CandleSeries:
    """Parse a Binance ``/api/v3/klines`` response body."""
    try:
        data = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"malformed JSON: {exc}") from None
    if not isinstance(data, list):
        raise DataError("malformed JSON: top level must be an array of klines")
    candles = []
    for i, row in enumerate(data):
        if not isinstance(row, list):
            raise DataError(f"record {i}: kline must be an array")
        if len(row) != KLINE_FIELD_COUNT:
            raise DataError(f"record {i}: expected {KLINE_FIELD_COUNT} fields, got {len(row)}")
        candles.append(_candle_from_values(row[:11], i))
    return build_series(candles, interval_ms, allow_gaps)


def parse_candles_csv(
    raw: bytes | str,
    interval_ms: int | None = None,
    allow_gaps: bool = False,
) -> CandleSeries:
    """Parse the canonical candle CSV (header of the 11 candle fields)."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise DataError(f"candle CSV is not UTF-8: {exc}") from None
    reader = csv.reader(io.StringIO(raw, newline=""))
    header = next(reader, None)
    if header is None:
        raise DataError("candle CSV is empty (missing header)")
    header = [h.strip() for h in header]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise DataError(f"missing column(s): {', '.join(missing)}")
    pos = [header.index(c) for c in CSV_COLUMNS]
    candles = []
    for i, row in enumerate(reader):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"record {i}: expected {len(header)} cells, got {len(row)}")
        candles.append(_candle_from_values([row[p] for p in pos], i))
    return build_series(candles, interval_ms, allow_gaps)


def to_csv(series: CandleSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in series.candles:
        writer.writerow([repr(v) if isinstance(v, float) else v
                         for v in (getattr(c, name) for name in CSV_COLUMNS)])
    return buf.getvalue()


def to_kline_json(series: CandleSeries) -> str:
    rows = []
    for c in series.candles:
        row = []
        for name in CSV_COLUMNS:
            v = getattr(c, name)
            row.append(v if name in _INT_FIELDS else repr(v))
        row.append("0")
        rows.append(row)
    return json.dumps(rows, separators=(",", ":"))


def chronological_split(m: int, train_fraction: float = 0.8) -> SplitSpec:
    """Leading ``floor(train_fraction * m)`` rows train, the rest test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if m < 2:
        raise ValidationError(f"need at least 2 rows to split, got {m}")
    m_train = math.floor(train_fraction * m)
    m_test = m - m_train
    if m_train < 1 or m_test < 1:
        raise ValidationError(
            f"{m} rows too few for train_fraction={train_fraction} "
            f"(train={m_train}, test={m_test})"
        )
    return SplitSpec(train_fraction, m, m_train, m_test)
