import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tickforge import market_data as md
from tickforge.errors import DataError, ValidationError

from conftest import candles_from_closes

ROW = [1612137600000, "33500.0", "33600.0", "33400.0", "33550.0", "12.5",
       1612138499999, "419375.0", 150, "6.25", "209687.5", "0"]


def test_parse_single_kline():
    s = md.parse_kline_json(json.dumps([ROW]))
    assert len(s) == 1
    c = s[0]
    assert c.close == 33550.0
    assert c.num_trades == 150
    assert c.open_time == 1612137600000
    assert c.close_time == 1612138499999
    assert c.taker_buy_quote_volume == 209687.5
    assert s.interval_ms == 900_000


def test_parse_empty_array():
    s = md.parse_kline_json(b"[]")
    assert len(s) == 0


def test_equal_open_time_rejected():
    with pytest.raises(DataError, match="non-monotone timestamps"):
        md.parse_kline_json(json.dumps([ROW, ROW]))


@pytest.mark.parametrize("raw, msg", [
    (b"[[1,2", "malformed JSON"),
    (json.dumps([ROW[:11]]), "expected 12 fields"),
    (json.dumps([ROW[:4] + ["NaN"] + ROW[5:]]), "non-finite"),
    (json.dumps([ROW[:4] + ["abc"] + ROW[5:]]), "unparsable close"),
    (json.dumps({"a": 1}), "array"),
])
def test_parse_kline_errors(raw, msg):
    with pytest.raises(DataError, match=msg):
        md.parse_kline_json(raw)


def test_gap_rejected_by_default_and_flagged_when_allowed():
    second = [ROW[0] + 2 * 900_000, *ROW[1:6], ROW[6] + 2 * 900_000, *ROW[7:]]
    raw = json.dumps([ROW, second])
    with pytest.raises(DataError, match="gap"):
        md.parse_kline_json(raw)
    s = md.parse_kline_json(raw, allow_gaps=True)
    assert s.gaps == (1,)


HEADER = ",".join(md.CSV_COLUMNS)


def test_csv_minimal_file():
    raw = HEADER + "\n" + ",".join(str(v) for v in ROW[:11]) + "\n"
    s = md.parse_candles_csv(raw)
    assert len(s) == 1 and s[0].close == 33550.0


def test_csv_high_below_low():
    bad = ROW[:11]
    bad[2], bad[3] = "33300.0", "33400.0"
    with pytest.raises(DataError, match="OHLC invariant violated"):
        md.parse_candles_csv(HEADER + "\n" + ",".join(map(str, bad)) + "\n")


def test_csv_header_only():
    assert len(md.parse_candles_csv(HEADER + "\n")) == 0


def test_csv_missing_column():
    with pytest.raises(DataError, match="missing column"):
        md.parse_candles_csv(HEADER.replace(",num_trades", "") + "\n")


def test_csv_unparsable_cell():
    bad = [str(v) for v in ROW[:11]]
    bad[5] = "lots"
    with pytest.raises(DataError, match="unparsable volume"):
        md.parse_candles_csv(HEADER + "\n" + ",".join(bad) + "\n")


def test_csv_columns_in_any_order():
    cols = list(reversed(md.CSV_COLUMNS))
    vals = dict(zip(md.CSV_COLUMNS, ROW[:11]))
    raw = ",".join(cols) + "\n" + ",".join(str(vals[c]) for c in cols) + "\n"
    assert md.parse_candles_csv(raw)[0] == md.parse_kline_json(json.dumps([ROW]))[0]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=1e-3, max_value=1e7, allow_nan=False), min_size=1, max_size=30))
def test_csv_round_trip(closes):
    s = candles_from_closes(closes, spread=0.25)
    again = md.parse_candles_csv(md.to_csv(s))
    assert again.candles == s.candles
    assert md.parse_kline_json(md.to_kline_json(s)).candles == s.candles


@pytest.mark.parametrize("m, frac, train, test", [(100, 0.8, 80, 20), (5, 0.8, 4, 1)])
def test_chronological_split(m, frac, train, test):
    sp = md.chronological_split(m, frac)
    assert (sp.m_train, sp.m_test) == (train, test)
    assert list(sp.train) + list(sp.test) == list(range(m))


@pytest.mark.parametrize("m, frac", [(1, 0.8), (2, 0.4), (10, 1.0), (10, 0.0)])
def test_chronological_split_rejects(m, frac):
    with pytest.raises(ValidationError):
        md.chronological_split(m, frac)


@given(st.integers(2, 10_000), st.floats(0.01, 0.99))
def test_split_counts_add_up(m, frac):
    try:
        sp = md.chronological_split(m, frac)
    except ValidationError:
        return
    assert sp.m_train + sp.m_test == m
    assert sp.m_train >= 1 and sp.m_test >= 1
    assert max(sp.train) < min(sp.test)
