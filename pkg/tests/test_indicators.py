import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tickforge import indicators as ind
from tickforge.errors import DataError, ValidationError

import oracles
from conftest import candles_from_closes, random_walk


def test_ema_seeded_with_sma():
    s = ind.ema([1, 2, 3, 4], 3)
    assert s.values == [None, None, 2.0, 3.0]
    assert s.first_valid_index == 2
    assert s.name == "EMA_3"


def test_ema_constant_series():
    s = ind.ema([7.5] * 40, 10)
    assert np.allclose(s.defined, 7.5, rtol=0, atol=1e-12)


def test_ema_too_short():
    with pytest.raises(DataError, match="insufficient history"):
        ind.ema([5], 3)


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_period_validation(bad):
    with pytest.raises(ValidationError):
        ind.ema([1.0] * 5, bad)


def test_rsi_monotone_series():
    up = ind.rsi(list(range(1, 40)), 14)
    down = ind.rsi(list(range(40, 1, -1)), 14)
    assert all(v == 100.0 for v in up.defined)
    assert all(v == 0.0 for v in down.defined)


def test_rsi_hand_example():
    s = ind.rsi([1, 2, 1, 2, 1], 2)
    # first two moves +1, -1 -> avg gain 0.5 and avg loss 0.5 at index 2
    assert s.first_valid_index == 2
    assert s[2] == 50.0


def test_rsi_zero_loss_window():
    # moves +1, +1 over the first window: avg_gain = 1, avg_loss = 0
    s = ind.rsi([1, 2, 3, 2], 2)
    assert s[2] == 100.0
    # next step: gain (1*1+0)/2 = 0.5, loss (0*1+1)/2 = 0.5
    assert s[3] == 50.0


def test_rsi_insufficient():
    with pytest.raises(DataError):
        ind.rsi([1, 2, 3], 3)


def test_macd_constant_is_zero():
    s = ind.macd([3.0] * 60)
    assert s.first_valid_index == 25
    assert np.allclose(s.defined, 0.0, atol=1e-12)


def test_macd_positive_on_ramp():
    ramp = [float(i) for i in range(80)]
    s = ind.macd(ramp)
    for t in range(25, 80):
        assert oracles.ema_at(ramp, 12, t) > oracles.ema_at(ramp, 26, t)
    assert all(v > 0 for v in s.defined)


def test_macd_parameter_order():
    with pytest.raises(ValidationError):
        ind.macd([1.0] * 50, fast=26, slow=12)


def test_momentum_examples():
    assert ind.momentum([4.0] * 12, 10).defined.tolist() == [0.0, 0.0]
    assert ind.momentum([1, 2, 4], 2)[2] == 3.0
    with pytest.raises(DataError):
        ind.momentum([1, 2], 2)


def test_proc_examples():
    assert ind.proc([10, 12, 15], 2)[2] == 50.0
    assert ind.proc([3, 5, 6], 2)[2] == 100.0
    with pytest.raises(DataError, match="zero reference"):
        ind.proc([0, 1, 2], 2)


def test_stoch_k_conventions():
    closes = [1.0, 2.0, 3.0]
    hi = ind.stoch_k_arrays(closes, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 3)
    assert hi[2] == 100.0
    lo = ind.stoch_k_arrays([3.0, 2.0, 1.0], [3.0, 2.0, 1.0], [3.0, 2.0, 1.0], 3)
    assert lo[2] == 0.0
    flat = ind.stoch_k_arrays([5.0] * 4, [5.0] * 4, [5.0] * 4, 3)
    assert flat.defined.tolist() == [50.0, 50.0]
    assert flat.first_valid_index == 2


def test_stoch_k_on_candles():
    s = candles_from_closes(random_walk(50, 1))
    k = ind.stoch_k(s, 10)
    assert k.length == 50 and k.first_valid_index == 9


def _check_series(series, expected_first, length):
    assert series.first_valid_index == expected_first
    assert len(series.values) == length
    assert all(v is None for v in series.values[:expected_first])
    assert all(v is not None and math.isfinite(v) for v in series.values[expected_first:])


@pytest.mark.parametrize("period", [1, 2, 10, 14, 30, 200])
def test_first_valid_indices(period):
    p = random_walk(500, period, start=500.0)
    _check_series(ind.ema(p, period), period - 1, 500)
    _check_series(ind.rsi(p, period), period, 500)
    _check_series(ind.momentum(p, period), period, 500)
    _check_series(ind.proc(p, period), period, 500)
    s = candles_from_closes(p)
    _check_series(ind.stoch_k(s, period), period - 1, 500)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1.0, 1e4), min_size=40, max_size=80),
       st.floats(-50.0, 50.0), st.floats(0.1, 10.0))
def test_shift_and_scale_invariance(closes, shift, scale):
    p = np.asarray(closes)
    s = candles_from_closes(p.tolist(), spread=0.0)
    shifted = candles_from_closes((p + shift + 100.0).tolist(), spread=0.0)
    base = candles_from_closes((p + 100.0).tolist(), spread=0.0)
    np.testing.assert_allclose(ind.momentum(shifted.closes, 10).defined,
                               ind.momentum(base.closes, 10).defined, atol=1e-6)
    np.testing.assert_allclose(ind.stoch_k(shifted, 10).defined,
                               ind.stoch_k(base, 10).defined, atol=1e-6)

    scaled = candles_from_closes((p * scale).tolist(), spread=0.0)
    for f in (lambda c: ind.ema(c, 10), lambda c: ind.momentum(c, 10), lambda c: ind.macd(c, 5, 12)):
        np.testing.assert_allclose(f(scaled.closes).defined, scale * f(s.closes).defined,
                                   rtol=1e-9, atol=1e-9 * scale * p.max())
    for f in (lambda c: ind.rsi(c, 10), lambda c: ind.proc(c, 9)):
        np.testing.assert_allclose(f(scaled.closes).defined, f(s.closes).defined, rtol=1e-7, atol=1e-7)
    np.testing.assert_allclose(ind.stoch_k(scaled, 10).defined, ind.stoch_k(s, 10).defined,
                               rtol=1e-7, atol=1e-7)
