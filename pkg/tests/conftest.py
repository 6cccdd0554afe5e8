import sys
from pathlib import Path

import numpy as np
import pytest

from tickforge import market_data, synthetic

sys.path.insert(0, str(Path(__file__).parent))


def random_walk(n, seed, start=100.0, scale=1.0):
    rng = np.random.default_rng(seed)
    return (start + np.cumsum(rng.normal(0, scale, n))).tolist()


def candles_from_closes(closes, interval_ms=900_000, start_ms=1_612_137_600_000, spread=0.5):
    out = []
    prev = closes[0]
    for i, c in enumerate(closes):
        o = prev
        hi = max(o, c) + spread
        lo = min(o, c) - spread
        out.append(market_data.Candle(
            open_time=start_ms + i * interval_ms, open=o, high=hi, low=lo, close=c,
            volume=10.0 + i % 7, close_time=start_ms + (i + 1) * interval_ms - 1,
            quote_asset_volume=1000.0 + i, num_trades=100 + i % 13,
            taker_buy_base_volume=5.0 + i % 3, taker_buy_quote_volume=500.0 + i,
        ))
        prev = c
    return market_data.build_series(out, interval_ms)


@pytest.fixture(scope="session")
def synth_series():
    return market_data.parse_kline_json(synthetic.generate_kline_json(1_200, seed=3))


@pytest.fixture
def uniform_250():
    return candles_from_closes([100.0 + 0.1 * (i % 17) + 0.01 * i for i in range(250)])


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion, printed at session end."""
    name = request.node.get_closest_marker("acceptance").args[0]
    state = {"detail": ""}
    yield state
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({state['detail']})" if state["detail"] else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
