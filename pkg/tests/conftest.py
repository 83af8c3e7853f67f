import numpy as np
import pytest

from pumpscope.corpus import CoinRegistry, CoinSeries
from pumpscope.synth import Scenario, generate


def make_series(coin, times, prices, usd=None, volume=None, cap=None):
    times = np.asarray(times, dtype=np.int64)
    prices = np.asarray(prices, dtype=float)
    n = len(times)
    usd = prices * 1000 if usd is None else np.asarray(usd, dtype=float)
    volume = np.ones(n) if volume is None else np.asarray(volume, dtype=float)
    cap = np.ones(n) if cap is None else np.asarray(cap, dtype=float)
    return CoinSeries(coin, times, prices, usd, volume, cap)


@pytest.fixture(scope="session")
def registry():
    return CoinRegistry(frozenset({"BTC", "ETH", "ADA", "XRP", "TRX", "DGB"}),
                        {"bitcoin": "BTC", "cardano": "ADA"})


@pytest.fixture(scope="session")
def synthetic():
    """Default synthetic scenario (no momentum)."""
    return generate(Scenario(seed=7))


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory, synthetic):
    d = tmp_path_factory.mktemp("synth")
    synthetic.write(str(d))
    return d


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    prev = _CRITERIA.get(n, (title, True, 0.0))
    _CRITERIA[n] = (title, prev[1] and not failed, prev[2] + call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, dur = _CRITERIA[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {title} ({dur:.1f}s)")
