import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pumpscope.corpus import (AccountStatus, CoinSeries, Tweet, load_market, load_messages,
                              load_registry, load_statuses, load_tweets, resample_hourly,
                              stale_hours, write_market, write_messages, write_tweets)
from pumpscope.errors import DataError

from conftest import make_series

HEADER = "timestamp,coin,price_btc,price_usd,volume,market_cap\n"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_load_market_two_rows(tmp_path):
    p = _write(tmp_path, "m.csv", HEADER + "0,BTC,1,9000,5,100\n300,BTC,1,9100,6,101\n")
    m = load_market(p)
    assert list(m) == ["BTC"]
    assert len(m["BTC"]) == 2
    assert m["BTC"].timestamps.tolist() == [0, 300]
    assert m["BTC"].price_usd.tolist() == [9000.0, 9100.0]


def test_load_market_duplicate_observation(tmp_path):
    p = _write(tmp_path, "m.csv", HEADER + "0,BTC,1,9000,5,100\n0,BTC,1,9001,5,100\n")
    with pytest.raises(DataError, match="duplicate observation") as e:
        load_market(p)
    assert e.value.line == 3


def test_load_market_header_only(tmp_path):
    assert load_market(_write(tmp_path, "m.csv", HEADER)) == {}


@pytest.mark.parametrize("row,msg", [
    ("0,BTC,-1,9000,5,100", "negative"),
    ("0,BTC,nan,9000,5,100", "non-finite"),
    ("x,BTC,1,9000,5,100", "timestamp"),
    ("0,BTC,1,9000,5", "fields"),
])
def test_load_market_rejects_bad_rows(tmp_path, row, msg):
    with pytest.raises(DataError, match=msg):
        load_market(_write(tmp_path, "m.csv", HEADER + row + "\n"))


def test_load_tweets_cashtags(tmp_path, registry):
    rec = {"tweet_id": "1", "user_id": "u", "timestamp": 5, "text": "x", "cashtags": ["BTC"]}
    p = _write(tmp_path, "t.jsonl", json.dumps(rec) + "\n")
    (t,) = load_tweets(p, registry)
    assert t.cashtags == frozenset({"BTC"})


def test_load_tweets_unknown_cashtag(tmp_path, registry):
    rec = {"tweet_id": "1", "user_id": "u", "timestamp": 5, "text": "x", "cashtags": ["ZZZ"]}
    with pytest.raises(DataError, match="not in registry"):
        load_tweets(_write(tmp_path, "t.jsonl", json.dumps(rec) + "\n"), registry)


def test_empty_files(tmp_path):
    assert load_messages(_write(tmp_path, "m.jsonl", "")) == []
    assert load_tweets(_write(tmp_path, "t.jsonl", "")) == []


def test_status_score_out_of_range(tmp_path):
    p = _write(tmp_path, "s.csv", "user_id,status,botometer_score\nu1,active,1.2\n")
    with pytest.raises(DataError, match="out of range"):
        load_statuses(p)


def test_status_blank_score_is_missing(tmp_path):
    p = _write(tmp_path, "s.csv", "user_id,status,botometer_score\nu1,suspended,\n")
    s = load_statuses(p)["u1"]
    assert s.suspended and s.botometer_score is None


def test_malformed_json_line_number(tmp_path):
    ok = json.dumps({"channel_id": "c", "timestamp": 1, "text": "hi"})
    with pytest.raises(DataError) as e:
        load_messages(_write(tmp_path, "m.jsonl", ok + "\n{oops\n"))
    assert e.value.line == 2


def test_invalid_label(tmp_path):
    rec = {"channel_id": "c", "timestamp": 1, "text": "hi", "label": "maybe"}
    with pytest.raises(DataError, match="label"):
        load_messages(_write(tmp_path, "m.jsonl", json.dumps(rec) + "\n"))


def test_registry_aliases(tmp_path):
    reg = load_registry(_write(tmp_path, "r.txt", "btc\nETH  # comment\ncardano=ADA\nADA\n"))
    assert reg.resolve("BTC") == "BTC"
    assert reg.resolve("cardano") == "ADA"
    assert reg.resolve("hello") is None


def test_series_rejects_unsorted():
    with pytest.raises(DataError):
        make_series("X", [300, 0], [1, 1])


def test_resample_exact_boundaries():
    h = resample_hourly(make_series("X", [0, 3600], [10, 20]))
    assert h.timestamps.tolist() == [0, 3600]
    assert h.price_btc.tolist() == [10, 20]


def test_resample_carries_forward():
    h = resample_hourly(make_series("X", [0, 300], [10, 12]))
    assert h.timestamps.tolist() == [0, 3600]
    assert h.price_btc.tolist() == [10, 12]


def test_resample_single_point():
    h = resample_hourly(make_series("X", [7200], [3]))
    assert h.timestamps.tolist() == [7200]


def test_stale_hours_flagged(caplog):
    s = make_series("X", [0, 10 * 3600], [1, 2])
    h = resample_hourly(s)
    assert stale_hours(h, s) == [7 * 3600, 8 * 3600, 9 * 3600]
    assert "carried forward" in caplog.text


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 50_000), min_size=1, max_size=40, unique=True))
def test_resample_locf_matches_brute_force(times):
    times = sorted(times)
    prices = [1.0 + i for i in range(len(times))]
    h = resample_hourly(make_series("X", times, prices))
    for t, p in zip(h.timestamps, h.price_btc):
        assert t % 3600 == 0
        expect = [pp for tt, pp in zip(times, prices) if tt <= t][-1]
        assert p == expect
    assert h.timestamps[0] >= times[0] and h.timestamps[-1] >= times[-1]


def test_roundtrip_writers(tmp_path, synthetic):
    coin = sorted(synthetic.market)[0]
    write_market(str(tmp_path / "m.csv"), {coin: synthetic.market[coin]})
    back = load_market(str(tmp_path / "m.csv"))[coin]
    np.testing.assert_array_equal(back.price_btc, synthetic.market[coin].price_btc)
    write_messages(str(tmp_path / "x.jsonl"), synthetic.messages[:20])
    assert load_messages(str(tmp_path / "x.jsonl")) == synthetic.messages[:20]
    write_tweets(str(tmp_path / "t.jsonl"), synthetic.tweets[:20])
    assert load_tweets(str(tmp_path / "t.jsonl")) == synthetic.tweets[:20]


def test_account_status_validation():
    with pytest.raises(DataError):
        AccountStatus("u", "deleted")
    assert isinstance(Tweet("1", "u", 0, "x", frozenset()), Tweet)
    assert isinstance(make_series("X", [0], [1]), CoinSeries)
