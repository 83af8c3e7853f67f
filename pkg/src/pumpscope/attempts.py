"""Pump attempts: coin mentions, buy/target price parsing, anchored 3-hour
aggregation and success evaluation against market data."""

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pumpscope.errors import DataError, MarketGapError, UnpricedAttemptError, ValidationError

logger = logging.getLogger(__name__)

HOUR = 3600
SATOSHI = 1e-8
MERGE_WINDOW = 3 * HOUR
MAX_MARKET_GAP = HOUR

_MENTION_RE = re.compile(r"\$?[^\W_]+", re.UNICODE)
_PRICE_TOKEN_RE = re.compile(
    r"(?<![\d.])(?P<num>\d+(?:\.\d+)?|\.\d+)\s*(?P<unit>satoshis?|sats?)?(?!\w|\.\d)"
    r"|(?P<word>[^\W\d_][^\W_]*)",
    re.IGNORECASE | re.UNICODE,
)
_BUY_CUES = frozenset({"buy", "bid", "entry", "cp"})
_TARGET_CUE_RE = re.compile(r"^(?:targets?|tg[1-9]?|t[1-9]|sell)$")
_STOP_CUE_RE = re.compile(r"^(?:stop|stoploss|sl)$")
_MAX_CUE_GAP = 4


def extract_mentions(message, registry):
    """Coins mentioned by symbol, alias or ``$cashtag`` on token boundaries."""
    text = getattr(message, "text", message)
    found = set()
    for tok in _MENTION_RE.findall(text):
        sym = registry.resolve(tok)
        if sym is not None:
            found.add(sym)
    return found


def _price_tokens(text):
    out = []
    for m in _PRICE_TOKEN_RE.finditer(text):
        if m.group("num") is not None:
            value = float(m.group("num"))
            is_int = "." not in m.group("num")
            if m.group("unit"):
                value *= SATOSHI
                is_int = False
            out.append(("num", value, is_int))
        else:
            out.append(("word", m.group("word").lower(), False))
    return out


def _cue(word):
    if word in _BUY_CUES:
        return "buy"
    if _TARGET_CUE_RE.match(word):
        return "target"
    if _STOP_CUE_RE.match(word):
        return "stop"
    return None


def parse_prices_full(text):
    """Like :func:`parse_prices` but also returns the stop-loss price."""
    toks = _price_tokens(text)
    buy = stop = None
    targets = []
    i = 0
    while i < len(toks):
        kind, value, _ = toks[i]
        cue = _cue(value) if kind == "word" else None
        if cue is None:
            i += 1
            continue
        # Find the first number after the cue, skipping a few filler words.
        j, gap = i + 1, 0
        while j < len(toks) and toks[j][0] == "word" and gap < _MAX_CUE_GAP and _cue(toks[j][1]) is None:
            j += 1
            gap += 1
        if j >= len(toks) or toks[j][0] != "num":
            i = j if j > i + 1 else i + 1
            continue
        # "TARGET 1: 0.0050" -- a lone 1..9 index followed by another number is a label.
        if (cue == "target" and toks[j][2] and 1 <= toks[j][1] <= 9
                and j + 1 < len(toks) and toks[j + 1][0] == "num"):
            j += 1
        if cue == "buy":
            if buy is None:
                buy = toks[j][1]
            i = j + 1
        elif cue == "stop":
            if stop is None:
                stop = toks[j][1]
            i = j + 1
        else:
            while j < len(toks) and toks[j][0] == "num":
                targets.append(toks[j][1])
                j += 1
            i = j
    targets = sorted({t for t in targets if t > 0})
    return buy, targets, stop


def parse_prices(text):
    """Extract ``(buy, targets)`` from a pump message.

    ``buy`` is the first number after a buy cue (buy, bid, entry, cp);
    targets are the numbers after target cues (target, tg, t1..t9, sell),
    deduplicated and sorted. ``N sat``/``N satoshi`` is converted to BTC.
    """
    buy, targets, _ = parse_prices_full(text)
    return buy, targets


@dataclass(frozen=True)
class PumpAttempt:
    coin: str
    anchor_time: int
    message_ids: tuple
    buy_price: Optional[float] = None
    target_prices: tuple = ()
    channel_ids: frozenset = frozenset()
    stop_loss: Optional[float] = None

    def __post_init__(self):
        tp = tuple(float(x) for x in self.target_prices)
        if any(b <= a for a, b in zip(tp, tp[1:])):
            raise ValidationError("target prices must be strictly increasing")
        if self.buy_price is not None and tp and not self.buy_price < tp[0]:
            raise ValidationError("buy price must be below every target")
        object.__setattr__(self, "target_prices", tp)
        object.__setattr__(self, "message_ids", tuple(self.message_ids))
        object.__setattr__(self, "channel_ids", frozenset(self.channel_ids))

    @property
    def attempt_id(self):
        return f"{self.coin}@{self.anchor_time}"

    def to_json(self):
        return {"coin": self.coin, "anchor_time": self.anchor_time,
                "message_ids": list(self.message_ids), "buy_price": self.buy_price,
                "target_prices": list(self.target_prices),
                "channel_ids": sorted(self.channel_ids), "stop_loss": self.stop_loss}

    @classmethod
    def from_json(cls, rec):
        return cls(rec["coin"], int(rec["anchor_time"]), tuple(rec.get("message_ids", ())),
                   rec.get("buy_price"), tuple(rec.get("target_prices", ())),
                   frozenset(rec.get("channel_ids", ())), rec.get("stop_loss"))


def build_attempts(pump_messages, registry, max_coins=3, merge_window=MERGE_WINDOW):
    """Group pump messages into per-coin attempts anchored at the earliest message.

    A message joins the current attempt of a coin iff its timestamp is within
    ``merge_window`` seconds of the anchor; otherwise it opens a new attempt.
    Messages mentioning more than ``max_coins`` coins are dropped.
    """
    per_coin = {}
    for msg in pump_messages:
        coins = extract_mentions(msg, registry)
        if not coins or len(coins) > max_coins:
            continue
        for coin in coins:
            per_coin.setdefault(coin, []).append(msg)

    attempts = []
    for coin in sorted(per_coin):
        msgs = sorted(per_coin[coin], key=lambda m: (m.timestamp, m.message_id or ""))
        group = []
        for msg in msgs:
            if group and msg.timestamp > group[0].timestamp + merge_window:
                attempts.append(_make_attempt(coin, group))
                group = []
            group.append(msg)
        if group:
            attempts.append(_make_attempt(coin, group))
    attempts.sort(key=lambda a: (a.anchor_time, a.coin))
    return attempts


def _make_attempt(coin, group):
    chosen = None
    seen = []
    for msg in group:
        buy, targets, stop = parse_prices_full(msg.text)
        if not targets:
            continue
        if buy is not None and buy >= targets[0]:
            logger.debug("%s: inconsistent buy/target in %s, skipped", coin, msg.message_id)
            continue
        seen.append(tuple(targets))
        if chosen is None:
            chosen = (buy, targets, stop)
    if len(set(seen)) > 1:
        logger.info("%s@%d: member messages disagree on targets; using the earliest",
                    coin, group[0].timestamp)
    buy, targets, stop = chosen if chosen else (None, [], None)
    return PumpAttempt(coin, group[0].timestamp, tuple(m.message_id for m in group),
                       buy, tuple(targets), frozenset(m.channel_id for m in group), stop)


@dataclass(frozen=True)
class SuccessVerdict:
    attempt_id: str
    threshold_pct: float
    window_hours: int
    success: bool
    peak_price: float
    peak_time: int
    target: float
    unit: str


def price_unit(target):
    """Targets below 1 (decimals or satoshi) are BTC prices, the rest USD."""
    return "price_btc" if target < 1.0 else "price_usd"


def evaluate_success(attempt, series, threshold_pct, window_hours, target="first"):
    """Did the price reach ``threshold_pct`` of the target within the window?

    The window is ``(anchor, anchor + window_hours]``; the threshold is
    inclusive.
    """
    if not 0 < threshold_pct <= 1:
        raise ValidationError(f"threshold_pct must be in (0, 1], got {threshold_pct}")
    if window_hours <= 0:
        raise ValidationError("window_hours must be positive")
    if not attempt.target_prices:
        raise UnpricedAttemptError(f"unpriced attempt {attempt.attempt_id}")
    x = attempt.target_prices[0] if target == "first" else attempt.target_prices[-1]
    lo, hi = attempt.anchor_time, attempt.anchor_time + int(window_hours * HOUR)
    ts = series.timestamps
    if len(ts) == 0 or ts[0] > lo or ts[-1] < hi:
        raise MarketGapError(f"market gap: {series.coin} does not cover [{lo}, {hi}]")
    i0 = int(np.searchsorted(ts, lo, side="right"))
    i1 = int(np.searchsorted(ts, hi, side="right"))
    inner = ts[max(i0 - 1, 0):i1 + 1]
    if len(inner) > 1 and np.max(np.diff(inner)) > MAX_MARKET_GAP:
        raise MarketGapError(f"market gap: {series.coin} has a hole inside [{lo}, {hi}]")
    unit = price_unit(x)
    prices = series.column(unit)[i0:i1]
    k = int(np.argmax(prices))
    peak, peak_t = float(prices[k]), int(ts[i0 + k])
    return SuccessVerdict(attempt.attempt_id, threshold_pct, window_hours,
                          bool(peak >= threshold_pct * x), peak, peak_t, x, unit)


@dataclass
class SuccessGrid:
    thresholds: list
    windows: list
    cells: dict = field(default_factory=dict)        # (thr, win) -> (successes, evaluable)
    unevaluable: dict = field(default_factory=dict)  # (thr, win) -> {"unpriced": n, "market_gap": n}

    def ratio(self, threshold, window):
        s, n = self.cells[(threshold, window)]
        return s / n if n else None

    def rows(self):
        for thr in self.thresholds:
            for win in self.windows:
                s, n = self.cells[(thr, win)]
                bad = self.unevaluable[(thr, win)]
                yield {"threshold": thr, "window_hours": win, "successes": s, "evaluable": n,
                       "ratio": s / n if n else None, "unpriced": bad["unpriced"],
                       "market_gap": bad["market_gap"]}

    def write_csv(self, path):
        cols = ["threshold", "window_hours", "successes", "evaluable", "ratio",
                "unpriced", "market_gap"]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows():
                r = row["ratio"]
                row["ratio"] = "" if r is None else f"{r:.6f}"
                w.writerow([row[c] for c in cols])


def success_ratio_grid(attempts, market, thresholds, windows, target="first"):
    if not attempts:
        raise ValidationError("success grid needs at least one attempt")
    grid = SuccessGrid(list(thresholds), list(windows))
    for thr in grid.thresholds:
        for win in grid.windows:
            s = n = 0
            bad = {"unpriced": 0, "market_gap": 0}
            for a in attempts:
                series = market.get(a.coin)
                try:
                    if series is None:
                        raise MarketGapError(f"no market data for {a.coin}")
                    v = evaluate_success(a, series, thr, win, target)
                except UnpricedAttemptError:
                    bad["unpriced"] += 1
                    continue
                except MarketGapError:
                    bad["market_gap"] += 1
                    continue
                n += 1
                s += v.success
            grid.cells[(thr, win)] = (s, n)
            grid.unevaluable[(thr, win)] = bad
    return grid


def write_attempts(path, attempts):
    with open(path, "w", encoding="utf-8") as fh:
        for a in attempts:
            fh.write(json.dumps(a.to_json(), sort_keys=True) + "\n")


def load_attempts(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                out.append(PumpAttempt.from_json(json.loads(raw)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"malformed attempt record ({exc})", path, lineno) from None
    return out
