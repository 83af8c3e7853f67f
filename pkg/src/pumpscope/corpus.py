"""Domain records and file loaders for market series, channel messages,
microblog posts, the coin registry and account-status records.

All timestamps are integer UTC seconds. Loaders raise :class:`DataError`
with the offending line number on malformed input.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pumpscope.errors import DataError

logger = logging.getLogger(__name__)

HOUR = 3600
BASE_GRANULARITY = 300
STALE_AFTER = 6 * HOUR

MARKET_FIELDS = ("timestamp", "coin", "price_btc", "price_usd", "volume", "market_cap")
STATUS_FIELDS = ("user_id", "status", "botometer_score")
VALUE_FIELDS = MARKET_FIELDS[2:]
PUMP, NOT_PUMP = "pump", "not_pump"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CoinSeries:
    """Timestamped market observations for one coin, in column form."""

    coin: str
    timestamps: np.ndarray
    price_btc: np.ndarray
    price_usd: np.ndarray
    volume: np.ndarray
    market_cap: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _frozen(self.timestamps, np.int64))
        for name in VALUE_FIELDS:
            object.__setattr__(self, name, _frozen(getattr(self, name), float))
        n = len(self.timestamps)
        for name in VALUE_FIELDS:
            col = getattr(self, name)
            if len(col) != n:
                raise DataError(f"{self.coin}: column {name} has length {len(col)}, expected {n}")
            if n and (not np.all(np.isfinite(col)) or np.any(col < 0)):
                raise DataError(f"{self.coin}: column {name} must be finite and >= 0")
        if n > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise DataError(f"{self.coin}: timestamps must be strictly increasing")

    @classmethod
    def from_points(cls, coin, points):
        points = list(points)
        if not points:
            return cls(coin, [], [], [], [], [])
        cols = list(zip(*points))
        return cls(coin, *cols)

    @property
    def points(self):
        return list(zip(self.timestamps.tolist(), self.price_btc.tolist(),
                        self.price_usd.tolist(), self.volume.tolist(),
                        self.market_cap.tolist()))

    def __len__(self):
        return len(self.timestamps)

    def __eq__(self, other):
        if not isinstance(other, CoinSeries):
            return NotImplemented
        return self.coin == other.coin and self.points == other.points

    def column(self, name):
        if name not in VALUE_FIELDS:
            raise KeyError(name)
        return getattr(self, name)

    @property
    def start(self):
        return int(self.timestamps[0])

    @property
    def end(self):
        return int(self.timestamps[-1])

    def index_at(self, t):
        """Index of the last observation with timestamp <= t, or -1."""
        return int(np.searchsorted(self.timestamps, t, side="right")) - 1

    def value_at(self, t, name="price_btc"):
        """Last-observation-carried-forward value at time ``t`` (None before the start)."""
        i = self.index_at(t)
        if i < 0:
            return None
        return float(getattr(self, name)[i])


@dataclass(frozen=True)
class SocialMessage:
    channel_id: str
    timestamp: int
    text: str
    label: Optional[str] = None
    message_id: Optional[str] = None

    @property
    def is_pump(self):
        return self.label == PUMP


@dataclass(frozen=True)
class Tweet:
    tweet_id: str
    user_id: str
    timestamp: int
    text: str
    cashtags: frozenset = frozenset()


@dataclass(frozen=True)
class CoinRegistry:
    symbols: frozenset
    aliases: dict = field(default_factory=dict)

    def __post_init__(self):
        symbols = frozenset(s.upper() for s in self.symbols)
        if not symbols:
            raise DataError("coin registry has no symbols")
        aliases = {k.lower(): v.upper() for k, v in dict(self.aliases).items()}
        bad = sorted(a for a, s in aliases.items() if s not in symbols)
        if bad:
            raise DataError(f"aliases map to unknown symbols: {', '.join(bad)}")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "aliases", aliases)

    def __hash__(self):
        return hash((self.symbols, tuple(sorted(self.aliases.items()))))

    def resolve(self, token):
        """Map a raw token (optionally ``$``-prefixed) to a registry symbol, or None."""
        tok = token.lstrip("$")
        if not tok:
            return None
        up = tok.upper()
        if up in self.symbols:
            return up
        return self.aliases.get(tok.lower())


@dataclass(frozen=True)
class AccountStatus:
    user_id: str
    status: str
    botometer_score: Optional[float] = None

    def __post_init__(self):
        if self.status not in ("active", "suspended"):
            raise DataError(f"unknown account status {self.status!r}")
        if self.botometer_score is not None and not 0.0 <= self.botometer_score <= 1.0:
            raise DataError(f"botometer score out of range: {self.botometer_score}")

    @property
    def suspended(self):
        return self.status == "suspended"


# -- parsing helpers ---------------------------------------------------------

def _int_ts(value, path, line):
    try:
        if isinstance(value, bool):
            raise ValueError
        if isinstance(value, str):
            value = value.strip()
            return int(value)
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError
            return int(value)
        return int(value)
    except (TypeError, ValueError):
        raise DataError(f"invalid timestamp {value!r}", path, line) from None


def _nonneg(value, name, path, line):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise DataError(f"invalid {name} {value!r}", path, line) from None
    if not math.isfinite(x):
        raise DataError(f"non-finite {name}", path, line)
    if x < 0:
        raise DataError(f"negative {name} {x}", path, line)
    return x


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON ({exc.msg})", path, lineno) from None
            if not isinstance(rec, dict):
                raise DataError("expected a JSON object", path, lineno)
            yield lineno, rec


def _require(rec, names, path, line):
    missing = [n for n in names if n not in rec]
    if missing:
        raise DataError(f"missing required field {missing[0]!r}", path, line)


def _csv_rows(path, header):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            return
        cols = [c.strip() for c in first]
        missing = [h for h in header if h not in cols]
        if missing:
            raise DataError(f"missing column {missing[0]!r} in header", path, 1)
        idx = {h: cols.index(h) for h in header}
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(cols):
                raise DataError(f"expected {len(cols)} fields, got {len(row)}", path, lineno)
            yield lineno, {h: row[i].strip() for h, i in idx.items()}


# -- loaders -----------------------------------------------------------------

def load_market(path):
    """Load a market CSV into ``{coin: CoinSeries}``."""
    rows = {}
    for lineno, rec in _csv_rows(path, MARKET_FIELDS):
        coin = rec["coin"].upper()
        if not coin:
            raise DataError("empty coin symbol", path, lineno)
        ts = _int_ts(rec["timestamp"], path, lineno)
        values = tuple(_nonneg(rec[n], n, path, lineno) for n in VALUE_FIELDS)
        per_coin = rows.setdefault(coin, {})
        if ts in per_coin:
            raise DataError(f"duplicate observation for {coin} at {ts}", path, lineno)
        per_coin[ts] = values
    out = {}
    for coin in sorted(rows):
        pts = sorted(rows[coin].items())
        out[coin] = CoinSeries.from_points(coin, [(t, *v) for t, v in pts])
    return out


def load_messages(path):
    out = []
    for lineno, rec in _read_jsonl(path):
        _require(rec, ("channel_id", "timestamp", "text"), path, lineno)
        label = rec.get("label")
        if label is not None and label not in (PUMP, NOT_PUMP):
            raise DataError(f"invalid label {label!r}", path, lineno)
        text = rec["text"]
        if not isinstance(text, str):
            raise DataError("text must be a string", path, lineno)
        if label is not None and not text.strip():
            raise DataError("labeled message has empty text", path, lineno)
        mid = rec.get("message_id")
        out.append(SocialMessage(
            channel_id=str(rec["channel_id"]),
            timestamp=_int_ts(rec["timestamp"], path, lineno),
            text=text,
            label=label,
            message_id=str(mid) if mid is not None else f"{rec['channel_id']}:{lineno}",
        ))
    return out


def load_tweets(path, registry=None):
    out = []
    for lineno, rec in _read_jsonl(path):
        _require(rec, ("tweet_id", "user_id", "timestamp", "text", "cashtags"), path, lineno)
        tags = rec["cashtags"]
        if not isinstance(tags, list):
            raise DataError("cashtags must be a list", path, lineno)
        tags = frozenset(str(t).lstrip("$").upper() for t in tags)
        if registry is not None:
            unknown = sorted(tags - registry.symbols)
            if unknown:
                raise DataError(f"cashtag {unknown[0]!r} not in registry", path, lineno)
        out.append(Tweet(
            tweet_id=str(rec["tweet_id"]),
            user_id=str(rec["user_id"]),
            timestamp=_int_ts(rec["timestamp"], path, lineno),
            text=str(rec["text"]),
            cashtags=tags,
        ))
    return out


def load_statuses(path):
    out = {}
    for lineno, rec in _csv_rows(path, STATUS_FIELDS):
        raw = rec["botometer_score"]
        score = None
        if raw:
            try:
                score = float(raw)
            except ValueError:
                raise DataError(f"invalid botometer score {raw!r}", path, lineno) from None
            if not 0.0 <= score <= 1.0:
                raise DataError(f"botometer score out of range: {score}", path, lineno)
        if rec["status"] not in ("active", "suspended"):
            raise DataError(f"unknown status {rec['status']!r}", path, lineno)
        if rec["user_id"] in out:
            raise DataError(f"duplicate user {rec['user_id']!r}", path, lineno)
        out[rec["user_id"]] = AccountStatus(rec["user_id"], rec["status"], score)
    return out


def load_registry(path):
    symbols, aliases = set(), {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                alias, _, sym = (p.strip() for p in line.partition("="))
                if not alias or not sym:
                    raise DataError(f"malformed alias line {raw.strip()!r}", path, lineno)
                aliases[alias] = sym
            else:
                symbols.add(line.upper())
    return CoinRegistry(frozenset(symbols), aliases)


# -- writers (canonical form) ------------------------------------------------

def _num(x):
    return repr(float(x))


def write_market(path, market):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MARKET_FIELDS)
        rows = []
        for coin, series in market.items():
            for t, pb, pu, vol, mc in series.points:
                rows.append((t, coin, pb, pu, vol, mc))
        rows.sort()
        for t, coin, *vals in rows:
            w.writerow([t, coin, *map(_num, vals)])


def write_messages(path, messages):
    with open(path, "w", encoding="utf-8") as fh:
        for m in messages:
            rec = {"channel_id": m.channel_id, "timestamp": m.timestamp, "text": m.text}
            if m.label is not None:
                rec["label"] = m.label
            if m.message_id is not None:
                rec["message_id"] = m.message_id
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def write_tweets(path, tweets):
    with open(path, "w", encoding="utf-8") as fh:
        for t in tweets:
            rec = {"tweet_id": t.tweet_id, "user_id": t.user_id, "timestamp": t.timestamp,
                   "text": t.text, "cashtags": sorted(t.cashtags)}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def write_statuses(path, statuses):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATUS_FIELDS)
        for uid in sorted(statuses):
            s = statuses[uid]
            w.writerow([uid, s.status, "" if s.botometer_score is None else _num(s.botometer_score)])


def write_registry(path, registry):
    with open(path, "w", encoding="utf-8") as fh:
        for sym in sorted(registry.symbols):
            fh.write(sym + "\n")
        for alias in sorted(registry.aliases):
            fh.write(f"{alias}={registry.aliases[alias]}\n")


# -- resampling --------------------------------------------------------------

def resample_hourly(series):
    """Resample to hour boundaries with last-observation-carried-forward.

    Hour ``H`` takes the last observation with timestamp <= ``H``. Hours run
    from the first boundary at or after the first observation to the first
    boundary at or after the last one.
    """
    if len(series) == 0:
        raise DataError(f"{series.coin}: cannot resample an empty series")
    ts = series.timestamps
    first = -(-int(ts[0]) // HOUR) * HOUR
    last = -(-int(ts[-1]) // HOUR) * HOUR
    hours = np.arange(first, last + 1, HOUR, dtype=np.int64)
    idx = np.searchsorted(ts, hours, side="right") - 1
    age = hours - ts[idx]
    n_stale = int(np.sum(age > STALE_AFTER))
    if n_stale:
        logger.warning("%s: %d hourly values carried forward more than %dh",
                       series.coin, n_stale, STALE_AFTER // HOUR)
    return CoinSeries(series.coin, hours, *(getattr(series, n)[idx] for n in VALUE_FIELDS))


def stale_hours(hourly, raw):
    """Hours of ``hourly`` whose carried value is older than six hours in ``raw``."""
    idx = np.searchsorted(raw.timestamps, hourly.timestamps, side="right") - 1
    age = hourly.timestamps - raw.timestamps[idx]
    return hourly.timestamps[age > STALE_AFTER].tolist()
