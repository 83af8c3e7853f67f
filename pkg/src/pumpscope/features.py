"""Per-(coin, timestamp) feature rows.

Families:

* ``economic`` -- price (BTC), volume and market cap at each of the
  ``w_econ`` hours before ``t``, plus hour-over-hour percentage changes.
* ``target`` -- ``(x - price_h) / x`` for the attempt's target price ``x``
  (Task II only), prefixed by a has-target flag.
* ``twitter`` -- tweet count, unique users and mean sentiment in
  ``[t - w_tw, t]``.
* ``pagerank`` -- the coin's PageRank in the co-mention graph of that window.
* ``components`` -- active users per user-user connected component.
* ``corex`` -- latent CorEx factors of the 6-hour user activity vector.

Hour ``t - h`` is ``floor(t / 1h) * 1h - h * 1h`` on the hourly grid.
"""

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from pumpscope.attempts import price_unit
from pumpscope.corpus import HOUR, resample_hourly
from pumpscope.errors import DataError, MarketGapError, UnpricedAttemptError, ValidationError
from pumpscope.graphs import PUMP_USER_WINDOW, coin_coin_graph, component_activity_features, pagerank
from pumpscope.sentiment import DEFAULT_LEXICON, sentiment_score
from pumpscope.tweetindex import TweetIndex

ECONOMIC_COLUMNS = ("price_btc", "volume", "market_cap")
ECONOMIC_FAMILIES = ("economic", "target")
TWITTER_FAMILIES = ("twitter", "pagerank", "components", "corex")
FAMILY_ORDER = ECONOMIC_FAMILIES + TWITTER_FAMILIES
VARIANTS = {"economic": ECONOMIC_FAMILIES, "twitter": TWITTER_FAMILIES, "both": FAMILY_ORDER}


class FeatureError(DataError):
    def __init__(self, family, message):
        self.family = family
        super().__init__(f"{family} features: {message}")


@dataclass(frozen=True)
class FeatureConfig:
    w_econ: int = 15
    w_tw: int = 15
    include_target: bool = False
    corex_window: int = PUMP_USER_WINDOW

    def __post_init__(self):
        if self.w_econ < 1 or self.w_tw < 1:
            raise ValidationError("feature windows must be >= 1 hour")

    @classmethod
    def task1(cls, **kw):
        return cls(**{"w_econ": 15, "w_tw": 15, **kw})

    @classmethod
    def task2(cls, **kw):
        return cls(**{"w_econ": 7, "w_tw": 15, "include_target": True, **kw})

    def to_json(self):
        return {"w_econ": self.w_econ, "w_tw": self.w_tw, "include_target": self.include_target,
                "corex_window": self.corex_window}


def pct_change(x_prev, x_next):
    if x_prev <= 0:
        raise ValidationError(f"nonpositive base {x_prev} for percentage change")
    return (x_next - x_prev) / x_prev


def base_hour(t):
    return (int(t) // HOUR) * HOUR


def _hour_values(hourly, t, hours, name):
    """Values of column ``name`` at hours ``t - h`` for each ``h`` in ``hours``."""
    b = base_hour(t)
    wanted = np.array([b - h * HOUR for h in hours], dtype=np.int64)
    pos = np.searchsorted(hourly.timestamps, wanted)
    out = []
    for h, w, p in zip(hours, wanted, pos):
        if p >= len(hourly.timestamps) or hourly.timestamps[p] != w:
            raise MarketGapError(f"market gap at t-{h}h for {hourly.coin}")
        out.append(float(hourly.column(name)[p]))
    return out


def economic_features(series_hourly, t, w_econ):
    """Levels at hours t-1..t-w and percentage changes into hours t-0..t-(w-1).

    Layout per column (price_btc, volume, market_cap): ``w`` levels, then
    ``w`` changes where entry ``h`` is the change from hour t-(h+1) to t-h.
    """
    hours = list(range(0, w_econ + 1))
    out = []
    for name in ECONOMIC_COLUMNS:
        vals = _hour_values(series_hourly, t, hours, name)
        out.extend(vals[1:])
        for h in range(w_econ):
            try:
                out.append(pct_change(vals[h + 1], vals[h]))
            except ValidationError as exc:
                raise DataError(f"{name} at t-{h + 1}h: {exc}") from None
    return np.array(out)


def economic_columns(w_econ):
    cols = []
    for name in ECONOMIC_COLUMNS:
        cols += [f"{name}_lvl_{h}" for h in range(1, w_econ + 1)]
        cols += [f"{name}_pct_{h}" for h in range(w_econ)]
    return cols


def target_features(attempt, series_hourly, w_econ):
    """``(x - price_h) / x`` for h = 1..w_econ, with ``x`` the first target."""
    if attempt is None or not attempt.target_prices:
        raise UnpricedAttemptError("unpriced attempt")
    x = attempt.target_prices[0]
    if x <= 0:
        raise UnpricedAttemptError("nonpositive target price")
    prices = _hour_values(series_hourly, attempt.anchor_time, range(1, w_econ + 1), price_unit(x))
    return np.array([(x - p) / x for p in prices])


def twitter_stats(tweets, coin, start, end, lexicon=DEFAULT_LEXICON, scores=None):
    """``(count, unique_users, mean_sentiment)`` for tweets tagging ``coin`` in ``[start, end]``."""
    if isinstance(tweets, TweetIndex):
        window = tweets.coin_window(coin, start, end)
    else:
        window = [t for t in tweets if coin in t.cashtags and start <= t.timestamp <= end]
    if not window:
        return 0, 0, 0.0
    if scores is None:
        s = [sentiment_score(t.text, lexicon) for t in window]
    else:
        s = [scores[t.tweet_id] for t in window]
    return len(window), len({t.user_id for t in window}), float(np.mean(s))


@dataclass
class FeatureSources:
    """Immutable inputs shared by every row of a dataset."""

    market: dict                      # coin -> raw CoinSeries
    tweets: TweetIndex
    lexicon: object = DEFAULT_LEXICON
    components: dict = field(default_factory=dict)   # coin -> ComponentAssignment
    corex: object = None
    hourly: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.tweets, TweetIndex):
            self.tweets = TweetIndex(self.tweets)
        if not self.hourly:
            self.hourly = {c: resample_hourly(s) for c, s in self.market.items() if len(s)}
        self.scores = {t.tweet_id: sentiment_score(t.text, self.lexicon) for t in self.tweets.tweets}
        self._corex_pos = {}
        if self.corex is not None:
            self._corex_pos = {u: j for j, u in enumerate(self.corex.columns)}

    def corex_activity(self, coin, t, w):
        b = np.zeros(len(self._corex_pos))
        for tw in self.tweets.coin_window(coin, t - w, t):
            j = self._corex_pos.get(tw.user_id)
            if j is not None:
                b[j] += 1
        return b


@dataclass(frozen=True, eq=False)
class FeatureRow:
    coin: str
    timestamp: int
    label: Optional[int]
    families: dict
    config: FeatureConfig

    def vector(self, variant="both"):
        parts = [self.families[f] for f in VARIANTS[variant] if f in self.families]
        return np.concatenate(parts) if parts else np.zeros(0)

    def columns(self, variant="both"):
        out = []
        for f in VARIANTS[variant]:
            if f in self.families:
                out += family_columns(f, self.config, len(self.families[f]))
        return out

    def with_label(self, label):
        return replace(self, label=label)


def family_columns(family, config, n):
    if family == "economic":
        return economic_columns(config.w_econ)
    if family == "target":
        return ["has_target"] + [f"target_gap_{h}" for h in range(1, n)]
    if family == "twitter":
        return ["tweet_count", "unique_users", "mean_sentiment"]
    if family == "pagerank":
        return ["pagerank"]
    return [f"{family}_{j}" for j in range(n)]


def assemble_row(coin, t, label, sources, config, attempt=None):
    """Build one row; any family failure raises :class:`FeatureError`."""
    fam = {}
    hourly = sources.hourly.get(coin)
    try:
        if hourly is None:
            raise MarketGapError(f"no market data for {coin}")
        fam["economic"] = economic_features(hourly, t, config.w_econ)
    except DataError as exc:
        raise FeatureError("economic", str(exc)) from None
    if config.include_target:
        if attempt is None:
            fam["target"] = np.zeros(config.w_econ + 1)
        else:
            try:
                fam["target"] = np.concatenate([[1.0], target_features(attempt, hourly, config.w_econ)])
            except (DataError, ValidationError) as exc:
                raise FeatureError("target", str(exc)) from None
    start = t - config.w_tw * HOUR
    fam["twitter"] = np.array(twitter_stats(sources.tweets, coin, start, t, sources.lexicon,
                                            sources.scores), dtype=float)
    g = coin_coin_graph(sources.tweets, start, t)
    if coin not in g.nodes:
        g = type(g)(g.nodes + (coin,), g.edges)
    fam["pagerank"] = np.array([pagerank(g)[coin]])
    comp = sources.components.get(coin)
    fam["components"] = (component_activity_features(comp, sources.tweets, coin, start, t)
                         if comp is not None else np.zeros(0))
    if sources.corex is not None:
        b = sources.corex_activity(coin, t, config.corex_window)
        fam["corex"] = sources.corex.transform(b)[0]
    for name, v in fam.items():
        if not np.all(np.isfinite(v)):
            raise FeatureError(name, "non-finite value")
    return FeatureRow(coin, int(t), label, fam, config)


def write_dataset(path, rows, variant="both"):
    """Write rows as CSV plus a ``<path>.schema.json`` sidecar."""
    if not rows:
        cols = []
    else:
        cols = rows[0].columns(variant)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["coin", "timestamp", "label"] + cols)
        for r in rows:
            vec = r.vector(variant)
            if len(vec) != len(cols):
                raise ValidationError("rows with different layouts cannot share one file")
            w.writerow([r.coin, r.timestamp, "" if r.label is None else r.label]
                       + [repr(float(x)) for x in vec])
    schema = {"columns": ["coin", "timestamp", "label"] + cols, "variant": variant,
              "config": rows[0].config.to_json() if rows else None}
    with open(str(path) + ".schema.json", "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2, sort_keys=True)
        fh.write("\n")
