"""Aggregated price and tweet-volume signatures around pump anchors, with a
uniformly random timestamp baseline."""

import bisect
import csv
from dataclasses import dataclass

import numpy as np

from pumpscope.corpus import BASE_GRANULARITY, HOUR
from pumpscope.errors import MarketGapError, ValidationError
from pumpscope.seeding import rng_for

DEFAULT_HALF_WINDOW = 3 * HOUR
MAX_HALF_WINDOW = 3 * 24 * HOUR
PRICE, TWEET_VOLUME = "price", "tweet_volume"


def minmax_normalize(values):
    """Scale to [0, 1]; a constant input maps to all zeros."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValidationError("cannot normalize an empty sequence")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


@dataclass(frozen=True, eq=False)
class Segment:
    coin: str
    center: int
    offsets: np.ndarray  # minutes
    values: np.ndarray
    kind: str = PRICE


@dataclass(frozen=True, eq=False)
class AggregateCurve:
    offsets: np.ndarray
    mean_values: np.ndarray
    n: int
    kind: str
    baseline: str

    def peak_offset(self):
        return float(self.offsets[int(np.argmax(self.mean_values))])

    def value_at(self, offset_minutes):
        return float(self.mean_values[int(np.argmin(np.abs(self.offsets - offset_minutes)))])


class TweetTimeline:
    """Sorted tweet timestamps per coin for fast window counts."""

    def __init__(self, tweets):
        per = {}
        for t in tweets:
            for c in t.cashtags:
                per.setdefault(c, []).append(t.timestamp)
        self._times = {c: sorted(v) for c, v in per.items()}

    def count(self, coin, start, end):
        """Tweets mentioning ``coin`` with ``start <= ts < end``."""
        ts = self._times.get(coin, [])
        return bisect.bisect_left(ts, end) - bisect.bisect_left(ts, start)


def _offsets(half_window, step):
    if half_window <= 0 or half_window % step:
        raise ValidationError("half_window must be a positive multiple of the step")
    return np.arange(-half_window, half_window + 1, step, dtype=np.int64)


def extract_segment(series, center, half_window=DEFAULT_HALF_WINDOW, kind=PRICE,
                    tweets=None, step=BASE_GRANULARITY, max_gap=HOUR):
    """Normalized segment ``[center - half_window, center + half_window]``.

    Price segments sample the series (last observation carried forward) every
    ``step`` seconds. Tweet-volume segments count the coin's tweets in buckets
    ``[center + offset, center + offset + step)``; ``tweets`` is a list of
    tweets or a :class:`TweetTimeline`.
    """
    offs = _offsets(half_window, step)
    times = center + offs
    if kind == PRICE:
        ts = series.timestamps
        if len(ts) == 0 or ts[0] > times[0] or ts[-1] < times[-1]:
            raise MarketGapError(f"segment gap: {series.coin} does not cover "
                                 f"[{times[0]}, {times[-1]}]")
        idx = np.searchsorted(ts, times, side="right") - 1
        if np.max(times - ts[idx]) > max_gap:
            raise MarketGapError(f"segment gap: {series.coin} has a hole near {center}")
        raw = series.price_btc[idx]
    elif kind == TWEET_VOLUME:
        timeline = tweets if isinstance(tweets, TweetTimeline) else TweetTimeline(tweets or [])
        raw = np.array([timeline.count(series.coin, t, t + step) for t in times], dtype=float)
    else:
        raise ValidationError(f"unknown segment kind {kind!r}")
    return Segment(series.coin, int(center), offs / 60.0, minmax_normalize(raw), kind)


def aggregate(segments, baseline="pump"):
    """Pointwise mean of segments that share offsets."""
    if not segments:
        raise ValidationError("nothing to aggregate")
    offs = segments[0].offsets
    for s in segments[1:]:
        if len(s.offsets) != len(offs) or not np.array_equal(s.offsets, offs):
            raise ValidationError("segment offsets do not match")
    values = np.mean([s.values for s in segments], axis=0)
    return AggregateCurve(offs.copy(), values, len(segments), segments[0].kind, baseline)


def random_baseline(coin, count, series_extent, seed, half_window=DEFAULT_HALF_WINDOW,
                    exclude=()):
    """``count`` centers drawn uniformly from times admitting a full segment.

    ``exclude`` optionally lists ``(start, end)`` intervals that centers must
    avoid.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    start, end = series_extent
    lo, hi = start + half_window, end - half_window
    if hi <= lo:
        raise ValidationError(f"extent too small for {coin}: needs more than {2 * half_window}s")
    rng = rng_for(seed, "random_baseline", coin)
    out = []
    tries = 0
    while len(out) < count:
        t = int(rng.integers(lo, hi + 1))
        tries += 1
        if any(a <= t <= b for a, b in exclude):
            if tries > 1000 * count:
                raise ValidationError(f"cannot place {count} baseline centers for {coin}")
            continue
        out.append(t)
    return out


def signature_curves(attempts, market, tweets, half_window=DEFAULT_HALF_WINDOW, seed=0,
                     exclude_pumps=False):
    """Pump and random-baseline curves for both kinds.

    Returns ``(curves, skipped)`` where ``skipped`` counts attempts whose
    segment could not be extracted.
    """
    if half_window > MAX_HALF_WINDOW:
        raise ValidationError("half_window above three days")
    timeline = TweetTimeline(tweets)
    segs = {(k, b): [] for k in (PRICE, TWEET_VOLUME) for b in ("pump", "random")}
    skipped = 0
    per_coin = {}
    for a in attempts:
        per_coin.setdefault(a.coin, []).append(a)
    for coin in sorted(per_coin):
        series = market.get(coin)
        if series is None or len(series) == 0:
            skipped += len(per_coin[coin])
            continue
        n_ok = 0
        for a in per_coin[coin]:
            try:
                p = extract_segment(series, a.anchor_time, half_window, PRICE)
            except MarketGapError:
                skipped += 1
                continue
            segs[(PRICE, "pump")].append(p)
            segs[(TWEET_VOLUME, "pump")].append(
                extract_segment(series, a.anchor_time, half_window, TWEET_VOLUME, timeline))
            n_ok += 1
        if not n_ok:
            continue
        exclude = [(a.anchor_time - half_window, a.anchor_time + half_window)
                   for a in per_coin[coin]] if exclude_pumps else ()
        centers = random_baseline(coin, n_ok, (series.start, series.end), seed, half_window,
                                  exclude)
        for c in centers:
            try:
                p = extract_segment(series, c, half_window, PRICE)
            except MarketGapError:
                continue
            segs[(PRICE, "random")].append(p)
            segs[(TWEET_VOLUME, "random")].append(
                extract_segment(series, c, half_window, TWEET_VOLUME, timeline))
    curves = [aggregate(v, b) for (k, b), v in segs.items() if v]
    return curves, skipped


def write_curves(path, curves):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "baseline", "offset_minutes", "mean_value", "n"])
        for c in curves:
            for off, v in zip(c.offsets, c.mean_values):
                w.writerow([c.kind, c.baseline, f"{off:g}", f"{v:.9f}", c.n])
