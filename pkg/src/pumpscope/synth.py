"""Deterministic synthetic scenarios: market series with injected pumps,
channel messages, microblog posts, account statuses and ground truth.

Pumps look like this in the data:

* price rises to a peak 15-45 minutes after the anchor, then decays below the
  pre-pump level; successful pumps peak above their first target, failed ones
  stay well below it;
* optional pre-pump momentum (``Scenario.momentum``): successful pumps are
  preceded by a six-hour price ramp, failed ones by a slight decline;
* a tweet burst by the coin's pump crew in ``[anchor - 2h, anchor + 1h]``;
* a pump announcement at the anchor plus, sometimes, a follow-up within 3h.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from pumpscope.corpus import (BASE_GRANULARITY, HOUR, NOT_PUMP, PUMP, AccountStatus,
                              CoinRegistry, CoinSeries, SocialMessage, Tweet, write_market,
                              write_messages, write_registry, write_statuses, write_tweets)
from pumpscope.errors import ValidationError
from pumpscope.seeding import rng_for

DAY = 24 * HOUR
SATOSHI = 1e-8

COIN_POOL = (
    "ADA", "NCASH", "DGB", "RCN", "TRX", "NMR", "XEM", "XRP", "QTUM", "ARK", "POWR", "SUB",
    "VIB", "POA", "GTO", "WPR", "OST", "LUN", "MTH", "SNGLS", "AMB", "BLZ", "EVX", "FUEL",
)
EXTRA_SYMBOLS = ("BTC", "ETH")
ALIASES = {"cardano": "ADA", "tron": "TRX", "ripple": "XRP", "bitcoin": "BTC", "ethereum": "ETH"}
EXCHANGES = ("bittrex", "binance", "yobit", "cryptopia")
CHANNELS = ("whale_pumps", "crypto_signals_vip", "moon_club", "altcoin_gems", "rocket_calls")


@dataclass(frozen=True)
class PumpSpec:
    coin: str
    anchor: int
    succeed: bool
    buy: Optional[float] = None
    targets: tuple = ()


@dataclass
class Scenario:
    seed: int = 7
    coins: int = 6
    duration_days: int = 40
    start: int = 1_514_764_800          # 2018-01-01T00:00:00Z
    pumps_per_coin: int = 16
    success_rate: float = 0.5
    pump_schedule: Optional[list] = None  # explicit PumpSpec list overrides the two above
    min_pump_spacing: int = DAY
    momentum: float = 0.0               # log-price ramp before successful pumps
    n_humans: int = 300
    n_bots: int = 240
    bot_degree_boost: int = 2           # extra burst tweets per active bot
    crew_size: int = 40
    tweet_rate: float = 2.0             # background tweets per coin per hour
    burst_participation: float = 0.7
    price_volatility: float = 0.002     # log-price sd per 5-minute step
    noise_messages_per_day: int = 6
    n_labeled: int = 600

    def validate(self):
        if self.coins < 1 or self.coins > len(COIN_POOL):
            raise ValidationError(f"coins must be in 1..{len(COIN_POOL)}")
        if self.duration_days < 8:
            raise ValidationError("duration_days must be >= 8")
        if not 0 <= self.success_rate <= 1:
            raise ValidationError("success_rate must be in [0, 1]")
        if self.pump_schedule is not None:
            end = self.start + self.duration_days * DAY
            per = {}
            for p in self.pump_schedule:
                if not self.start <= p.anchor <= end:
                    raise ValidationError(f"pump anchor {p.anchor} outside the scenario")
                per.setdefault(p.coin, []).append(p.anchor)
            for coin, anchors in per.items():
                anchors.sort()
                if any(b - a <= 3 * HOUR for a, b in zip(anchors, anchors[1:])):
                    raise ValidationError(f"infeasible schedule: {coin} anchors within 3h")


@dataclass
class SynthOutput:
    market: dict
    messages: list
    labeled: list
    tweets: list
    statuses: dict
    registry: CoinRegistry
    truth: dict = field(default_factory=dict)

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "market": os.path.join(out_dir, "market.csv"),
            "messages": os.path.join(out_dir, "messages.jsonl"),
            "labeled": os.path.join(out_dir, "labeled.jsonl"),
            "tweets": os.path.join(out_dir, "tweets.jsonl"),
            "statuses": os.path.join(out_dir, "statuses.csv"),
            "registry": os.path.join(out_dir, "registry.txt"),
            "truth": os.path.join(out_dir, "truth.json"),
        }
        write_market(paths["market"], self.market)
        write_messages(paths["messages"], self.messages)
        write_messages(paths["labeled"], self.labeled)
        write_tweets(paths["tweets"], self.tweets)
        write_statuses(paths["statuses"], self.statuses)
        write_registry(paths["registry"], self.registry)
        with open(paths["truth"], "w", encoding="utf-8") as fh:
            json.dump(self.truth, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return paths


# -- price formatting --------------------------------------------------------

def _round_sig(x, digits=3):
    if x <= 0:
        return x
    return float(f"{x:.{digits - 1}e}")


def _quote(rng, price):
    """Round ``price`` to a quotable value; returns ``(value, text)``."""
    if price < 2e-5 and rng.random() < 0.6:
        sat = max(1, int(round(price / SATOSHI)))
        return sat * SATOSHI, f"{sat} sat"
    v = _round_sig(price)
    return v, f"{v:.10f}".rstrip("0")


# -- message templates -------------------------------------------------------

def _coin_ref(rng, coin):
    forms = [f"${coin}", f"#{coin}", coin, f"{coin} coin"]
    return forms[int(rng.integers(len(forms)))]


def _pump_text(rng, coin, buy_txt, target_txts, stop_txt):
    ex = EXCHANGES[int(rng.integers(len(EXCHANGES)))]
    ref = _coin_ref(rng, coin)
    kind = int(rng.integers(5))
    if kind == 0:
        lines = ["PUMP SIGNAL", f"Coin: {ref}", f"Exchange: {ex}", f"Buy: {buy_txt}"]
        lines += [f"Target {i + 1}: {t}" for i, t in enumerate(target_txts)]
        lines.append(f"Stop loss: {stop_txt}")
        return "\n".join(lines)
    if kind == 1:
        return (f"{ref} signal on {ex}! accumulate now, buy zone {buy_txt} "
                f"targets {', '.join(target_txts)} stoploss {stop_txt} long term hold")
    if kind == 2:
        tg = " ".join(f"t{i + 1} {t}" for i, t in enumerate(target_txts))
        return f"Buy {ref} at {buy_txt} on {ex}. {tg}. Low risk, volume starting, good coin"
    if kind == 3:
        return (f"New signal coin {ref} ({ex})\nbuy {buy_txt}\nsell {target_txts[0]}"
                + "".join(f"\ntarget {t}" for t in target_txts[1:])
                + f"\nstop {stop_txt}\ncurrent price is low, block start")
    return (f"Accumulate {ref} current price {buy_txt} -- buy and hold, "
            f"tg1 {target_txts[0]}" + "".join(f" tg{i + 2} {t}" for i, t in enumerate(target_txts[1:]))
            + f". {ex} signal, day trade, sl {stop_txt}")


def _followup_text(rng, coin):
    ref = _coin_ref(rng, coin)
    opts = [f"{ref} still in buy zone, accumulate before targets hit",
            f"Reminder: buy {ref} signal is live, targets above, hold",
            f"{ref} volume starting on the signal, buy and hold for targets"]
    return opts[int(rng.integers(len(opts)))]


def _noise_text(rng, coins):
    c = coins[int(rng.integers(len(coins)))]
    ref = _coin_ref(rng, c)
    pct = int(rng.integers(3, 60))
    others = ", ".join(f"${x}" for x in rng.permutation(coins)[:5])
    opts = [
        f"{ref} achieved {pct}% profit, congratulations to all members",
        f"Done! {ref} reached our goal, {pct}% profit in {int(rng.integers(2, 30))} hours",
        f"Market update: BTC dominance is up {pct}%, altcoins may bounce soon",
        f"Top movers today: {others}",
        "Free channel members, please ask in pm for VIP access",
        f"{ref} news: team announced partnership, strong trend",
        "Don't chase the price, wait for our next signal",
        f"Yesterday {ref} made a big bounce, another chance may come",
        f"Set your orders for {ref}, trend looks strong this week",
        "Reminder: never invest what you can't afford to lose",
        f"{ref} is going, {pct}% up, profit taken",
        f"Big announcement tomorrow, stay tuned, also check the {ref} chart",
    ]
    return opts[int(rng.integers(len(opts)))]


_CHATTER = (
    "{ref} looks interesting today", "holding {ref} long term, good project",
    "anyone trading {ref}?", "{ref} chart is boring lately", "not sure about {ref}, bad volume",
    "{ref} partnership news is great", "sold my {ref}, lost a bit", "{ref} and {ref2} both green",
    "{ref} vs {ref2}, which one?", "bearish on {ref} this week", "{ref} community is strong",
)
_PROMO = (
    "{ref} is about to moon, buy now!", "huge gains coming for {ref}, don't miss it",
    "{ref} rocket launching, join t.me/{chan}", "next 10x gem: {ref}, join us t.me/{chan}",
    "{ref} breakout incoming, massive profit", "buy {ref} before it explodes",
)


def _tweet_text(rng, templates, coin, coin2=None, chan="pumps"):
    t = templates[int(rng.integers(len(templates)))]
    return t.format(ref=f"${coin}", ref2=f"${coin2 or coin}", chan=chan)


def labeled_messages(n, seed, coins=COIN_POOL, pump_fraction=0.5, start=1_514_764_800):
    """Standalone labeled messages drawn from the same templates as the stream."""
    rng = rng_for(seed, "labeled")
    out = []
    for i in range(n):
        ts = start + int(rng.integers(0, 365 * DAY))
        coin = coins[int(rng.integers(len(coins)))]
        if rng.random() >= pump_fraction:
            text, label = _noise_text(rng, list(coins)), NOT_PUMP
        elif rng.random() < 0.2:
            text, label = _followup_text(rng, coin), PUMP
        else:
            price = 10 ** rng.uniform(-7, -3.5)
            buy_v, buy_t = _quote(rng, price)
            tgt = []
            for mult in sorted(rng.uniform(1.1, 2.0, size=int(rng.integers(1, 4)))):
                tgt.append(_quote(rng, buy_v * mult)[1])
            text = _pump_text(rng, coin, buy_t, tgt, _quote(rng, buy_v * 0.85)[1])
            label = PUMP
        chan = CHANNELS[int(rng.integers(len(CHANNELS)))]
        out.append(SocialMessage(chan, ts, text, label, f"L{i:05d}"))
    return out


# -- generation --------------------------------------------------------------

def _schedule(sc, coins, rng):
    if sc.pump_schedule is not None:
        return sorted(sc.pump_schedule, key=lambda p: (p.anchor, p.coin))
    lo = sc.start + 2 * DAY
    hi = sc.start + (sc.duration_days - 4) * DAY
    out = []
    for coin in coins:
        n = sc.pumps_per_coin
        if n == 0:
            continue
        # Evenly spaced slots with jitter keep anchors min_pump_spacing apart.
        slot = (hi - lo) / n
        if slot < sc.min_pump_spacing:
            raise ValidationError("too many pumps for the scenario duration")
        jitter = slot - sc.min_pump_spacing
        n_succ = int(round(sc.success_rate * n))
        flags = np.zeros(n, dtype=bool)
        flags[rng.permutation(n)[:n_succ]] = True
        for i in range(n):
            a = int(lo + i * slot + rng.uniform(0, jitter))
            out.append(PumpSpec(coin, a, bool(flags[i])))
    return sorted(out, key=lambda p: (p.anchor, p.coin))


def _spike(tau, peak_mult, t_peak, post=0.97, decay=2 * HOUR):
    f = np.ones_like(tau, dtype=float)
    up = (tau > 0) & (tau <= t_peak)
    f[up] = 1.0 + (peak_mult - 1.0) * tau[up] / t_peak
    after = tau > t_peak
    f[after] = post + (peak_mult - post) * np.exp(-(tau[after] - t_peak) / decay)
    return f


def _momentum(tau, m):
    out = np.zeros_like(tau, dtype=float)
    ramp = (tau >= -6 * HOUR) & (tau <= 0)
    out[ramp] = m * (tau[ramp] + 6 * HOUR) / (6 * HOUR)
    after = tau > 0
    out[after] = m * np.exp(-tau[after] / (6 * HOUR))
    return out


def generate(sc):
    """Build a complete synthetic corpus for ``sc``."""
    sc.validate()
    coins = list(COIN_POOL[:sc.coins])
    registry = CoinRegistry(frozenset(COIN_POOL) | frozenset(EXTRA_SYMBOLS), dict(ALIASES))
    rng = rng_for(sc.seed, "schedule")
    schedule = _schedule(sc, coins, rng)
    times = np.arange(sc.start, sc.start + sc.duration_days * DAY + 1, BASE_GRANULARITY,
                      dtype=np.int64)
    n = len(times)

    btc_rng = rng_for(sc.seed, "btc_usd")
    btc_usd = 10_000.0 * np.exp(np.cumsum(btc_rng.normal(0, 0.001, size=n)))

    market, pumps_out = {}, []
    for coin in coins:
        crng = rng_for(sc.seed, "market", coin)
        p0 = 10 ** crng.uniform(-6.5, -3.8)
        logp = math.log(p0) + np.cumsum(crng.normal(0, sc.price_volatility, size=n))
        pumps = [p for p in schedule if p.coin == coin]
        if sc.momentum:
            for p in pumps:
                m = sc.momentum if p.succeed else -sc.momentum / 3
                logp = logp + _momentum(times - p.anchor, m)
        price = np.exp(logp)
        vol = 10 ** crng.uniform(4, 6) * np.exp(crng.normal(0, 0.3, size=n))
        for p in pumps:
            i_anchor = int(np.searchsorted(times, p.anchor, side="right")) - 1
            base = float(price[i_anchor])
            prng = rng_for(sc.seed, "pump", coin, p.anchor)
            buy, buy_txt = _quote(prng, base * prng.uniform(0.93, 0.99))
            if p.succeed:
                first = base * prng.uniform(1.15, 1.35)
            else:
                first = base * prng.uniform(1.6, 2.0)
            mults = [1.0] + sorted(prng.uniform(1.1, 1.5, size=int(prng.integers(0, 3))))
            quotes = [_quote(prng, first * m) for m in mults]
            targets, seen = [], set()
            for v, txt in quotes:
                if v not in seen and (not targets or v > targets[-1][0]):
                    targets.append((v, txt))
                    seen.add(v)
            x = targets[0][0]
            peak = (x / base) * prng.uniform(1.06, 1.15) if p.succeed else prng.uniform(1.03, 1.2)
            t_peak = int(prng.integers(15, 46)) * 60
            tau = (times - p.anchor).astype(float)
            price = price * _spike(tau, peak, t_peak)
            vol = vol * (1.0 + 5.0 * np.where(tau > 0, np.exp(-np.clip(tau, 0, None) / HOUR), 0.0))
            _check_flag(times, price, p.anchor, x, p.succeed, coin)
            stop_v, stop_txt = _quote(prng, buy * 0.85)
            pumps_out.append({"coin": coin, "anchor": p.anchor, "succeed": p.succeed,
                              "buy": buy, "buy_text": buy_txt,
                              "targets": [v for v, _ in targets],
                              "target_texts": [t for _, t in targets], "stop_text": stop_txt})
        supply = 10 ** crng.uniform(7, 10)
        price_usd = price * btc_usd
        market[coin] = CoinSeries(coin, times, price, price_usd, vol, price_usd * supply)

    pumps_out.sort(key=lambda d: (d["anchor"], d["coin"]))
    messages = _messages(sc, coins, pumps_out)
    users, tweets, statuses, crews, telegram = _social(sc, coins, pumps_out)
    truth = {
        "seed": sc.seed,
        "scenario": {k: v for k, v in asdict(sc).items() if k != "pump_schedule"},
        "coins": coins,
        "attempts": [{k: d[k] for k in ("coin", "anchor", "succeed", "buy", "targets")}
                     | {"message_ids": d["message_ids"]} for d in pumps_out],
        "bots": sorted(u for u, kind in users.items() if kind == "bot"),
        "crews": {c: sorted(v) for c, v in crews.items()},
        "telegram_active": sorted(telegram),
    }
    labeled = labeled_messages(sc.n_labeled, sc.seed, tuple(COIN_POOL), start=sc.start)
    return SynthOutput(market, messages, labeled, tweets, statuses, registry, truth)


def _check_flag(times, price, anchor, target, succeed, coin):
    sel = (times > anchor) & (times <= anchor + 6 * HOUR)
    hit_1h = np.max(price[(times > anchor) & (times <= anchor + HOUR)]) >= target
    hit_6h = np.max(price[sel]) >= target
    if succeed != hit_1h or succeed != hit_6h:
        raise ValidationError(f"generator could not realize pump flag for {coin}@{anchor}")


def _messages(sc, coins, pumps):
    rng = rng_for(sc.seed, "messages")
    out = []
    k = 0

    def add(ch, ts, text, label):
        nonlocal k
        mid = f"M{k:06d}"
        k += 1
        out.append(SocialMessage(ch, int(ts), text, label, mid))
        return mid

    for d in pumps:
        ch = CHANNELS[int(rng.integers(len(CHANNELS)))]
        text = _pump_text(rng, d["coin"], d["buy_text"], d["target_texts"], d["stop_text"])
        ids = [add(ch, d["anchor"], text, PUMP)]
        if rng.random() < 0.5:
            ch2 = CHANNELS[int(rng.integers(len(CHANNELS)))]
            ids.append(add(ch2, d["anchor"] + int(rng.integers(10, 150)) * 60,
                           _followup_text(rng, d["coin"]), PUMP))
        d["message_ids"] = ids
    n_noise = sc.noise_messages_per_day * sc.duration_days
    for _ in range(n_noise):
        ts = sc.start + int(rng.integers(0, sc.duration_days * DAY))
        ch = CHANNELS[int(rng.integers(len(CHANNELS)))]
        add(ch, ts, _noise_text(rng, coins), NOT_PUMP)
    out.sort(key=lambda m: (m.timestamp, m.message_id))
    return out


def _social(sc, coins, pumps):
    rng = rng_for(sc.seed, "social")
    humans = [f"h{i:04d}" for i in range(sc.n_humans)]
    bots = [f"b{i:04d}" for i in range(sc.n_bots)]
    users = {u: "human" for u in humans} | {u: "bot" for u in bots}
    # Each coin gets a crew of bots plus a few human followers.
    crews = {}
    for coin in coins:
        crew = list(rng.choice(bots, size=min(sc.crew_size, len(bots)), replace=False))
        crew += list(rng.choice(humans, size=min(5, len(humans)), replace=False))
        crews[coin] = set(crew)
    promo_bots = set(rng.choice(bots, size=len(bots) // 3, replace=False)) if bots else set()
    chan_of = {b: f"pumpclub{int(i) % 7}" for i, b in enumerate(sorted(promo_bots))}

    tweets = []
    end = sc.start + sc.duration_days * DAY
    hours = np.arange(sc.start, end, HOUR)
    for coin in coins:
        counts = rng.poisson(sc.tweet_rate, size=len(hours))
        for h, c in zip(hours, counts):
            for _ in range(int(c)):
                u = humans[int(rng.integers(len(humans)))]
                other = None
                if rng.random() < 0.3:
                    other = coins[int(rng.integers(len(coins)))]
                text = _tweet_text(rng, _CHATTER, coin, other)
                tags = {coin} | ({other} if other else set())
                tweets.append((int(h + rng.integers(0, HOUR)), u, text, tags))
    for d in pumps:
        coin, a = d["coin"], d["anchor"]
        for u in sorted(crews[coin]):
            if rng.random() > sc.burst_participation:
                continue
            n = 1 + int(rng.integers(0, 2))
            if users[u] == "bot":
                n += sc.bot_degree_boost
            for _ in range(n):
                ts = a + int(rng.integers(-2 * HOUR, HOUR + 1))
                if u in promo_bots and rng.random() < 0.5:
                    text = _tweet_text(rng, _PROMO[2:4], coin, chan=chan_of[u])
                else:
                    text = _tweet_text(rng, _PROMO[:2] + _PROMO[4:], coin)
                tweets.append((ts, u, text, {coin}))
    tweets.sort(key=lambda t: (t[0], t[1], t[2]))
    out = [Tweet(f"T{i:07d}", u, ts, text, frozenset(tags))
           for i, (ts, u, text, tags) in enumerate(tweets)]
    telegram = {t.user_id for t in out if "t.me/" in t.text}

    statuses = {}
    for u in sorted(users):
        if users[u] == "bot":
            if rng.random() < 0.5:
                statuses[u] = AccountStatus(u, "suspended", None)
            else:
                statuses[u] = AccountStatus(u, "active", round(float(rng.uniform(0.6, 0.99)), 4))
        else:
            score = None if rng.random() < 0.1 else round(float(rng.uniform(0.01, 0.5)), 4)
            statuses[u] = AccountStatus(u, "active", score)
    return users, out, statuses, crews, telegram


def synth(scenario, out_dir):
    """Generate ``scenario`` and write every stream to ``out_dir``; returns the paths."""
    return generate(scenario).write(out_dir)
