"""Small lexicon-and-rules sentiment scorer for crypto chatter.

Valences live in [-1, 1]. A negation word up to two tokens before a
sentiment word flips its sign, a booster immediately before it scales it,
and the sum ``s`` is squashed to ``s / sqrt(s^2 + alpha)``.
"""

import math
import re
from dataclasses import dataclass, field

ALPHA = 15.0

_POSITIVE = {
    # strong
    "moon": 0.9, "mooning": 0.9, "moonshot": 0.9, "lambo": 0.8, "rocket": 0.8, "skyrocket": 0.9,
    "explode": 0.7, "exploding": 0.7, "massive": 0.6, "huge": 0.6, "amazing": 0.9,
    "awesome": 0.9, "excellent": 0.9, "fantastic": 0.9, "incredible": 0.8, "best": 0.8,
    "love": 0.8, "great": 0.8, "profit": 0.7, "profits": 0.7, "profitable": 0.7, "winner": 0.8,
    "win": 0.6, "winning": 0.7, "gain": 0.6, "gains": 0.6, "gem": 0.8, "gems": 0.8,
    "bullish": 0.8, "bull": 0.6, "rally": 0.7, "rallying": 0.7, "breakout": 0.7, "soar": 0.8,
    "soaring": 0.8, "surge": 0.7, "surging": 0.7, "pump": 0.5, "pumping": 0.5, "hodl": 0.4,
    "hold": 0.2, "buy": 0.3, "buying": 0.3, "accumulate": 0.4, "accumulating": 0.4,
    "undervalued": 0.6, "cheap": 0.3, "opportunity": 0.6, "promising": 0.6, "potential": 0.4,
    "strong": 0.6, "strength": 0.5, "solid": 0.5, "safe": 0.4, "secure": 0.4, "trusted": 0.5,
    "legit": 0.6, "good": 0.6, "nice": 0.5, "cool": 0.4, "happy": 0.7, "glad": 0.6,
    "excited": 0.7, "exciting": 0.7, "hype": 0.4, "hyped": 0.4, "green": 0.5, "up": 0.3,
    "uptrend": 0.6, "recover": 0.5, "recovery": 0.5, "rebound": 0.5, "bounce": 0.4,
    "support": 0.3, "ath": 0.7, "adoption": 0.5, "partnership": 0.5, "listing": 0.4,
    "listed": 0.4, "launch": 0.4, "upgrade": 0.4, "success": 0.8, "successful": 0.8,
    "achieved": 0.6, "achieve": 0.5, "reached": 0.4, "rich": 0.6, "wealth": 0.5,
    "thanks": 0.5, "thank": 0.5, "congrats": 0.7, "congratulations": 0.7, "wow": 0.6,
    "yes": 0.3, "free": 0.4, "easy": 0.4, "fast": 0.3, "easily": 0.3, "top": 0.4,
    "lucky": 0.5, "beautiful": 0.7, "perfect": 0.9, "confident": 0.6, "hot": 0.4,
    "interesting": 0.4, "impressive": 0.7, "brilliant": 0.8, "wonderful": 0.9, "fun": 0.5,
    "easymoney": 0.5, "fomo": 0.2, "long": 0.2, "higher": 0.4, "rise": 0.5, "rising": 0.5,
    "boom": 0.6, "booming": 0.7, "x10": 0.7, "x100": 0.8, "10x": 0.7, "100x": 0.8,
}

_NEGATIVE = {
    "dump": -0.6, "dumping": -0.7, "dumped": -0.7, "crash": -0.8, "crashing": -0.8,
    "crashed": -0.8, "scam": -0.9, "scammer": -0.9, "scammers": -0.9, "fraud": -0.9,
    "ponzi": -0.9, "rug": -0.8, "rugpull": -0.9, "rekt": -0.8, "loss": -0.6, "losses": -0.6,
    "lose": -0.6, "losing": -0.6, "lost": -0.6, "bearish": -0.7, "bear": -0.5, "bleed": -0.6,
    "bleeding": -0.6, "red": -0.4, "down": -0.3, "downtrend": -0.6, "drop": -0.5,
    "dropping": -0.5, "dropped": -0.5, "fall": -0.5, "falling": -0.5, "fell": -0.5,
    "plunge": -0.8, "plunging": -0.8, "tank": -0.6, "tanking": -0.7, "collapse": -0.8,
    "fear": -0.6, "fud": -0.5, "panic": -0.7, "sell": -0.2, "selling": -0.3, "short": -0.3,
    "bad": -0.6, "terrible": -0.9, "awful": -0.9, "horrible": -0.9, "worst": -0.9,
    "hate": -0.8, "angry": -0.7, "sad": -0.6, "worried": -0.5, "worry": -0.5, "risky": -0.5,
    "risk": -0.3, "danger": -0.6, "dangerous": -0.7, "warning": -0.4, "beware": -0.6,
    "fake": -0.7, "hack": -0.8, "hacked": -0.9, "stolen": -0.9, "theft": -0.9, "exploit": -0.7,
    "dead": -0.8, "dying": -0.7, "fail": -0.7, "failed": -0.7, "failure": -0.7, "broke": -0.6,
    "bankrupt": -0.9, "delisted": -0.7, "delisting": -0.7, "ban": -0.6, "banned": -0.7,
    "lawsuit": -0.7, "sec": -0.2, "overvalued": -0.5, "bubble": -0.5, "manipulation": -0.7,
    "manipulated": -0.7, "suspicious": -0.6, "shady": -0.7, "trash": -0.7, "garbage": -0.8,
    "useless": -0.7, "worthless": -0.9, "weak": -0.5, "lower": -0.3, "decline": -0.5,
    "declining": -0.5, "stoploss": -0.2, "liquidated": -0.8, "liquidation": -0.7,
    "ugly": -0.6, "disappointing": -0.7, "disappointed": -0.7, "regret": -0.6,
    "slow": -0.3, "stuck": -0.5, "problem": -0.5, "problems": -0.5,
    "error": -0.4, "capitulation": -0.7, "exit": -0.2, "sucks": -0.7,
}

NEGATIONS = frozenset({
    "not", "no", "never", "dont", "don't", "doesnt", "doesn't", "isnt", "isn't", "wont",
    "won't", "cant", "can't", "cannot", "aint", "ain't", "neither", "nor", "without",
    "wasnt", "wasn't", "arent", "aren't", "didnt", "didn't",
})

BOOSTERS = {
    "very": 1.3, "really": 1.3, "extremely": 1.5, "super": 1.4, "so": 1.2, "totally": 1.3,
    "absolutely": 1.5, "incredibly": 1.5, "hugely": 1.4, "highly": 1.3, "most": 1.2,
    "slightly": 0.7, "somewhat": 0.8, "barely": 0.6, "kinda": 0.8, "little": 0.8,
}

_WORD_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)?", re.UNICODE)


@dataclass(frozen=True)
class SentimentLexicon:
    valences: dict = field(default_factory=lambda: {**_POSITIVE, **_NEGATIVE})
    negations: frozenset = NEGATIONS
    boosters: dict = field(default_factory=lambda: dict(BOOSTERS))

    def __post_init__(self):
        bad = [k for k, v in self.valences.items() if not -1.0 <= v <= 1.0]
        if bad:
            raise ValueError(f"valences outside [-1, 1]: {bad[:3]}")

    def negated(self):
        return SentimentLexicon({k: -v for k, v in self.valences.items()}, self.negations,
                                self.boosters)


DEFAULT_LEXICON = SentimentLexicon()


def sentiment_score(text, lexicon=DEFAULT_LEXICON, alpha=ALPHA):
    words = [w.lower() for w in _WORD_RE.findall(text)]
    total = 0.0
    for i, w in enumerate(words):
        v = lexicon.valences.get(w)
        if v is None or w in lexicon.negations:
            continue
        if i >= 1 and words[i - 1] in lexicon.boosters:
            v *= lexicon.boosters[words[i - 1]]
        if any(words[j] in lexicon.negations for j in range(max(0, i - 2), i)):
            v = -v
        total += v
    if total == 0.0:
        return 0.0
    return total / math.sqrt(total * total + alpha)
