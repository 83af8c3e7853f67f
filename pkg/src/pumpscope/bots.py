"""Bot prevalence in the pump-user network."""

import csv
import re
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from pumpscope.corpus import AccountStatus

BOT_SCORE_THRESHOLD = 0.55
DEGREE_THRESHOLDS = (50, 100, 500, 1000, 5000, 10000)

_TELEGRAM_LINK_RE = re.compile(r"(?:\bhttps?://)?(?<![\w.])(?:www\.)?t\.me/[A-Za-z0-9_]+",
                               re.IGNORECASE)


def has_telegram_link(text):
    return _TELEGRAM_LINK_RE.search(text) is not None


def label_telegram_active(tweets):
    """Users with at least one tweet containing a t.me invitation link."""
    return {t.user_id for t in tweets if has_telegram_link(t.text)}


def is_bot(suspended, score):
    return bool(suspended) or (score is not None and score > BOT_SCORE_THRESHOLD)


@dataclass(frozen=True)
class UserBotProfile:
    user_id: str
    degree: float
    telegram_active: bool
    suspended: bool
    botometer_score: Optional[float]
    has_status: bool = True

    @property
    def is_bot(self):
        return is_bot(self.suspended, self.botometer_score)

    @property
    def high_score(self):
        return self.botometer_score is not None and self.botometer_score > BOT_SCORE_THRESHOLD


class AccountStatusProvider(Protocol):
    def lookup(self, user_id):
        """Return an ``AccountStatus`` or None when unknown."""


class FileStatusProvider:
    """Account statuses loaded from a statuses CSV (see ``corpus.load_statuses``)."""

    def __init__(self, statuses):
        self.statuses = dict(statuses)

    def lookup(self, user_id):
        return self.statuses.get(user_id)


class RemoteScorerClient:
    """Status provider backed by an external scoring service.

    ``transport(user_id)`` performs the request and returns a mapping with
    ``status`` and ``score`` keys (or None). No transport ships with the
    package; callers inject one. Results are cached per user.
    """

    def __init__(self, transport):
        self.transport = transport
        self._cache = {}

    def lookup(self, user_id):
        if user_id not in self._cache:
            rec = self.transport(user_id)
            if rec is None:
                self._cache[user_id] = None
            else:
                score = rec.get("score")
                self._cache[user_id] = AccountStatus(user_id, rec.get("status", "active"),
                                                     None if score is None else float(score))
        return self._cache[user_id]


def build_profiles(matrix, provider, telegram_active):
    if isinstance(provider, dict):
        provider = FileStatusProvider(provider)
    out = {}
    for uid, deg in matrix.degrees().items():
        st = provider.lookup(uid)
        out[uid] = UserBotProfile(uid, deg, uid in telegram_active,
                                  bool(st and st.suspended),
                                  st.botometer_score if st else None, st is not None)
    return out


@dataclass(frozen=True)
class DegreeRow:
    threshold: float
    n_users: int
    suspended: Optional[float]
    telegram_active: Optional[float]
    botometer: Optional[float]
    bot: Optional[float]
    missing_status: int


def degree_table(profiles, thresholds=DEGREE_THRESHOLDS):
    """Ratios among users with degree >= D for each threshold D.

    Users without a status record count in the denominators only.
    """
    rows = []
    for d in thresholds:
        sel = [p for p in profiles.values() if p.degree >= d]
        n = len(sel)

        def ratio(pred):
            return sum(1 for p in sel if pred(p)) / n if n else None

        rows.append(DegreeRow(d, n, ratio(lambda p: p.suspended),
                              ratio(lambda p: p.telegram_active),
                              ratio(lambda p: p.high_score), ratio(lambda p: p.is_bot),
                              sum(1 for p in sel if not p.has_status)))
    return rows


def cluster_users(corex):
    """Assign each user to ``argmax_k |W_uk|`` (1-based; ties go to the lowest index)."""
    W = np.abs(np.asarray(corex.weights))
    return {u: int(np.argmax(W[i])) + 1 for i, u in enumerate(corex.columns)}


@dataclass(frozen=True)
class ClusterStats:
    size: int
    bot_ratio: float
    telegram_active_ratio: float
    both_ratio: float


def cluster_report(clusters, profiles):
    members = {}
    for u, c in clusters.items():
        members.setdefault(c, []).append(u)
    out = {}
    for c in sorted(members):
        ps = [profiles[u] for u in members[c] if u in profiles]
        n = len(ps)
        if not n:
            continue
        out[c] = ClusterStats(n, sum(p.is_bot for p in ps) / n,
                              sum(p.telegram_active for p in ps) / n,
                              sum(p.is_bot and p.telegram_active for p in ps) / n)
    return out


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


def write_degree_table(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# degree rows are cumulative: users with degree >= threshold\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["degree", "n_users", "suspended", "telegram_active", "botometer_gt_055",
                    "bot", "missing_status"])
        for r in rows:
            w.writerow([f"{r.threshold:g}", r.n_users, _fmt(r.suspended), _fmt(r.telegram_active),
                        _fmt(r.botometer), _fmt(r.bot), r.missing_status])


def write_cluster_report(path, report):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "size", "bot_ratio", "telegram_active_ratio", "both_ratio"])
        for c, s in report.items():
            w.writerow([c, s.size, _fmt(s.bot_ratio), _fmt(s.telegram_active_ratio),
                        _fmt(s.both_ratio)])
