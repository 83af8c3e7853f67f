import numpy as np


class TweetIndex:
    """Tweets grouped per cashtag and sorted by time.

    Window queries use closed intervals ``[start, end]``.
    """

    def __init__(self, tweets):
        self.tweets = sorted(tweets, key=lambda t: (t.timestamp, t.tweet_id))
        self.times = np.array([t.timestamp for t in self.tweets], dtype=np.int64)
        per = {}
        for i, t in enumerate(self.tweets):
            for c in t.cashtags:
                per.setdefault(c, []).append(i)
        self._coin_pos = {c: np.array(v, dtype=np.int64) for c, v in per.items()}
        self._coin_times = {c: self.times[v] for c, v in self._coin_pos.items()}

    def coins(self):
        return sorted(self._coin_pos)

    def window(self, start, end):
        """All tweets with ``start <= timestamp <= end``."""
        i = np.searchsorted(self.times, start, side="left")
        j = np.searchsorted(self.times, end, side="right")
        return self.tweets[i:j]

    def coin_window(self, coin, start, end):
        """Tweets mentioning ``coin`` with ``start <= timestamp <= end``."""
        ts = self._coin_times.get(coin)
        if ts is None:
            return []
        i = np.searchsorted(ts, start, side="left")
        j = np.searchsorted(ts, end, side="right")
        return [self.tweets[k] for k in self._coin_pos[coin][i:j]]
