"""Task I / Task II datasets, walk-forward evaluation and ROC-AUC.

Task I: attempt anchors are positives, an equal number of uniformly random
timestamps are negatives. Task II: attempts that reach their first target
within 6 hours are positives; random negatives plus failed attempts are
negatives. Each coin gets its own forest, evaluated walk-forward: every test
row is scored by a model trained on all strictly earlier rows, then joins
the training set.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from pumpscope.attempts import evaluate_success
from pumpscope.corpus import HOUR
from pumpscope.errors import DataError, ValidationError
from pumpscope.features import FeatureConfig, FeatureError, assemble_row
from pumpscope.forest import ForestParams, train_forest
from pumpscope.seeding import derive_seed, rng_for

logger = logging.getLogger(__name__)

TEST_FRACTION = 0.25
MIN_TASK1_ATTEMPTS = 8
MIN_TASK2_TRAIN_POSITIVES = 5
SUCCESS_WINDOW_HOURS = 6


def roc_auc(scores, labels):
    """Mann-Whitney AUC: ``(#{pos > neg} + #{ties}/2) / (P * N)``."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    if len(s) != len(y):
        raise ValidationError("scores and labels have different lengths")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("roc_auc needs both classes")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class Dataset:
    coin: str
    rows: list

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.timestamp)
        ts = [r.timestamp for r in self.rows]
        if len(set(ts)) != len(ts):
            raise DataError(f"{self.coin}: duplicate sample timestamps")

    @property
    def split_index(self):
        n = len(self.rows)
        return n - math.ceil(TEST_FRACTION * n)

    @property
    def labels(self):
        return np.array([r.label for r in self.rows], dtype=int)

    def matrix(self, variant="both"):
        return np.array([r.vector(variant) for r in self.rows])

    def train_labels(self):
        return self.labels[:self.split_index]

    @property
    def n_positive(self):
        return int(self.labels.sum())


@dataclass
class TaskData:
    datasets: dict = field(default_factory=dict)
    excluded: dict = field(default_factory=dict)   # coin -> reason
    skipped_rows: dict = field(default_factory=dict)


def _by_coin(attempts):
    out = {}
    for a in attempts:
        out.setdefault(a.coin, []).append(a)
    for v in out.values():
        v.sort(key=lambda a: a.anchor_time)
    return out


def _negatives(coin, count, sources, config, seed, taken, exclude_windows=()):
    """``count`` random rows with computable features and unused timestamps."""
    hourly = sources.hourly.get(coin)
    if hourly is None or count == 0:
        return []
    lo = hourly.start + (config.w_econ + 1) * HOUR
    hi = sources.market[coin].end
    if hi <= lo:
        return []
    rng = rng_for(seed, "negatives", coin)
    rows = []
    tries = 0
    while len(rows) < count and tries < 50 * count:
        tries += 1
        t = int(rng.integers(lo, hi + 1))
        if t in taken or any(a <= t <= b for a, b in exclude_windows):
            continue
        try:
            rows.append(assemble_row(coin, t, 0, sources, config))
        except FeatureError:
            continue
        taken.add(t)
    return rows


def build_task1(attempts, sources, config=None, seed=0, min_attempts=MIN_TASK1_ATTEMPTS,
                exclude_pumps=False):
    config = config or FeatureConfig.task1()
    out = TaskData()
    for coin, atts in sorted(_by_coin(attempts).items()):
        pos, skipped = [], 0
        for a in atts:
            try:
                pos.append(assemble_row(coin, a.anchor_time, 1, sources, config, a))
            except FeatureError:
                skipped += 1
        out.skipped_rows[coin] = skipped
        if len(pos) < min_attempts:
            out.excluded[coin] = f"only {len(pos)} attempts with computable features"
            continue
        taken = {r.timestamp for r in pos}
        windows = [(a.anchor_time - 3 * HOUR, a.anchor_time + 3 * HOUR) for a in atts] if exclude_pumps else ()
        neg = _negatives(coin, len(pos), sources, config, seed, taken, windows)
        if len(neg) < len(pos):
            out.excluded[coin] = "could not place enough random negatives"
            continue
        out.datasets[coin] = Dataset(coin, pos + neg)
    return out


def build_task2(attempts, sources, config=None, seed=0, success_window=SUCCESS_WINDOW_HOURS,
                min_train_positives=MIN_TASK2_TRAIN_POSITIVES, min_attempts=MIN_TASK1_ATTEMPTS,
                exclude_pumps=False):
    config = config or FeatureConfig.task2()
    out = TaskData()
    for coin, atts in sorted(_by_coin(attempts).items()):
        series = sources.market.get(coin)
        rows, skipped = [], 0
        for a in atts:
            try:
                verdict = evaluate_success(a, series, 1.0, success_window) if series is not None else None
                if verdict is None:
                    raise DataError("no market data")
                rows.append(assemble_row(coin, a.anchor_time, int(verdict.success), sources, config, a))
            except (DataError, ValidationError):
                skipped += 1
        out.skipped_rows[coin] = skipped
        if len(rows) < min_attempts:
            out.excluded[coin] = f"only {len(rows)} evaluable attempts"
            continue
        taken = {r.timestamp for r in rows}
        windows = [(a.anchor_time - 3 * HOUR, a.anchor_time + 3 * HOUR) for a in atts] if exclude_pumps else ()
        neg = _negatives(coin, len(rows), sources, config, seed, taken, windows)
        ds = Dataset(coin, rows + neg)
        n_train_pos = int(ds.train_labels().sum())
        if n_train_pos < min_train_positives:
            out.excluded[coin] = f"{n_train_pos} positives in train (< {min_train_positives})"
            continue
        out.datasets[coin] = ds
    return out


@dataclass
class WalkForwardResult:
    coin: str
    timestamps: list
    labels: np.ndarray
    probs: np.ndarray
    n_retrains: int
    n_reused: int = 0


def walk_forward(dataset, params=ForestParams(), seed=0, variant="both"):
    """Score each test row with a forest trained on every earlier row."""
    X = dataset.matrix(variant)
    y = dataset.labels
    ts = np.array([r.timestamp for r in dataset.rows])
    d = dataset.split_index
    if d >= len(y):
        raise ValidationError(f"{dataset.coin}: empty test set")
    probs, model, retrains, reused = [], None, 0, 0
    for i in range(d, len(y)):
        assert i == 0 or ts[:i].max() < ts[i], "temporal leakage in walk-forward"
        train_y = y[:i]
        if train_y.min() != train_y.max():
            model = train_forest(X[:i], train_y, params, derive_seed(seed, dataset.coin, i))
            retrains += 1
        else:
            reused += 1
            logger.warning("%s: single-class training set at step %d; reusing previous model",
                           dataset.coin, i - d)
        if model is None:
            probs.append(float(train_y.mean()))
        else:
            probs.append(float(model.predict_proba(X[i:i + 1])[0, 1]))
    return WalkForwardResult(dataset.coin, ts[d:].tolist(), y[d:], np.array(probs), retrains, reused)


@dataclass
class EvalReport:
    variant: str
    per_coin: dict                      # coin -> (auc, n_train, n_test)
    skipped: dict = field(default_factory=dict)
    top_coins: tuple = ()

    def aucs(self, coins=None):
        coins = self.per_coin if coins is None else [c for c in coins if c in self.per_coin]
        return np.array([self.per_coin[c][0] for c in coins])

    @property
    def macro_auc(self):
        a = self.aucs()
        return float(a.mean()) if len(a) else float("nan")

    @property
    def std_auc(self):
        a = self.aucs()
        return float(a.std()) if len(a) else float("nan")

    @property
    def top_macro_auc(self):
        a = self.aucs(self.top_coins)
        return float(a.mean()) if len(a) else float("nan")

    @property
    def top_std_auc(self):
        a = self.aucs(self.top_coins)
        return float(a.std()) if len(a) else float("nan")


def top_coins_by_volume(market, coins, n=20):
    """Coins with the largest mean dollar volume."""
    vol = {c: float(np.mean(market[c].volume)) for c in coins if c in market and len(market[c])}
    return tuple(sorted(vol, key=lambda c: (-vol[c], c))[:n])


def evaluate_task(task_data, params=ForestParams(), seed=0, variant="both", market=None):
    per, skipped = {}, {}
    for coin, ds in sorted(task_data.datasets.items()):
        res = walk_forward(ds, params, seed, variant)
        if res.labels.min() == res.labels.max():
            skipped[coin] = "test set has a single class"
            continue
        per[coin] = (roc_auc(res.probs, res.labels), ds.split_index, len(res.labels))
    top = top_coins_by_volume(market, per) if market is not None else tuple(per)
    return EvalReport(variant, per, skipped, top)


def build_task(task, attempts, sources, config, seed):
    if task == 1:
        return build_task1(attempts, sources, config, seed)
    if task == 2:
        return build_task2(attempts, sources, config, seed)
    raise ValidationError(f"unknown task {task!r}")


def default_config(task):
    return FeatureConfig.task1() if task == 1 else FeatureConfig.task2()


def feature_ablation(task, attempts, sources, config=None, seed=0, params=ForestParams(),
                     variants=("twitter", "economic", "both")):
    config = config or default_config(task)
    data = build_task(task, attempts, sources, config, seed)
    return {v: evaluate_task(data, params, seed, v, sources.market) for v in variants}


def window_sweep(task, attempts, sources, w_range=range(1, 25), config=None, seed=0,
                 params=ForestParams(), variant="both"):
    """Macro AUC per window length ``w`` (used for both economic and Twitter windows).

    Returns ``(table, errors)``; ``table`` maps ``w`` to macro AUC.
    """
    config = config or default_config(task)
    table, errors = {}, {}
    for w in w_range:
        cfg = replace(config, w_econ=w, w_tw=w)
        try:
            data = build_task(task, attempts, sources, cfg, seed)
            table[w] = evaluate_task(data, params, seed, variant).macro_auc
        except (DataError, ValidationError) as exc:
            errors[w] = str(exc)
    return table, errors


def evaluate_repeated(task, attempts, sources, config=None, seed=0, params=ForestParams(),
                      variant="both", repeats=10):
    """Macro AUC over ``repeats`` negative-sampling seeds: ``(mean, std, values)``."""
    config = config or default_config(task)
    vals = []
    for r in range(repeats):
        data = build_task(task, attempts, sources, config, derive_seed(seed, "repeat", r))
        vals.append(evaluate_task(data, params, seed, variant).macro_auc)
    vals = np.array(vals)
    return float(np.nanmean(vals)), float(np.nanstd(vals)), vals.tolist()


def write_report(path, reports):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["coin", "n_train", "n_test", "auc", "variant"])
        for rep in reports:
            for coin, (auc, n_train, n_test) in sorted(rep.per_coin.items()):
                w.writerow([coin, n_train, n_test, f"{auc:.6f}", rep.variant])
            w.writerow(["__macro__", "", "", f"{rep.macro_auc:.6f}", rep.variant])
            w.writerow(["__std__", "", "", f"{rep.std_auc:.6f}", rep.variant])
            w.writerow(["__top20_macro__", "", "", f"{rep.top_macro_auc:.6f}", rep.variant])


def write_sweep(path, table, variant):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["w", "variant", "macro_auc"])
        for k in sorted(table):
            w.writerow([k, variant, f"{table[k]:.6f}"])
