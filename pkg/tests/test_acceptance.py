"""Acceptance criteria, one test per criterion, each under its time budget.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import filecmp
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
import scipy.sparse as sp

from pumpscope.attempts import build_attempts, evaluate_success, success_ratio_grid
from pumpscope.corex import gaussian_tc, linear_corex
from pumpscope.corpus import PUMP, CoinRegistry, SocialMessage
from pumpscope.forest import ForestParams
from pumpscope.graphs import UnionFind, WeightedGraph, pagerank, sparsify_top_k, user_user_components
from pumpscope.bots import UserBotProfile, degree_table, is_bot
from pumpscope.pipeline import PipelineConfig, run_pipeline
from pumpscope.predict import Dataset, roc_auc, walk_forward
from pumpscope.features import FeatureConfig, FeatureRow
from pumpscope.signature import PRICE, signature_curves
from pumpscope.synth import ALIASES, COIN_POOL, EXTRA_SYMBOLS, Scenario, generate, labeled_messages, synth
from pumpscope.textclf import PumpClassifier, evaluate, fit_tfidf, train_svm, transform

from test_corex import RHO_HALF, exact_pair, purity, two_blocks
from test_graphs import _clique_tweets, dense_pagerank, dfs_components, random_graph
from test_predict import pairwise_auc, rows_from
from test_textclf import _separable

H = 3600
PIPE = PipelineConfig(n_trees=100)


@contextmanager
def budget(seconds):
    t0 = time.perf_counter()
    yield
    elapsed = time.perf_counter() - t0
    assert elapsed < seconds, f"took {elapsed:.1f}s, budget {seconds}s"


@pytest.mark.criterion(1, "TF-IDF matches a hand-computed vector")
def test_c01_tfidf_oracle():
    with budget(1):
        corpus = [["buy", "moon", "buy"], ["buy", "dump"], ["moon", "hold"], ["hold", "buy"]]
        m = fit_tfidf(corpus, max_df=0.75, min_df=0.0, ngram_range=(1, 1))
        v = transform(m, ["buy", "buy", "moon", "dump", "unseen"]).toarray()[0]
        # idf: buy ln(1+4/3), moon ln(1+4/2), dump ln(1+4/1), hold ln(1+4/2)
        raw = {"buy": 2 * 0.8472978603872037, "moon": 1.0986122886681098,
               "dump": 1.6094379124341003, "hold": 0.0}
        norm = math.sqrt(sum(x * x for x in raw.values()))
        for term, x in raw.items():
            assert abs(v[m.vocabulary[term]] - x / norm) < 1e-9
        assert len(v) == 4


@pytest.mark.criterion(2, "SGD-SVM separates 50 points, bit-identical reruns")
def test_c02_svm():
    with budget(1):
        X, y = _separable(50)
        a = train_svm(X, y, epochs=20, seed=11)
        b = train_svm(X, y, epochs=20, seed=11)
        assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias
        pred = np.where(X @ a.weights + a.bias >= 0, 1.0, -1.0)
        assert np.mean(pred == y) == 1.0


@pytest.mark.criterion(3, "classifier metrics and base rate")
def test_c03_metrics():
    with budget(1):
        preds = [1] * 9 + [1] + [0] + [0] * 9
        labels = [1] * 9 + [0] + [1] + [0] * 9
        m = evaluate(preds, labels)
        assert (m.accuracy, m.precision, m.recall, m.f1) == (0.9, 0.9, 0.9, 0.9)
        for lab, rate in (([1, 0, 0, 0], 0.25), ([1, 1, 0], 2 / 3), ([0] * 5, 0.0)):
            assert evaluate(lab, lab).base_rate == rate


@pytest.mark.criterion(4, "synthetic classifier accuracy >= 0.95")
def test_c04_synthetic_classifier():
    with budget(10):
        msgs = labeled_messages(600, seed=21)
        train, test = msgs[:400], msgs[400:]
        assert not {m.message_id for m in train} & {m.message_id for m in test}
        reg = CoinRegistry(frozenset(COIN_POOL) | frozenset(EXTRA_SYMBOLS), dict(ALIASES))
        clf = PumpClassifier(reg, seed=1)
        clf.fit([m.text for m in train], [m.label for m in train])
        met = evaluate(clf.predict([m.text for m in test]), [m.label == PUMP for m in test])
        assert met.accuracy >= 0.95


@pytest.mark.criterion(5, "attempt aggregation fixture and anchor invariant")
def test_c05_attempts():
    reg = CoinRegistry(frozenset({"ADA", "XRP", "TRX"}), {})
    with budget(5):
        msgs = [SocialMessage("c", int(h * H), "$ADA", PUMP, f"m{h}") for h in (0, 2, 2.5, 6)]
        assert [a.anchor_time for a in build_attempts(msgs, reg)] == [0, 6 * H]
        rng = np.random.default_rng(5)
        for f in range(1000):
            n = int(rng.integers(0, 25))
            coins = rng.choice(["ADA", "XRP", "TRX"], n)
            times = rng.integers(0, 40 * H, n)
            msgs = [SocialMessage("c", int(t), f"${c}", PUMP, f"m{i}")
                    for i, (c, t) in enumerate(zip(coins, times))]
            by_id = {m.message_id: m for m in msgs}
            attempts = build_attempts(msgs, reg)
            assert sum(len(a.message_ids) for a in attempts) == n
            for a in attempts:
                ts = [by_id[i].timestamp for i in a.message_ids]
                assert min(ts) == a.anchor_time and max(ts) <= a.anchor_time + 3 * H


@pytest.mark.criterion(6, "success grid monotone, generator flags agree")
def test_c06_success_grid():
    with budget(10):
        out = generate(Scenario(seed=31, coins=5, pumps_per_coin=10, duration_days=30,
                                n_humans=40, n_bots=30, crew_size=10, n_labeled=10))
        attempts = build_attempts([m for m in out.messages if m.label == PUMP], out.registry)
        assert len(attempts) == 50
        th, win = [0.25, 0.5, 0.75, 0.9, 1.0], [1, 3, 6, 12, 24, 48, 72]
        g = success_ratio_grid(attempts, out.market, th, win)
        R = np.array([[g.ratio(t, w) for w in win] for t in th])
        assert np.all(np.diff(R, axis=0) <= 0) and np.all(np.diff(R, axis=1) >= 0)
        found = {(a.coin, a.anchor_time): a for a in attempts}
        for truth in out.truth["attempts"]:
            a = found[(truth["coin"], truth["anchor"])]
            for w in (1, 6):
                assert evaluate_success(a, out.market[a.coin], 1.0, w).success == truth["succeed"]


@pytest.mark.criterion(7, "pump price signature peaks early and beats baseline")
def test_c07_signature():
    with budget(20):
        out = generate(Scenario(seed=41, coins=2, pumps_per_coin=10, duration_days=30,
                                n_humans=40, n_bots=30, crew_size=10, n_labeled=10))
        attempts = build_attempts([m for m in out.messages if m.label == PUMP], out.registry)
        assert len(attempts) == 20
        curves, skipped = signature_curves(attempts, out.market, out.tweets, 3 * H, seed=2)
        pump = next(c for c in curves if c.kind == PRICE and c.baseline == "pump")
        rand = next(c for c in curves if c.kind == PRICE and c.baseline == "random")
        peak = pump.peak_offset()
        assert skipped == 0 and 0 <= peak <= 60
        assert pump.value_at(peak) - rand.value_at(peak) >= 0.2


@pytest.mark.criterion(8, "PageRank oracle agreement")
def test_c08_pagerank():
    with budget(2):
        pr = pagerank(WeightedGraph(("a", "b", "c"), {("a", "b"): 1, ("b", "c"): 1, ("a", "c"): 1}))
        assert all(abs(v - 1 / 3) < 1e-9 for v in pr.values())
        for seed in range(20):
            g = random_graph(np.random.default_rng(1000 + seed))
            pr, ref = pagerank(g), dense_pagerank(g)
            assert abs(sum(pr.values()) - 1) < 1e-9
            assert max(abs(pr[v] - ref[v]) for v in g.nodes) < 1e-8


@pytest.mark.criterion(9, "CorEx: Gaussian TC, monotone trace, block recovery")
def test_c09_corex():
    with budget(60):
        for rho in (0.3, RHO_HALF, 0.9):
            expect = -0.5 * math.log(1 - rho ** 2)
            for seed in range(3):
                got = gaussian_tc(exact_pair(rho, 10_000, seed))
                assert abs(got - expect) / expect < 0.02
        for seed in range(10):
            x, labels = two_blocks(seed)
            m = linear_corex(x, k=2, seed=seed)
            assert np.all(np.diff(m.objective_trace) <= 0)
            assert purity(np.argmax(np.abs(m.weights), axis=1), labels) >= 0.9


@pytest.mark.criterion(10, "components equal DFS; min-size filter")
def test_c10_components():
    with budget(10):
        for seed in range(200):
            rng = np.random.default_rng(2000 + seed)
            g = sparsify_top_k(random_graph(rng, n=int(rng.integers(2, 40)),
                                            p=float(rng.uniform(0.02, 0.3))), int(rng.integers(1, 4)))
            uf = UnionFind(g.nodes)
            for u, v in g.edges:
                uf.union(u, v)
            assert {frozenset(c) for c in uf.groups()} == dfs_components(g)
        from pumpscope.attempts import PumpAttempt
        att = [PumpAttempt("ADA", 10 * H, ("m",))]
        small = user_user_components("ADA", att, _clique_tweets([f"u{i}" for i in range(24)], [10 * H]))
        big = user_user_components("ADA", att, _clique_tweets([f"u{i}" for i in range(25)], [10 * H]))
        assert small.sizes == () and big.sizes == (25,)


@pytest.mark.criterion(11, "ROC-AUC equals pairwise counting")
def test_c11_auc():
    with budget(5):
        rng = np.random.default_rng(11)
        done = 0
        while done < 500:
            n = int(rng.integers(2, 30))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                continue
            scores = rng.integers(0, 6, n) / 5 if done % 2 else rng.random(n)
            assert roc_auc(scores, labels) == pairwise_auc(scores, labels)
            done += 1
        assert roc_auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
        assert roc_auc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5


@pytest.mark.criterion(12, "walk-forward soundness")
def test_c12_walk_forward():
    params = ForestParams(n_trees=10)
    with budget(60):
        rng = np.random.default_rng(12)
        y = rng.integers(0, 2, 60)
        y[:2] = [0, 1]
        X = np.column_stack([y, rng.normal(size=(60, 3))])
        ds = Dataset("C", rows_from(X, y))
        res = walk_forward(ds, params, seed=0, variant="economic")
        assert roc_auc(res.probs, res.labels) == 1.0
        assert res.n_retrains == len(ds.rows) - ds.split_index == len(res.labels)
        aucs = []
        for seed in range(10):
            rng = np.random.default_rng(500 + seed)
            y = rng.integers(0, 2, 200)
            ds = Dataset("C", rows_from(rng.normal(size=(200, 5)), y))
            res = walk_forward(ds, params, seed=seed, variant="economic")
            assert res.n_retrains + res.n_reused == 50 == len(res.labels)
            train_ts = [r.timestamp for r in ds.rows[:ds.split_index]]
            assert max(train_ts) < min(res.timestamps)
            aucs.append(roc_auc(res.probs, res.labels))
        assert 0.4 <= np.mean(aucs) <= 0.6


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("acc")
    t0 = time.perf_counter()
    synth(Scenario(seed=7), str(root / "data"))
    summary = run_pipeline(str(root / "data"), str(root / "out"), seed=0, config=PIPE)
    return summary, time.perf_counter() - t0


@pytest.mark.criterion(13, "Task I: twitter AUC >= 0.80 and beats economic")
def test_c13_task1(default_run):
    summary, elapsed = default_run
    assert elapsed < 300
    t1 = summary["task1"]
    assert t1["twitter"]["macro_auc"] >= 0.80
    assert t1["twitter"]["macro_auc"] > t1["economic"]["macro_auc"]


@pytest.mark.criterion(14, "Task II: economic beats twitter under planted momentum")
def test_c14_task2(tmp_path):
    with budget(300):
        synth(Scenario(seed=7, momentum=0.08), str(tmp_path / "data"))
        t2 = run_pipeline(str(tmp_path / "data"), str(tmp_path / "out"), seed=0, config=PIPE)["task2"]
        assert t2["economic"]["coins"]
        assert t2["economic"]["macro_auc"] > t2["twitter"]["macro_auc"]


@pytest.mark.criterion(15, "bot tables: hand-computed ratios and 0.55 boundary")
def test_c15_bots():
    with budget(1):
        ps = [UserBotProfile("a", 1, False, False, 0.1), UserBotProfile("b", 3, True, False, 0.9),
              UserBotProfile("c", 5, False, True, None), UserBotProfile("d", 7, True, False, 0.2),
              UserBotProfile("e", 10, True, True, 0.8), UserBotProfile("f", 12, False, False, None, False)]
        rows = degree_table({p.user_id: p for p in ps}, (1, 5, 10, 20))
        got = [(r.n_users, r.suspended, r.telegram_active, r.botometer, r.bot) for r in rows]
        assert got == [(6, 2 / 6, 3 / 6, 2 / 6, 3 / 6), (4, 2 / 4, 2 / 4, 1 / 4, 2 / 4),
                       (2, 1 / 2, 1 / 2, 1 / 2, 1 / 2), (0, None, None, None, None)]
        counts = [r.n_users for r in degree_table({p.user_id: p for p in ps}, range(0, 15))]
        assert counts == sorted(counts, reverse=True)
        assert not is_bot(False, 0.55) and is_bot(False, 0.5500001)


@pytest.mark.criterion(16, "full pipeline is byte-identical across runs")
def test_c16_determinism(tmp_path):
    with budget(600):
        for name in ("a", "b"):
            synth(Scenario(seed=3), str(tmp_path / name / "data"))
            run_pipeline(str(tmp_path / name / "data"), str(tmp_path / name / "out"), seed=0, config=PIPE)
        for sub in ("data", "out"):
            names = sorted(p.name for p in (tmp_path / "a" / sub).iterdir())
            assert len(names) > 5
            _, mismatch, errors = filecmp.cmpfiles(tmp_path / "a" / sub, tmp_path / "b" / sub, names,
                                                   shallow=False)
            assert not mismatch and not errors, mismatch
