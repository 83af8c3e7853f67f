from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pumpscope.attempts import PumpAttempt
from pumpscope.corpus import Tweet
from pumpscope.errors import ValidationError
from pumpscope.graphs import (AffiliationMatrix, ComponentAssignment, PageRankError, UnionFind,
                              WeightedGraph, coin_coin_graph, component_activity_features,
                              pagerank, pump_user_matrix, sparsify_top_k, user_user_components,
                              user_user_graph)
from pumpscope.tweetindex import TweetIndex

H = 3600


def tw(i, user, ts, *coins, text="x"):
    return Tweet(str(i), user, ts, text, frozenset(coins))


def dense_pagerank(graph, d=0.85, iters=3000):
    """Independent oracle: dense row-stochastic matrix, dangling rows uniform."""
    A = graph.adjacency()
    n = len(A)
    P = np.empty_like(A)
    for i in range(n):
        s = A[i].sum()
        P[i] = A[i] / s if s > 0 else 1.0 / n
    r = np.full(n, 1.0 / n)
    for _ in range(iters):
        r = d * P.T @ r + (1 - d) / n
    return dict(zip(graph.nodes, r))


def test_coin_graph_examples():
    g = coin_coin_graph([tw(1, "u", 0, "BTC"), tw(2, "u", 1, "ETH")], 0, 10)
    assert g.weight("BTC", "ETH") == 1
    g = coin_coin_graph([tw(1, "u", 0, "BTC"), tw(2, "v", 1, "ETH")], 0, 10)
    assert g.edges == {}
    tweets = [tw(i, u, i, "BTC", "ETH") for i, u in enumerate(["u", "u", "v", "v"])]
    assert coin_coin_graph(tweets, 0, 10).weight("BTC", "ETH") == 4
    assert coin_coin_graph(TweetIndex(tweets), 0, 10).weight("BTC", "ETH") == 4


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("uvwx"), st.integers(0, 100),
                          st.sets(st.sampled_from(["A", "B", "C", "D"]), min_size=1, max_size=3)),
                max_size=30))
def test_coin_graph_brute_force(rows):
    tweets = [tw(i, u, t, *c) for i, (u, t, c) in enumerate(rows)]
    g = coin_coin_graph(tweets, 20, 80)
    inside = [t for t in tweets if 20 <= t.timestamp <= 80]
    for a, b in combinations("ABCD", 2):
        expect = sum(min(sum(a in t.cashtags for t in inside if t.user_id == u),
                         sum(b in t.cashtags for t in inside if t.user_id == u)) for u in "uvwx")
        assert g.weight(a, b) == expect


def test_graph_validation():
    with pytest.raises(ValidationError):
        WeightedGraph(("a",), {("a", "a"): 1})
    with pytest.raises(ValidationError):
        WeightedGraph(("a", "b"), {("a", "b"): 0})
    with pytest.raises(ValidationError):
        WeightedGraph(("a",), {("a", "b"): 1})


def test_pagerank_symmetric_cases():
    pr = pagerank(WeightedGraph(("a", "b", "c"), {("a", "b"): 1, ("b", "c"): 1, ("a", "c"): 1}))
    for v in pr.values():
        assert v == pytest.approx(1 / 3, abs=1e-9)
    pr = pagerank(WeightedGraph(("a", "b"), {("a", "b"): 2}))
    assert pr["a"] == pytest.approx(0.5, abs=1e-12)


def test_pagerank_path_matches_oracle():
    g = WeightedGraph(("a", "b", "c"), {("a", "b"): 1, ("b", "c"): 1})
    pr, ref = pagerank(g), dense_pagerank(g)
    for v in g.nodes:
        assert pr[v] == pytest.approx(ref[v], abs=1e-8)
    assert pr["b"] > pr["a"]


def random_graph(rng, n=20, p=0.2):
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = {(nodes[i], nodes[j]): float(rng.integers(1, 10))
             for i, j in combinations(range(n), 2) if rng.random() < p}
    return WeightedGraph(tuple(nodes), edges)


@pytest.mark.parametrize("seed", range(10))
def test_pagerank_random_graphs(seed):
    g = random_graph(np.random.default_rng(seed))
    pr, ref = pagerank(g), dense_pagerank(g)
    assert sum(pr.values()) == pytest.approx(1.0, abs=1e-9)
    for v in g.nodes:
        assert pr[v] == pytest.approx(ref[v], abs=1e-8)


def test_pagerank_errors():
    with pytest.raises(ValidationError):
        pagerank(WeightedGraph(()))
    g = random_graph(np.random.default_rng(0))
    with pytest.raises(PageRankError):
        pagerank(g, max_iter=2)


def test_pump_user_matrix_examples():
    a = PumpAttempt("ADA", 10 * H, ("m",))
    tweets = [tw(1, "u", 9 * H, "ADA"), tw(2, "u", 9 * H + 5, "ADA"), tw(3, "v", 4 * H, "ADA"),
              tw(4, "w", 4 * H - 1, "ADA"), tw(5, "x", 10 * H + 1, "ADA")]
    B = pump_user_matrix([a], tweets)
    d = dict(zip(B.cols, B.dense()[0]))
    assert d == {"u": 2, "v": 1}


def test_pump_user_matrix_brute_force(tmp_path):
    rng = np.random.default_rng(4)
    coins, users = ["ADA", "XRP"], ["u1", "u2", "u3", "u4"]
    attempts = [PumpAttempt(coins[i % 2], (10 + 5 * i) * H, (f"m{i}",)) for i in range(3)]
    tweets = [tw(i, users[rng.integers(4)], int(rng.integers(0, 30 * H)), coins[rng.integers(2)])
              for i in range(200)]
    B = pump_user_matrix(attempts, tweets)
    dense = B.dense()
    for i, a in enumerate(attempts):
        for u in users:
            expect = sum(1 for t in tweets if t.user_id == u and a.coin in t.cashtags
                         and a.anchor_time - 6 * H <= t.timestamp <= a.anchor_time)
            got = dense[i, B.cols.index(u)] if u in B.cols else 0
            assert got == expect
    B.write_csv(str(tmp_path / "b.csv"))
    back = AffiliationMatrix.load_csv(str(tmp_path / "b.csv"))
    assert back.cols == B.cols
    np.testing.assert_array_equal(back.dense(), dense)


def _clique_tweets(users, anchors, coin="ADA"):
    out = []
    for a in anchors:
        for j, u in enumerate(users):
            out.append(tw(f"{a}-{u}", u, a - H, coin))
    return out


def test_components_two_cliques():
    g1 = [f"a{i:02d}" for i in range(30)]
    g2 = [f"b{i:02d}" for i in range(30)]
    anchors = [10 * H, 30 * H, 50 * H, 70 * H]
    attempts = [PumpAttempt("ADA", t, ("m",)) for t in anchors]
    tweets = _clique_tweets(g1, anchors[:2]) + _clique_tweets(g2, anchors[2:])
    comp = user_user_components("ADA", attempts, tweets)
    assert comp.sizes == (30, 30)
    assert len({comp.membership[u] for u in g1}) == 1
    assert comp.membership[g1[0]] != comp.membership[g2[0]]


def test_components_min_size_filter():
    users = [f"a{i}" for i in range(10)]
    attempts = [PumpAttempt("ADA", 10 * H, ("m",))]
    comp = user_user_components("ADA", attempts, _clique_tweets(users, [10 * H]))
    assert comp.sizes == () and comp.membership == {}


def dfs_components(graph):
    adj = {v: set() for v in graph.nodes}
    for u, v in graph.edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, comps = set(), []
    for s in graph.nodes:
        if s in seen:
            continue
        stack, comp = [s], []
        seen.add(s)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        comps.append(frozenset(comp))
    return set(comps)


@pytest.mark.parametrize("seed", range(200))
def test_union_find_matches_dfs(seed):
    rng = np.random.default_rng(seed)
    g = sparsify_top_k(random_graph(rng, n=int(rng.integers(2, 40)), p=float(rng.uniform(0.02, 0.3))),
                       int(rng.integers(1, 4)))
    uf = UnionFind(g.nodes)
    for u, v in g.edges:
        uf.union(u, v)
    assert {frozenset(c) for c in uf.groups()} == dfs_components(g)


def test_sparsify_keeps_top_k_per_node():
    g = WeightedGraph(("a", "b", "c", "d"), {("a", "b"): 5, ("a", "c"): 3, ("a", "d"): 1,
                                             ("c", "d"): 2})
    s = sparsify_top_k(g, 1)
    assert set(s.edges) == {("a", "b"), ("a", "c"), ("c", "d")}


def test_user_user_graph_weights():
    attempts = [PumpAttempt("ADA", 10 * H, ("m",)), PumpAttempt("ADA", 20 * H, ("m",))]
    tweets = _clique_tweets(["u", "v"], [10 * H, 20 * H]) + _clique_tweets(["w"], [10 * H])
    g = user_user_graph("ADA", attempts, tweets)
    assert g.weight("u", "v") == 2 and g.weight("u", "w") == 1


def test_component_activity():
    comp = ComponentAssignment("ADA", {"u": 0, "v": 0, "w": 1}, (2, 1))
    assert component_activity_features(comp, [], "ADA", 0, 10).tolist() == [0, 0]
    tweets = [tw(1, "w", 5, "ADA"), tw(2, "w", 6, "ADA")]
    assert component_activity_features(comp, tweets, "ADA", 0, 10).tolist() == [0, 1]
    rng = np.random.default_rng(0)
    tweets = [tw(i, "uvwz"[rng.integers(4)], int(rng.integers(0, 100)), "ADA") for i in range(60)]
    got = component_activity_features(comp, tweets, "ADA", 20, 70)
    expect = [len({t.user_id for t in tweets if 20 <= t.timestamp <= 70
                   and comp.membership.get(t.user_id) == k}) for k in range(2)]
    assert got.tolist() == expect
