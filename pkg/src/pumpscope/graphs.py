"""Coin-coin co-mention graph with PageRank, the pump-user affiliation matrix,
and user-user connected components."""

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from pumpscope.errors import DataError, PumpscopeError, ValidationError
from pumpscope.tweetindex import TweetIndex

HOUR = 3600
PUMP_USER_WINDOW = 6 * HOUR


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph; edges keyed by sorted ``(u, v)`` pairs."""

    nodes: tuple
    edges: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes)))
        node_set = set(nodes)
        edges = {}
        for (u, v), w in self.edges.items():
            if u == v:
                raise ValidationError(f"self-loop on {u!r}")
            if w <= 0:
                raise ValidationError(f"non-positive weight on ({u!r}, {v!r})")
            if u not in node_set or v not in node_set:
                raise ValidationError(f"edge ({u!r}, {v!r}) references an unknown node")
            key = (u, v) if u < v else (v, u)
            if key in edges:
                raise ValidationError(f"duplicate edge {key}")
            edges[key] = w
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", dict(sorted(edges.items())))

    def weight(self, u, v):
        return self.edges.get((u, v) if u < v else (v, u), 0)

    def adjacency(self):
        """Dense symmetric weight matrix in ``nodes`` order."""
        pos = {n: i for i, n in enumerate(self.nodes)}
        A = np.zeros((len(self.nodes), len(self.nodes)))
        for (u, v), w in self.edges.items():
            A[pos[u], pos[v]] = A[pos[v], pos[u]] = w
        return A

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source", "target", "weight"])
            for (u, v), wt in self.edges.items():
                w.writerow([u, v, wt])


def coin_coin_graph(tweets, start, end):
    """Co-mention graph over tweets with ``start <= timestamp <= end``.

    Edge weight for coins ``(a, b)`` is the sum over users of
    ``min(mentions of a, mentions of b)``.
    """
    window = tweets.window(start, end) if isinstance(tweets, TweetIndex) else [
        t for t in tweets if start <= t.timestamp <= end]
    per_user = defaultdict(Counter)
    nodes = set()
    for t in window:
        per_user[t.user_id].update(t.cashtags)
        nodes.update(t.cashtags)
    edges = Counter()
    for counts in per_user.values():
        if len(counts) < 2:
            continue
        for a, b in combinations(sorted(counts), 2):
            edges[(a, b)] += min(counts[a], counts[b])
    return WeightedGraph(tuple(nodes), dict(edges))


class PageRankError(PumpscopeError):
    def __init__(self, residual, iterations):
        self.residual = residual
        super().__init__(f"PageRank did not converge after {iterations} iterations "
                         f"(residual {residual:.3e})")


def pagerank(graph, damping=0.85, tol=1e-10, max_iter=200):
    """Weighted PageRank by power iteration with uniform teleport.

    Mass of nodes without edges is spread uniformly, so isolated nodes only
    ever receive teleport-level mass. Converged when the L1 change < ``tol``.
    """
    n = len(graph.nodes)
    if n == 0:
        raise ValidationError("PageRank on an empty graph")
    pos = {v: i for i, v in enumerate(graph.nodes)}
    rows, cols, vals = [], [], []
    for (u, v), w in graph.edges.items():
        rows += [pos[u], pos[v]]
        cols += [pos[v], pos[u]]
        vals += [float(w), float(w)]
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    strength = np.asarray(W.sum(axis=1)).ravel()
    dangling = strength == 0
    inv = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, strength))
    PT = (sp.diags(inv) @ W).T.tocsr()
    r = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        nxt = damping * (PT @ r + r[dangling].sum() / n) + (1.0 - damping) / n
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - r).sum())
        r = nxt
        if residual < tol:
            return {v: float(r[i]) for i, v in enumerate(graph.nodes)}
    raise PageRankError(residual, max_iter)


@dataclass(frozen=True, eq=False)
class AffiliationMatrix:
    """Pump attempts x users counts of coin mentions before each attempt."""

    rows: tuple
    cols: tuple
    matrix: sp.csr_matrix

    def degrees(self):
        """Per-user sum of adjacent edge weights."""
        d = np.asarray(self.matrix.sum(axis=0)).ravel()
        return {u: float(d[j]) for j, u in enumerate(self.cols)}

    def dense(self):
        return self.matrix.toarray()

    def write_csv(self, path):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["attempt_id", "user_id", "count"])
            for k in order:
                w.writerow([self.rows[coo.row[k]], self.cols[coo.col[k]], int(coo.data[k])])

    @classmethod
    def load_csv(cls, path):
        rows, cols, entries = {}, {}, []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"attempt_id", "user_id", "count"} <= set(reader.fieldnames):
                raise DataError("expected header attempt_id,user_id,count", path, 1)
            for rec in reader:
                try:
                    c = int(rec["count"])
                except ValueError:
                    raise DataError(f"invalid count {rec['count']!r}", path, reader.line_num) from None
                if c < 0:
                    raise DataError("negative count", path, reader.line_num)
                i = rows.setdefault(rec["attempt_id"], len(rows))
                entries.append((i, rec["user_id"], c))
                cols.setdefault(rec["user_id"], None)
        col_ids = tuple(sorted(cols))
        cpos = {u: j for j, u in enumerate(col_ids)}
        data = [c for _, _, c in entries]
        ii = [i for i, _, _ in entries]
        jj = [cpos[u] for _, u, _ in entries]
        m = sp.csr_matrix((data, (ii, jj)), shape=(len(rows), len(col_ids)), dtype=np.int64)
        return cls(tuple(rows), col_ids, m)


def pump_user_matrix(attempts, tweets, w=PUMP_USER_WINDOW):
    """``B[i, j]`` = tweets by user ``j`` mentioning attempt ``i``'s coin in
    ``[t_i - w, t_i]``. Columns are the users with at least one mention."""
    index = tweets if isinstance(tweets, TweetIndex) else TweetIndex(tweets)
    per_row = []
    users = set()
    for a in attempts:
        counts = Counter(t.user_id for t in index.coin_window(a.coin, a.anchor_time - w, a.anchor_time))
        per_row.append(counts)
        users.update(counts)
    cols = tuple(sorted(users))
    cpos = {u: j for j, u in enumerate(cols)}
    ii, jj, data = [], [], []
    for i, counts in enumerate(per_row):
        for u in sorted(counts):
            ii.append(i)
            jj.append(cpos[u])
            data.append(counts[u])
    m = sp.csr_matrix((data, (ii, jj)), shape=(len(per_row), len(cols)), dtype=np.int64)
    return AffiliationMatrix(tuple(a.attempt_id for a in attempts), cols, m)


class UnionFind:
    def __init__(self, items=()):
        self.parent = {}
        self.size = {}
        for x in items:
            self.add(x)

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def groups(self):
        out = defaultdict(list)
        for x in self.parent:
            out[self.find(x)].append(x)
        return list(out.values())


@dataclass(frozen=True)
class ComponentAssignment:
    coin: str
    membership: dict  # user_id -> component id (0 = largest)
    sizes: tuple

    @property
    def n_components(self):
        return len(self.sizes)


def user_user_graph(coin, attempts, tweets, w=PUMP_USER_WINDOW):
    """Users who tweeted ``coin`` before its attempts; edge weight = number of
    attempts in which both users were active."""
    index = tweets if isinstance(tweets, TweetIndex) else TweetIndex(tweets)
    nodes = set()
    edges = Counter()
    for a in attempts:
        if a.coin != coin:
            continue
        users = sorted({t.user_id for t in index.coin_window(coin, a.anchor_time - w, a.anchor_time)})
        nodes.update(users)
        for pair in combinations(users, 2):
            edges[pair] += 1
    return WeightedGraph(tuple(nodes), dict(edges))


def sparsify_top_k(graph, top_k):
    """Keep, for every node, its ``top_k`` heaviest edges (ties by neighbor id)."""
    incident = defaultdict(list)
    for (u, v), w in graph.edges.items():
        incident[u].append((-w, v))
        incident[v].append((-w, u))
    kept = {}
    for u, lst in incident.items():
        for negw, v in sorted(lst)[:top_k]:
            key = (u, v) if u < v else (v, u)
            kept[key] = -negw
    return WeightedGraph(graph.nodes, kept)


def user_user_components(coin, attempts, tweets, top_k=2, min_size=25, w=PUMP_USER_WINDOW):
    """Connected components of the top-k sparsified user-user graph.

    Components smaller than ``min_size`` are dropped; ids are assigned by
    decreasing size (ties by smallest member id).
    """
    g = sparsify_top_k(user_user_graph(coin, attempts, tweets, w), top_k)
    uf = UnionFind(g.nodes)
    for u, v in g.edges:
        uf.union(u, v)
    comps = [sorted(c) for c in uf.groups() if len(c) >= min_size]
    comps.sort(key=lambda c: (-len(c), c[0]))
    membership = {u: k for k, c in enumerate(comps) for u in c}
    return ComponentAssignment(coin, membership, tuple(len(c) for c in comps))


def component_activity_features(assignment, tweets, coin, start, end):
    """Distinct assigned users per component tweeting ``coin`` in ``[start, end]``."""
    index = tweets if isinstance(tweets, TweetIndex) else TweetIndex(tweets)
    out = np.zeros(assignment.n_components)
    seen = set()
    for t in index.coin_window(coin, start, end):
        k = assignment.membership.get(t.user_id)
        if k is not None and t.user_id not in seen:
            seen.add(t.user_id)
            out[k] += 1
    return out
