"""Co-reading article network and Louvain community detection.

From a browsing log: keep widely-read articles, link article pairs whose
reader sets overlap strongly (Simpson coefficient at or above a threshold),
then maximize weighted modularity by the two-phase Louvain heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import RngStream

__all__ = [
    "BrowseLog",
    "ArticleGraph",
    "Partition",
    "filter_articles",
    "build_article_graph",
    "louvain",
    "modularity",
]


@dataclass(frozen=True)
class BrowseLog:
    """Deduplicated reading events in canonical (user, article) order.

    Duplicate (user, article) pairs collapse to one record keeping the
    earliest day, so reader sets are sets and construction is invariant to
    input record order.
    """

    users: np.ndarray
    articles: np.ndarray
    days: np.ndarray

    @classmethod
    def from_arrays(cls, users, articles, days) -> "BrowseLog":
        users = np.asarray(users, dtype=np.int64)
        articles = np.asarray(articles, dtype=np.int64)
        days = np.asarray(days, dtype=np.int64)
        if not (users.shape == articles.shape == days.shape):
            raise ValueError("users, articles, days must have equal length")
        if users.size == 0:
            return cls(users, articles, days)
        order = np.lexsort((days, articles, users))
        users, articles, days = users[order], articles[order], days[order]
        first = np.ones(users.size, dtype=bool)
        first[1:] = (users[1:] != users[:-1]) | (articles[1:] != articles[:-1])
        return cls(users[first], articles[first], days[first])

    @classmethod
    def from_records(cls, records) -> "BrowseLog":
        rows = list(records)
        if not rows:
            empty = np.empty(0, dtype=np.int64)
            return cls(empty, empty.copy(), empty.copy())
        arr = np.asarray(rows, dtype=np.int64)
        return cls.from_arrays(arr[:, 0], arr[:, 1], arr[:, 2])

    @classmethod
    def from_read_log(cls, read_log: np.ndarray) -> "BrowseLog":
        """From a simulator read log with columns (turn, user, article)."""
        read_log = np.asarray(read_log, dtype=np.int64)
        if read_log.size == 0:
            return cls.from_records([])
        return cls.from_arrays(read_log[:, 1], read_log[:, 2], read_log[:, 0])

    def __len__(self):
        return self.users.size

    def article_ids(self) -> np.ndarray:
        return np.unique(self.articles)

    def user_ids(self) -> np.ndarray:
        return np.unique(self.users)

    def reader_counts(self) -> tuple[np.ndarray, np.ndarray]:
        return np.unique(self.articles, return_counts=True)

    def reader_sets(self) -> dict:
        sets: dict[int, set] = {}
        for u, a in zip(self.users, self.articles):
            sets.setdefault(int(a), set()).add(int(u))
        return sets

    def user_sets(self) -> dict:
        sets: dict[int, set] = {}
        for u, a in zip(self.users, self.articles):
            sets.setdefault(int(u), set()).add(int(a))
        return sets


def filter_articles(log: BrowseLog, min_readers: int = 100) -> BrowseLog:
    """Keep only articles read by at least `min_readers` users."""
    if len(log) == 0 or min_readers <= 0:
        return log
    ids, counts = log.reader_counts()
    keep_ids = ids[counts >= min_readers]
    mask = np.isin(log.articles, keep_ids, assume_unique=False)
    return BrowseLog(log.users[mask], log.articles[mask], log.days[mask])


class ArticleGraph:
    """Weighted undirected graph over article ids; no self-loops."""

    def __init__(self, nodes, edges=()):
        self.nodes = np.unique(np.asarray(list(nodes), dtype=np.int64))
        self.adj: dict[int, dict[int, float]] = {int(n): {} for n in self.nodes}
        for i, j, w in edges:
            self.add_edge(int(i), int(j), float(w))

    def add_edge(self, i: int, j: int, w: float) -> None:
        if i == j:
            raise ValueError("self-loops are not allowed")
        if i not in self.adj or j not in self.adj:
            raise ValueError(f"edge ({i},{j}) references unknown node")
        self.adj[i][j] = w
        self.adj[j][i] = w

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_edges(self) -> int:
        return sum(len(nb) for nb in self.adj.values()) // 2

    def edges(self):
        """Yield (i, j, w) with i < j, in sorted order."""
        for i in self.nodes:
            for j in sorted(self.adj[int(i)]):
                if i < j:
                    yield int(i), int(j), self.adj[int(i)][j]

    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges())

    def degree(self, i: int) -> float:
        return sum(self.adj[int(i)].values())


def build_article_graph(log: BrowseLog, threshold: float = 0.62,
                        metric: str = "simpson") -> ArticleGraph:
    """Link article pairs whose reader-set similarity is >= threshold.

    Candidate pairs come from a shared-reader index (sparse co-occurrence),
    never from all article pairs. `metric` is "simpson" (default) or
    "jaccard" for comparison runs.
    """
    if metric not in ("simpson", "jaccard"):
        raise ValueError(f"unknown similarity metric {metric!r}")
    art_ids, art_idx = np.unique(log.articles, return_inverse=True)
    if art_ids.size == 0:
        return ArticleGraph([])
    _, usr_idx = np.unique(log.users, return_inverse=True)
    incidence = sp.csr_matrix(
        (np.ones(len(log), dtype=np.int64), (art_idx, usr_idx)),
        shape=(art_ids.size, usr_idx.max() + 1))
    co = (incidence @ incidence.T).tocoo()
    readers = np.diff(incidence.indptr)

    upper = co.row < co.col
    rows, cols, inter = co.row[upper], co.col[upper], co.data[upper]
    if metric == "simpson":
        denom = np.minimum(readers[rows], readers[cols])
    else:
        denom = readers[rows] + readers[cols] - inter
    sims = inter / denom
    keep = sims >= threshold
    edges = zip(art_ids[rows[keep]], art_ids[cols[keep]], sims[keep])
    return ArticleGraph(art_ids, edges)


@dataclass(frozen=True)
class Partition:
    """Community id per node plus the partition's modularity."""

    assignment: dict
    q: float

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def communities(self) -> dict:
        groups: dict[int, list] = {}
        for node in sorted(self.assignment):
            groups.setdefault(self.assignment[node], []).append(node)
        return groups


def modularity(graph: ArticleGraph, assignment) -> float:
    """Weighted Newman modularity of a node -> community assignment."""
    for n in graph.nodes:
        if int(n) not in assignment:
            raise ValueError(f"partition does not cover node {n}")
    m = graph.total_weight()
    if m == 0.0:
        return 0.0
    sum_in: dict[int, float] = {}
    sum_tot: dict[int, float] = {}
    for i, j, w in graph.edges():
        if assignment[i] == assignment[j]:
            sum_in[assignment[i]] = sum_in.get(assignment[i], 0.0) + 2.0 * w
    for n in graph.nodes:
        c = assignment[int(n)]
        sum_tot[c] = sum_tot.get(c, 0.0) + graph.degree(int(n))
    two_m = 2.0 * m
    return sum(sum_in.get(c, 0.0) / two_m - (tot / two_m) ** 2
               for c, tot in sum_tot.items())


def _local_move(adj, selfw, m, rng) -> np.ndarray:
    """Greedy modularity-gain moves in seeded random order until stable."""
    n = len(adj)
    comm = np.arange(n)
    k = np.array([sum(nb.values()) + 2.0 * selfw[i] for i, nb in enumerate(adj)])
    tot = k.copy()
    two_m_sq = 2.0 * m * m
    moved = True
    while moved:
        moved = False
        for i in rng.permutation(n):
            i = int(i)
            ci = int(comm[i])
            w2c: dict[int, float] = {}
            for j, w in adj[i].items():
                cj = int(comm[j])
                w2c[cj] = w2c.get(cj, 0.0) + w
            tot[ci] -= k[i]
            best_c = ci
            best_gain = w2c.get(ci, 0.0) / m - tot[ci] * k[i] / two_m_sq
            for c in sorted(w2c):
                if c == ci:
                    continue
                gain = w2c[c] / m - tot[c] * k[i] / two_m_sq
                if gain > best_gain + 1e-12:
                    best_gain = gain
                    best_c = c
            tot[best_c] += k[i]
            if best_c != ci:
                comm[i] = best_c
                moved = True
    return comm


def _aggregate(adj, selfw, comm, n_comms):
    new_adj: list[dict[int, float]] = [dict() for _ in range(n_comms)]
    new_selfw = np.zeros(n_comms)
    for i, nb in enumerate(adj):
        ci = int(comm[i])
        new_selfw[ci] += selfw[i]
        for j, w in nb.items():
            if j <= i:
                continue
            cj = int(comm[j])
            if ci == cj:
                new_selfw[ci] += w
            else:
                new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
                new_adj[cj][ci] = new_adj[cj].get(ci, 0.0) + w
    return new_adj, new_selfw


def _partition_quality(adj, m, membership) -> float:
    """Q of the level-0 graph under `membership`, by louvain's own arithmetic."""
    sum_in: dict[int, float] = {}
    sum_tot: dict[int, float] = {}
    for i, nb in enumerate(adj):
        ci = int(membership[i])
        ki = sum(nb.values())
        sum_tot[ci] = sum_tot.get(ci, 0.0) + ki
        for j, w in nb.items():
            if int(membership[j]) == ci:
                sum_in[ci] = sum_in.get(ci, 0.0) + w  # both directions counted
    two_m = 2.0 * m
    return sum(sum_in.get(c, 0.0) / two_m - (tot / two_m) ** 2
               for c, tot in sum_tot.items())


def louvain(graph: ArticleGraph, rng: RngStream | None = None) -> Partition:
    """Two-phase Louvain modularity maximization, resolution 1.

    Local moving visits nodes in seeded random order and repeats until no
    positive gain; communities are then aggregated and the process repeats
    until no merge improves modularity. An edgeless graph yields singleton
    communities with Q = 0 by convention.
    """
    if graph.n_nodes == 0:
        raise ValueError("louvain needs at least one node")
    rng = RngStream(0, 0) if rng is None else rng

    nodes = [int(n) for n in graph.nodes]
    index = {n: i for i, n in enumerate(nodes)}
    adj0 = [
        {index[j]: w for j, w in graph.adj[n].items()}
        for n in nodes
    ]
    m = sum(sum(nb.values()) for nb in adj0) / 2.0
    if m == 0.0:
        return Partition({n: i for i, n in enumerate(nodes)}, 0.0)

    membership = np.arange(len(nodes))
    adj, selfw = adj0, np.zeros(len(nodes))
    while True:
        comm = _local_move(adj, selfw, m, rng)
        _, compact = np.unique(comm, return_inverse=True)
        membership = compact[membership]
        n_comms = int(compact.max()) + 1
        if n_comms == len(adj):
            break
        adj, selfw = _aggregate(adj, selfw, compact, n_comms)

    q = _partition_quality(adj0, m, membership)
    # stable community ids: number communities by their smallest article id
    relabel: dict[int, int] = {}
    assignment: dict[int, int] = {}
    for n in nodes:
        c = int(membership[index[n]])
        if c not in relabel:
            relabel[c] = len(relabel)
        assignment[n] = relabel[c]
    return Partition(assignment, q)
