"""Shared fixtures and oracle helpers."""

import numpy as np
import pytest

from newsflow.core import RngStream
from newsflow.graphcluster import ArticleGraph, BrowseLog


def planted_log(n_blocks=5, articles_per_block=40, users_per_block=100,
                reads_per_user=30, noise=0.05, n_days=45, seed=1234):
    """Synthetic browsing log with known communities.

    Each user mostly reads articles of their own block; `noise` is the
    per-read probability of crossing into a random other block. Returns
    (BrowseLog, ground-truth dict article -> block).
    """
    rng = RngStream(seed, 0)
    n_articles = n_blocks * articles_per_block
    truth = {a: a // articles_per_block for a in range(n_articles)}
    records = []
    uid = 0
    for block in range(n_blocks):
        own = np.arange(block * articles_per_block, (block + 1) * articles_per_block)
        other = np.setdiff1d(np.arange(n_articles), own)
        for _ in range(users_per_block):
            cross = rng.random(reads_per_user) < noise
            n_cross = int(cross.sum())
            n_own = min(reads_per_user - n_cross, own.size)
            picks = list(rng.choice(own, size=n_own, replace=False))
            if n_cross:
                picks += list(rng.choice(other, size=min(n_cross, other.size), replace=False))
            days = rng.integers(1, n_days + 1, size=len(picks))
            records.extend((uid, int(a), int(d)) for a, d in zip(picks, days))
            uid += 1
    return BrowseLog.from_records(records), truth


def iter_set_partitions(items):
    """Yield every partition of `items` as a list of blocks (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partial in iter_set_partitions(rest):
        for i in range(len(partial)):
            yield partial[:i] + [[first] + partial[i]] + partial[i + 1 :]
        yield [[first]] + partial


def best_partition_by_enumeration(graph: ArticleGraph):
    """Exhaustive modularity maximum over all partitions (small graphs only)."""
    from newsflow.graphcluster import modularity

    nodes = [int(n) for n in graph.nodes]
    best_q, best = -np.inf, None
    for blocks in iter_set_partitions(nodes):
        assignment = {n: ci for ci, block in enumerate(blocks) for n in block}
        q = modularity(graph, assignment)
        if q > best_q:
            best_q, best = q, assignment
    return best, best_q


def clique_pair_graph(k=5, bridge=True):
    """Two k-cliques (unit weights), optionally joined by one bridge edge."""
    edges = []
    for base in (0, k):
        for i in range(k):
            for j in range(i + 1, k):
                edges.append((base + i, base + j, 1.0))
    if bridge:
        edges.append((0, k, 1.0))
    return ArticleGraph(range(2 * k), edges)


@pytest.fixture
def mini_config():
    from newsflow.simengine import SimConfig

    return SimConfig(turns=4, runs=2, n_users=30, n_categories=8, pool_size=120,
                     articles_per_day=40, presented_per_day=20, top_per_day=10,
                     reads_per_day=5, elite_reads=2, cf_neighbors=5, seed=777)
