import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import normalized_mutual_info_score

from conftest import best_partition_by_enumeration, clique_pair_graph, planted_log
from newsflow.core import RngStream
from newsflow.graphcluster import (
    ArticleGraph,
    BrowseLog,
    build_article_graph,
    filter_articles,
    louvain,
    modularity,
)


class TestBrowseLog:
    def test_duplicates_collapse_keeping_earliest_day(self):
        log = BrowseLog.from_records([(1, 10, 5), (1, 10, 3), (2, 10, 7)])
        assert len(log) == 2
        row = np.flatnonzero((log.users == 1) & (log.articles == 10))
        assert log.days[row[0]] == 3

    def test_order_invariance(self):
        recs = [(1, 10, 2), (2, 11, 3), (1, 11, 4), (3, 10, 1)]
        a = BrowseLog.from_records(recs)
        b = BrowseLog.from_records(recs[::-1])
        assert np.array_equal(a.users, b.users)
        assert np.array_equal(a.articles, b.articles)
        assert np.array_equal(a.days, b.days)

    def test_empty(self):
        log = BrowseLog.from_records([])
        assert len(log) == 0
        assert log.article_ids().size == 0


class TestFilterArticles:
    def test_boundary_keeps_exactly_min(self):
        records = []
        for aid, n_readers in ((0, 99), (1, 100), (2, 150)):
            records.extend((u + 1000 * aid, aid, 1) for u in range(n_readers))
        log = BrowseLog.from_records(records)
        kept = filter_articles(log, min_readers=100)
        assert set(kept.article_ids().tolist()) == {1, 2}

    def test_zero_threshold_is_identity(self):
        log = BrowseLog.from_records([(1, 5, 1), (2, 6, 1)])
        kept = filter_articles(log, min_readers=0)
        assert np.array_equal(kept.articles, log.articles)

    def test_empty_log(self):
        assert len(filter_articles(BrowseLog.from_records([]), 100)) == 0


class TestBuildArticleGraph:
    def test_hand_simpson_point_seven(self):
        # A readers u1..u10, B readers u1..u7, u11..u13 -> sim 7/10 = 0.7
        records = [(u, 0, 1) for u in range(1, 11)]
        records += [(u, 1, 1) for u in list(range(1, 8)) + [11, 12, 13]]
        g = build_article_graph(BrowseLog.from_records(records), threshold=0.62)
        assert g.adj[0][1] == pytest.approx(0.7)

    def test_disjoint_reader_sets_no_edge(self):
        records = [(u, 0, 1) for u in range(5)] + [(u, 1, 1) for u in range(10, 15)]
        g = build_article_graph(BrowseLog.from_records(records), threshold=0.0001)
        assert g.n_edges == 0

    def test_boundary_sim_equal_threshold_is_linked(self):
        # |A∩B| = 31, |A| = |B| = 50 -> sim exactly 0.62
        records = [(u, 0, 1) for u in range(50)]
        records += [(u, 1, 1) for u in list(range(31)) + list(range(100, 119))]
        g = build_article_graph(BrowseLog.from_records(records), threshold=0.62)
        assert g.adj[0].get(1) == pytest.approx(0.62)

    def test_record_order_invariance(self):
        log, _ = planted_log(n_blocks=2, articles_per_block=10, users_per_block=20,
                             reads_per_user=8, seed=5)
        recs = list(zip(log.users.tolist(), log.articles.tolist(), log.days.tolist()))
        rng = np.random.default_rng(0)
        shuffled = [recs[i] for i in rng.permutation(len(recs))]
        g1 = build_article_graph(BrowseLog.from_records(recs))
        g2 = build_article_graph(BrowseLog.from_records(shuffled))
        assert list(g1.edges()) == list(g2.edges())

    def test_jaccard_flag(self):
        records = [(u, 0, 1) for u in range(4)] + [(u, 1, 1) for u in range(2, 6)]
        log = BrowseLog.from_records(records)
        g = build_article_graph(log, threshold=0.3, metric="jaccard")
        # |∩|=2, |∪|=6 -> 1/3
        assert g.adj[0][1] == pytest.approx(1 / 3)

    def test_isolated_nodes_kept(self):
        records = [(u, 0, 1) for u in range(3)] + [(5, 1, 1)]
        g = build_article_graph(BrowseLog.from_records(records), threshold=0.62)
        assert set(g.nodes.tolist()) == {0, 1}


class TestModularity:
    def test_single_community_is_zero(self):
        g = clique_pair_graph(k=4, bridge=True)
        assert modularity(g, {n: 0 for n in range(8)}) == pytest.approx(0.0)

    def test_two_disconnected_cliques_half(self):
        g = clique_pair_graph(k=5, bridge=False)
        parts = {n: 0 if n < 5 else 1 for n in range(10)}
        assert modularity(g, parts) == pytest.approx(0.5, abs=1e-12)

    def test_random_partition_of_clique_nonpositive(self):
        edges = [(i, j, 1.0) for i in range(5) for j in range(i + 1, 5)]
        g = ArticleGraph(range(5), edges)
        rng = np.random.default_rng(11)
        for _ in range(30):
            parts = {n: int(c) for n, c in enumerate(rng.integers(0, 3, size=5))}
            assert modularity(g, parts) <= 1e-12

    def test_uncovered_node_rejected(self):
        g = clique_pair_graph(k=3, bridge=True)
        with pytest.raises(ValueError, match="cover"):
            modularity(g, {0: 0})

    def test_zero_weight_graph(self):
        g = ArticleGraph([1, 2, 3])
        assert modularity(g, {1: 0, 2: 1, 3: 2}) == 0.0


class TestLouvain:
    def test_two_cliques_with_bridge(self):
        g = clique_pair_graph(k=5, bridge=True)
        oracle_assignment, oracle_q = best_partition_by_enumeration(
            clique_pair_graph(k=3, bridge=True))
        # enumeration oracle on the 10-node case is run once here
        part = louvain(g, RngStream(7, 0))
        left = {part.assignment[n] for n in range(5)}
        right = {part.assignment[n] for n in range(5, 10)}
        assert len(left) == 1 and len(right) == 1 and left != right
        assert part.q == pytest.approx(modularity(g, part.assignment), abs=1e-9)

    def test_two_disconnected_cliques_q_half(self):
        g = clique_pair_graph(k=5, bridge=False)
        part = louvain(g, RngStream(3, 0))
        assert part.n_communities == 2
        assert part.q == pytest.approx(0.5, abs=1e-12)

    def test_single_triangle_one_community(self):
        g = ArticleGraph(range(3), [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
        part = louvain(g, RngStream(1, 0))
        assert part.n_communities == 1

    def test_edgeless_graph_singletons(self):
        g = ArticleGraph([4, 9, 11])
        part = louvain(g, RngStream(1, 0))
        assert part.q == 0.0
        assert part.n_communities == 3

    def test_empty_graph_rejected(self):
        with pytest.raises(ValueError, match="at least one node"):
            louvain(ArticleGraph([]), RngStream(1, 0))

    def test_reported_q_matches_independent_recompute(self):
        log, _ = planted_log(n_blocks=3, articles_per_block=15, users_per_block=40,
                             reads_per_user=10, seed=21)
        g = build_article_graph(log, threshold=0.3)
        part = louvain(g, RngStream(5, 0))
        assert part.q == pytest.approx(modularity(g, part.assignment), abs=1e-9)

    def test_never_below_singletons(self):
        rng = np.random.default_rng(17)
        for trial in range(20):
            n = int(rng.integers(3, 9))
            edges = [(i, j, float(rng.uniform(0.1, 1.0)))
                     for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5]
            g = ArticleGraph(range(n), edges)
            part = louvain(g, RngStream(trial, 1))
            singles_q = modularity(g, {i: i for i in range(n)})
            assert part.q >= singles_q - 1e-12

    def test_deterministic_given_stream(self):
        g = clique_pair_graph(k=4, bridge=True)
        p1 = louvain(g, RngStream(9, 2))
        p2 = louvain(g, RngStream(9, 2))
        assert p1.assignment == p2.assignment and p1.q == p2.q

    def test_matches_enumeration_on_small_graphs(self):
        rng = np.random.default_rng(99)
        hits, trials = 0, 40
        for trial in range(trials):
            n = int(rng.integers(2, 9))
            edges = [(i, j, float(rng.uniform(0.1, 1.0)))
                     for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5]
            g = ArticleGraph(range(n), edges)
            _, oracle_q = best_partition_by_enumeration(g)
            part = louvain(g, RngStream(trial, 0))
            if abs(part.q - oracle_q) <= 1e-9:
                hits += 1
        assert hits >= int(0.95 * trials)

    def test_planted_partition_recovery(self):
        log, truth = planted_log()
        g = build_article_graph(filter_articles(log, min_readers=0), threshold=0.62)
        part = louvain(g, RngStream(2024, 0))
        nodes = [int(n) for n in g.nodes]
        nmi = normalized_mutual_info_score([truth[n] for n in nodes],
                                           [part.assignment[n] for n in nodes])
        assert nmi >= 0.9
