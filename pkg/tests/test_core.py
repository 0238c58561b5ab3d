import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsflow.core import (
    RngStream,
    argmax_category,
    entropy,
    entropy_rows,
    evaluate,
    normalize,
    simpson,
)


class TestNormalize:
    def test_symmetric(self):
        assert np.allclose(normalize([2, 2]), [0.5, 0.5])

    def test_identity_case(self):
        assert np.allclose(normalize([1, 0, 0]), [1, 0, 0])

    def test_hand_arithmetic(self):
        # 4/6.5, 2.5/6.5
        assert np.allclose(normalize([4.0, 2.5]), [0.6154, 0.3846], atol=1e-4)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            normalize([0.0, 0.0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            normalize([1.0, -0.5])

    @given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=40).filter(lambda v: sum(v) > 0))
    def test_idempotent(self, values):
        once = normalize(values)
        assert np.allclose(normalize(once), once, atol=1e-12)
        assert abs(once.sum() - 1.0) < 1e-9


class TestEvaluate:
    def test_aligned_one_hots(self):
        assert evaluate([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert evaluate([1, 0], [0, 1]) == 0.0

    def test_uniform_user_gives_inverse_n(self):
        u = np.full(20, 0.05)
        a = normalize(np.arange(1.0, 21.0))
        assert abs(evaluate(u, a) - 0.05) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            evaluate([1, 0], [1, 0, 0])

    @given(st.integers(2, 12), st.integers(0, 10**6))
    @settings(max_examples=50)
    def test_bilinear(self, n, seed):
        rng = np.random.default_rng(seed)
        u, a, b = rng.random(n), rng.random(n), rng.random(n)
        alpha, beta = rng.random(2)
        lhs = evaluate(u, alpha * a + beta * b)
        rhs = alpha * evaluate(u, a) + beta * evaluate(u, b)
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


class TestEntropy:
    def test_uniform_over_four(self):
        assert abs(entropy([0.25] * 4) - 2.0) < 1e-12

    def test_point_mass(self):
        assert entropy([1, 0, 0]) == 0.0

    def test_analytic_half_quarter_quarter(self):
        assert abs(entropy([0.5, 0.25, 0.25]) - 1.5) < 1e-12

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError, match="normalized"):
            entropy([0.5, 0.6])

    def test_uniform_exact_for_all_n(self):
        for n in range(1, 65):
            assert abs(entropy(np.full(n, 1.0 / n)) - np.log2(n)) < 1e-9

    def test_entropy_rows_matches_scalar(self):
        rng = np.random.default_rng(3)
        mat = rng.dirichlet(np.ones(8), size=30)
        rows = entropy_rows(mat)
        for i in range(30):
            assert abs(rows[i] - entropy(mat[i])) < 1e-12


class TestSimpson:
    def test_two_thirds(self):
        assert abs(simpson({1, 2, 3}, {2, 3, 4}) - 2 / 3) < 1e-4

    def test_subset_is_one(self):
        assert simpson({1, 2}, {1, 2, 3}) == 1.0

    def test_disjoint(self):
        assert simpson({1, 2}, {3, 4}) == 0.0

    def test_both_empty(self):
        assert simpson(set(), set()) == 0.0

    def test_one_empty(self):
        assert simpson(set(), {1}) == 0.0

    @given(st.sets(st.integers(0, 50)), st.sets(st.integers(0, 50)))
    def test_symmetric_and_bounded(self, a, b):
        s = simpson(a, b)
        assert s == simpson(b, a)
        assert 0.0 <= s <= 1.0


class TestArgmaxCategory:
    def test_plain(self):
        assert argmax_category([0.2, 0.5, 0.3]) == 1

    def test_tie_breaks_low(self):
        assert argmax_category([0.5, 0.5]) == 0

    def test_all_tied(self):
        assert argmax_category(np.full(20, 0.05)) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            argmax_category([])


class TestRngStream:
    def test_identical_streams_agree(self):
        a = RngStream(123456789, 42)
        b = RngStream(123456789, 42)
        assert np.array_equal(a.random(10_000), b.random(10_000))

    def test_different_streams_differ(self):
        a = RngStream(123456789, 1)
        b = RngStream(123456789, 2)
        assert not np.array_equal(a.random(100), b.random(100))

    def test_different_seeds_differ(self):
        assert not np.array_equal(RngStream(1, 0).random(100), RngStream(2, 0).random(100))

    def test_large_stream_ids(self):
        sid = (7 << 32) + 12345
        a = RngStream(9, sid)
        b = RngStream(9, sid)
        assert np.array_equal(a.integers(0, 1000, 100), b.integers(0, 1000, 100))

    def test_choice_without_replacement_is_deterministic(self):
        a = RngStream(5, 5).choice(np.arange(100), size=10, replace=False)
        b = RngStream(5, 5).choice(np.arange(100), size=10, replace=False)
        assert np.array_equal(a, b)
        assert len(set(a.tolist())) == 10
