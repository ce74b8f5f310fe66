import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morl.indicators import (
    UtilityPrior,
    coverage_ratio,
    epsilon_additive,
    epsilon_multiplicative,
    expected_utility_metric,
    hypervolume,
    maximum_utility_loss,
    reference_point,
    sparsity,
)
from morl.sets import DimensionMismatch, SolutionSet, ccs_prune, pareto_prune
from morl.utility import UtilityFunction


def grid_count_hv(points, ref, cells=200):
    """Midpoint-rule count of grid cells inside the union of boxes [ref, p]."""
    points = np.asarray(points, dtype=float)
    top = points.max(axis=0)
    axes = [ref[i] + (np.arange(cells) + 0.5) * (top[i] - ref[i]) / cells for i in range(len(ref))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(ref))
    inside = np.zeros(len(mesh), dtype=bool)
    for p in points:
        inside |= np.all(mesh <= p, axis=1)
    return inside.mean() * np.prod(top - ref)


class TestHypervolume:
    def test_examples(self):
        assert hypervolume([(2, 2)], (0, 0)) == 4
        assert hypervolume([(1, 2), (2, 1)], (0, 0)) == 3
        assert hypervolume([(2, 2), (1, 1)], (0, 0)) == 4

    def test_three_dimensional_example(self):
        # Two unit-overlapping boxes: 2*1*1 + 1*2*1 - 1*1*1.
        assert hypervolume([(2, 1, 1), (1, 2, 1)], (0, 0, 0)) == 3

    def test_bad_reference_point(self):
        with pytest.raises(ValueError, match="weakly dominated"):
            hypervolume([(1, 1)], (2, 0))

    def test_unsupported_dimension(self):
        with pytest.raises(ValueError, match="unsupported dimension"):
            hypervolume([(1, 1, 1, 1)], (0, 0, 0, 0))

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("d", [2, 3])
    def test_matches_grid_oracle(self, seed, d):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0.1, 1.0, size=(rng.integers(1, 51), d))
        ref = np.zeros(d)
        exact = hypervolume(pts, ref)
        approx = grid_count_hv(pts, ref, cells=400 if d == 2 else 80)
        assert abs(exact - approx) <= 0.01 * exact

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([2, 3]))
    def test_dominated_insertion_unchanged(self, seed, d):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(1, 2, size=(8, d))
        extra = pts[rng.integers(len(pts))] * rng.uniform(0.5, 1.0, size=d)
        ref = np.zeros(d)
        assert hypervolume(np.vstack([pts, extra]), ref) == hypervolume(pts, ref)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([2, 3]))
    def test_nondominated_insertion_increases(self, seed, d):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(1, 2, size=(8, d))
        extra = pts.max(axis=0) + 0.1
        ref = np.full(d, -1.0)
        assert hypervolume(np.vstack([pts, extra]), ref) > hypervolume(pts, ref)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.permutations(range(3)))
    def test_objective_permutation_invariant(self, seed, perm):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0, 5, size=(10, 3))
        ref = np.array([-1.0, -0.5, -2.0])
        perm = list(perm)
        assert hypervolume(pts[:, perm], ref[perm]) == pytest.approx(hypervolume(pts, ref), rel=1e-12)


class TestSparsity:
    def test_examples(self):
        assert sparsity([(0, 1), (1, 0)]) == 2
        assert sparsity([(0, 2), (1, 1), (2, 0)]) == 2
        assert sparsity([(3, 3)]) == 0

    def test_empty(self):
        with pytest.raises(ValueError):
            sparsity(SolutionSet())


class TestEpsilon:
    def test_additive_examples(self):
        front = [(2, 0), (0, 2)]
        assert epsilon_additive(front, front) == 0
        assert epsilon_additive([(1, 1)], [(2, 2)]) == 1
        assert epsilon_additive([(1, 1)], front) == 1

    def test_additive_negative_when_s_dominates(self):
        assert epsilon_additive([(3, 3)], [(2, 2)]) == -1

    def test_multiplicative_examples(self):
        assert epsilon_multiplicative([(1, 2), (2, 1)], [(1, 2), (2, 1)]) == 0
        assert epsilon_multiplicative([(1, 1)], [(2, 2)]) == 1
        assert epsilon_multiplicative([(2, 1)], [(4, 2)]) == 1

    def test_multiplicative_domain(self):
        with pytest.raises(ValueError, match="positive"):
            epsilon_multiplicative([(1, 1)], [(0, 2)])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            epsilon_additive([(1, 1)], [(1, 1, 1)])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_additive_self_zero_and_nonnegative_vs_dominating_front(self, seed):
        rng = np.random.default_rng(seed)
        s = rng.normal(size=(12, 3))
        assert epsilon_additive(s, s) == 0
        better = s + rng.uniform(0, 1, size=s.shape)
        assert epsilon_additive(s, better) >= 0


class TestCoverageRatio:
    def test_identity(self):
        cs = [(1, 2), (2, 1), (3, 0.5)]
        assert coverage_ratio(cs, cs, 1e-12) == (1.0, 1.0, 1.0)

    def test_half(self):
        cs = [(1, 2), (2, 1), (3, 0.5), (0.5, 3)]
        p, r, f = coverage_ratio(cs[:2], cs, 0.01)
        assert (p, r) == (1.0, 0.5) and f == pytest.approx(2 / 3)

    def test_membership_example(self):
        assert coverage_ratio([(1.05, 1.0)], [(1, 1)], 0.1).precision == 1.0
        assert coverage_ratio([(1.05, 1.0)], [(1, 1)], 0.02).precision == 0.0

    def test_recall_deduplicated(self):
        # Three near-copies of one entry count once towards recall.
        p, r, _ = coverage_ratio([(1, 1), (1.001, 1), (1, 1.001)], [(1, 1), (5, 0.1)], 0.01)
        assert p == 1.0 and r == 0.5

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            coverage_ratio([(1, 1)], [(0, 0)], 0.1)

    def test_no_match(self):
        assert coverage_ratio([(9, 9)], [(1, 1)], 0.1) == (0.0, 0.0, 0.0)


class TestUtilityMetrics:
    def test_eum_analytic(self):
        prior = UtilityPrior(sample_count=100_000, seed=0)
        assert expected_utility_metric([(1, 0), (0, 1)], prior) == pytest.approx(0.75, abs=0.005)

    def test_eum_constant(self):
        assert expected_utility_metric([(1, 1)], UtilityPrior(sample_count=500, seed=3)) == pytest.approx(1, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([2, 3]))
    def test_eum_equal_on_ccs(self, seed, d):
        rng = np.random.default_rng(seed)
        s = SolutionSet.from_values(rng.normal(size=(20, d)))
        prior = UtilityPrior(sample_count=500, seed=seed)
        assert expected_utility_metric(ccs_prune(s), prior) == expected_utility_metric(s, prior)
        assert expected_utility_metric(pareto_prune(s), prior) == expected_utility_metric(s, prior)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_eum_monotone_under_growth(self, seed):
        rng = np.random.default_rng(seed)
        vals = rng.normal(size=(15, 2))
        prior = UtilityPrior(sample_count=300, seed=seed)
        scores = [expected_utility_metric(vals[:k], prior) for k in range(1, 16)]
        assert all(a <= b for a, b in zip(scores, scores[1:]))

    def test_dominated_point_keeps_eum(self):
        prior = UtilityPrior(sample_count=1000, seed=1)
        base = [(1, 0), (0, 1)]
        assert expected_utility_metric(base + [(0.1, 0.1)], prior) == expected_utility_metric(base, prior)

    def test_mul_examples(self):
        prior = UtilityPrior(sample_count=100, seed=0)
        opt = [(1, 0), (0, 1)]
        assert maximum_utility_loss(opt, opt, prior) == 0
        assert maximum_utility_loss([(1, 0)], opt, prior) == 1

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_mul_bounds_eum_gap(self, seed):
        rng = np.random.default_rng(seed)
        opt = rng.normal(size=(10, 2))
        s = opt[: rng.integers(1, 10)]
        prior = UtilityPrior(sample_count=400, seed=seed)
        mul = maximum_utility_loss(s, opt, prior)
        assert mul >= 0
        assert mul >= expected_utility_metric(opt, prior) - expected_utility_metric(s, prior) - 1e-12

    def test_explicit_prior(self):
        product = UtilityFunction.parse("mul obj0 obj1")
        first = UtilityFunction.linear((1.0, 0.0))
        prior = UtilityPrior("explicit", sample_count=2000, seed=0, utilities=(product, first), probabilities=(0.5, 0.5))
        eum = expected_utility_metric([(2, 2), (5, 0)], prior)
        # product picks (2,2) -> 4, first objective picks (5,0) -> 5.
        assert eum == pytest.approx(4.5, abs=0.05)
        assert maximum_utility_loss([(2, 2)], [(2, 2), (5, 0)], prior) == 3

    def test_explicit_prior_probabilities_checked(self):
        with pytest.raises(ValueError):
            UtilityPrior("explicit", utilities=(UtilityFunction.linear((1.0, 0.0)),), probabilities=(0.5,))


def test_reference_point_is_componentwise_min():
    np.testing.assert_array_equal(reference_point([(1, 5), (3, 2)], [(0, 9)]), (0, 2))
