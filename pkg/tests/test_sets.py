import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morl.sets import (
    CCS_PRUNED,
    PARETO_PRUNED,
    DimensionMismatch,
    SolutionSet,
    ccs_prune,
    linear_utility,
    lorenz_dominates,
    lorenz_vector,
    mixture_value,
    pareto_dominates,
    pareto_prune,
    read_solution_csv,
    simplex_grid,
)


def brute_force_front(values):
    """O(n^2) reference: first occurrence of each non-dominated value."""
    out = []
    for i, v in enumerate(values):
        if any(tuple(v) == tuple(values[j]) for j in range(i)):
            continue
        if any(all(w >= v) and any(w > v) for w in values):
            continue
        out.append(tuple(v))
    return out


def S(*vals):
    return SolutionSet.from_values(vals)


@pytest.mark.parametrize(
    "a, b, expected",
    [((2, 3), (1, 3), True), ((2, 3), (2, 3), False), ((1, 5), (5, 1), False), ((5, 1), (1, 5), False)],
)
def test_pareto_dominates(a, b, expected):
    assert pareto_dominates(a, b) is expected


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        pareto_dominates((1, 2), (1, 2, 3))
    with pytest.raises(DimensionMismatch):
        linear_utility((0.5, 0.5), (1, 2, 3))


def test_pareto_prune_examples():
    assert pareto_prune(S((1, 2), (2, 1), (0, 0))).value_tuples() == [(1, 2), (2, 1)]
    assert pareto_prune(S((1, 1))).value_tuples() == [(1, 1)]
    assert pareto_prune(SolutionSet()).entries == []
    assert pareto_prune(S((1, 1))).pruning_state == PARETO_PRUNED


def test_pareto_prune_duplicates_keep_lowest_id():
    s = SolutionSet([(7, (1, 1)), (3, (1, 1)), (5, (0, 2))])
    pruned = pareto_prune(s)
    assert pruned.policy_ids == [3, 5]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 60), st.sampled_from([2, 3, 5]))
def test_pareto_prune_matches_brute_force(seed, n, d):
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 6, size=(n, d)).astype(float)
    assert pareto_prune(SolutionSet.from_values(values)).value_tuples() == brute_force_front(values)


def test_ccs_prune_examples():
    assert ccs_prune(S((1, 0), (0, 1), (0.4, 0.4))).value_tuples() == [(1, 0), (0, 1)]
    assert sorted(ccs_prune(S((1, 0), (0, 1), (0.6, 0.6))).value_tuples()) == [(0, 1), (0.6, 0.6), (1, 0)]
    assert ccs_prune(S((1, 1))).value_tuples() == [(1, 1)]
    assert ccs_prune(S((1, 1))).pruning_state == CCS_PRUNED


def test_ccs_prune_drops_collinear_point():
    # (0.5, 0.5) is only ever tied with the endpoints, so a minimal set omits it.
    assert sorted(ccs_prune(S((1, 0), (0, 1), (0.5, 0.5))).value_tuples()) == [(0, 1), (1, 0)]


def test_ccs_prune_boundary_weight_ties_keep_only_nondominated():
    # (1, 0) and (1, -1) tie at w = (1, 0); only the non-dominated one survives.
    assert sorted(ccs_prune(S((1, 0), (1, -1), (0, 1))).value_tuples()) == [(0, 1), (1, 0)]


def _grid_max(values, weights):
    return (weights @ values.T).max(axis=1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 40), st.sampled_from([2, 3]))
def test_ccs_preserves_scalarised_max(seed, n, d):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n, d))
    pruned = ccs_prune(SolutionSet.from_values(values))
    weights = rng.dirichlet(np.ones(d), size=1000)
    assert np.max(np.abs(_grid_max(pruned.values(), weights) - _grid_max(values, weights))) <= 1e-9
    front = set(pareto_prune(SolutionSet.from_values(values)).value_tuples())
    assert set(pruned.value_tuples()) <= front


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30))
def test_ccs_2d_is_minimal(seed, n):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n, 2))
    pruned = ccs_prune(SolutionSet.from_values(values)).values()
    weights = simplex_grid(2, 20_000)
    full = _grid_max(pruned, weights)
    # Removing any kept vector must lose the maximum somewhere on a dense weight grid.
    for i in range(len(pruned)):
        rest = np.delete(pruned, i, axis=0)
        if len(rest):
            assert np.max(full - _grid_max(rest, weights)) > 0


def test_ccs_prune_3d_keeps_needed_vectors():
    vals = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (0.2, 0.2, 0.2), (0.5, 0.5, 0.5)]
    kept = set(ccs_prune(SolutionSet.from_values(vals)).value_tuples())
    assert kept == {(1, 0, 0), (0, 1, 0), (0, 0, 1), (0.5, 0.5, 0.5)}


@pytest.mark.parametrize(
    "w, v, expected", [((0.5, 0.5), (2, 4), 3), ((1, 0), (2, 4), 2), ((0.2, 0.8), (10, 0), 2)]
)
def test_linear_utility(w, v, expected):
    assert linear_utility(w, v) == pytest.approx(expected, abs=1e-15)


def test_lorenz_vector():
    np.testing.assert_array_equal(lorenz_vector((3, 1, 2)), (1, 3, 6))
    np.testing.assert_array_equal(lorenz_vector((5, 5)), (5, 10))
    np.testing.assert_array_equal(lorenz_vector((1, 2, 3)), (1, 3, 6))


def test_lorenz_dominates():
    assert lorenz_dominates((2, 2), (3, 1))
    assert not lorenz_dominates((2, 2), (2, 2))
    assert not lorenz_dominates((4, 0), (2, 2))
    assert lorenz_dominates((2, 2), (4, 0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=3, max_size=3), st.lists(st.integers(-5, 5), min_size=3, max_size=3),
       st.permutations(range(3)))
def test_lorenz_permutation_invariant(a, b, perm):
    assert lorenz_dominates(a, b) == lorenz_dominates([a[i] for i in perm], b)


@settings(max_examples=100)
@given(st.lists(st.lists(st.integers(0, 3), min_size=3, max_size=3), min_size=3, max_size=3))
def test_pareto_dominance_order_properties(triple):
    a, b, c = triple
    assert not pareto_dominates(a, a)
    assert not (pareto_dominates(a, b) and pareto_dominates(b, a))
    if pareto_dominates(a, b) and pareto_dominates(b, c):
        assert pareto_dominates(a, c)


def test_mixture_value():
    np.testing.assert_allclose(mixture_value([((1, 0), 0.5), ((0, 1), 0.5)]), (0.5, 0.5))
    np.testing.assert_allclose(mixture_value([((3, 4), 1.0)]), (3, 4))
    np.testing.assert_allclose(mixture_value([((2, 0), 0.25), ((0, 2), 0.75)]), (0.5, 1.5))
    with pytest.raises(ValueError):
        mixture_value([((1, 0), 0.5), ((0, 1), 0.6)])


@pytest.mark.parametrize("seed", range(20))
def test_adjacent_ccs_mixtures_not_dominated_by_raw_set(seed):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(25, 2))
    ccs = sorted(ccs_prune(SolutionSet.from_values(values)).value_tuples())
    for left, right in itertools.pairwise(ccs):
        for lam in np.linspace(0, 1, 11):
            mix = mixture_value([(left, lam), (right, 1 - lam)])
            assert not any(pareto_dominates(v, mix) for v in values)


def test_solution_csv_round_trip():
    s = SolutionSet([(0, (-1.5, -10.25)), (1, (0.0, -3.0))])
    text = s.to_csv(columns=["flooding", "water-demand"], extra={"config_hash": "abc"})
    assert text.splitlines()[0] == "policy_id,flooding,water-demand,config_hash"
    back, cols = read_solution_csv(text)
    assert cols == ["flooding", "water-demand"]
    assert back.value_tuples() == s.value_tuples()
    assert back.policy_ids == [0, 1]
