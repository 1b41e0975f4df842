import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flsched.errors import TooLarge
from flsched.selection import (SelectionInstance, brute_force_selection, itmcs,
                               marginal_score, selection_objective)


def test_marginal_score():
    assert marginal_score(0.01, 0.0204, 1.0) == pytest.approx(-0.0101948, rel=1e-5)
    assert marginal_score(0.0, 0.0, 1.0) == 0.0
    # a larger weight makes the score more negative
    assert marginal_score(0.01, 0.0204, 2.0) < marginal_score(0.01, 0.0204, 1.0)


def test_selection_objective():
    inst = SelectionInstance(np.array([-1.5, -0.3]), np.array([1.0, 2.0]), 1.0)
    assert selection_objective([], inst) == 0.0
    assert selection_objective([0], inst) == pytest.approx(-0.5)
    assert selection_objective([0, 1], inst) == pytest.approx(0.2)


def test_itmcs_examples():
    inst = SelectionInstance(np.array([-1.5, -0.3, 0.2]), np.array([1.0, 2.0, 0.5]), 1.0)
    got = itmcs(inst)
    assert list(got.selected) == [True, False, False]
    assert got.objective == pytest.approx(-0.5)

    nothing = itmcs(SelectionInstance(np.array([0.5, 0.0]), np.array([1.0, 1.0]), 1.0))
    assert not nothing.selected.any()
    assert nothing.objective == 0.0

    tie = itmcs(SelectionInstance(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 1.0))
    assert list(tie.selected) == [True, True]
    assert tie.objective == pytest.approx(-1.0)


def test_brute_force_single_client():
    got = brute_force_selection(SelectionInstance(np.array([-0.1]), np.array([5.0]), 1.0))
    assert not got.selected.any()  # W({0}) = 4.9 > 0, empty wins
    assert got.objective == 0.0


def test_brute_force_too_large():
    with pytest.raises(TooLarge):
        brute_force_selection(SelectionInstance(np.zeros(21) - 1, np.ones(21), 1.0))


def test_objective_never_positive():
    rng = np.random.default_rng(5)
    for _ in range(200):
        k = rng.integers(1, 10)
        inst = SelectionInstance(rng.normal(0, 1, k), rng.uniform(0, 3, k),
                                 10 ** rng.uniform(-2, 2))
        assert itmcs(inst).objective <= 0.0


def test_itmcs_matches_brute_force_seeded():
    rng = np.random.default_rng(42)
    for _ in range(300):
        k = int(rng.integers(1, 13))
        inst = SelectionInstance(rng.normal(-0.2, 1.0, k), rng.uniform(0, 5, k),
                                 10 ** rng.uniform(-2, 2))
        fast = itmcs(inst)
        slow = brute_force_selection(inst)
        assert abs(fast.objective - slow.objective) <= 1e-12
        assert np.array_equal(fast.selected, slow.selected)


def test_itmcs_matches_capped_brute_force():
    # plain prefix truncation is not exact under a cap; the ceiling scan is
    rng = np.random.default_rng(43)
    for _ in range(300):
        k = int(rng.integers(2, 12))
        cap = int(rng.integers(1, k + 1))
        inst = SelectionInstance(rng.normal(-0.5, 1.0, k), rng.uniform(0, 5, k),
                                 10 ** rng.uniform(-2, 2), max_selected=cap)
        fast = itmcs(inst)
        slow = brute_force_selection(inst)
        assert fast.selected.sum() <= cap
        assert abs(fast.objective - slow.objective) <= 1e-12
        assert np.array_equal(fast.selected, slow.selected)


def test_capped_counterexample_to_prefix_truncation():
    # under cap 1 the best set is the second client alone, which no prefix
    # of the latency order of length <= 1 contains
    inst = SelectionInstance(np.array([-0.1, -5.0]), np.array([1.0, 2.0]), 1.0,
                             max_selected=1)
    got = itmcs(inst)
    assert list(got.selected) == [False, True]
    assert got.objective == pytest.approx(-3.0)
    assert np.array_equal(got.selected, brute_force_selection(inst).selected)


def test_infinite_latency_excluded():
    # the first client is very attractive by score but cannot transmit
    inst = SelectionInstance(np.array([-5.0, -2.0]), np.array([np.inf, 1.0]), 1.0)
    got = itmcs(inst)
    assert list(got.selected) == [False, True]
    assert got.objective == pytest.approx(-1.0)


def test_deterministic_tie_breaks():
    inst = SelectionInstance(np.array([-0.5, -0.5, -0.5]), np.array([2.0, 2.0, 2.0]), 0.1)
    a = itmcs(inst)
    b = itmcs(inst)
    assert np.array_equal(a.selected, b.selected)
    assert a.objective == b.objective


@given(st.integers(min_value=1, max_value=9), st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=150)
def test_itmcs_never_beaten_by_random_subset(k, seed):
    rng = np.random.default_rng(seed)
    inst = SelectionInstance(rng.normal(-0.3, 1.0, k), rng.uniform(0, 4, k),
                             10 ** rng.uniform(-1, 1))
    best = itmcs(inst).objective
    for _ in range(20):
        subset = [i for i in range(k) if rng.random() < 0.5]
        assert best <= selection_objective(subset, inst) + 1e-12
