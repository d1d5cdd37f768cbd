from itertools import combinations

import numpy as np
import pytest

from progressftx import (GainTable, GmModel, average_gain, build_gain_table,
                         pairwise_gain, select_features, synth_model)


@pytest.fixture
def model_2d():
    return GmModel(centroids=np.array([[0.0, 0.0], [2.0, 1.0]]),
                   variances=np.array([1.0, 1.0]))


def test_pairwise_empty_subset(model_2d):
    assert pairwise_gain(model_2d, 1, 2, set()) == 0.0


def test_pairwise_identical_centroids():
    model = GmModel(centroids=np.array([[1.0, 3.0], [1.0, 3.0]]),
                    variances=np.array([1.0, 2.0]))
    assert pairwise_gain(model, 1, 2, {1, 2}) == 0.0


def test_pairwise_hand_sum(model_2d):
    # centroid difference (2, 1), unit variances: 4 + 1
    assert pairwise_gain(model_2d, 1, 2, {1, 2}) == pytest.approx(5.0)
    assert pairwise_gain(model_2d, 2, 1, {1, 2}) == pytest.approx(5.0)


def test_average_equals_pairwise_for_two_classes(model_2d):
    assert average_gain(model_2d, {1, 2}) == pairwise_gain(model_2d, 1, 2, {1, 2})


def test_average_gain_additive():
    model = synth_model(3, 10, np.linspace(0.2, 3.0, 10))
    s1, s2 = {1, 4, 7}, {2, 9}
    total = average_gain(model, s1 | s2)
    assert total == pytest.approx(average_gain(model, s1) + average_gain(model, s2),
                                  abs=1e-12)


def test_equilateral_three_class_average():
    # three centroids pairwise squared-distance 2 over the two dimensions
    centroids = np.array([[0.0, 0.0],
                          [np.sqrt(2.0), 0.0],
                          [np.sqrt(2.0) / 2.0, np.sqrt(6.0) / 2.0]])
    model = GmModel(centroids=centroids, variances=np.ones(2))
    for l, lp in combinations((1, 2, 3), 2):
        assert pairwise_gain(model, l, lp, {1, 2}) == pytest.approx(2.0, abs=1e-12)
    assert average_gain(model, {1, 2}) == pytest.approx(2.0, abs=1e-12)


def test_gain_table_order_ties_break_low():
    table = GainTable(per_dim=np.array([1.0, 1.0, 2.0, 1.0]),
                      order=np.array([3, 1, 2, 4]))
    assert table.order.tolist() == [3, 1, 2, 4]
    model = synth_model(2, 4, np.array([1.0, 1.0, 2.0, 1.0]))
    assert build_gain_table(model).order.tolist() == [3, 1, 2, 4]


def test_select_exhausted():
    model = synth_model(2, 4, np.arange(1.0, 5.0))
    table = build_gain_table(model)
    plan = select_features(table, {1, 2, 3, 4}, [2, 2])
    assert plan.subsets == ((), ())
    assert plan.flattened == ()


def test_select_hand_case():
    table = build_gain_table(synth_model(2, 4, np.array([5.0, 3.0, 9.0, 1.0])))
    plan = select_features(table, set(), [2, 2])
    assert set(plan.subsets[0]) == {3, 1}
    assert set(plan.subsets[1]) == {2, 4}
    assert plan.flattened == (3, 1, 2, 4)


def test_select_equal_gains_lowest_index_first():
    table = build_gain_table(synth_model(2, 6, np.full(6, 2.0)))
    plan = select_features(table, set(), [2, 2, 2])
    assert plan.subsets == ((1, 2), (3, 4), (5, 6))


def test_select_respects_received_and_rates():
    table = build_gain_table(synth_model(2, 6, np.array([6, 5, 4, 3, 2, 1.0])))
    plan = select_features(table, {1, 3}, [1, 0, 3])
    assert plan.subsets == ((2,), (), (4, 5, 6))


def test_prefix_optimality_small():
    rng = np.random.default_rng(9)
    for _ in range(30):
        n = int(rng.integers(2, 10))
        gains = rng.uniform(0, 4, n)
        table = build_gain_table(synth_model(2, n, gains))
        w = frozenset(int(v) for v in
                      rng.choice(n, size=rng.integers(0, n), replace=False) + 1)
        plan = select_features(table, w, [int(rng.integers(1, 4))] * 4)
        flat = plan.flattened
        admissible = [i for i in range(1, n + 1) if i not in w]
        for m in range(1, len(flat) + 1):
            got = gains[np.array(flat[:m]) - 1].sum()
            best = max((gains[np.array(c) - 1].sum()
                        for c in combinations(admissible, m)), default=0.0)
            assert got == pytest.approx(best, abs=1e-12)


def test_slot_gains_monotone_nonincreasing():
    rng = np.random.default_rng(10)
    for _ in range(50):
        n = int(rng.integers(3, 30))
        gains = rng.uniform(0, 3, n)
        table = build_gain_table(synth_model(2, n, gains))
        plan = select_features(table, set(), [3] * 10)
        slot_sums = [gains[np.array(s, dtype=int) - 1].sum() if s else 0.0
                     for s in plan.subsets]
        assert all(a >= b - 1e-12 for a, b in zip(slot_sums, slot_sums[1:]))


def test_gain_table_validation():
    with pytest.raises(ValueError):
        GainTable(per_dim=np.array([1.0, -0.1]), order=np.array([1, 2]))
    with pytest.raises(ValueError):
        GainTable(per_dim=np.array([1.0, 2.0]), order=np.array([1, 1]))
    with pytest.raises(ValueError):
        GainTable(per_dim=np.array([1.0, 2.0]), order=np.array([1, 2]))  # wrong sort
    with pytest.raises(ValueError):
        pairwise_gain(synth_model(2, 2, np.ones(2)), 1, 1, {1})
