from fractions import Fraction

import numpy as np
import pytest

from evaluation import expected_packed_exact
from exceptions import ArgumentError
from multiknapsack import (
    TWO_BINS,
    MultiInstance,
    draw_thresholds,
    expected_combined,
    guarantee_check,
    opt_plus_per_knapsack,
    route_greedy,
    routed_sequence,
    simulate_combined,
    simulate_combined_two_bins,
)
from selftest import random_multi_instances

INSTANCE = MultiInstance((1.0, 1.0), ((0.6, 0.2), (0.3, 0.9), (0.0, 0.0), (0.5, 0.5)))


def test_routing_by_largest_size():
    routing = route_greedy(INSTANCE)
    assert routing.targets == (0, 1, None, 0)
    assert routing.routed_sets == ((0, 3), (1,))
    assert routing.unroutable == (2,)


def test_combined_greedy_thresholds():
    out = simulate_combined(INSTANCE, thresholds=(0, 0))
    assert out.assignment == (0, 1, None, None)
    assert out.packed == pytest.approx((0.6, 0.9))
    assert out.total == pytest.approx(1.5)


def test_combined_threshold_one_rejects_partial_items():
    out = simulate_combined(INSTANCE, thresholds=(1, 1))
    assert out.total == 0


def test_first_fit_tie_break():
    one = Fraction(1)
    instance = MultiInstance((one, one), ((one, one), (one, one)))
    assert simulate_combined(instance, thresholds=(0, 0)).assignment == (0, None)
    assert simulate_combined(instance, thresholds=(0, 0), tie_break="first_fit").assignment == (0, 1)


def test_combined_validates_arguments(f1):
    with pytest.raises(ArgumentError):
        simulate_combined(INSTANCE)
    with pytest.raises(ArgumentError):
        simulate_combined(INSTANCE, thresholds=(0.5,))
    with pytest.raises(ArgumentError):
        simulate_combined(INSTANCE, thresholds=(0, 2))
    with pytest.raises(ArgumentError):
        simulate_combined(INSTANCE, cdfs=f1, tie_break="random")


def test_threshold_draws_are_seeded(f1):
    a = draw_thresholds(INSTANCE, f1, seed=9)
    b = draw_thresholds(INSTANCE, f1, seed=9)
    assert a == b
    shared = draw_thresholds(INSTANCE, f1, seed=9, shared_draw=True)
    assert shared[0] == shared[1]


def test_expectation_splits_by_knapsack(f1):
    combined = expected_combined(INSTANCE, f1)
    for j, routed in enumerate(route_greedy(INSTANCE).routed_sets):
        seq = routed_sequence(INSTANCE, j, routed)
        assert combined.per_knapsack[j] == pytest.approx(expected_packed_exact(seq, f1).expected_packed)
    assert opt_plus_per_knapsack(INSTANCE) == pytest.approx((1.0, 0.9))


def test_guarantee_on_example(f1):
    report = guarantee_check(INSTANCE, f1)
    assert report.opt == pytest.approx(1.5)
    assert report.ratio >= 3 / 14


def test_per_knapsack_guarantee_on_random_instances(f1):
    rng = np.random.default_rng(2024)
    for instance in random_multi_instances(rng, 200):
        combined = expected_combined(instance, f1)
        for expected, plus in zip(combined.per_knapsack, combined.opt_plus_per_knapsack):
            assert expected >= 3 / 7 * plus - 1e-9


TINY_FIRST = MultiInstance((1.0, 1.0, 1.0), ((0.001, 0.001, 0.001),) + ((1.0, 1.0, 1.0),) * 3)


def test_routing_ignores_fill_levels(f1):
    # every item is largest in knapsack 0, so the other two stay empty
    instance = MultiInstance((1.0, 1.0, 1.0), ((1.0, 0.99, 0.99),) * 3)
    report = guarantee_check(instance, f1)
    assert report.expected_total == pytest.approx(1.0)
    assert report.opt == pytest.approx(2.98)
    assert report.ratio == pytest.approx(1 / 2.98)
    assert report.holds


def test_tiny_first_item_breaks_the_combined_bound(f1):
    assert route_greedy(TINY_FIRST).routed_sets == ((0, 1, 2, 3), (), ())
    report = guarantee_check(TINY_FIRST, f1)
    at_tiny = f1(0.001)
    assert report.expected_total == pytest.approx(at_tiny * 0.001 + (1 - at_tiny))
    assert report.opt == pytest.approx(3.0)
    assert report.bound == pytest.approx(3 / 14)
    assert report.ratio < 3 / 14
    assert not report.holds


def test_routed_sets_can_lose_half_of_the_optimum(f1):
    report = guarantee_check(TINY_FIRST, f1)
    assert sum(report.opt_plus_per_knapsack) == pytest.approx(1.0)
    assert sum(report.opt_plus_per_knapsack) < report.opt / 2
    assert not report.routing_half_holds
    # the single-knapsack step still holds inside every knapsack
    for expected, plus in zip(report.per_knapsack, report.opt_plus_per_knapsack):
        assert expected >= 3 / 7 * plus - 1e-9


def test_combined_bound_holds_when_routing_keeps_half(f1):
    rng = np.random.default_rng(11)
    for instance in random_multi_instances(rng, 150):
        report = guarantee_check(instance, f1)
        if report.routing_half_holds:
            assert report.ratio >= 3 / 14 - 1e-9


@pytest.mark.slow
def test_combined_bound_on_random_instances(f1):
    rng = np.random.default_rng(2025)
    reports = [guarantee_check(instance, f1) for instance in random_multi_instances(rng, 1000)]
    kept = [r for r in reports if r.routing_half_holds]
    assert len(kept) >= 900
    assert all(r.ratio >= 3 / 14 - 1e-9 for r in kept)


def test_two_bins_in_each_knapsack():
    heads_then_tails = simulate_combined_two_bins(INSTANCE, coins=(True, False))
    assert heads_then_tails.assignment == (0, None, None, None)
    assert heads_then_tails.packed == pytest.approx((0.6, 0.0))
    tails_then_heads = simulate_combined_two_bins(INSTANCE, coins=(False, True))
    assert tails_then_heads.assignment == (None, 1, None, 0)
    assert tails_then_heads.packed == pytest.approx((0.5, 0.9))
    assert tails_then_heads.to_dict()["coins"] == ["tails", "heads"]


def test_two_bins_coins_are_seeded():
    a = simulate_combined_two_bins(INSTANCE, seed=4)
    b = simulate_combined_two_bins(INSTANCE, seed=4)
    assert a.coins == b.coins
    assert a.assignment == b.assignment
    with pytest.raises(ArgumentError):
        simulate_combined_two_bins(INSTANCE, coins=(True,))


def test_two_bins_expectation_and_bound():
    combined = expected_combined(INSTANCE, TWO_BINS)
    assert combined.per_knapsack == pytest.approx((0.55, 0.45))
    report = guarantee_check(INSTANCE, TWO_BINS)
    assert report.policy == "twobins"
    assert report.bound == pytest.approx(0.25)
    assert report.ratio == pytest.approx(1.0 / 1.5)
    assert report.holds


def test_two_bins_keeps_half_of_each_routed_set():
    rng = np.random.default_rng(8)
    for instance in random_multi_instances(rng, 200):
        combined = expected_combined(instance, TWO_BINS)
        for expected, plus in zip(combined.per_knapsack, combined.opt_plus_per_knapsack):
            assert expected >= 0.5 * plus - 1e-9


def test_mixed_policies_per_knapsack(f1):
    combined = expected_combined(INSTANCE, [f1, TWO_BINS])
    assert combined.per_knapsack[1] == pytest.approx(0.45)
    assert combined.per_knapsack[0] == pytest.approx(expected_combined(INSTANCE, f1).per_knapsack[0])


def test_parse_instance_json():
    instance = MultiInstance.from_json('{"capacities": ["1", 1], "items": [["1/3", 0.5], [0, 0]]}')
    assert instance.capacities == (Fraction(1), 1)
    assert instance.items[0] == (Fraction(1, 3), 0.5)
    assert instance.n_knapsacks == 2


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        '{"capacities": [1]}',
        '{"capacities": [1, 1], "items": [[0.5]]}',
        '{"capacities": [0], "items": []}',
        '{"capacities": [1], "items": [[1.5]]}',
        '{"capacities": ["x"], "items": []}',
    ],
)
def test_malformed_instances(text):
    with pytest.raises(ArgumentError):
        MultiInstance.from_json(text)
