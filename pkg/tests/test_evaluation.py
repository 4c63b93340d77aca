from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core import ItemSequence
from evaluation import (
    bound_certificate,
    competitive_report,
    expected_packed_exact,
    expected_packed_mc,
    guarantee_lower_bound,
    performance_ratio,
    simple_coin_bound,
    two_bins_report,
)
from exceptions import ArgumentError, PreconditionError
from optimum import opt_integer, opt_plus
from thresholds import cdf_by_name, cdf_point_mass

sizes_strategy = st.lists(
    st.fractions(min_value=Fraction(1, 50), max_value=1, max_denominator=50), min_size=1, max_size=8
)


def test_f1_on_half_and_more(f1):
    seq = ItemSequence.parse("0.5,0.6")
    report = competitive_report(seq, f1)
    assert report.expected_packed == pytest.approx(0.5)
    assert report.ratio_vs_opt_plus == pytest.approx(0.5)
    assert float(report.opt) == pytest.approx(0.6)


def test_breakpoint_masses_sum_to_one(f1):
    seq = ItemSequence.from_fractions(["1/4", "1/2", "3/4"])
    report = expected_packed_exact(seq, f1)
    assert sum(row.mass for row in report.breakpoints) == pytest.approx(1.0)
    # Greedy packs 3/4 for tau <= 1/4, THR packs 1/2 above
    expected = 0.75 * f1(0.25) + 0.5 * (1 - f1(0.25))
    assert report.expected_packed == pytest.approx(expected)


def test_point_mass_matches_deterministic_run():
    seq = ItemSequence.from_fractions(["3/10", "3/5", "1/2"])
    report = expected_packed_exact(seq, cdf_point_mass(0.5))
    assert report.expected_packed == pytest.approx(0.6)


def test_expectation_in_integer_units(f2):
    seq = ItemSequence.from_units([7, 18, 80, 41, 1, 30, 12, 17], 104)
    report = expected_packed_exact(seq, f2)
    assert 0 < report.expected_packed <= 104


def test_empty_sequence_rejected(f1):
    with pytest.raises(ArgumentError):
        expected_packed_exact(ItemSequence(()), f1)


def test_monte_carlo_agrees_with_exact(f1):
    seq = ItemSequence.from_fractions(["1/4", "1/2", "3/4"])
    exact = expected_packed_exact(seq, f1).expected_packed
    mc = expected_packed_mc(seq, f1, 20_000, seed=7)
    assert mc.samples == 20_000
    assert mc.std_error > 0
    assert abs(mc.expected_packed - exact) <= 5 * mc.std_error


def test_monte_carlo_is_deterministic_across_workers(f2):
    seq = ItemSequence.from_fractions(["1/5", "2/5", "1/2", "3/5"])
    one = expected_packed_mc(seq, f2, 25_000, seed=3, workers=1)
    two = expected_packed_mc(seq, f2, 25_000, seed=3, workers=2)
    assert one.expected_packed == two.expected_packed
    assert one.std_error == two.std_error


def test_monte_carlo_rejects_zero_samples(f1):
    with pytest.raises(ArgumentError):
        expected_packed_mc(ItemSequence.parse("1/2"), f1, 0, seed=1)


def test_two_bins_report():
    report = two_bins_report(ItemSequence.from_fractions(["1/3", "2/3", "1/2"]))
    assert report.expected_packed == pytest.approx(0.75)
    assert report.ratio_vs_opt_plus == pytest.approx(0.75)


def test_performance_ratio_with_nothing_to_pack():
    assert performance_ratio(0, 0) == 1.0
    assert performance_ratio(1, 4) == 0.25


def test_certificate_large_blocked_item(f1):
    cert = bound_certificate(ItemSequence.parse("1/2,3/5"), f1)
    assert cert.m == pytest.approx(0.6)
    assert cert.q == pytest.approx(0.5)
    assert cert.n == 1
    assert cert.applicable_bound == pytest.approx(cert.bound_large_m)
    assert cert.holds


def test_certificate_small_blocked_item(f1):
    cert = bound_certificate(ItemSequence.parse("3/5,1/5,1/4"), f1)
    assert cert.m == pytest.approx(0.25)
    assert cert.applicable_bound == pytest.approx(cert.bound_small_m)
    assert cert.holds


def test_certificate_undefined_when_greedy_packs_everything(f1):
    with pytest.raises(PreconditionError):
        bound_certificate(ItemSequence.parse("1/4,1/4"), f1)


def test_guarantee_lower_bounds(consts):
    assert guarantee_lower_bound("f1") == pytest.approx(3 / 7)
    assert guarantee_lower_bound("f2", consts) == consts.c_star
    assert guarantee_lower_bound("twobins") == 0.5
    with pytest.raises(ArgumentError):
        guarantee_lower_bound("f2")


@settings(max_examples=80, deadline=None)
@given(sizes_strategy)
def test_three_sevenths_against_truncated_optimum(f1, sizes):
    seq = ItemSequence.from_fractions(sizes)
    expected = expected_packed_exact(seq, f1).expected_packed
    assert expected >= 3 / 7 * float(opt_plus(seq).value) - 1e-9


@settings(max_examples=80, deadline=None)
@given(sizes_strategy)
def test_c_star_against_integer_optimum(f2, consts, sizes):
    seq = ItemSequence.from_fractions(sizes)
    expected = expected_packed_exact(seq, f2).expected_packed
    assert expected >= consts.c_star * float(opt_integer(seq).value) - 1e-9


@settings(max_examples=80, deadline=None)
@given(sizes_strategy)
def test_certificate_holds_whenever_defined(f1, sizes):
    seq = ItemSequence.from_fractions(sizes)
    try:
        cert = bound_certificate(seq, f1)
    except PreconditionError:
        return
    assert cert.holds


@settings(max_examples=80, deadline=None)
@given(sizes_strategy)
def test_two_bins_half_and_coin_third(sizes):
    seq = ItemSequence.from_fractions(sizes)
    assert two_bins_report(seq).ratio_vs_opt_plus >= 0.5 - 1e-12
    _, _, holds = simple_coin_bound(seq)
    assert holds


@pytest.mark.slow
def test_monte_carlo_within_four_standard_errors_on_random_pairs(consts):
    rng = np.random.default_rng(101)
    cdfs = [cdf_by_name(name, consts) for name in ("f1", "f2", "coin")]
    misses = []
    for i in range(100):
        length = int(rng.integers(1, 11))
        seq = ItemSequence(tuple(float(s) for s in 1.0 - rng.random(length)))
        F = cdfs[i % len(cdfs)]
        exact = expected_packed_exact(seq, F).expected_packed
        mc = expected_packed_mc(seq, F, 20_000, seed=i)
        if abs(mc.expected_packed - exact) > 4 * mc.std_error + 1e-12:
            misses.append((i, F.name, exact, mc.expected_packed, mc.std_error))
    assert misses == []
