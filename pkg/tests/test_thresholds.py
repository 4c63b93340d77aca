import numpy as np
import pytest

from exceptions import ArgumentError
from thresholds import cdf_by_name, cdf_coin, cdf_point_mass, h_function, root_function, solve_constants


def test_solved_constants(consts):
    assert consts.q_star == pytest.approx(0.31847, abs=1e-5)
    assert consts.c_star == pytest.approx(0.43236, abs=1e-5)
    assert abs(root_function(consts.q_star)) < 1e-9
    assert h_function(consts.c_star, consts.q_star) == pytest.approx(0.0, abs=1e-9)
    assert consts.root_residual == abs(root_function(consts.q_star))
    assert consts.to_dict()["root_residual"] <= 1e-10


def test_h_is_nonnegative_at_c_star(consts):
    grid = np.linspace(0.0, 0.5, 10_002)[1:-1]
    values = h_function(consts.c_star, grid)
    assert values.min() >= -1e-10
    assert grid[values.argmin()] == pytest.approx(consts.q_star, abs=1e-3)


def test_constants_reject_bad_tolerance():
    with pytest.raises(ArgumentError):
        solve_constants(0)


def test_f1_shape(f1):
    assert f1(0) == pytest.approx(4 / 7)
    assert f1(3 / 7) == 1.0
    assert f1(0.9) == 1.0
    assert f1(-0.1) == 0.0


def test_f1_quantiles(f1):
    assert f1.quantile(0.5) == 0.0
    assert f1.quantile(4 / 7) == 0.0
    assert f1.quantile(0.6) == pytest.approx(1 / 7)
    assert f1.quantile(1.0) == pytest.approx(3 / 7)


def test_f2_is_continuous_at_qstar(f2, consts):
    q = consts.q_star
    assert f2(q - 1e-12) == pytest.approx(f2(q), abs=1e-9)
    assert f2(q) == pytest.approx(consts.f2_at_qstar, abs=1e-9)
    assert f2(0) == pytest.approx(1 - consts.c_star)
    assert f2(1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["f1", "f2", "coin", "greedy"])
def test_cdfs_are_nondecreasing(name, consts):
    F = cdf_by_name(name, consts)
    values = F.evaluate_many(np.linspace(0, 1, 2001))
    assert np.all(np.diff(values) >= -1e-12)
    assert values[-1] == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["f1", "f2", "coin"])
def test_quantile_many_matches_scalar(name, consts):
    F = cdf_by_name(name, consts)
    ps = np.linspace(0, 1, 101)
    np.testing.assert_allclose(F.quantile_many(ps), [F.quantile(p) for p in ps], atol=1e-9)


@pytest.mark.parametrize("name", ["f1", "f2"])
def test_quantile_inverts_cdf(name, consts):
    F = cdf_by_name(name, consts)
    for p in np.linspace(0.6, 0.99, 20):
        assert F(F.quantile(p)) == pytest.approx(p, abs=1e-8)


def test_sampling_is_seeded(f2):
    a = f2.sample_many(np.random.default_rng(11), 1000)
    b = f2.sample_many(np.random.default_rng(11), 1000)
    np.testing.assert_array_equal(a, b)
    assert ((a >= 0) & (a <= 1)).all()
    # atom at zero carries 1 - c* of the mass
    assert np.mean(a == 0) == pytest.approx(0.5676, abs=0.05)


def test_quantile_rejects_bad_probability(f1):
    with pytest.raises(ArgumentError):
        f1.quantile(1.5)
    with pytest.raises(ArgumentError):
        f1.quantile_many([0.2, -0.1])


def test_point_mass_and_coin():
    F = cdf_point_mass(0.5)
    assert F.quantile(0.3) == 0.5
    assert F(0.49) == 0.0
    coin = cdf_coin()
    assert coin.quantile(0.6) == 0.0
    assert coin.quantile(0.7) == 0.5


def test_cdf_by_name_fixed():
    F = cdf_by_name("fixed:1/4")
    assert F.quantile(0.9) == 0.25


@pytest.mark.parametrize("name", ["f3", "fixed:abc", "fixed:2"])
def test_cdf_by_name_rejects_unknown(name):
    with pytest.raises(ArgumentError):
        cdf_by_name(name)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["f1", "f2"])
def test_samples_follow_the_cdf(name, consts):
    F = cdf_by_name(name, consts)
    samples = np.sort(F.sample_many(np.random.default_rng(31), 1_000_000))
    grid = np.linspace(0.0, 1.0, 2001)
    empirical = np.searchsorted(samples, grid, side="right") / samples.size
    assert np.abs(empirical - F.evaluate_many(grid)).max() <= 0.005
