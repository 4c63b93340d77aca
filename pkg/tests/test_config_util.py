import pytest

from config_util import (
    get_experiment_config,
    get_mc_samples,
    get_seed,
    get_selftest_config,
    get_synthetic_config,
    get_synthetic_scale,
    get_threads,
    parse_list,
    read_props,
)
from exceptions import ArgumentError


def test_default_properties():
    config = read_props()
    assert get_seed(config) == 20240101
    assert get_threads(config) == 1
    assert get_mc_samples(config) == 100000
    assert get_synthetic_scale(config) == (974, 21)
    assert get_synthetic_config(config).inventory_max == 400


def test_experiment_config_from_properties():
    config = get_experiment_config(read_props())
    assert config.alpha_grid == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    assert config.n_permutations == 200
    assert config.cdf_name == "f1"
    assert config.policies[0] == "fcfs"


def test_overrides_win_unless_none():
    config = get_experiment_config(read_props(), n_permutations=7, seed=None, alpha_grid=(0.5,))
    assert config.n_permutations == 7
    assert config.seed == 20240101
    assert config.alpha_grid == (0.5,)


def test_partial_properties_fall_back(tmp_path):
    path = tmp_path / "lab.ini"
    path.write_text("[defaults]\nseed = 5\n")
    config = read_props(str(path))
    assert get_seed(config) == 5
    assert get_threads(config) == 1
    assert get_experiment_config(config).n_permutations == 200


def test_bad_values(tmp_path):
    path = tmp_path / "lab.ini"
    path.write_text("[defaults]\nseed = abc\n")
    with pytest.raises(ArgumentError):
        get_seed(read_props(str(path)))


def test_unreadable_file(tmp_path):
    with pytest.raises(ArgumentError):
        read_props(str(tmp_path / "missing.ini"))


def test_parse_list():
    assert parse_list("0.5, 1.0,") == [0.5, 1.0]
    assert parse_list("3,5", int) == [3, 5]
    with pytest.raises(ArgumentError):
        parse_list("1,x")


def test_selftest_scale():
    config = get_selftest_config(read_props(), scale=0.01)
    assert config.single_sequences == 100
    assert config.structured_sequences == 10
    assert config.multi_instances == 10
    assert config.max_length == 30
    assert config.synthetic_skus == 9
    assert config.synthetic_warehouses == 21
    tiny = get_selftest_config(read_props(), scale=0.0)
    assert tiny.single_sequences == 1
