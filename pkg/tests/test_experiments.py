import os
from fractions import Fraction

import pandas as pd
import pytest

from conftest import PURSE_SIZES
from exceptions import ArgumentError, DatasetError
from experiments import (
    ExperimentConfig,
    OrderDataset,
    emit_results,
    ingest_csv,
    load_dataset,
    percentile_thresholds,
    run_experiment,
    scaled_capacity,
    synth_generate,
    write_dataset,
)
from tables import getAggregateColumns, getPerSkuColumns, getPolicyNames

ORDER_HEADER = "sku_id,warehouse_id,arrival_index,order_size"
INVENTORY_HEADER = "sku_id,warehouse_id,initial_inventory"


def purse_files(write_csv):
    orders = [ORDER_HEADER] + [f"A,W1,{i + 1},{s}" for i, s in enumerate(PURSE_SIZES)]
    write_csv("inventory.csv", [INVENTORY_HEADER, "A,W1,208"])
    return write_csv("orders.csv", orders)


def test_ingest_defaults_to_sibling_inventory(write_csv):
    dataset = ingest_csv(purse_files(write_csv))
    assert dataset.skus == ["A"]
    assert dataset.n_records == len(PURSE_SIZES)
    (stream,) = dataset.streams("A")
    assert stream.sizes == PURSE_SIZES
    assert stream.inventory == 208


def test_ids_stay_strings(write_csv):
    orders = write_csv("orders.csv", [ORDER_HEADER, "007,01,1,5"])
    inventory = write_csv("inv.csv", [INVENTORY_HEADER, "007,01,10"])
    dataset = ingest_csv(orders, inventory)
    assert dataset.skus == ["007"]
    assert dataset.streams("007")[0].warehouse_id == "01"


def test_orders_sorted_by_arrival(write_csv):
    orders = write_csv("orders.csv", [ORDER_HEADER, "A,W1,2,5", "A,W1,1,3"])
    inventory = write_csv("inventory.csv", [INVENTORY_HEADER, "A,W1,10"])
    assert ingest_csv(orders, inventory).streams("A")[0].sizes == (3, 5)


def test_empty_files_give_empty_dataset(write_csv):
    orders = write_csv("orders.csv", [])
    inventory = write_csv("inventory.csv", [])
    dataset = ingest_csv(orders, inventory)
    assert dataset.n_skus == 0
    assert dataset.n_records == 0


@pytest.mark.parametrize(
    "rows, line",
    [
        (["sku,warehouse_id,arrival_index,order_size", "A,W1,1,5"], 1),
        ([ORDER_HEADER, "A,W1,1,5", "A,W1,2,0"], 3),
        ([ORDER_HEADER, "A,W1,1,5", "A,W1,2,5", "A,W1,3,abc"], 4),
        ([ORDER_HEADER, "A,W1,1,5", "A,W1,2,2.5"], 3),
        ([ORDER_HEADER, "A,W1,1,5", ",W1,2,5"], 3),
        ([ORDER_HEADER, "A,W1,2,5", "A,W1,1,4", "A,W1,2,6"], 4),
        ([ORDER_HEADER, "A,W1,1,5", "A,W9,1,5"], 3),
    ],
)
def test_order_errors_carry_line_numbers(write_csv, rows, line):
    orders = write_csv("orders.csv", rows)
    inventory = write_csv("inventory.csv", [INVENTORY_HEADER, "A,W1,10"])
    with pytest.raises(DatasetError) as info:
        ingest_csv(orders, inventory)
    assert info.value.line == line


def test_duplicate_inventory_row(write_csv):
    orders = write_csv("orders.csv", [ORDER_HEADER, "A,W1,1,5"])
    inventory = write_csv("inventory.csv", [INVENTORY_HEADER, "A,W1,10", "A,W1,12"])
    with pytest.raises(DatasetError) as info:
        ingest_csv(orders, inventory)
    assert info.value.line == 3


def test_missing_file():
    with pytest.raises(DatasetError):
        ingest_csv("/nonexistent/orders.csv")


def test_gaps_and_overfull_streams_warn(write_csv):
    orders = write_csv("orders.csv", [ORDER_HEADER, "A,W1,1,8", "A,W1,3,8"])
    inventory = write_csv("inventory.csv", [INVENTORY_HEADER, "A,W1,10"])
    dataset = ingest_csv(orders, inventory)
    assert len(dataset.warnings) == 2


def test_percentile_thresholds(f1):
    taus = percentile_thresholds(f1, 6)
    assert taus[:3] == [0.0, 0.0, 0.0]
    assert taus[3] == pytest.approx(1 / 7)
    assert taus[5] == pytest.approx(3 / 7)
    assert percentile_thresholds(f1, 1) == [0.0]
    with pytest.raises(ArgumentError):
        percentile_thresholds(f1, 0)


def test_scaled_capacity_floors():
    assert scaled_capacity(208, 0.5) == 104
    assert scaled_capacity(10, 0.3) == 3
    assert scaled_capacity(3, 0.1) == 0


def test_purse_fcfs_at_half_inventory(write_csv):
    dataset = ingest_csv(purse_files(write_csv))
    config = ExperimentConfig(alpha_grid=(0.5, 1.0), policies=("fcfs", "fixed_50"))
    result = run_experiment(dataset, config)
    table = result.per_sku.set_index(["alpha", "policy"])["ratio"]
    assert table[(0.5, "fcfs")] == pytest.approx(97 / 104)
    assert table[(1.0, "fcfs")] == pytest.approx(1.0)


def test_single_warehouse_random_threshold_is_fcfs(write_csv):
    dataset = ingest_csv(purse_files(write_csv))
    config = ExperimentConfig(alpha_grid=(0.5,), policies=("fcfs", "random_threshold"), n_permutations=5)
    result = run_experiment(dataset, config)
    ratios = dict(zip(result.per_sku["policy"], result.per_sku["ratio"]))
    assert ratios["random_threshold"] == pytest.approx(ratios["fcfs"])
    assert all(p.degenerate for p in result.performances if p.policy == "random_threshold")


def test_zero_capacity_counts_as_one(write_csv):
    orders = write_csv("orders.csv", [ORDER_HEADER, "A,W1,1,2"])
    inventory = write_csv("inventory.csv", [INVENTORY_HEADER, "A,W1,2"])
    result = run_experiment(ingest_csv(orders, inventory), ExperimentConfig(alpha_grid=(0.1,), policies=("fcfs",)))
    assert result.per_sku["ratio"].tolist() == [1.0]
    assert any("floors to 0" in w for w in result.warnings)


def test_synthetic_streams_are_censored():
    dataset = synth_generate(8, 4, seed=3)
    assert dataset.n_skus == 8
    for sku in dataset.skus:
        for stream in dataset.streams(sku):
            assert sum(stream.sizes) <= stream.inventory
    result = run_experiment(dataset, ExperimentConfig(alpha_grid=(1.0,), policies=("fcfs",)))
    assert result.per_sku["ratio"].tolist() == pytest.approx([1.0] * 8)


def test_synthetic_is_reproducible():
    a = synth_generate(5, 3, seed=11)
    b = synth_generate(5, 3, seed=11)
    pd.testing.assert_frame_equal(a.orders, b.orders)
    pd.testing.assert_frame_equal(a.inventory, b.inventory)


def test_synthetic_round_trip_through_csv(tmp_path):
    dataset = synth_generate(4, 3, seed=5)
    orders, inventory = str(tmp_path / "orders.csv"), str(tmp_path / "inventory.csv")
    write_dataset(dataset, orders, inventory)
    loaded = load_dataset(orders, inventory)
    assert loaded.skus == dataset.skus
    assert loaded.n_records == dataset.n_records


def test_load_dataset_needs_a_source():
    with pytest.raises(ArgumentError):
        load_dataset()


def test_results_are_deterministic(tmp_path):
    dataset = synth_generate(6, 4, seed=8)
    config = ExperimentConfig(alpha_grid=(0.3, 0.7), n_permutations=20, seed=4)
    first = emit_results(run_experiment(dataset, config), str(tmp_path / "a"))
    threaded = ExperimentConfig(alpha_grid=(0.3, 0.7), n_permutations=20, seed=4, threads=3)
    second = emit_results(run_experiment(dataset, threaded), str(tmp_path / "b"))
    for kind in first:
        with open(first[kind], "rb") as fa, open(second[kind], "rb") as fb:
            assert fa.read() == fb.read()


def test_result_tables(tmp_path):
    dataset = synth_generate(3, 3, seed=2)
    result = run_experiment(dataset, ExperimentConfig(alpha_grid=(0.5, 1.0), n_permutations=10))
    assert list(result.per_sku.columns) == getPerSkuColumns()
    assert list(result.aggregate_mean.columns) == getAggregateColumns()
    policies = getPolicyNames()
    assert result.aggregate_mean["policy"].tolist()[: len(policies)] == policies
    assert (result.aggregate_min["ratio"] <= result.aggregate_mean["ratio"] + 1e-12).all()
    assert result.per_sku["ratio"].between(0, 1 + 1e-9).all()
    written = emit_results(result, str(tmp_path))
    assert sorted(os.path.basename(p) for p in written.values()) == [
        "aggregate_mean.csv",
        "aggregate_min.csv",
        "per_sku.csv",
    ]


def test_empty_results_are_not_written(tmp_path):
    empty = OrderDataset(pd.DataFrame(), pd.DataFrame({"sku_id": []}))
    with pytest.raises(ArgumentError):
        run_experiment(empty, ExperimentConfig())
    with pytest.raises(ArgumentError):
        emit_results(None, str(tmp_path))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"alpha_grid": (0.0, 0.5)},
        {"alpha_grid": (1.5,)},
        {"policies": ("best_fit",)},
        {"n_permutations": 0},
        {"capacity_rounding": "ceil"},
        {"threads": 0},
        {"fixed_threshold_percents": (0, 50)},
    ],
)
def test_invalid_experiment_config(kwargs):
    with pytest.raises(ArgumentError):
        ExperimentConfig(**kwargs)


def test_config_orders_policies_and_alphas():
    config = ExperimentConfig(alpha_grid=(1.0, 0.5, 0.5), policies=("twobins", "fcfs"))
    assert config.alpha_grid == (0.5, 1.0)
    assert config.policies == ("fcfs", "twobins")
    assert Fraction(str(config.alpha_grid[0])) == Fraction(1, 2)
