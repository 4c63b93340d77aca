"""
Inventory experiments: FCFS-censored order streams per (sku, warehouse),
inventory rescaling sweeps, and the policy comparison against the integer
optimum of each scaled stream.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pandas as pd

from core import ItemSequence, simulate_fixed_threshold, simulate_greedy, simulate_two_bins
from evaluation import expected_packed_exact
from exceptions import ArgumentError, DatasetError
from optimum import opt_integer
from orders_transform import transform_inventory, transform_orders
from tables import (
    getAggregateColumns,
    getFixedThresholdPercents,
    getInventoryColumns,
    getOrderColumns,
    getPerSkuColumns,
    getPolicyNames,
    getResultFiles,
)
from thresholds import cdf_by_name

logger = logging.getLogger(__name__)

CAPACITY_ROUNDINGS = ("floor",)
FLOAT_FORMAT = "%.10f"


@dataclass(frozen=True)
class Stream:
    sku_id: str
    warehouse_id: str
    sizes: tuple
    inventory: int


@dataclass
class OrderDataset:
    orders: pd.DataFrame
    inventory: pd.DataFrame
    warnings: list = field(default_factory=list)

    @property
    def skus(self):
        return sorted(self.inventory["sku_id"].unique().tolist())

    @property
    def n_skus(self):
        return len(self.skus)

    @property
    def n_records(self):
        return len(self.orders)

    def streams(self, sku_id):
        """Per-warehouse order streams of one SKU, ordered by warehouse id."""
        inv = self.inventory[self.inventory["sku_id"] == sku_id]
        orders = self.orders[self.orders["sku_id"] == sku_id]
        grouped = {wh: tuple(int(s) for s in g["order_size"]) for wh, g in orders.groupby("warehouse_id", sort=True)}
        return [
            Stream(sku_id, str(row.warehouse_id), grouped.get(row.warehouse_id, ()), int(row.initial_inventory))
            for row in inv.itertuples(index=False)
        ]


@dataclass(frozen=True)
class SyntheticConfig:
    inventory_min: int = 20
    inventory_max: int = 400
    order_log_mean: float = 1.5
    order_log_sigma: float = 1.0
    demand_factor: float = 1.5
    min_warehouses: int = 1

    def __post_init__(self):
        if not 1 <= self.inventory_min <= self.inventory_max:
            raise ArgumentError(
                f"inventory range must satisfy 1 <= min <= max, got [{self.inventory_min}, {self.inventory_max}]"
            )
        if self.order_log_sigma < 0 or self.demand_factor <= 0 or self.min_warehouses < 1:
            raise ArgumentError("synthetic order parameters out of range")


@dataclass(frozen=True)
class ExperimentConfig:
    alpha_grid: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    policies: tuple = ()
    n_permutations: int = 200
    seed: int = 0
    capacity_rounding: str = "floor"
    fixed_threshold_percents: tuple = ()
    cdf_name: str = "f1"
    threads: int = 1

    def __post_init__(self):
        grid = tuple(sorted(set(float(a) for a in self.alpha_grid)))
        if not grid or not all(0 < a <= 1 for a in grid):
            raise ArgumentError(f"alpha values must lie in (0, 1], got {self.alpha_grid!r}")
        object.__setattr__(self, "alpha_grid", grid)
        percents = tuple(self.fixed_threshold_percents) or tuple(getFixedThresholdPercents())
        if not all(0 < p < 100 for p in percents):
            raise ArgumentError(f"fixed threshold percents must lie in (0, 100), got {percents!r}")
        object.__setattr__(self, "fixed_threshold_percents", percents)
        known = getPolicyNames(percents)
        policies = tuple(self.policies) or tuple(known)
        unknown = [p for p in policies if p not in known]
        if unknown:
            raise ArgumentError(f"unknown policies {unknown}; choose from {known}")
        object.__setattr__(self, "policies", tuple(p for p in known if p in policies))
        if self.n_permutations < 1:
            raise ArgumentError(f"n_permutations must be >= 1, got {self.n_permutations!r}")
        if self.capacity_rounding not in CAPACITY_ROUNDINGS:
            raise ArgumentError(f"capacity_rounding must be one of {CAPACITY_ROUNDINGS}")
        if self.threads < 1:
            raise ArgumentError(f"threads must be >= 1, got {self.threads!r}")


@dataclass(frozen=True)
class SkuPerformance:
    sku: str
    alpha: float
    policy: str
    ratio: float
    std_error: float = None
    degenerate: bool = False


@dataclass
class ExperimentResult:
    performances: list
    per_sku: pd.DataFrame
    aggregate_mean: pd.DataFrame
    aggregate_min: pd.DataFrame
    warnings: list = field(default_factory=list)


def _read_raw(path, columns):
    if not os.path.exists(path):
        raise DatasetError(f"{path}: no such file")
    if os.path.getsize(path) == 0:
        return pd.DataFrame({col: pd.Series(dtype="object") for col in columns})
    return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)


def _duplicate_line(df, keys, source):
    # index labels are file positions; header is line 1
    df = df.sort_index()
    dup = df.duplicated(subset=keys, keep="first")
    if dup.any():
        label = dup[dup].index[0]
        key = ", ".join(str(df.at[label, k]) for k in keys)
        raise DatasetError(f"{source}: duplicate row for ({key})", line=int(label) + 2)


def ingest_csv(orders_path, inventory_path=None):
    """
    Read an order file and its companion inventory file.

    Args:
        orders_path (str): CSV with sku_id,warehouse_id,arrival_index,order_size.
        inventory_path (str): CSV with sku_id,warehouse_id,initial_inventory;
            defaults to inventory.csv next to the order file.

    Returns:
        OrderDataset: Typed, sorted records plus non-fatal warnings.
    """
    if inventory_path is None:
        inventory_path = os.path.join(os.path.dirname(orders_path), "inventory.csv")
    orders = transform_orders(_read_raw(orders_path, getOrderColumns()), getOrderColumns())
    inventory = transform_inventory(_read_raw(inventory_path, getInventoryColumns()), getInventoryColumns())
    return _validate(orders, inventory)


def _validate(orders, inventory):
    _duplicate_line(orders, ["sku_id", "warehouse_id", "arrival_index"], "orders")
    _duplicate_line(inventory, ["sku_id", "warehouse_id"], "inventory")

    stocked = set(zip(inventory["sku_id"], inventory["warehouse_id"]))
    for label, sku, wh in zip(orders.index, orders["sku_id"], orders["warehouse_id"]):
        if (sku, wh) not in stocked:
            raise DatasetError(f"orders: no inventory row for sku {sku} at warehouse {wh}", line=int(label) + 2)

    warnings = []
    capacity = {k: int(v) for k, v in zip(zip(inventory["sku_id"], inventory["warehouse_id"]), inventory["initial_inventory"])}
    for (sku, wh), group in orders.groupby(["sku_id", "warehouse_id"], sort=True):
        indices = group["arrival_index"].tolist()
        if indices != list(range(1, len(indices) + 1)):
            warnings.append(f"sku {sku} at {wh}: arrival indices are not contiguous from 1")
        total = int(group["order_size"].sum())
        if total > capacity[(sku, wh)]:
            warnings.append(
                f"sku {sku} at {wh}: orders total {total} exceed inventory {capacity[(sku, wh)]} (not FCFS-censored)"
            )
    for message in warnings:
        logger.warning(message)
    return OrderDataset(orders.reset_index(drop=True), inventory.reset_index(drop=True), warnings)


def synth_generate(n_skus, n_warehouses, seed, config=None):
    """
    Generate FCFS-censored order streams.

    Each SKU is stocked in a random subset of warehouses. Each stream draws
    an integer inventory and lognormal order sizes until demand exceeds
    demand_factor times the inventory, runs FCFS, and keeps only the
    accepted orders.

    Args:
        n_skus (int): Number of SKUs.
        n_warehouses (int): Number of warehouses.
        seed (int): Root seed; SKU i uses default_rng([seed, i]).
        config (SyntheticConfig): Generator parameters.

    Returns:
        OrderDataset: A dataset on which FCFS at full inventory is optimal.
    """
    if n_skus < 1 or n_warehouses < 1:
        raise ArgumentError(f"counts must be positive, got n_skus={n_skus}, n_warehouses={n_warehouses}")
    config = config or SyntheticConfig()
    order_rows = []
    inventory_rows = []
    for sku in range(n_skus):
        rng = np.random.default_rng([seed, sku])
        sku_id = f"SKU{sku:04d}"
        low = min(config.min_warehouses, n_warehouses)
        k = int(rng.integers(low, n_warehouses + 1))
        warehouses = sorted(int(w) for w in rng.choice(n_warehouses, size=k, replace=False))
        for wh in warehouses:
            warehouse_id = f"W{wh:02d}"
            inventory = int(rng.integers(config.inventory_min, config.inventory_max + 1))
            inventory_rows.append((sku_id, warehouse_id, inventory))
            demand, remaining, arrival = 0, inventory, 0
            while demand <= config.demand_factor * inventory:
                size = int(round(rng.lognormal(config.order_log_mean, config.order_log_sigma)))
                size = min(max(size, 1), inventory)
                demand += size
                if size <= remaining:
                    remaining -= size
                    arrival += 1
                    order_rows.append((sku_id, warehouse_id, arrival, size))
    orders = pd.DataFrame(order_rows, columns=getOrderColumns())
    inventory = pd.DataFrame(inventory_rows, columns=getInventoryColumns())
    for frame in (orders, inventory):
        for col in ("sku_id", "warehouse_id"):
            frame[col] = frame[col].astype("string")
    logger.info("generated %d orders for %d SKUs over %d warehouses", len(orders), n_skus, n_warehouses)
    return OrderDataset(orders, inventory, [])


def write_dataset(dataset, orders_path, inventory_path):
    dataset.orders.to_csv(orders_path, index=False, lineterminator="\n")
    dataset.inventory.to_csv(inventory_path, index=False, lineterminator="\n")


def load_dataset(orders_path=None, inventory_path=None, synthetic=False, n_skus=None, n_warehouses=None,
                 seed=0, synthetic_config=None):
    """Either ingest CSV files or generate a synthetic dataset."""
    if synthetic:
        return synth_generate(n_skus, n_warehouses, seed, synthetic_config)
    if orders_path is None:
        raise ArgumentError("an order file is required unless --synthetic is given")
    return ingest_csv(orders_path, inventory_path)


def percentile_thresholds(F, k):
    """
    k evenly spaced quantiles of F, from F^-1(0) to F^-1(1).

    Args:
        F (ThresholdCdf): Threshold distribution.
        k (int): Number of thresholds (the SKU's warehouse count).

    Returns:
        list: Thresholds as fractions of capacity; k = 1 gives [0].
    """
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k!r}")
    if k == 1:
        return [F.quantile(0)]
    return [F.quantile(i / (k - 1)) for i in range(k)]


def scaled_capacity(inventory, alpha):
    return math.floor(Fraction(str(alpha)) * inventory)


@dataclass(frozen=True)
class _ScaledStream:
    sequence: ItemSequence
    opt: int


def _scale(stream, alpha):
    cap = scaled_capacity(stream.inventory, alpha)
    if cap == 0 or not stream.sizes:
        return None
    seq = ItemSequence.from_units(stream.sizes, cap)
    return _ScaledStream(seq, opt_integer(seq).value)


def _ratio(packed, scaled):
    if scaled is None or scaled.opt == 0:
        return 1.0
    return float(packed) / scaled.opt


def _evaluate_sku(dataset, sku_index, sku, config, F):
    streams = dataset.streams(sku)
    k = len(streams)
    thresholds = percentile_thresholds(F, k)
    out = []
    warnings = []
    if k == 1:
        logger.info("sku %s is stocked in one warehouse; random threshold degenerates to FCFS", sku)
    for alpha_index, alpha in enumerate(config.alpha_grid):
        scaled = [_scale(stream, alpha) for stream in streams]
        for stream, s in zip(streams, scaled):
            if s is None and stream.sizes:
                warnings.append(f"sku {sku} at {stream.warehouse_id}: capacity floors to 0 at alpha {alpha:g}")
        for policy in config.policies:
            if policy == "random_threshold":
                rng = np.random.default_rng([config.seed, sku_index, alpha_index])
                ratio, std_error = _random_threshold(scaled, thresholds, config.n_permutations, rng)
                out.append(SkuPerformance(sku, alpha, policy, ratio, std_error, degenerate=(k == 1)))
                continue
            ratios = [_policy_ratio(policy, s, F) for s in scaled]
            out.append(SkuPerformance(sku, alpha, policy, float(np.mean(ratios)), degenerate=False))
    return out, warnings


def _policy_ratio(policy, scaled, F):
    if scaled is None:
        return 1.0
    seq = scaled.sequence
    if policy == "fcfs":
        return _ratio(simulate_greedy(seq).packed_total, scaled)
    if policy == "twobins":
        return _ratio(simulate_two_bins(seq).expected_packed, scaled)
    if policy == "random_threshold_exact":
        return _ratio(expected_packed_exact(seq, F).expected_packed, scaled)
    if policy.startswith("fixed_"):
        tau = Fraction(int(policy.split("_", 1)[1]), 100)
        return _ratio(simulate_fixed_threshold(seq, tau).packed_total, scaled)
    raise ArgumentError(f"unknown policy {policy!r}")


def _random_threshold(scaled, thresholds, n_permutations, rng):
    """Average over random assignments of the percentile thresholds to warehouses."""
    k = len(scaled)
    matrix = np.ones((k, k))
    for w, s in enumerate(scaled):
        if s is None:
            continue
        for i, tau in enumerate(thresholds):
            matrix[w, i] = _ratio(simulate_fixed_threshold(s.sequence, tau).packed_total, s)
    perms = np.array([rng.permutation(k) for _ in range(n_permutations)])
    values = matrix[np.arange(k), perms].mean(axis=1)
    std_error = float(values.std(ddof=1) / math.sqrt(n_permutations)) if n_permutations > 1 else 0.0
    return float(values.mean()), std_error


def run_experiment(dataset, config):
    """
    Evaluate every policy on every SKU at every inventory scale.

    Args:
        dataset (OrderDataset): A nonempty dataset.
        config (ExperimentConfig): Sweep settings.

    Returns:
        ExperimentResult: Per-SKU ratios and the mean / min aggregates.
    """
    skus = dataset.skus
    if not skus:
        raise ArgumentError("the dataset has no SKUs")
    F = cdf_by_name(config.cdf_name)

    def job(item):
        index, sku = item
        return _evaluate_sku(dataset, index, sku, config, F)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(job, enumerate(skus)))
    else:
        parts = [job(item) for item in enumerate(skus)]

    performances = [p for rows, _ in parts for p in rows]
    warnings = list(dataset.warnings) + [w for _, ws in parts for w in ws]
    for message in warnings[len(dataset.warnings):]:
        logger.warning(message)

    per_sku = pd.DataFrame(
        [(p.sku, p.alpha, p.policy, p.ratio) for p in performances], columns=getPerSkuColumns()
    )
    mean, worst = _aggregate(per_sku, config.policies)
    logger.info("evaluated %d SKUs x %d scales x %d policies", len(skus), len(config.alpha_grid), len(config.policies))
    return ExperimentResult(performances, per_sku, mean, worst, warnings)


def _aggregate(per_sku, policies):
    frame = per_sku.copy()
    frame["policy"] = pd.Categorical(frame["policy"], categories=list(policies), ordered=True)
    grouped = frame.groupby(["alpha", "policy"], observed=True, sort=True)["ratio"]
    out = []
    for series in (grouped.mean(), grouped.min()):
        table = series.reset_index()
        table["policy"] = table["policy"].astype(str)
        out.append(table[getAggregateColumns()])
    return out


def emit_results(results, path):
    """
    Write per_sku.csv, aggregate_mean.csv and aggregate_min.csv under path.

    Args:
        results (ExperimentResult): Output of run_experiment.
        path (str): Output directory; created if missing.

    Returns:
        dict: File kind -> written path.
    """
    if results is None or results.per_sku.empty:
        raise ArgumentError("there are no results to write")
    os.makedirs(path, exist_ok=True)
    names = getResultFiles()
    frames = {"per_sku": results.per_sku, "mean": results.aggregate_mean, "min": results.aggregate_min}
    written = {}
    for kind, frame in frames.items():
        target = os.path.join(path, names[kind])
        frame.to_csv(target, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
        written[kind] = target
    return written
