FIXED_THRESHOLD_PERCENTS = [3, 5, 10, 15, 20, 30, 40, 50, 60, 80]

THRESHOLD_CDFS = ["f1", "f2", "greedy", "coin"]

CONSTRUCTIONS = ["thm32", "thm34", "thm42"]

ORDER_COLUMNS = ["sku_id", "warehouse_id", "arrival_index", "order_size"]

INVENTORY_COLUMNS = ["sku_id", "warehouse_id", "initial_inventory"]

COLUMN_DATATYPES = {
    "sku_id": "string",
    "warehouse_id": "string",
    "arrival_index": "int64",
    "order_size": "int64",
    "initial_inventory": "int64",
}

PER_SKU_COLUMNS = ["sku", "alpha", "policy", "ratio"]

AGGREGATE_COLUMNS = ["alpha", "policy", "ratio"]

RESULT_FILES = {
    "per_sku": "per_sku.csv",
    "mean": "aggregate_mean.csv",
    "min": "aggregate_min.csv",
}


def getFixedThresholdPercents():
    return FIXED_THRESHOLD_PERCENTS


def getThresholdCdfs():
    return THRESHOLD_CDFS


def getConstructions():
    return CONSTRUCTIONS


def getOrderColumns():
    return ORDER_COLUMNS


def getInventoryColumns():
    return INVENTORY_COLUMNS


def getColumnDatatypes():
    return COLUMN_DATATYPES


def getPerSkuColumns():
    return PER_SKU_COLUMNS


def getAggregateColumns():
    return AGGREGATE_COLUMNS


def getResultFiles():
    return RESULT_FILES


def getPolicyNames(percents=None):
    """Policy columns in report order: FCFS, the fixed thresholds, TwoBins, Random-Threshold."""
    percents = FIXED_THRESHOLD_PERCENTS if percents is None else percents
    return (
        ["fcfs"]
        + [f"fixed_{p}" for p in percents]
        + ["twobins", "random_threshold", "random_threshold_exact"]
    )
