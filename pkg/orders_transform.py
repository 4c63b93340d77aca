import pandas as pd

from exceptions import DatasetError
from tables import getColumnDatatypes

POSITIVE_COLUMNS = ("arrival_index", "order_size", "initial_inventory")


def transform_frame(df, columns, source):
    """
    Validate and type a raw CSV frame read with every column as a string.

    Args:
        df (DataFrame): Raw rows as read from the file.
        columns (list): Expected header, in order.
        source (str): File name used in error messages.

    Returns:
        DataFrame: The typed frame (string ids, int64 quantities).

    Raises:
        DatasetError: On a wrong header, a blank id, or a quantity that is
            not a positive integer; carries the 1-based file line.
    """
    if list(df.columns) != list(columns):
        raise DatasetError(f"{source}: expected header {','.join(columns)}, got {','.join(df.columns)}", line=1)

    datatypes = getColumnDatatypes()
    df = df.copy()
    for col in columns:
        values = df[col].str.strip()
        if datatypes[col] == "string":
            blank = values == ""
            if blank.any():
                raise DatasetError(f"{source}: empty {col}", line=_file_line(blank))
            df[col] = values.astype("string")
            continue
        numbers = pd.to_numeric(values, errors="coerce")
        bad = numbers.isna() | (numbers != numbers.round())
        if col in POSITIVE_COLUMNS:
            bad |= ~(numbers > 0)
        if bad.any():
            line = _file_line(bad)
            raise DatasetError(
                f"{source}: {col} must be a positive integer, got {values[bad].iloc[0]!r}", line=line
            )
        df[col] = numbers.astype(datatypes[col])
    return df


def _file_line(mask):
    # header is line 1
    return int(mask.to_numpy().nonzero()[0][0]) + 2


def transform_orders(df, columns):
    df = transform_frame(df, columns, "orders")
    return df.sort_values(["sku_id", "warehouse_id", "arrival_index"], kind="mergesort")


def transform_inventory(df, columns):
    df = transform_frame(df, columns, "inventory")
    return df.sort_values(["sku_id", "warehouse_id"], kind="mergesort")
