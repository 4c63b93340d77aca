"""
Offline optimum oracles.

opt_plus is the truncating optimum min(sum, capacity); opt_integer is the
best subset packing (reachability DP over capacity units, or exhaustive
enumeration for short float sequences); opt_multi exhausts item-to-knapsack
assignments for small multi-knapsack instances.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from core import fits, is_exact_number
from exceptions import ArgumentError, SizeLimitError

logger = logging.getLogger(__name__)

MAX_DP_UNITS = 10**7
MAX_BRUTE_FORCE_ITEMS = 24
MAX_MULTI_ITEMS = 10
MAX_MULTI_KNAPSACKS = 5


@dataclass(frozen=True)
class OptResult:
    value: object
    witness: tuple
    method: str

    def to_dict(self):
        return {"value": str(self.value), "witness": list(self.witness), "method": self.method}


def opt_plus(seq):
    return OptResult(min(seq.total, seq.capacity), (), "closed_form")


def subset_sum_dp(sizes, capacity):
    """
    Largest subset sum not exceeding capacity, with a witness.

    Args:
        sizes (list): Positive integer sizes.
        capacity (int): Integer capacity.

    Returns:
        tuple: (best sum, sorted witness indices).
    """
    if capacity > MAX_DP_UNITS:
        raise SizeLimitError(f"capacity of {capacity} units exceeds the DP limit of {MAX_DP_UNITS}")
    reach = np.zeros(capacity + 1, dtype=bool)
    reach[0] = True
    parent = np.full(capacity + 1, -1, dtype=np.int64)
    for i, s in enumerate(sizes):
        if s > capacity:
            continue
        # first time a sum becomes reachable it is through item i
        newly = reach[: capacity + 1 - s] & ~reach[s:]
        idx = np.flatnonzero(newly) + s
        parent[idx] = i
        reach[idx] = True
        if reach[capacity]:
            break
    best = int(np.flatnonzero(reach)[-1])
    witness = []
    j = best
    while j > 0:
        i = int(parent[j])
        witness.append(i)
        j -= sizes[i]
    return best, tuple(sorted(witness))


def _brute_force(seq):
    sizes = [float(s) for s in seq.sizes]
    sums = np.zeros(1)
    for s in sizes:
        sums = np.concatenate([sums, sums + s])
    feasible = np.where(sums <= float(seq.capacity) + 1e-12, sums, -1.0)
    k = int(np.argmax(feasible))
    witness = tuple(i for i in range(len(sizes)) if (k >> i) & 1)
    return OptResult(seq.size_of(witness), witness, "brute_force")


def opt_integer(seq):
    """
    Best offline packing without truncation.

    Args:
        seq (ItemSequence): Integer-mode, rational, or float sequence.

    Returns:
        OptResult: Value, witness subset and the method used.
    """
    if seq.integer_mode:
        value, witness = subset_sum_dp(list(seq.sizes), seq.capacity)
        return OptResult(value, witness, "dp")

    if seq.exact:
        denominators = [Fraction(s).denominator for s in seq.sizes]
        denominators.append(Fraction(seq.capacity).denominator)
        scale = math.lcm(*denominators)
        units = int(Fraction(seq.capacity) * scale)
        if units <= MAX_DP_UNITS:
            scaled = [int(Fraction(s) * scale) for s in seq.sizes]
            value, witness = subset_sum_dp(scaled, units)
            return OptResult(Fraction(value, scale), witness, "dp")
        logger.debug("rational grid of %d units too fine for the DP, enumerating subsets", units)

    if len(seq) > MAX_BRUTE_FORCE_ITEMS:
        raise SizeLimitError(
            f"{len(seq)} fractional items exceed the enumeration limit of "
            f"{MAX_BRUTE_FORCE_ITEMS}; pass integer units with an explicit capacity instead"
        )
    return _brute_force(seq)


def opt_multi(instance):
    """
    Exhaustive multi-knapsack optimum over all item-to-knapsack assignments.

    Args:
        instance (MultiInstance): Capacities and per-item size vectors.

    Returns:
        OptResult: witness[t] is the knapsack of item t, or None if unassigned.
    """
    n_items = len(instance.items)
    n_knapsacks = len(instance.capacities)
    if n_items > MAX_MULTI_ITEMS or n_knapsacks > MAX_MULTI_KNAPSACKS:
        raise SizeLimitError(
            f"instance with T={n_items}, N={n_knapsacks} exceeds the exhaustive limit "
            f"(T <= {MAX_MULTI_ITEMS}, N <= {MAX_MULTI_KNAPSACKS})"
        )
    if n_knapsacks == 0:
        raise ArgumentError("instance has no knapsacks")
    exact = all(is_exact_number(b) for b in instance.capacities) and all(
        is_exact_number(s) for vec in instance.items for s in vec
    )
    suffix = [0] * (n_items + 1)
    for t in range(n_items - 1, -1, -1):
        suffix[t] = suffix[t + 1] + max(instance.items[t])

    best = {"value": None, "assignment": (None,) * n_items}

    def search(t, remaining, value, assignment):
        if best["value"] is not None and value + suffix[t] <= best["value"]:
            return
        if t == n_items:
            best["value"] = value
            best["assignment"] = assignment
            return
        for j, s in enumerate(instance.items[t]):
            if s > 0 and fits(s, remaining[j], exact):
                search(
                    t + 1,
                    remaining[:j] + (remaining[j] - s,) + remaining[j + 1 :],
                    value + s,
                    assignment + (j,),
                )
        search(t + 1, remaining, value, assignment + (None,))

    search(0, tuple(instance.capacities), 0, ())
    return OptResult(best["value"], best["assignment"], "brute_force")
