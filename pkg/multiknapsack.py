"""
Several knapsacks: greedy routing to the knapsack where an item is largest,
then an independent single-knapsack policy inside each knapsack. A
knapsack runs either a random threshold drawn from its own CDF or TwoBins
with its own fair coin.
"""
import json
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from core import ItemSequence, fits, is_exact_number, simulate_two_bins
from evaluation import expected_packed_exact, guarantee_lower_bound, performance_ratio
from exceptions import ArgumentError
from optimum import opt_multi
from thresholds import cdf_point_mass

logger = logging.getLogger(__name__)

TIE_BREAKS = ("lowest", "first_fit")
TWO_BINS = "twobins"
BOUNDED_POLICIES = ("f1", "coin", TWO_BINS)


@dataclass(frozen=True)
class MultiInstance:
    """
    capacities[j] is B_j; items[t][j] is the size item t takes in knapsack j.

    A zero entry means the item cannot use that knapsack.
    """

    capacities: tuple
    items: tuple

    def __post_init__(self):
        capacities = tuple(self.capacities)
        items = tuple(tuple(vec) for vec in self.items)
        object.__setattr__(self, "capacities", capacities)
        object.__setattr__(self, "items", items)
        if not capacities:
            raise ArgumentError("an instance needs at least one knapsack")
        for j, b in enumerate(capacities):
            if not b > 0:
                raise ArgumentError(f"knapsack {j}: capacity must be positive, got {b!r}")
        for t, vec in enumerate(items):
            if len(vec) != len(capacities):
                raise ArgumentError(f"item {t}: expected {len(capacities)} sizes, got {len(vec)}")
            for s in vec:
                if not 0 <= s <= 1:
                    raise ArgumentError(f"item {t}: sizes must lie in [0, 1], got {s!r}")

    @property
    def n_knapsacks(self):
        return len(self.capacities)

    @property
    def exact(self):
        return all(is_exact_number(b) for b in self.capacities) and all(
            is_exact_number(s) for vec in self.items for s in vec
        )

    @classmethod
    def from_json(cls, text):
        """
        Parse {"capacities": [...], "items": [[...], ...]}; strings such as "1/3" are exact.
        """
        try:
            raw = json.loads(text)
            capacities = [_parse_number(b) for b in raw["capacities"]]
            items = [[_parse_number(s) for s in vec] for vec in raw["items"]]
        except (KeyError, TypeError, json.JSONDecodeError) as e:
            raise ArgumentError(f"malformed instance JSON: {e}")
        return cls(tuple(capacities), tuple(tuple(vec) for vec in items))


def _parse_number(value):
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError:
            raise ArgumentError(f"cannot parse number {value!r}")
    return value


@dataclass(frozen=True)
class Routing:
    targets: tuple
    routed_sets: tuple
    unroutable: tuple


def route_greedy(instance):
    """
    Send each item to the knapsack where it takes the largest size.

    Ties go to the lowest index; fill levels are ignored. Items with an
    all-zero size vector are unroutable.

    Args:
        instance (MultiInstance): The instance.

    Returns:
        Routing: Per-item target (None when unroutable) and the sets I_j.
    """
    targets = []
    routed = [[] for _ in instance.capacities]
    unroutable = []
    for t, vec in enumerate(instance.items):
        best = max(vec)
        if best <= 0:
            targets.append(None)
            unroutable.append(t)
            continue
        j = vec.index(best)
        targets.append(j)
        routed[j].append(t)
    return Routing(tuple(targets), tuple(tuple(r) for r in routed), tuple(unroutable))


@dataclass(frozen=True)
class MultiOutcome:
    assignment: tuple
    packed: tuple
    routed_sets: tuple
    unroutable: tuple
    thresholds: tuple = ()
    coins: tuple = ()

    @property
    def total(self):
        return sum(self.packed, 0)

    def to_dict(self):
        out = {
            "assignment": list(self.assignment),
            "packed": [float(p) for p in self.packed],
            "total": float(self.total),
            "routed_sets": [list(r) for r in self.routed_sets],
            "unroutable": list(self.unroutable),
            "thresholds": [float(tau) for tau in self.thresholds],
        }
        if self.coins:
            out["coins"] = ["heads" if c else "tails" for c in self.coins]
        return out


def draw_thresholds(instance, cdfs, seed, shared_draw=False):
    """
    Draw one threshold per knapsack.

    Args:
        instance (MultiInstance): The instance.
        cdfs: A ThresholdCdf or one per knapsack.
        seed (int): Root seed; knapsack j uses its own spawned stream.
        shared_draw (bool): Use a single uniform for every knapsack.

    Returns:
        tuple: tau_j per knapsack.
    """
    cdfs = _per_knapsack(instance, cdfs)
    if shared_draw:
        u = np.random.default_rng(seed).random()
        return tuple(F.quantile(u) for F in cdfs)
    streams = np.random.SeedSequence(seed).spawn(instance.n_knapsacks)
    return tuple(F.sample(np.random.default_rng(s)) for F, s in zip(cdfs, streams))


def _per_knapsack(instance, values):
    if values is None:
        raise ArgumentError("thresholds must be given for every knapsack")
    if not isinstance(values, (list, tuple)):
        values = [values] * instance.n_knapsacks
    if len(values) != instance.n_knapsacks:
        raise ArgumentError(f"expected {instance.n_knapsacks} thresholds, got {len(values)}")
    return tuple(values)


def simulate_combined(instance, thresholds=None, cdfs=None, seed=0, shared_draw=False, tie_break="lowest"):
    """
    Route greedily, then admit inside the routed knapsack.

    Item t routed to knapsack j is accepted iff s_tj >= tau_j * B_j and it
    fits. With tie_break="first_fit" an item whose largest size is shared
    by several knapsacks goes to the lowest-index one where it currently
    fits; this makes routing state-dependent and is only used to compare
    against the upper-triangular enumeration.

    Args:
        instance (MultiInstance): The instance.
        thresholds: tau_j per knapsack (fractions of B_j).
        cdfs: Threshold distributions to draw from when thresholds is None.
        seed (int): Seed for the draws.
        shared_draw (bool): One shared uniform across knapsacks.
        tie_break (str): "lowest" or "first_fit".

    Returns:
        MultiOutcome: Assignment, per-knapsack packing and the routed sets.
    """
    if tie_break not in TIE_BREAKS:
        raise ArgumentError(f"unknown tie_break {tie_break!r}")
    if thresholds is None:
        if cdfs is None:
            raise ArgumentError("either thresholds or cdfs must be given")
        thresholds = draw_thresholds(instance, cdfs, seed, shared_draw)
    thresholds = _per_knapsack(instance, thresholds)
    for tau in thresholds:
        if not 0 <= tau <= 1:
            raise ArgumentError(f"thresholds must lie in [0, 1], got {tau!r}")

    exact = instance.exact
    routing = route_greedy(instance)
    if routing.unroutable:
        logger.debug("items %s take size 0 everywhere and are rejected", list(routing.unroutable))
    packed = [0] * instance.n_knapsacks
    routed = [[] for _ in instance.capacities]
    assignment = []
    for t, vec in enumerate(instance.items):
        j = routing.targets[t]
        if j is None:
            assignment.append(None)
            continue
        if tie_break == "first_fit":
            tied = [k for k, s in enumerate(vec) if s == vec[j]]
            j = next((k for k in tied if fits(vec[k], instance.capacities[k] - packed[k], exact)), j)
        routed[j].append(t)
        s = vec[j]
        if s >= thresholds[j] * instance.capacities[j] and fits(s, instance.capacities[j] - packed[j], exact):
            packed[j] += s
            assignment.append(j)
        else:
            assignment.append(None)
    return MultiOutcome(
        tuple(assignment),
        tuple(packed),
        tuple(tuple(r) for r in routed),
        routing.unroutable,
        tuple(thresholds),
    )


def routed_sequence(instance, j, routed_set):
    """Knapsack j's view of its routed items: sizes s_tj against capacity B_j."""
    sizes = [instance.items[t][j] for t in routed_set]
    return ItemSequence(tuple(sizes), instance.capacities[j])


def flip_coins(instance, seed):
    """One fair coin per knapsack; True is heads (Greedy)."""
    rng = np.random.default_rng(seed)
    return tuple(bool(c) for c in rng.random(instance.n_knapsacks) < 0.5)


def simulate_combined_two_bins(instance, coins=None, seed=0):
    """
    Route greedily, then run TwoBins inside each knapsack.

    Routing ignores fill levels, so each knapsack sees its routed items in
    arrival order and the runs are independent.

    Args:
        instance (MultiInstance): The instance.
        coins: Heads (True) or tails (False) per knapsack; flipped from seed when None.
        seed (int): Seed for the coins.

    Returns:
        MultiOutcome: Assignment, per-knapsack packing and the coins used.
    """
    if coins is None:
        coins = flip_coins(instance, seed)
    coins = tuple(bool(c) for c in _per_knapsack(instance, coins))
    routing = route_greedy(instance)
    assignment = [None] * len(instance.items)
    packed = []
    for j, routed_set in enumerate(routing.routed_sets):
        if not routed_set:
            packed.append(0)
            continue
        run = simulate_two_bins(routed_sequence(instance, j, routed_set))
        outcome = run.heads if coins[j] else run.tails
        for position in outcome.accepted_indices:
            assignment[routed_set[position]] = j
        packed.append(outcome.packed_total)
    return MultiOutcome(tuple(assignment), tuple(packed), routing.routed_sets, routing.unroutable, (), coins)


@dataclass(frozen=True)
class CombinedExpectation:
    per_knapsack: tuple
    opt_plus_per_knapsack: tuple

    @property
    def expected_total(self):
        return sum(self.per_knapsack)

    @property
    def opt_plus_total(self):
        return sum(self.opt_plus_per_knapsack)


def _expected_in_knapsack(seq, policy):
    if policy == TWO_BINS:
        return float(simulate_two_bins(seq).expected_packed)
    return expected_packed_exact(seq, policy).expected_packed


def expected_combined(instance, cdfs):
    """
    Exact expected total under independent per-knapsack policies.

    Routing does not depend on the thresholds or coins, so the expectation
    splits into one single-knapsack expectation per routed set.

    Args:
        instance (MultiInstance): The instance.
        cdfs: A ThresholdCdf or "twobins", or one of those per knapsack.

    Returns:
        CombinedExpectation: Per-knapsack expectations and OPT+_j values.
    """
    policies = _per_knapsack(instance, cdfs)
    routing = route_greedy(instance)
    expected = []
    plus = []
    for j, routed_set in enumerate(routing.routed_sets):
        if not routed_set:
            expected.append(0.0)
            plus.append(0.0)
            continue
        seq = routed_sequence(instance, j, routed_set)
        expected.append(_expected_in_knapsack(seq, policies[j]))
        plus.append(float(min(seq.total, seq.capacity)))
    return CombinedExpectation(tuple(expected), tuple(plus))


def opt_plus_per_knapsack(instance):
    """OPT+_j = min(sum of routed sizes, B_j); their sum is the truncating greedy's value."""
    return expected_combined(instance, cdf_point_mass(0)).opt_plus_per_knapsack


def policy_name(policy):
    return TWO_BINS if policy == TWO_BINS else policy.name


def combined_bound(policy):
    """Half the single-knapsack guarantee against OPT+, or None when there is none."""
    name = policy_name(policy)
    if name not in BOUNDED_POLICIES:
        return None
    return guarantee_lower_bound(name) / 2


@dataclass(frozen=True)
class GuaranteeReport:
    """
    Expected total against OPT for one instance.

    routing_half_holds records whether the routed sets keep half of the
    optimum after truncation (sum of OPT+_j >= OPT / 2). The combined bound
    relies on it and routing that ignores fill levels can break it.
    """

    policy: str
    expected_total: float
    opt: float
    ratio: float
    per_knapsack: tuple
    opt_plus_per_knapsack: tuple
    bound: float = None

    @property
    def routing_half_holds(self):
        return sum(self.opt_plus_per_knapsack) >= self.opt / 2 - 1e-12

    @property
    def holds(self):
        return self.bound is None or self.ratio >= self.bound - 1e-9

    def to_dict(self):
        return {
            "policy": self.policy,
            "expected_total": self.expected_total,
            "opt": self.opt,
            "ratio": self.ratio,
            "bound": self.bound,
            "holds": self.holds,
            "routing_half_holds": self.routing_half_holds,
            "per_knapsack": list(self.per_knapsack),
            "opt_plus_per_knapsack": list(self.opt_plus_per_knapsack),
        }


def guarantee_check(instance, F):
    """
    Expected total of the combined policy against the multi-knapsack optimum.

    Args:
        instance (MultiInstance): An instance within opt_multi's limits.
        F: ThresholdCdf used independently in every knapsack, or "twobins".

    Returns:
        GuaranteeReport: Expected total, OPT, their ratio and the applicable
        bound (3/14 for f1, 1/4 for twobins).
    """
    combined = expected_combined(instance, F)
    opt = float(opt_multi(instance).value)
    total = combined.expected_total
    return GuaranteeReport(
        policy_name(F),
        total,
        opt,
        performance_ratio(total, opt),
        combined.per_knapsack,
        combined.opt_plus_per_knapsack,
        combined_bound(F),
    )
