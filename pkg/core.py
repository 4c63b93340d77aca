"""
Single-knapsack model and the deterministic policies.

Sizes are either fractions of a unit capacity (floats or Fractions) or
integer units with an explicit integer capacity. Exact inputs (int or
Fraction) are simulated exactly; float inputs use a small fit tolerance.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from exceptions import ArgumentError

logger = logging.getLogger(__name__)

FLOAT_FIT_TOLERANCE = 1e-12


class ItemStatus(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    BLOCKED = "blocked"


def is_exact_number(value):
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def parse_size(token):
    """
    Parse one size token ("1/3", "0.25", "7") into an exact Fraction.

    Args:
        token (str): The textual size.

    Returns:
        Fraction: The parsed size.
    """
    try:
        return Fraction(token.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ArgumentError(f"cannot parse size {token!r}: {e}")


def fits(size, remaining, exact):
    if exact:
        return size <= remaining
    return size <= remaining + FLOAT_FIT_TOLERANCE


def half(value):
    if isinstance(value, int):
        return Fraction(value, 2)
    return value / 2


@dataclass(frozen=True)
class ItemSequence:
    """
    Ordered item sizes offered to one knapsack.

    In fraction mode every size lies in (0, 1]; the capacity defaults to 1.
    In integer mode sizes and capacity are integer units and a size may
    exceed the capacity, in which case the item can never fit.
    """

    sizes: tuple
    capacity: object = 1
    integer_mode: bool = False

    def __post_init__(self):
        sizes = tuple(self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if self.integer_mode:
            if not isinstance(self.capacity, int) or self.capacity < 1:
                raise ArgumentError(
                    f"integer-mode capacity must be an integer >= 1, got {self.capacity!r}"
                )
            for t, s in enumerate(sizes):
                if not isinstance(s, int) or isinstance(s, bool) or s <= 0:
                    raise ArgumentError(f"item {t}: size must be a positive integer, got {s!r}")
        else:
            if not self.capacity > 0:
                raise ArgumentError(f"capacity must be positive, got {self.capacity!r}")
            for t, s in enumerate(sizes):
                if not 0 < s <= 1:
                    raise ArgumentError(f"item {t}: size must lie in (0, 1], got {s!r}")

    @classmethod
    def from_fractions(cls, sizes, capacity=1):
        parsed = [parse_size(s) if isinstance(s, str) else s for s in sizes]
        return cls(tuple(parsed), capacity, integer_mode=False)

    @classmethod
    def from_units(cls, sizes, capacity):
        return cls(tuple(int(s) for s in sizes), int(capacity), integer_mode=True)

    @classmethod
    def parse(cls, text, capacity=None):
        """
        Build a sequence from a comma separated list.

        Args:
            text (str): Sizes such as "0.5,0.6" or "1/3,2/3".
            capacity (int): When given, the sizes are integer units.

        Returns:
            ItemSequence: The parsed sequence.
        """
        tokens = [tok for tok in text.replace("\n", ",").split(",") if tok.strip()]
        if capacity is not None:
            try:
                return cls.from_units([int(tok) for tok in tokens], capacity)
            except ValueError as e:
                raise ArgumentError(f"integer mode expects integer sizes: {e}")
        return cls.from_fractions(tokens)

    def __len__(self):
        return len(self.sizes)

    @property
    def exact(self):
        return is_exact_number(self.capacity) and all(is_exact_number(s) for s in self.sizes)

    @property
    def total(self):
        return sum(self.sizes, 0)

    def size_of(self, indices):
        return sum((self.sizes[t] for t in indices), 0)

    def normalized(self, value):
        """Express a quantity in units of the capacity."""
        if self.exact and is_exact_number(value):
            return Fraction(value) / Fraction(self.capacity)
        return value / self.capacity


@dataclass
class KnapsackState:
    capacity: object
    exact: bool = True
    packed: object = 0
    accepted_indices: list = field(default_factory=list)

    @property
    def remaining(self):
        return self.capacity - self.packed

    def fits(self, size):
        return fits(size, self.remaining, self.exact)

    def add(self, index, size):
        if not self.fits(size):
            raise ArgumentError(f"item {index} of size {size} does not fit")
        self.packed += size
        self.accepted_indices.append(index)


@dataclass(frozen=True)
class PackingOutcome:
    """
    Trace of one policy run.

    rejected_flags[t] is True whenever the admission rule would turn item t
    away, including items whose primary label is blocked.
    """

    accepted_indices: tuple
    packed_total: object
    statuses: tuple
    rejected_flags: tuple
    capacity: object
    min_size: object = 0

    @property
    def blocked_indices(self):
        return tuple(t for t, st in enumerate(self.statuses) if st is ItemStatus.BLOCKED)

    @property
    def rejected_indices(self):
        return tuple(t for t, st in enumerate(self.statuses) if st is ItemStatus.REJECTED)

    def to_dict(self):
        return {
            "accepted_indices": list(self.accepted_indices),
            "packed_total": str(self.packed_total),
            "statuses": [st.value for st in self.statuses],
        }


def _check_capacity(seq, capacity):
    if capacity is None:
        return seq.capacity
    if not capacity > 0:
        raise ArgumentError(f"capacity must be positive, got {capacity!r}")
    return capacity


def simulate_size_threshold(seq, min_size, capacity=None):
    """
    Run the admission rule "accept iff size >= min_size and it fits".

    Args:
        seq (ItemSequence): Items in arrival order.
        min_size: Admission size in the same units as the sizes.
        capacity: Optional capacity override.

    Returns:
        PackingOutcome: The run trace.
    """
    capacity = _check_capacity(seq, capacity)
    exact = seq.exact and is_exact_number(capacity)
    state = KnapsackState(capacity, exact)
    statuses = []
    flags = []
    for t, s in enumerate(seq.sizes):
        admits = s >= min_size
        flags.append(not admits)
        if not state.fits(s):
            statuses.append(ItemStatus.BLOCKED)
        elif admits:
            state.add(t, s)
            statuses.append(ItemStatus.ACCEPTED)
        else:
            statuses.append(ItemStatus.REJECTED)
    return PackingOutcome(
        tuple(state.accepted_indices), state.packed, tuple(statuses), tuple(flags), capacity, min_size
    )


def simulate_fixed_threshold(seq, tau, capacity=None):
    """
    Simulate THR(tau): accept every fitting item of size >= tau * capacity.

    Args:
        seq (ItemSequence): Items in arrival order.
        tau: Threshold as a fraction of capacity, in [0, 1].
        capacity: Optional capacity override (defaults to seq.capacity).

    Returns:
        PackingOutcome: The run trace. THR(0) is Greedy.
    """
    try:
        in_range = 0 <= tau <= 1
    except TypeError:
        in_range = False
    if not in_range:
        raise ArgumentError(f"tau must lie in [0, 1], got {tau!r}")
    capacity = _check_capacity(seq, capacity)
    min_size = tau * capacity
    if is_exact_number(tau) and is_exact_number(capacity):
        min_size = Fraction(tau) * capacity
    return simulate_size_threshold(seq, min_size, capacity)


def simulate_greedy(seq, capacity=None):
    """First-come-first-serve: accept every item that fits."""
    capacity = _check_capacity(seq, capacity)
    exact = seq.exact and is_exact_number(capacity)
    state = KnapsackState(capacity, exact)
    statuses = []
    for t, s in enumerate(seq.sizes):
        if state.fits(s):
            state.add(t, s)
            statuses.append(ItemStatus.ACCEPTED)
        else:
            statuses.append(ItemStatus.BLOCKED)
    return PackingOutcome(
        tuple(state.accepted_indices),
        state.packed,
        tuple(statuses),
        tuple(False for _ in statuses),
        capacity,
        0,
    )


@dataclass(frozen=True)
class TwoBinsResult:
    heads: PackingOutcome
    tails: PackingOutcome
    expected_packed: object


def simulate_two_bins(seq, capacity=None):
    """
    Evaluate the fair-coin TwoBins policy exactly.

    Heads runs Greedy. Tails keeps a shadow Greedy, rejects everything the
    shadow still fits, and from the first item the shadow blocks onward runs
    Greedy on the real knapsack (that item included). If the shadow never
    blocks, Tails packs nothing.

    Args:
        seq (ItemSequence): Items in arrival order.
        capacity: Optional capacity override.

    Returns:
        TwoBinsResult: Both branch traces and their average.
    """
    capacity = _check_capacity(seq, capacity)
    exact = seq.exact and is_exact_number(capacity)
    heads = simulate_greedy(seq, capacity)

    shadow = KnapsackState(capacity, exact)
    real = KnapsackState(capacity, exact)
    switched = False
    statuses = []
    flags = []
    for t, s in enumerate(seq.sizes):
        if not switched:
            if shadow.fits(s):
                shadow.add(t, s)
                statuses.append(ItemStatus.REJECTED)
                flags.append(True)
                continue
            switched = True
        flags.append(False)
        if real.fits(s):
            real.add(t, s)
            statuses.append(ItemStatus.ACCEPTED)
        else:
            statuses.append(ItemStatus.BLOCKED)
    tails = PackingOutcome(
        tuple(real.accepted_indices), real.packed, tuple(statuses), tuple(flags), capacity, None
    )
    return TwoBinsResult(heads, tails, half(heads.packed_total + tails.packed_total))


@dataclass(frozen=True)
class GreedyBlockage:
    """
    Greedy's blocked set M and the quantities the analysis is built on.

    m is the smallest blocked size, t_m the first blocked item of that size,
    and G' the items Greedy accepted before t_m arrived.
    """

    statuses: tuple
    blocked_indices: tuple
    m: object = None
    t_m: int = None
    g_prime_indices: tuple = ()
    g_prime: object = 0

    @property
    def is_empty(self):
        return not self.blocked_indices


def classify_items(seq, outcome):
    """
    Classify items against a Greedy run.

    Args:
        seq (ItemSequence): The sequence that produced the outcome.
        outcome (PackingOutcome): A Greedy (THR(0)) trace of seq.

    Returns:
        GreedyBlockage: M, m, t_m and G'; empty when Greedy accepts everything.
    """
    if len(outcome.statuses) != len(seq):
        raise ArgumentError(
            f"outcome covers {len(outcome.statuses)} items but the sequence has {len(seq)}"
        )
    if outcome.min_size != 0:
        raise ArgumentError("classify_items expects a Greedy outcome (tau = 0)")
    accepted = set(outcome.accepted_indices)
    if accepted != {t for t, st in enumerate(outcome.statuses) if st is ItemStatus.ACCEPTED}:
        raise ArgumentError("outcome statuses and accepted indices disagree")

    blocked = outcome.blocked_indices
    if not blocked:
        return GreedyBlockage(outcome.statuses, ())

    m = min(seq.sizes[t] for t in blocked)
    t_m = next(t for t in blocked if seq.sizes[t] == m)
    g_prime_indices = tuple(t for t in outcome.accepted_indices if t < t_m)
    return GreedyBlockage(
        outcome.statuses, blocked, m, t_m, g_prime_indices, seq.size_of(g_prime_indices)
    )
