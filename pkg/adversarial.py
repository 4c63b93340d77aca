"""
Input distributions on which every deterministic threshold (or every
multi-knapsack algorithm) does poorly, with per-case verifiers.

thm32 caps THR policies at 3/7 against OPT+, thm34 caps them at c* against
OPT, and thm42 caps any multi-knapsack algorithm at 35/76.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from core import ItemSequence, simulate_fixed_threshold
from exceptions import ArgumentError, ConsistencyError, PreconditionError, VerificationError
from multiknapsack import MultiInstance, simulate_combined
from thresholds import solve_constants

logger = logging.getLogger(__name__)

MAX_EPSILON = Fraction(1, 100)
MASS_TOLERANCE = 1e-6
EXACT_TOLERANCE = 1e-9
QUADRATURE_TOLERANCE = 1e-7
QUAD_EPS = 1e-11
QUAD_LIMIT = 200
MAX_THM42_KNAPSACKS = 8


@dataclass(frozen=True)
class Branch:
    probability: object
    sequence: object
    label: str
    opt_value: object = 1
    opt_witness: tuple = ()


@dataclass(frozen=True)
class ContinuousBranch:
    """
    A family of sequences indexed by q in [lower, upper] with density(q).

    inverse maps a uniform draw to q.
    """

    lower: float
    upper: float
    density: Callable
    mass: float
    build: Callable
    inverse: Callable
    label: str = "continuous"


@dataclass(frozen=True)
class AdversarialDistribution:
    kind: str
    epsilon: object
    branches: tuple
    continuous: Optional[ContinuousBranch] = None
    parameters: dict = field(default_factory=dict)

    @property
    def total_mass(self):
        mass = sum((b.probability for b in self.branches), 0)
        if self.continuous is not None:
            mass = float(mass) + self.continuous.mass
        return mass

    def to_dict(self):
        out = {
            "kind": self.kind,
            "epsilon": float(self.epsilon),
            "total_mass": float(self.total_mass),
            "branches": [
                {"label": b.label, "probability": float(b.probability), "items": _item_count(b.sequence)}
                for b in self.branches
            ],
            "parameters": {k: _plain(v) for k, v in sorted(self.parameters.items())},
        }
        if self.continuous is not None:
            out["continuous"] = {
                "label": self.continuous.label,
                "lower": self.continuous.lower,
                "upper": self.continuous.upper,
                "mass": self.continuous.mass,
            }
        return out


def _item_count(sequence):
    if isinstance(sequence, MultiInstance):
        return len(sequence.items)
    return len(sequence)


def _plain(value):
    if isinstance(value, Fraction):
        return float(value)
    return value


def _as_epsilon(epsilon):
    try:
        eps = Fraction(str(epsilon)) if isinstance(epsilon, float) else Fraction(epsilon)
    except (TypeError, ValueError):
        raise ArgumentError(f"epsilon must be a number, got {epsilon!r}")
    if not 0 < eps <= MAX_EPSILON:
        raise ArgumentError(f"epsilon must lie in (0, {float(MAX_EPSILON)}], got {epsilon!r}")
    return eps


def epsilon_run(base, unit):
    """
    Items summing exactly to base, then one item of size unit.

    The first item absorbs the remainder of base / unit and the others have
    size unit, so no item is smaller than unit once base >= unit and a
    threshold of one unit still accepts the whole run. Dropping the last
    item leaves exactly base, so the run plus its partner item still fills
    the knapsack.
    """
    if base <= 0:
        return [unit]
    if base < unit:
        return [base, unit]
    n = math.floor(base / unit)
    return [base - (n - 1) * unit] + [unit] * n


def _check_mass(dist, tolerance):
    deviation = abs(float(dist.total_mass) - 1.0)
    if deviation > tolerance:
        raise ConsistencyError(f"{dist.kind}: total probability mass deviates from 1 by {deviation:.3g}")
    return dist


def build_thm32(epsilon):
    """
    Three-branch distribution that holds every THR(tau) to 3/7 + O(eps) of OPT+.

    The eps-unit is delta = 2/(3k) with k = ceil(2/(3 eps)), so every size
    and every case value is an exact rational.

    Args:
        epsilon: Target eps in (0, 0.01].

    Returns:
        AdversarialDistribution: Branches weighted 3/7, 3/7, 1/7.
    """
    eps = _as_epsilon(epsilon)
    k = math.ceil(Fraction(2, 3) / eps)
    delta = Fraction(2, 3 * k)
    third = Fraction(1, 3)
    paired = ItemSequence((third, 2 * third + delta))
    run = ItemSequence(tuple(epsilon_run(2 * third, delta)) + (third,))
    tiny_then_one = ItemSequence((delta, Fraction(1)))
    branches = (
        Branch(Fraction(3, 7), paired, "third_then_two_thirds"),
        Branch(Fraction(3, 7), run, "run_then_third"),
        Branch(Fraction(1, 7), tiny_then_one, "tiny_then_one"),
    )
    dist = AdversarialDistribution("thm32", eps, branches, None, {"k": k, "delta": delta})
    return _check_mass(dist, EXACT_TOLERANCE)


def build_thm34(epsilon, consts=None):
    """
    Four-branch distribution that holds every THR(tau) to c* + O(eps) of OPT.

    One branch is continuous: q in [1-q*, 1] with density x/q, followed by
    an eps-run of total 1-q+delta and then q. The discrete branches are the
    arithmetic run (q*, 1-q*+delta, ..., 1) w.p. x, the run of total
    1-q*+delta then q* w.p. y, and (delta, 1) w.p. z.

    Args:
        epsilon: Target eps in (0, 0.01].
        consts (SolvedConstants): Solved q* and c*; solved on demand.

    Returns:
        AdversarialDistribution: The distribution; its mass is checked to 1e-6.
    """
    eps = _as_epsilon(epsilon)
    if consts is None:
        consts = solve_constants()
    q_star, c_star = consts.q_star, consts.c_star
    x = (1 - 2 * c_star) / (1 - 2 * q_star)
    y = (1 - 2 * c_star) / q_star
    z = c_star - x
    steps = math.ceil(q_star / float(eps))
    delta = q_star / steps

    grid = [q_star] + [1 - q_star + j * delta for j in range(1, steps)] + [1.0]
    arithmetic = ItemSequence(tuple(grid))
    run_then_q = ItemSequence(tuple(epsilon_run(1 - q_star, delta)) + (q_star,))
    run_opt = tuple(range(len(run_then_q) - 2)) + (len(run_then_q) - 1,)
    branches = (
        Branch(x, arithmetic, "arithmetic_run", 1.0, (len(grid) - 1,)),
        Branch(y, run_then_q, "run_then_qstar", 1.0, run_opt),
        Branch(z, ItemSequence((delta, 1.0)), "tiny_then_one", 1.0, (1,)),
    )

    lower = 1 - q_star
    log_span = math.log(1 / lower)

    def build(q):
        return ItemSequence(tuple(epsilon_run(1 - q, delta)) + (q,))

    continuous = ContinuousBranch(
        lower,
        1.0,
        lambda q: x / q,
        -x * math.log1p(-q_star),
        build,
        lambda u: lower * math.exp(u * log_span),
        "run_then_q",
    )
    params = {
        "x": x,
        "y": y,
        "z": z,
        "q_star": q_star,
        "c_star": c_star,
        "delta": delta,
        "steps": steps,
    }
    dist = AdversarialDistribution("thm34", eps, branches, continuous, params)
    logger.debug("thm34 x=%.6f y=%.6f z=%.6f mass=%.12f", x, y, z, dist.total_mass)
    return _check_mass(dist, MASS_TOLERANCE)


def _continuous_value(dist, tau):
    branch = dist.continuous

    def integrand(q):
        packed = simulate_fixed_threshold(branch.build(q), tau).packed_total
        return float(packed) * branch.density(q)

    tau = float(tau)
    # acceptance changes where q crosses tau or where the run item 1-q crosses tau
    points = [p for p in (tau, 1 - tau) if branch.lower < p < branch.upper] or None
    value, abserr = integrate.quad(
        integrand,
        branch.lower,
        branch.upper,
        points=points,
        epsabs=QUAD_EPS,
        epsrel=QUAD_EPS,
        limit=QUAD_LIMIT,
    )
    logger.debug("continuous branch at tau=%.6g: %.12g (+/- %.1e)", tau, value, abserr)
    return value


def expected_value_at_threshold(dist, tau):
    """
    E[THR(tau)] over the distribution.

    Args:
        dist (AdversarialDistribution): A single-knapsack construction.
        tau: Deterministic threshold in [0, 1].

    Returns:
        Fraction for purely exact constructions, float otherwise.
    """
    if dist.kind == "thm42":
        raise PreconditionError("thresholds are not defined for the multi-knapsack construction")
    value = sum(
        (b.probability * simulate_fixed_threshold(b.sequence, tau).packed_total for b in dist.branches), 0
    )
    if dist.continuous is not None:
        value = float(value) + _continuous_value(dist, tau)
    return value


def expected_optimum(dist):
    """E[OPT] from the per-branch optimum values; the continuous branch always has OPT = 1."""
    value = sum((b.probability * b.opt_value for b in dist.branches), 0)
    if dist.continuous is not None:
        value = float(value) + dist.continuous.mass
    return value


@dataclass(frozen=True)
class Realization:
    label: str
    sequence: object
    parameter: Optional[float] = None


def sample_sequences(dist, n, seed):
    """
    Draw n realizations; the continuous branch is sampled by inverting its CDF.

    Args:
        dist (AdversarialDistribution): Any construction.
        n (int): Number of draws.
        seed (int): Seed for numpy's default_rng.

    Returns:
        list: Realization objects in draw order.
    """
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n!r}")
    rng = np.random.default_rng(seed)
    weights = [float(b.probability) for b in dist.branches]
    if dist.continuous is not None:
        weights.append(dist.continuous.mass)
    p = np.asarray(weights) / math.fsum(weights)
    picks = rng.choice(len(weights), size=n, p=p)
    out = []
    for pick in picks:
        if pick < len(dist.branches):
            branch = dist.branches[pick]
            out.append(Realization(branch.label, branch.sequence))
        else:
            q = dist.continuous.inverse(rng.random())
            out.append(Realization(dist.continuous.label, dist.continuous.build(q), q))
    return out


def candidate_thresholds(dist):
    """tau = 0 and every distinct size; E[THR(tau)] is constant between consecutive candidates."""
    taus = {0}
    for b in dist.branches:
        taus.update(s for s in b.sequence.sizes if s <= b.sequence.capacity)
    return sorted(taus)


@dataclass(frozen=True)
class MaxRatio:
    tau: object
    expected: object
    optimum: object
    ratio: float


def max_ratio_over_thresholds(dist, taus=None):
    """
    Best deterministic threshold against the distribution.

    Args:
        dist (AdversarialDistribution): A single-knapsack construction.
        taus: Thresholds to try; defaults to the breakpoints of a discrete construction.

    Returns:
        MaxRatio: The maximizing tau, its expectation and the ratio to E[OPT].
    """
    if taus is None:
        if dist.continuous is not None:
            raise PreconditionError("breakpoints of a continuous construction must be passed explicitly")
        taus = candidate_thresholds(dist)
    optimum = expected_optimum(dist)
    best = None
    for tau in taus:
        expected = expected_value_at_threshold(dist, tau)
        if best is None or expected > best.expected:
            best = MaxRatio(tau, expected, optimum, float(expected) / float(optimum))
    return best


@dataclass(frozen=True)
class CaseRow:
    case: int
    tau: object
    tau_range: str
    closed_form: object
    simulated: object
    tolerance: float = EXACT_TOLERANCE

    @property
    def difference(self):
        return abs(float(self.simulated) - float(self.closed_form))

    @property
    def agrees(self):
        return self.difference <= self.tolerance

    def to_dict(self):
        return {
            "case": self.case,
            "tau": float(self.tau),
            "tau_range": self.tau_range,
            "closed_form": float(self.closed_form),
            "simulated": float(self.simulated),
            "difference": self.difference,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class VerificationTable:
    kind: str
    epsilon: object
    effective_epsilon: object
    rows: tuple
    tolerance: float

    @property
    def max_expected(self):
        return max(row.simulated for row in self.rows)

    def to_records(self):
        return [row.to_dict() for row in self.rows]


def _verify(dist, checkpoints, tolerance):
    rows = []
    for point in checkpoints:
        case, tau, tau_range, closed_form = point[:4]
        row_tolerance = tolerance + (point[4] if len(point) > 4 else 0)
        simulated = expected_value_at_threshold(dist, tau)
        rows.append(CaseRow(case, tau, tau_range, closed_form, simulated, row_tolerance))
    table = VerificationTable(dist.kind, dist.epsilon, dist.parameters["delta"], tuple(rows), tolerance)
    bad = [row for row in rows if not row.agrees]
    if bad:
        raise VerificationError(
            f"{dist.kind}: {len(bad)} case rows disagree with their closed form "
            f"(worst {max(r.difference for r in bad):.3g})",
            table=table,
        )
    return table


def verify_thm32(epsilon):
    """
    Check the four tau-regimes of thm32 against their closed forms.

    Args:
        epsilon: Target eps in (0, 0.01].

    Returns:
        VerificationTable: Two checkpoints per case; exact agreement is expected.
    """
    dist = build_thm32(epsilon)
    d = dist.parameters["delta"]
    third = Fraction(1, 3)
    top = 2 * third + d
    case1 = Fraction(3, 7) + Fraction(4, 7) * d
    case2 = Fraction(3, 7)
    case3 = Fraction(3, 7) + Fraction(3, 7) * d
    case4 = Fraction(1, 7)
    checkpoints = [
        (1, Fraction(0), "[0, d]", case1),
        (1, d, "[0, d]", case1),
        (2, (d + third) / 2, "(d, 1/3]", case2),
        (2, third, "(d, 1/3]", case2),
        (3, Fraction(1, 2), "(1/3, 2/3+d]", case3),
        (3, top, "(1/3, 2/3+d]", case3),
        (4, (top + 1) / 2, "(2/3+d, 1]", case4),
        (4, Fraction(1), "(2/3+d, 1]", case4),
    ]
    return _verify(dist, checkpoints, EXACT_TOLERANCE)


def verify_thm34(epsilon, consts=None):
    """
    Check the four tau-regimes of thm34; the continuous branch is integrated by quadrature.

    The closed forms are exact on these parts of each regime only:

    - Case 1 on [0, d]. At tau = d the sequences with q > 1 - d start
      with a run item 1 - q < d, which is rejected; the row allows for
      that loss, x (-log(1 - d) - d) < x d^2.
    - Case 2 on [2d, q*], above every run item.
    - Case 3 on (q*, 1-q*].
    - Case 4 on grid points 1-q*+j*d of the arithmetic run. Between two
      grid points the expectation exceeds c by up to about x d / 2, so
      rows off the grid would only bound the best threshold.

    Args:
        epsilon: Target eps in (0, 0.01].
        consts (SolvedConstants): Solved q* and c*.

    Returns:
        VerificationTable: Checkpoint rows; agreement within 1e-7 plus the
        per-row allowance above.
    """
    dist = build_thm34(epsilon, consts)
    p = dist.parameters
    d, q, c, x, steps = p["delta"], p["q_star"], p["c_star"], p["x"], p["steps"]
    tail_loss = x * (-math.log1p(-d) - d)
    checkpoints = [
        (1, 0.0, "[0, d]", c + d * (1 - x)),
        (1, d, "[0, d]", c + d * (1 - x), tail_loss),
        (2, (d + q) / 2, "(d, q*]", c),
        (2, q, "(d, q*]", c),
        (3, 0.5, "(q*, 1-q*]", c + d * x),
        (3, 1 - q, "(q*, 1-q*]", c + d * x),
        (4, 1 - q + 2 * d, "(1-q*+d, 1] grid", c),
        (4, 1 - q + math.ceil(steps / 2) * d, "(1-q*+d, 1] grid", c),
        (4, 1.0, "(1-q*+d, 1] grid", c),
    ]
    return _verify(dist, checkpoints, QUADRATURE_TOLERANCE)


def default_alpha(epsilon):
    """Termination probability 1 - 12 eps / 7."""
    return 1 - Fraction(12, 7) * epsilon


def thm42_phase1(n_knapsacks, eps):
    return tuple(tuple(eps if t == j else Fraction(0) for j in range(n_knapsacks)) for t in range(n_knapsacks))


def thm42_phase2(perm):
    """Item r takes size 1 outside knapsacks perm[0..r-1] and 0 inside them."""
    n = len(perm)
    items = []
    for r in range(n):
        closed = set(perm[:r])
        items.append(tuple(Fraction(0) if j in closed else Fraction(1) for j in range(n)))
    return tuple(items)


def build_thm42(n_knapsacks, epsilon, alpha=None):
    """
    Upper-triangular multi-knapsack distribution.

    N diagonal eps-items arrive first. With probability alpha the sequence
    stops; otherwise N more items follow the upper-triangular pattern under
    a uniformly random permutation.

    Args:
        n_knapsacks (int): N in [2, 8].
        epsilon: eps in (0, 0.01].
        alpha: Termination probability; defaults to 1 - 12 eps / 7.

    Returns:
        AdversarialDistribution: 1 + N! branches over MultiInstance.
    """
    if not isinstance(n_knapsacks, int) or not 2 <= n_knapsacks <= MAX_THM42_KNAPSACKS:
        raise ArgumentError(f"N must be an integer in [2, {MAX_THM42_KNAPSACKS}], got {n_knapsacks!r}")
    eps = _as_epsilon(epsilon)
    alpha = default_alpha(eps) if alpha is None else Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ArgumentError(f"alpha must lie in [0, 1], got {alpha!r}")
    capacities = (Fraction(1),) * n_knapsacks
    phase1 = thm42_phase1(n_knapsacks, eps)
    branches = [
        Branch(alpha, MultiInstance(capacities, phase1), "terminated", n_knapsacks * eps, tuple(range(n_knapsacks)))
    ]
    perms = list(itertools.permutations(range(n_knapsacks)))
    share = (1 - alpha) / len(perms)
    for perm in perms:
        witness = (None,) * n_knapsacks + perm
        branches.append(
            Branch(
                share,
                MultiInstance(capacities, phase1 + thm42_phase2(perm)),
                "perm:" + "".join(str(j) for j in perm),
                Fraction(n_knapsacks),
                witness,
            )
        )
    params = {"N": n_knapsacks, "alpha_term": alpha}
    dist = AdversarialDistribution("thm42", eps, tuple(branches), None, params)
    return _check_mass(dist, EXACT_TOLERANCE)


def canonical_phase2_accepts(perm, e):
    """
    Phase-2 items placed when knapsacks 0..e-1 hold an eps-item.

    Each arriving item goes to the lowest-index empty knapsack where it
    takes size 1, and is skipped if there is none.
    """
    n = len(perm)
    empty = [j >= e for j in range(n)]
    accepted = 0
    for r in range(n):
        closed = set(perm[:r])
        target = next((j for j in range(n) if empty[j] and j not in closed), None)
        if target is not None:
            empty[target] = False
            accepted += 1
    return accepted


def simulated_phase2_accepts(perm, e, eps=Fraction(1, 1000)):
    """
    The same count through the combined policy: tau_j = 0 for j < e, 1 otherwise,
    with first-fit tie-breaking among equally large sizes.
    """
    n = len(perm)
    instance = MultiInstance((Fraction(1),) * n, thm42_phase1(n, eps) + thm42_phase2(perm))
    thresholds = tuple(0 if j < e else 1 for j in range(n))
    outcome = simulate_combined(instance, thresholds=thresholds, tie_break="first_fit")
    return sum(1 for j in outcome.assignment[n:] if j is not None)


@dataclass(frozen=True)
class Thm42Row:
    e: int
    histogram: dict
    phase2_total: int
    permutations: int
    ratio: Optional[Fraction] = None

    @property
    def expected_phase2(self):
        return Fraction(self.phase2_total, self.permutations)

    @property
    def expected_phase2_text(self):
        return f"{self.phase2_total}/{self.permutations}"

    def to_dict(self):
        out = {
            "e": self.e,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "expected_phase2": self.expected_phase2_text,
        }
        if self.ratio is not None:
            out["ratio"] = f"{self.ratio.numerator}/{self.ratio.denominator}"
            out["ratio_value"] = float(self.ratio)
        return out


@dataclass(frozen=True)
class Thm42Enumeration:
    n_knapsacks: int
    epsilon: Optional[Fraction]
    rows: tuple

    @property
    def best(self):
        scored = [row for row in self.rows if row.ratio is not None]
        return max(scored, key=lambda row: row.ratio) if scored else None

    @property
    def limit_bound(self):
        """Best ratio as eps -> 0."""
        return max(_limit_ratio(row, self.n_knapsacks) for row in self.rows)

    def to_dict(self):
        out = {"N": self.n_knapsacks, "rows": [row.to_dict() for row in self.rows]}
        if self.epsilon is not None:
            best = self.best
            out["best_e"] = best.e
            out["best_ratio"] = f"{best.ratio.numerator}/{best.ratio.denominator}"
        limit = self.limit_bound
        out["limit_bound"] = f"{limit.numerator}/{limit.denominator}"
        return out


def _limit_ratio(row, n):
    # eps -> 0 with alpha = 1 - 12 eps / 7: (7 e + 12 E2) / (7 N + 12 N)
    return (7 * row.e + 12 * row.expected_phase2) / (19 * n)


def thm42_ratio(e, expected_phase2, n_knapsacks, eps, alpha=None):
    """(e eps + (1 - alpha) E2) / (alpha N eps + (1 - alpha) N), exactly."""
    alpha = default_alpha(eps) if alpha is None else Fraction(alpha)
    numerator = e * eps + (1 - alpha) * expected_phase2
    denominator = alpha * n_knapsacks * eps + (1 - alpha) * n_knapsacks
    return numerator / denominator


def enumerate_thm42(n_knapsacks=4, epsilon=None):
    """
    Enumerate every permutation for each number e of accepted eps-items.

    Args:
        n_knapsacks (int): N in [2, 8].
        epsilon: When given, each row also carries its exact ratio and, for
            N = 4, the best ratio is checked against 35/(76 - 48 eps).

    Returns:
        Thm42Enumeration: Histogram of phase-2 acceptances per e.
    """
    if not isinstance(n_knapsacks, int) or not 2 <= n_knapsacks <= MAX_THM42_KNAPSACKS:
        raise ArgumentError(f"N must be an integer in [2, {MAX_THM42_KNAPSACKS}], got {n_knapsacks!r}")
    eps = _as_epsilon(epsilon) if epsilon is not None else None
    perms = list(itertools.permutations(range(n_knapsacks)))
    rows = []
    for e in range(n_knapsacks + 1):
        histogram = {}
        total = 0
        for perm in perms:
            accepted = canonical_phase2_accepts(perm, e)
            histogram[accepted] = histogram.get(accepted, 0) + 1
            total += accepted
        ratio = None
        if eps is not None:
            ratio = thm42_ratio(e, Fraction(total, len(perms)), n_knapsacks, eps)
        rows.append(Thm42Row(e, histogram, total, len(perms), ratio))
    result = Thm42Enumeration(n_knapsacks, eps, tuple(rows))

    if eps is not None and n_knapsacks == 4:
        expected = Fraction(35) / (76 - 48 * eps)
        if result.best.ratio != expected:
            raise VerificationError(
                f"thm42 best ratio {result.best.ratio} differs from 35/(76-48eps) = {expected}",
                table=result,
            )
    return result


def thm42_closed_forms(eps):
    """Printed per-e ratios for N = 4, e = 0..4."""
    eps = Fraction(eps)
    return {
        0: Fraction(67) / (152 - 96 * eps),
        1: Fraction(35) / (76 - 48 * eps),
        2: Fraction(35) / (76 - 48 * eps),
        3: Fraction(33) / (76 - 48 * eps),
        4: Fraction(28) / (76 - 48 * eps),
    }
