"""
Expected packing of randomized threshold policies, competitive ratios, and
the lower-bound certificates used in the 3/7 analysis.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from core import classify_items, simulate_greedy, simulate_size_threshold, simulate_two_bins
from exceptions import ArgumentError, PreconditionError
from optimum import opt_integer, opt_plus
from thresholds import cdf_coin

logger = logging.getLogger(__name__)

CERTIFICATE_SLACK = 1e-9
FLOAT_MARGIN = 1e-12
MC_CHUNK = 10_000


@dataclass(frozen=True)
class Breakpoint:
    """Thresholds in (lower, upper] (the atom row has lower == upper == 0) all pack `packed`."""

    lower: float
    upper: float
    packed: object
    mass: float


@dataclass(frozen=True)
class ExpectationReport:
    expected_packed: float
    method: str
    breakpoints: tuple = ()
    samples: int = None
    std_error: float = None

    def to_dict(self):
        out = {"expected_packed": self.expected_packed, "method": self.method}
        if self.breakpoints:
            out["breakpoints"] = [
                {"lower": b.lower, "upper": b.upper, "packed": float(b.packed), "mass": b.mass}
                for b in self.breakpoints
            ]
        if self.samples is not None:
            out["samples"] = self.samples
            out["std_error"] = self.std_error
        return out


def _threshold_classes(seq):
    """Distinct sizes that are at most the capacity, ascending, with their normalized values."""
    sizes = sorted(s for s in set(seq.sizes) if s <= seq.capacity)
    return sizes, [float(seq.normalized(s)) for s in sizes]


def expected_packed_exact(seq, F):
    """
    Integrate the packing of THR(tau) against the threshold distribution F.

    Packing is constant for tau in (a, b] between consecutive normalized
    sizes, so the run at the admission size b represents the interval.

    Args:
        seq (ItemSequence): A nonempty sequence.
        F (ThresholdCdf): Threshold distribution.

    Returns:
        ExpectationReport: Expected packed size (in the sequence's units).
    """
    if len(seq) == 0:
        raise ArgumentError("expected_packed_exact needs a nonempty sequence")
    rows = []
    prev_ratio, prev_f = 0.0, F(0)
    rows.append(Breakpoint(0.0, 0.0, simulate_greedy(seq).packed_total, prev_f))
    sizes, ratios = _threshold_classes(seq)
    for size, ratio in zip(sizes, ratios):
        f_ratio = F(ratio)
        packed = simulate_size_threshold(seq, size).packed_total
        rows.append(Breakpoint(prev_ratio, ratio, packed, f_ratio - prev_f))
        prev_ratio, prev_f = ratio, f_ratio
    if prev_ratio < 1:
        rows.append(Breakpoint(prev_ratio, 1.0, 0, 1.0 - prev_f))
    expected = math.fsum(float(row.packed) * row.mass for row in rows)
    return ExpectationReport(expected, "exact", tuple(rows))


def _mc_chunk(seq, F, sizes, ratios, seed_seq, n):
    rng = np.random.default_rng(seed_seq)
    taus = F.sample_many(rng, n)
    classes = np.searchsorted(np.asarray(ratios), taus, side="left")
    packed_by_class = {}
    for cls in np.unique(classes):
        if cls < len(sizes):
            packed_by_class[cls] = float(simulate_size_threshold(seq, sizes[cls]).packed_total)
        else:
            packed_by_class[cls] = 0.0
    return np.array([packed_by_class[c] for c in classes], dtype=float)


def expected_packed_mc(seq, F, n_samples, seed, workers=1):
    """
    Monte Carlo estimate of the expected packing.

    Samples are drawn in fixed-size chunks, each from its own spawned seed,
    so the estimate depends only on (seed, n_samples).

    Args:
        seq (ItemSequence): A nonempty sequence.
        F (ThresholdCdf): Threshold distribution.
        n_samples (int): Number of thresholds to draw (>= 1).
        seed (int): Root seed.
        workers (int): Threads used to evaluate chunks.

    Returns:
        ExpectationReport: Sample mean and its standard error.
    """
    if n_samples < 1:
        raise ArgumentError(f"n_samples must be >= 1, got {n_samples!r}")
    if len(seq) == 0:
        raise ArgumentError("expected_packed_mc needs a nonempty sequence")
    sizes, ratios = _threshold_classes(seq)
    n_chunks = math.ceil(n_samples / MC_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    counts = [min(MC_CHUNK, n_samples - i * MC_CHUNK) for i in range(n_chunks)]

    def job(i):
        return _mc_chunk(seq, F, sizes, ratios, seeds[i], counts[i])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(n_chunks)))
    else:
        parts = [job(i) for i in range(n_chunks)]
    values = np.concatenate(parts)
    std_error = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return ExpectationReport(float(values.mean()), "monte_carlo", (), n_samples, std_error)


@dataclass(frozen=True)
class CompetitiveReport:
    expected_packed: float
    opt_plus: object
    opt: object
    ratio_vs_opt_plus: float
    ratio_vs_opt: float

    def to_dict(self):
        out = asdict(self)
        out["opt_plus"] = float(self.opt_plus)
        out["opt"] = float(self.opt)
        return out


def performance_ratio(value, optimum):
    """value / optimum, with 1 when nothing can be packed at all."""
    if optimum == 0:
        return 1.0
    return float(value) / float(optimum)


def competitive_report(seq, F):
    """Expected packing of F against both offline optima."""
    expected = expected_packed_exact(seq, F).expected_packed
    plus = opt_plus(seq).value
    opt = opt_integer(seq).value
    return CompetitiveReport(
        expected, plus, opt, performance_ratio(expected, plus), performance_ratio(expected, opt)
    )


def two_bins_report(seq):
    expected = float(simulate_two_bins(seq).expected_packed)
    plus = opt_plus(seq).value
    opt = opt_integer(seq).value
    return CompetitiveReport(
        expected, plus, opt, performance_ratio(expected, plus), performance_ratio(expected, opt)
    )


@dataclass(frozen=True)
class BoundCertificate:
    """
    Lower bounds from the 3/7 analysis for one sequence, in capacity units.

    q is the largest threshold for which m still cannot fit next to the
    items of G' that THR(q) would keep; those items total n*q + x.
    """

    m: float
    q: float
    g_prime: float
    n: int
    x: float
    nq_plus_x: float
    bound_small_m: float
    bound_large_m: float
    applicable_bound: float
    expected_packed: float
    holds: bool

    def to_dict(self):
        return asdict(self)


def _exceeds(value, capacity, exact):
    if exact:
        return value > capacity
    return value > capacity + FLOAT_MARGIN


def bound_certificate(seq, F):
    """
    Evaluate the small-m and large-m lower bounds against the exact expectation.

    Args:
        seq (ItemSequence): A sequence on which Greedy blocks something.
        F (ThresholdCdf): Threshold distribution.

    Returns:
        BoundCertificate: Both bounds and whether the applicable one holds.
    """
    blockage = classify_items(seq, simulate_greedy(seq))
    if blockage.is_empty:
        raise PreconditionError("Greedy packs every item; it is optimal and the certificate is undefined")
    cap, exact = seq.capacity, seq.exact
    m = blockage.m
    if m > cap:
        raise PreconditionError("every blocked item exceeds the capacity; Greedy is optimal")

    g_sizes = [seq.sizes[t] for t in blockage.g_prime_indices]
    candidates = sorted(set(g_sizes), reverse=True)
    q = candidates[-1]
    for cand in candidates:
        if _exceeds(m + sum(s for s in g_sizes if s >= cand), cap, exact):
            q = cand
            break
    n = sum(1 for s in g_sizes if s == q)
    x = sum((s for s in g_sizes if s > q), 0)

    m_n = float(seq.normalized(m))
    q_n = float(seq.normalized(q))
    f0, fm, fq = F(0), F(m_n), F(q_n)
    small = f0 * (1 - m_n) + (fm - f0) * min(m_n, 1 - m_n)
    large = fq * q_n + (1 - fq) * (1 - q_n)
    applicable = small if m_n < 0.5 else large
    expected = float(seq.normalized(expected_packed_exact(seq, F).expected_packed))
    holds = expected >= applicable - CERTIFICATE_SLACK
    if not holds:
        logger.warning("certificate fails for %s: %.12g < %.12g", F.name, expected, applicable)
    return BoundCertificate(
        m_n,
        q_n,
        float(seq.normalized(blockage.g_prime)),
        n,
        float(seq.normalized(x)),
        float(seq.normalized(n * q + x)),
        small,
        large,
        applicable,
        expected,
        holds,
    )


def guarantee_lower_bound(name, consts=None):
    """
    Proven worst-case ratio of a named policy.

    Args:
        name (str): f1 and coin (against OPT+), f2 (against OPT) or twobins (against OPT+).
        consts (SolvedConstants): Needed for f2.

    Returns:
        float: The guaranteed ratio.
    """
    if name == "f1":
        return 3 / 7
    if name == "f2":
        if consts is None:
            raise ArgumentError("the f2 guarantee needs solved constants")
        return consts.c_star
    if name == "twobins":
        return 0.5
    if name == "coin":
        return 1 / 3
    raise ArgumentError(f"no proven guarantee for {name!r}")


def simple_coin_bound(seq):
    """
    The coin-flip warm-up policy (Greedy w.p. 2/3, THR(1/2) w.p. 1/3) against OPT+.

    Returns:
        tuple: (expected packed, OPT+, whether expected >= OPT+/3).
    """
    expected = expected_packed_exact(seq, cdf_coin()).expected_packed
    plus = float(opt_plus(seq).value)
    return expected, plus, expected >= plus / 3 - CERTIFICATE_SLACK
