"""
Acceptance checks run by `main.py selftest`: solved constants, the 3/7 and
c* guarantees on random suites, the lower-bound certificates, the three
lower-bound constructions, the multi-knapsack 3/14 guarantee, the purse
example and the inventory experiment on synthetic data.
"""
import functools
import logging
import os
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from adversarial import (
    MASS_TOLERANCE,
    QUADRATURE_TOLERANCE,
    build_thm32,
    build_thm34,
    enumerate_thm42,
    max_ratio_over_thresholds,
    verify_thm32,
    verify_thm34,
)
from core import ItemSequence, simulate_greedy, simulate_two_bins
from evaluation import bound_certificate, expected_packed_exact
from exceptions import LabError, PreconditionError
from experiments import ExperimentConfig, emit_results, run_experiment, scaled_capacity, synth_generate
from multiknapsack import MultiInstance, guarantee_check
from optimum import opt_integer, opt_plus
from thresholds import cdf_f1, cdf_f2, solve_constants

logger = logging.getLogger(__name__)

SLACK = 1e-9
REPLICATION_ALPHA = 0.5
REPLICATION_SKUS = 25
PURSE_SIZES = (7, 18, 80, 41, 1, 30, 12, 17)
PURSE_INVENTORY = 208


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check; timings go to the log only so reruns print identical reports."""

    name: str
    passed: bool
    detail: str

    def to_dict(self):
        return {"check": self.name, "passed": self.passed, "detail": self.detail}


def random_sequences(rng, n, max_length):
    """Sizes uniform on (0, 1], lengths uniform on 1..max_length."""
    out = []
    for _ in range(n):
        length = int(rng.integers(1, max_length + 1))
        out.append(ItemSequence(tuple(float(s) for s in 1.0 - rng.random(length))))
    return out


def structured_sequences(rng, n, max_length):
    """Sequences whose total lands just above the capacity, where Greedy blocks late."""
    out = []
    for _ in range(n):
        length = int(rng.integers(2, max_length + 1))
        total = 1.0 + rng.uniform(0.0, 0.1)
        sizes = np.clip(rng.dirichlet(np.ones(length)) * total, 1e-9, 1.0)
        out.append(ItemSequence(tuple(float(s) for s in sizes)))
    return out


def rational_sequences(rng, n, max_length, denominator):
    """Sizes k/denominator with k uniform on 1..denominator."""
    out = []
    for _ in range(n):
        length = int(rng.integers(1, max_length + 1))
        numerators = rng.integers(1, denominator + 1, size=length)
        out.append(ItemSequence(tuple(Fraction(int(k), denominator) for k in numerators)))
    return out


def random_multi_instances(rng, n, max_knapsacks=3, max_items=8, zero_probability=0.3):
    out = []
    for _ in range(n):
        n_knapsacks = int(rng.integers(1, max_knapsacks + 1))
        n_items = int(rng.integers(1, max_items + 1))
        sizes = 1.0 - rng.random((n_items, n_knapsacks))
        sizes[rng.random((n_items, n_knapsacks)) < zero_probability] = 0.0
        capacities = (1.0,) * n_knapsacks
        out.append(MultiInstance(capacities, tuple(tuple(float(s) for s in row) for row in sizes)))
    return out


def _timed(name, fn):
    start = time.perf_counter()
    try:
        passed, detail = fn()
    except LabError as e:
        passed, detail = False, f"{type(e).__name__}: {e}"
    seconds = time.perf_counter() - start
    logger.info("%s: %s (%.2fs)", name, "pass" if passed else "FAIL", seconds)
    return CheckResult(name, passed, detail)


def run_selftest(config, seed=0):
    """
    Run every acceptance check.

    Args:
        config (SelftestConfig): Suite sizes.
        seed (int): Root seed of the random suites.

    Returns:
        list: CheckResult per check, in a fixed order.
    """
    consts = solve_constants()
    f1, f2 = cdf_f1(), cdf_f2(consts)
    streams = np.random.SeedSequence(seed).spawn(4)
    rng_float, rng_struct, rng_rational, rng_multi = (np.random.default_rng(s) for s in streams)
    floats = random_sequences(rng_float, config.single_sequences, config.max_length)
    floats += structured_sequences(rng_struct, config.structured_sequences, config.max_length)

    def constants():
        ok = abs(consts.q_star - 0.31847) < 1e-5 and abs(consts.c_star - 0.43236) < 1e-5
        return ok, f"q*={consts.q_star:.10f} c*={consts.c_star:.10f}"

    def three_sevenths():
        bad = sum(
            1
            for seq in floats
            if expected_packed_exact(seq, f1).expected_packed < 3 / 7 * float(opt_plus(seq).value) - SLACK
        )
        return bad == 0, f"{bad} violations in {len(floats)} sequences"

    def c_star():
        suite = rational_sequences(rng_rational, config.rational_sequences, config.max_length, config.denominator)
        bad = sum(
            1
            for seq in suite
            if expected_packed_exact(seq, f2).expected_packed < consts.c_star * float(opt_integer(seq).value) - SLACK
        )
        return bad == 0, f"{bad} violations in {len(suite)} sequences"

    def two_bins():
        bad = sum(
            1 for seq in floats if float(simulate_two_bins(seq).expected_packed) < 0.5 * float(opt_plus(seq).value) - SLACK
        )
        return bad == 0, f"{bad} violations in {len(floats)} sequences"

    def certificates():
        checked = bad = 0
        for seq in floats:
            try:
                cert = bound_certificate(seq, f1)
            except PreconditionError:
                continue
            checked += 1
            bad += not cert.holds
        return bad == 0, f"{bad} failures in {checked} blocking sequences"

    def thm32():
        details = []
        for eps in (Fraction(1, 1000), Fraction(1, 10000)):
            table = verify_thm32(eps)
            best = max_ratio_over_thresholds(build_thm32(eps))
            if best.ratio > float(Fraction(3, 7) + Fraction(4, 7) * eps) + SLACK:
                return False, f"max ratio {best.ratio} above 3/7 + 4eps/7 at eps={eps}"
            details.append(f"eps={eps}: max {float(table.max_expected):.9f}")
        return True, "; ".join(details)

    def thm34():
        eps = Fraction(1, 1000)
        dist = build_thm34(eps, consts)
        table = verify_thm34(eps, consts)
        p = dist.parameters
        cap = consts.c_star + p["delta"] * (1 - p["x"])
        mass_gap = abs(float(dist.total_mass) - 1.0)
        ok = mass_gap <= MASS_TOLERANCE and float(table.max_expected) <= cap + QUADRATURE_TOLERANCE
        worst = max(row.difference for row in table.rows)
        return ok, f"max {float(table.max_expected):.9f} vs {cap:.9f}; mass gap {mass_gap:.1e}; worst row {worst:.2e}"

    def thm42():
        result = enumerate_thm42(4, Fraction(1, 1000))
        histograms = {row.e: row.histogram for row in result.rows}
        ok = (
            histograms[0] == {2: 6, 3: 17, 4: 1}
            and histograms[1] == {2: 16, 3: 8}
            and histograms[2] == {1: 6, 2: 18}
            and result.limit_bound == Fraction(35, 76)
        )
        texts = ", ".join(row.expected_phase2_text for row in result.rows[:3])
        return ok, f"{texts}; bound {result.limit_bound}"

    def multi():
        instances = random_multi_instances(rng_multi, config.multi_instances)
        reports = [guarantee_check(inst, f1) for inst in instances]
        below = [r for r in reports if r.ratio < 3 / 14 - SLACK]
        broken = sum(1 for r in reports if not r.routing_half_holds)
        bad = sum(1 for r in below if r.routing_half_holds)
        detail = f"{len(below)} below 3/14 in {len(instances)} instances ({bad} with routing keeping half); "
        return bad == 0, detail + f"routing lost half of OPT in {broken}"

    def purse():
        seq = ItemSequence.from_units(PURSE_SIZES, PURSE_INVENTORY // 2)
        fcfs = simulate_greedy(seq).packed_total
        opt = opt_integer(seq).value
        return (fcfs, opt) == (97, 104), f"FCFS {fcfs}, OPT {opt}"

    @functools.lru_cache(maxsize=None)
    def synthetic():
        return synth_generate(config.synthetic_skus, config.synthetic_warehouses, seed)

    def fcfs_full_inventory():
        dataset = synthetic()
        result = run_experiment(dataset, ExperimentConfig(alpha_grid=(1.0,), policies=("fcfs",), seed=seed))
        worst = float(result.per_sku["ratio"].min())
        return worst == 1.0, f"min FCFS ratio {worst:.10f} over {dataset.n_skus} SKUs"

    def threshold_on_truncation_tight_streams():
        dataset = synthetic()
        checked = bad = 0
        for sku in dataset.skus:
            for stream in dataset.streams(sku):
                cap = scaled_capacity(stream.inventory, REPLICATION_ALPHA)
                if cap == 0 or not stream.sizes:
                    continue
                seq = ItemSequence.from_units(stream.sizes, cap)
                opt = opt_integer(seq).value
                if opt != opt_plus(seq).value:
                    continue
                checked += 1
                bad += expected_packed_exact(seq, f1).expected_packed < 3 / 7 * opt - SLACK
        return bad == 0, f"{bad} violations in {checked} streams with OPT = OPT+ at alpha {REPLICATION_ALPHA}"

    def reproducible_results():
        subset = synth_generate(min(config.synthetic_skus, REPLICATION_SKUS), config.synthetic_warehouses, seed)
        settings = ExperimentConfig(alpha_grid=(0.5, 1.0), n_permutations=20, seed=seed)
        contents = []
        with tempfile.TemporaryDirectory() as root:
            for run in ("first", "second"):
                written = emit_results(run_experiment(subset, settings), os.path.join(root, run))
                contents.append({kind: Path(path).read_bytes() for kind, path in written.items()})
        return contents[0] == contents[1], f"{len(contents[0])} result files compared byte by byte"

    checks = [
        ("constants", constants),
        ("three_sevenths_guarantee", three_sevenths),
        ("c_star_guarantee", c_star),
        ("two_bins_guarantee", two_bins),
        ("certificates", certificates),
        ("thm32_tightness", thm32),
        ("thm34_tightness", thm34),
        ("thm42_enumeration", thm42),
        ("multi_knapsack_guarantee", multi),
        ("purse_example", purse),
        ("fcfs_full_inventory", fcfs_full_inventory),
        ("threshold_on_tight_streams", threshold_on_truncation_tight_streams),
        ("reproducible_results", reproducible_results),
    ]
    return [_timed(name, fn) for name, fn in checks]
