import argparse
import json
import logging
import sys

import pandas as pd

from adversarial import (
    build_thm32,
    build_thm34,
    build_thm42,
    enumerate_thm42,
    sample_sequences,
    thm42_closed_forms,
    verify_thm32,
    verify_thm34,
)
from config_util import (
    get_experiment_config,
    get_mc_samples,
    get_seed,
    get_selftest_config,
    get_solver_tol,
    get_synthetic_config,
    get_synthetic_scale,
    get_threads,
    read_props,
)
from core import ItemSequence, simulate_two_bins
from evaluation import bound_certificate, competitive_report, expected_packed_mc, two_bins_report
from exceptions import INTERNAL_ERRORS, VALIDATION_ERRORS, ArgumentError
from experiments import emit_results, load_dataset, run_experiment
from multiknapsack import (
    TWO_BINS,
    MultiInstance,
    guarantee_check,
    policy_name,
    simulate_combined,
    simulate_combined_two_bins,
)
from selftest import run_selftest
from tables import getConstructions, getThresholdCdfs
from thresholds import cdf_by_name, solve_constants

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INTERNAL = 2


class LabArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the validation code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = LabArgumentParser(
        description="Online knapsack threshold-policy lab",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    parser.add_argument("--seed", type=int, default=None, help="root seed (default from properties)")
    output = parser.add_mutually_exclusive_group()
    output.add_argument("--json", dest="fmt", action="store_const", const="json", help="JSON output (default)")
    output.add_argument("--csv", dest="fmt", action="store_const", const="csv", help="CSV output")
    parser.set_defaults(fmt="json")
    parser.add_argument("--threads", type=int, default=None, help="worker threads")
    parser.add_argument("--config", default=None, help="properties file (default properties/lab_props.ini)")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="-v info, -vv debug")

    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    constants = sub.add_parser("constants", help="solve q* and c*")
    constants.add_argument("--tol", type=float, default=None)

    evaluate = sub.add_parser("evaluate", help="expected packing of a threshold distribution on one sequence")
    evaluate.add_argument("--cdf", default="f1", help=f"one of {', '.join(getThresholdCdfs())}, fixed:<tau>, twobins")
    source = evaluate.add_mutually_exclusive_group(required=True)
    source.add_argument("--seq", help="comma separated sizes, e.g. 0.5,0.6 or 1/3,2/3")
    source.add_argument("--seq-file", help="file with comma or newline separated sizes")
    evaluate.add_argument("--capacity", type=int, default=None, help="integer capacity; sizes become integer units")
    evaluate.add_argument(
        "--mc", type=int, nargs="?", const=0, default=None, metavar="N",
        help="also estimate by Monte Carlo (N samples, default from properties)",
    )
    evaluate.add_argument("--certificate", action="store_true", help="report the lower-bound certificate")

    adversary = sub.add_parser("adversary", help="build and verify a lower-bound construction")
    adversary.add_argument("--construction", choices=getConstructions(), required=True)
    adversary.add_argument("--epsilon", default="0.001")
    adversary.add_argument("--emit", choices=["table", "samples", "json"], default="table")
    adversary.add_argument("--samples", type=int, default=10)
    adversary.add_argument("--knapsacks", type=int, default=4, help="N for thm42")

    multi = sub.add_parser("multi", help="greedy routing + per-knapsack threshold or TwoBins policy")
    instance = multi.add_mutually_exclusive_group(required=True)
    instance.add_argument("--instance", help="JSON file with capacities and items")
    instance.add_argument("--instance-json", help="inline JSON instance")
    multi.add_argument("--cdf", default="f1", help="threshold distribution per knapsack, or twobins")
    multi.add_argument("--shared-draw", action="store_true", help="one uniform draw for every knapsack")
    multi.add_argument("--check", action="store_true", help="compare the expected total with the exhaustive optimum")

    experiment = sub.add_parser("experiment", help="inventory rescaling sweep over order data")
    experiment.add_argument("--orders")
    experiment.add_argument("--inventory")
    experiment.add_argument("--synthetic", action="store_true")
    experiment.add_argument("--n-skus", type=int, default=None)
    experiment.add_argument("--n-warehouses", type=int, default=None)
    experiment.add_argument("--alphas", default=None, help="comma separated scaling factors in (0, 1]")
    experiment.add_argument("--permutations", type=int, default=None)
    experiment.add_argument("--policies", default=None, help="comma separated policy names")
    experiment.add_argument("--out-dir", default=None)

    selftest = sub.add_parser("selftest", help="run the acceptance checks")
    selftest.add_argument("--scale", type=float, default=1.0, help="multiply suite sizes")
    return parser


def emit(payload, fmt, records=None):
    """Print payload as sorted JSON, or records as CSV."""
    if fmt == "csv" and records is not None:
        pd.DataFrame(records).to_csv(sys.stdout, index=False, lineterminator="\n")
    else:
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n")


def _read_sequence(args):
    text = args.seq
    if args.seq_file:
        try:
            with open(args.seq_file) as f:
                text = f.read()
        except OSError as e:
            raise ArgumentError(f"cannot read {args.seq_file}: {e}")
    return ItemSequence.parse(text, args.capacity)


def run_constants(args, config):
    tol = args.tol if args.tol is not None else get_solver_tol(config)
    consts = solve_constants(tol)
    payload = consts.to_dict()
    emit(payload, args.fmt, [payload])


def run_evaluate(args, config, seed):
    seq = _read_sequence(args)
    if args.cdf == "twobins":
        report = two_bins_report(seq)
        outcome = simulate_two_bins(seq)
        payload = {"policy": "twobins", **report.to_dict(), "heads": float(outcome.heads.packed_total),
                   "tails": float(outcome.tails.packed_total)}
        emit(payload, args.fmt, [payload])
        return
    F = cdf_by_name(args.cdf)
    payload = {"policy": F.name, **competitive_report(seq, F).to_dict()}
    if args.mc is not None:
        n_samples = args.mc or get_mc_samples(config)
        mc = expected_packed_mc(seq, F, n_samples, seed, workers=args.threads)
        payload["monte_carlo"] = mc.to_dict()
    if args.certificate:
        payload["certificate"] = bound_certificate(seq, F).to_dict()
    flat = {k: v for k, v in payload.items() if not isinstance(v, dict)}
    emit(payload, args.fmt, [flat])


def run_adversary(args, seed):
    name = args.construction
    if args.emit == "samples":
        builders = {
            "thm32": lambda: build_thm32(args.epsilon),
            "thm34": lambda: build_thm34(args.epsilon),
            "thm42": lambda: build_thm42(args.knapsacks, args.epsilon),
        }
        dist = builders[name]()
        records = []
        for i, r in enumerate(sample_sequences(dist, args.samples, seed)):
            seq = r.sequence
            sizes = [list(map(float, vec)) for vec in seq.items] if isinstance(seq, MultiInstance) else list(map(float, seq.sizes))
            records.append({"sample": i, "label": r.label, "q": r.parameter, "items": len(sizes), "sizes": sizes})
        emit({"construction": name, "samples": records}, args.fmt,
             [{k: v for k, v in rec.items() if k != "sizes"} for rec in records])
        return

    if name == "thm42":
        result = enumerate_thm42(args.knapsacks, args.epsilon)
        payload = {"construction": name, **result.to_dict()}
        if args.knapsacks == 4:
            closed = thm42_closed_forms(result.epsilon)
            payload["closed_form_ratios"] = {str(e): f"{r.numerator}/{r.denominator}" for e, r in closed.items()}
        if args.emit == "json":
            payload["distribution"] = build_thm42(args.knapsacks, args.epsilon).to_dict()
        records = [
            {"e": row.e, "expected_phase2": row.expected_phase2_text,
             "ratio": float(row.ratio), "bound": payload["limit_bound"]}
            for row in result.rows
        ]
        emit(payload, args.fmt, records)
        return

    table = verify_thm32(args.epsilon) if name == "thm32" else verify_thm34(args.epsilon)
    payload = {
        "construction": name,
        "epsilon": float(table.epsilon),
        "effective_epsilon": float(table.effective_epsilon),
        "max_expected": float(table.max_expected),
        "rows": table.to_records(),
    }
    if args.emit == "json":
        dist = build_thm32(args.epsilon) if name == "thm32" else build_thm34(args.epsilon)
        payload["distribution"] = dist.to_dict()
    emit(payload, args.fmt, table.to_records())


def run_multi(args, seed):
    text = args.instance_json
    if args.instance:
        try:
            with open(args.instance) as f:
                text = f.read()
        except OSError as e:
            raise ArgumentError(f"cannot read {args.instance}: {e}")
    instance = MultiInstance.from_json(text)
    if args.cdf == TWO_BINS:
        policy = TWO_BINS
        outcome = simulate_combined_two_bins(instance, seed=seed)
    else:
        policy = cdf_by_name(args.cdf)
        outcome = simulate_combined(instance, cdfs=policy, seed=seed, shared_draw=args.shared_draw)
    payload = {"policy": policy_name(policy), "outcome": outcome.to_dict()}
    if args.check:
        payload["guarantee"] = guarantee_check(instance, policy).to_dict()
    records = [{"knapsack": j, "packed": float(p)} for j, p in enumerate(outcome.packed)]
    for record, tau in zip(records, outcome.thresholds):
        record["threshold"] = float(tau)
    for record, heads in zip(records, outcome.coins):
        record["coin"] = "heads" if heads else "tails"
    emit(payload, args.fmt, records)


def run_experiment_command(args, config, seed):
    n_skus, n_warehouses = get_synthetic_scale(config)
    dataset = load_dataset(
        args.orders,
        args.inventory,
        synthetic=args.synthetic,
        n_skus=args.n_skus or n_skus,
        n_warehouses=args.n_warehouses or n_warehouses,
        seed=seed,
        synthetic_config=get_synthetic_config(config),
    )
    overrides = {
        "seed": seed,
        "threads": args.threads,
        "n_permutations": args.permutations,
        "alpha_grid": tuple(float(a) for a in args.alphas.split(",")) if args.alphas else None,
        "policies": tuple(p.strip() for p in args.policies.split(",")) if args.policies else None,
    }
    exp_config = get_experiment_config(config, **overrides)
    results = run_experiment(dataset, exp_config)
    if args.out_dir:
        written = emit_results(results, args.out_dir)
        emit({"written": written, "warnings": len(results.warnings)}, "json")
        return
    emit(
        {"aggregate_mean": results.aggregate_mean.to_dict(orient="records"),
         "aggregate_min": results.aggregate_min.to_dict(orient="records")},
        args.fmt,
        results.per_sku.to_dict(orient="records"),
    )


def run_selftest_command(args, config, seed):
    checks = run_selftest(get_selftest_config(config, args.scale), seed)
    records = [c.to_dict() for c in checks]
    if args.fmt == "csv":
        emit(None, "csv", records)
    else:
        print(pd.DataFrame(records).to_string(index=False))
    return all(c.passed for c in checks)


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        config = read_props(args.config)
        seed = args.seed if args.seed is not None else get_seed(config)
        if args.threads is None:
            args.threads = get_threads(config)
        if args.command == "constants":
            run_constants(args, config)
        elif args.command == "evaluate":
            run_evaluate(args, config, seed)
        elif args.command == "adversary":
            run_adversary(args, seed)
        elif args.command == "multi":
            run_multi(args, seed)
        elif args.command == "experiment":
            run_experiment_command(args, config, seed)
        elif args.command == "selftest":
            if not run_selftest_command(args, config, seed):
                logger.error("selftest failed")
                return EXIT_INTERNAL
    except VALIDATION_ERRORS as e:
        logger.error("%s", e)
        return EXIT_VALIDATION
    except INTERNAL_ERRORS as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_INTERNAL
    except OSError as e:
        logger.error("%s", e)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
