"""
Reduction Commands
`reduce` builds a certified reduced model; `check` evaluates the sufficient
reducibility conditions without reducing.
"""

import argparse
import logging

from ..models import ReductionPath
from ..services import get_reduction_service, get_report_renderer, parse_model, write_json
from ..utils import EXIT_CERTIFICATE, EXIT_OK, ErrorContext, measure_performance
from .common import add_seed_argument, add_tolerance_argument, comma_list, emit_report, tolerance_overrides

logger = logging.getLogger(__name__)

# "frame" and "drift" are accepted as names for checks 3 and 4
CHECKS = {"3": "3", "4": "4", "frame": "3", "drift": "4"}


@measure_performance
def cmd_reduce(args: argparse.Namespace) -> int:
    with ErrorContext("cmd_reduce", {"model": args.model, "path": args.path}):
        parsed = parse_model(args.model).select_observables(args.obs)
        outcome = get_reduction_service().reduce(parsed, args.path, seed=args.seed, perturbations=args.perturb,
                                                 tolerances=tolerance_overrides(args))
        out = args.out or args.model.rsplit(".json", 1)[0] + ".reduced.json"
        write_json(out, outcome.document)
        logger.info(f"Reduced model written to {out}")
        emit_report(get_report_renderer().render_reduction(outcome.report), outcome.report, args.report)
    return EXIT_OK if outcome.passed else EXIT_CERTIFICATE


@measure_performance
def cmd_check(args: argparse.Namespace) -> int:
    with ErrorContext("cmd_check", {"model": args.model}):
        parsed = parse_model(args.model).select_observables(args.obs)
        props = set(args.props)
        outcome = get_reduction_service().check(parsed, perturbations=args.split, frame="3" in props,
                                                drift="4" in props, seed=args.seed,
                                                tolerances=tolerance_overrides(args))
        emit_report(get_report_renderer().render_check(outcome.report), outcome.report, args.report)
    return EXIT_OK


def _props(value: str):
    props = comma_list(value)
    unknown = [item for item in props if item not in CHECKS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown checks {unknown}; use 3 (frame algebra), 4 (drift reduction) or both")
    return sorted({CHECKS[item] for item in props})


def register_reduction_commands(subparsers):
    """Register the reduce and check subcommands."""
    reduce_parser = subparsers.add_parser("reduce", help="reduce a model onto its observable algebra")
    reduce_parser.add_argument("model", help="model JSON file")
    reduce_parser.add_argument("--obs", type=comma_list, default=None,
                               help="comma-separated observable labels (default: all)")
    reduce_parser.add_argument("--path", choices=[p.value for p in ReductionPath], default=ReductionPath.AUTO.value,
                               help="algebra to project onto")
    reduce_parser.add_argument("--perturb", type=comma_list, default=None,
                               help="channels treated as perturbations by the drift path (default: all)")
    reduce_parser.add_argument("--out", default=None, help="reduced-model output file")
    reduce_parser.add_argument("--report", default=None, help="JSON report output file")
    add_seed_argument(reduce_parser)
    add_tolerance_argument(reduce_parser)
    reduce_parser.set_defaults(func=cmd_reduce)

    check_parser = subparsers.add_parser("check", help="sufficient reducibility checks")
    check_parser.add_argument("model", help="model JSON file")
    check_parser.add_argument("--obs", type=comma_list, default=None,
                              help="comma-separated observable labels (default: all)")
    check_parser.add_argument("--props", type=_props, default=["3", "4"],
                              help="checks to run: 3 (frame algebra verdict), 4 (drift reduction check); frame and drift are aliases")
    check_parser.add_argument("--split", type=comma_list, default=None,
                              help="channels designated as perturbations for the drift check (default: all)")
    check_parser.add_argument("--report", default=None, help="JSON report output file")
    add_seed_argument(check_parser)
    add_tolerance_argument(check_parser)
    check_parser.set_defaults(func=cmd_check)
