"""
Simulation Commands
`simulate` writes expectation trajectories; `compare` checks a reduced model
against its source on seeded random states and schedules.
"""

import argparse
import logging

from ..models import OutputFormat
from ..services import (
    get_report_renderer,
    get_simulation_service,
    load_reduced_model,
    parse_model,
    parse_schedule,
    parse_state,
    write_trajectories,
)
from ..utils import EXIT_CERTIFICATE, EXIT_OK, ErrorContext, measure_performance
from .common import add_seed_argument, comma_list, emit_report, parse_times

logger = logging.getLogger(__name__)


@measure_performance
def cmd_simulate(args: argparse.Namespace) -> int:
    with ErrorContext("cmd_simulate", {"model": args.model}):
        service = get_simulation_service()
        target = service.load_target(args.model)
        schedule = parse_schedule(args.schedule)
        rho = parse_state(args.state)
        trajectories = service.simulate(target, schedule, rho, observables=args.obs,
                                        sample_times=parse_times(args.times), num_samples=args.samples)
        path = write_trajectories(args.out, trajectories, args.format)
        print(f"Wrote {len(trajectories.times)} samples of {', '.join(trajectories.series)} to {path}")
    return EXIT_OK


@measure_performance
def cmd_compare(args: argparse.Namespace) -> int:
    with ErrorContext("cmd_compare", {"model": args.model, "reduced": args.reduced}):
        parsed = parse_model(args.model)
        reduced = load_reduced_model(args.reduced)
        report, _ = get_simulation_service().compare(
            parsed, reduced, num_states=args.states, num_schedules=args.schedules, num_segments=args.segments,
            num_samples=args.samples, seed=args.seed, tolerance=args.tol, observables=args.obs,
            segment_duration=args.duration, analytic=args.analytic, max_workers=args.workers)
        emit_report(get_report_renderer().render_comparison(report), report, args.report)
    return EXIT_OK if report.passed else EXIT_CERTIFICATE


def register_simulation_commands(subparsers):
    """Register the simulate and compare subcommands."""
    sim = subparsers.add_parser("simulate", help="expectation trajectories under a control schedule")
    sim.add_argument("model", help="model or reduced-model JSON file")
    sim.add_argument("--schedule", required=True, help="schedule JSON file")
    sim.add_argument("--state", required=True, help="state JSON file")
    sim.add_argument("--obs", type=comma_list, default=None, help="observable labels (default: all)")
    sim.add_argument("--times", default=None, help="sample times: start:stop:num or t1,t2,...")
    sim.add_argument("--samples", type=int, default=None, help="number of evenly spaced samples")
    sim.add_argument("--out", required=True, help="trajectory output file")
    sim.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)
    sim.set_defaults(func=cmd_simulate)

    cmp_parser = subparsers.add_parser("compare", help="full versus reduced trajectories")
    cmp_parser.add_argument("model", help="model JSON file")
    cmp_parser.add_argument("reduced", help="reduced-model JSON file")
    cmp_parser.add_argument("--schedules", type=int, default=None, help="number of random schedules")
    cmp_parser.add_argument("--states", type=int, default=None, help="number of random mixed states")
    cmp_parser.add_argument("--segments", type=int, default=None, help="segments per schedule")
    cmp_parser.add_argument("--samples", type=int, default=None, help="sample times per schedule")
    cmp_parser.add_argument("--duration", type=float, default=None, help="mean segment duration")
    cmp_parser.add_argument("--tol", type=float, default=None, help="deviation tolerance")
    cmp_parser.add_argument("--obs", type=comma_list, default=None, help="observable labels (default: all)")
    cmp_parser.add_argument("--analytic", action="store_true",
                            help="also compare central-spin models against the analytic block oracle")
    cmp_parser.add_argument("--workers", type=int, default=None, help="worker threads")
    cmp_parser.add_argument("--report", default=None, help="JSON report output file")
    add_seed_argument(cmp_parser)
    cmp_parser.set_defaults(func=cmd_compare)
