"""
Generator Commands
`gen-central-spin` writes a central-spin model file.
"""

import argparse
import json
import logging

from ..services import DISSIPATION_AXES, DISSIPATION_MODES, generate_central_spin, write_json
from ..utils import EXIT_OK, ValidationError

logger = logging.getLogger(__name__)


def _load_couplings(path):
    if path is None:
        return None, None
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"Cannot read couplings from {path}: {e}", details={"path": path})
    return data.get("J"), data.get("gammas")


def cmd_gen_central_spin(args: argparse.Namespace) -> int:
    J, gammas = _load_couplings(args.couplings)
    model = generate_central_spin(
        args.N, J=J, gammas=gammas, seed=args.seed, omega=args.omega, single_axis=args.single_axis,
        bath_dissipation=args.bath_dissipation, dissipation_axis=args.axis, dissipation_site=args.site)
    write_json(args.out, model)
    print(f"Central-spin model with N={args.N} (dim {model.dim}) written to {args.out}")
    return EXIT_OK


def register_generator_commands(subparsers):
    """Register the gen-central-spin subcommand."""
    gen = subparsers.add_parser("gen-central-spin", help="generate a central-spin model file")
    gen.add_argument("N", type=int, help="number of bath spins")
    gen.add_argument("--out", required=True, help="model output file")
    gen.add_argument("--seed", type=int, default=None, help="seed for the random couplings")
    gen.add_argument("--couplings", default=None,
                     help="JSON file with explicit 'J' ((N+1)x(N+1)) and 'gammas' (N)")
    gen.add_argument("--omega", type=float, default=0.0, help="free central-spin drift omega * Z0")
    gen.add_argument("--single-axis", action="store_true", help="omit the Z0 control channel")
    gen.add_argument("--bath-dissipation", choices=list(DISSIPATION_MODES), default=None,
                     help="add a controlled bath dissipation channel u2")
    gen.add_argument("--axis", choices=sorted(DISSIPATION_AXES), default="x", help="bath dissipation axis")
    gen.add_argument("--site", type=int, default=1, help="bath spin for local dissipation")
    gen.set_defaults(func=cmd_gen_central_spin)
