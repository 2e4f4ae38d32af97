"""
Shared CLI helpers: argument types, tolerance overrides and report output.
"""

import argparse
import logging
from typing import Dict, List, Optional

import numpy as np

from ..services.model_io import write_json
from ..utils import ValidationError

logger = logging.getLogger(__name__)


def comma_list(value: str) -> List[str]:
    """'a,b , c' -> ['a', 'b', 'c']"""
    items = [item.strip() for item in value.split(",") if item.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def parse_times(value: Optional[str]) -> Optional[np.ndarray]:
    """Sample times as 'start:stop:num' or as an explicit comma-separated list."""
    if value is None:
        return None
    try:
        if ":" in value:
            start, stop, num = value.split(":")
            return np.linspace(float(start), float(stop), int(num))
        return np.array([float(t) for t in value.split(",")])
    except ValueError:
        raise ValidationError(f"Cannot parse sample times '{value}'; use start:stop:num or t1,t2,...",
                              details={"times": value})


def add_seed_argument(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=None, help="random seed (default: QMR_SEED or 1234)")


def add_tolerance_argument(parser: argparse.ArgumentParser):
    parser.add_argument("--tol", type=float, default=None,
                        help="numerical rank tolerance for orthonormalization and Krylov growth")


def tolerance_overrides(args: argparse.Namespace) -> Dict[str, float]:
    if getattr(args, "tol", None) is None:
        return {}
    return {"orth": args.tol, "krylov": args.tol}


def emit_report(text: str, report, path: Optional[str]):
    """Human text to stdout, JSON to the given path."""
    print(text, end="" if text.endswith("\n") else "\n")
    if path:
        write_json(path, report)
        logger.info(f"Report written to {path}")
