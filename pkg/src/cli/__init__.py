"""
CLI package initialization.
Exports the command registration functions and a unified registration entry point.
"""

from .reduction_commands import register_reduction_commands, cmd_reduce, cmd_check
from .simulation_commands import register_simulation_commands, cmd_simulate, cmd_compare
from .generator_commands import register_generator_commands, cmd_gen_central_spin

__all__ = [
    "register_reduction_commands",
    "register_simulation_commands",
    "register_generator_commands",
    "register_cli_commands",
    "cmd_reduce",
    "cmd_check",
    "cmd_simulate",
    "cmd_compare",
    "cmd_gen_central_spin"
]


def register_cli_commands(subparsers):
    """
    Register all subcommands with the top-level argument parser.

    Args:
        subparsers: Result of ArgumentParser.add_subparsers()
    """
    register_reduction_commands(subparsers)
    register_simulation_commands(subparsers)
    register_generator_commands(subparsers)
