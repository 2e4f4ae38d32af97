"""Utils package initialization."""

from .helpers import (
    generate_run_id,
    format_timestamp,
    make_rng,
    Timer,
    measure_performance,
    ensure_parent_directory
)

from .exceptions import (
    # Custom Exceptions
    QMRException,
    ConfigurationError,
    ValidationError,
    DimensionMismatchError,
    ScheduleError,
    CertificateError,
    AlgebraDecompositionError,
    ConvergenceError,

    # Exit codes
    EXIT_OK,
    EXIT_FAILURE,
    EXIT_VALIDATION,
    EXIT_CERTIFICATE,
    EXIT_CONVERGENCE,
    exit_code_for,

    # Decorators
    service_error_handler,

    # Utilities
    ErrorContext,
    build_error_response,
    validate_and_raise
)

__all__ = [
    # Helper functions
    "generate_run_id",
    "format_timestamp",
    "make_rng",
    "Timer",
    "measure_performance",
    "ensure_parent_directory",

    # Exceptions
    "QMRException",
    "ConfigurationError",
    "ValidationError",
    "DimensionMismatchError",
    "ScheduleError",
    "CertificateError",
    "AlgebraDecompositionError",
    "ConvergenceError",

    # Exit codes
    "EXIT_OK",
    "EXIT_FAILURE",
    "EXIT_VALIDATION",
    "EXIT_CERTIFICATE",
    "EXIT_CONVERGENCE",
    "exit_code_for",

    # Error handling
    "service_error_handler",
    "ErrorContext",
    "build_error_response",
    "validate_and_raise"
]
