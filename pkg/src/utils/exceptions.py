"""
Exception handling utilities for qmr.
Custom exceptions, error handling decorators and the CLI exit-code contract.
"""

import logging
import time
import traceback
from typing import Optional, Dict, Any, Callable
from functools import wraps
from datetime import datetime

import numpy as np

logger = logging.getLogger(__name__)


# Custom Exceptions
class QMRException(Exception):
    """Base exception for the qmr package."""

    def __init__(self, message: str, error_code: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}
        self.timestamp = datetime.now()


class ConfigurationError(QMRException):
    """Raised when there's a configuration error."""
    pass


class ValidationError(QMRException):
    """Raised when input validation fails."""
    pass


class DimensionMismatchError(ValidationError):
    """Raised when operators or maps live on incompatible spaces."""
    pass


class ScheduleError(ValidationError):
    """Raised when a control schedule or sample-time grid is invalid."""
    pass


class CertificateError(QMRException):
    """Raised when a Lindblad, projector or structure certificate fails."""
    pass


class AlgebraDecompositionError(CertificateError):
    """Raised when the Wedderburn decomposition cannot separate the spectra."""
    pass


class ConvergenceError(QMRException):
    """Raised when a Krylov or closure iteration hits its dimension cap."""
    pass


# Exit codes of the command line
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_CERTIFICATE = 3
EXIT_CONVERGENCE = 4


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the process exit code."""
    if isinstance(error, ValidationError):
        return EXIT_VALIDATION
    if isinstance(error, CertificateError):
        return EXIT_CERTIFICATE
    if isinstance(error, ConvergenceError):
        return EXIT_CONVERGENCE
    return EXIT_FAILURE


# Error Handler Decorators
def service_error_handler(func: Callable) -> Callable:
    """
    General purpose service error handler decorator.
    Converts foreign exceptions raised inside service methods into QMRException subclasses.
    """
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except QMRException:
            raise
        except np.linalg.LinAlgError as e:
            raise AlgebraDecompositionError(
                f"Linear algebra failure in {func.__name__}: {str(e)}",
                error_code="LINALG_ERROR",
                details=_error_details(func, e)
            )
        except (ValueError, TypeError) as e:
            raise ValidationError(
                f"Invalid input to {func.__name__}: {str(e)}",
                error_code="INVALID_INPUT",
                details=_error_details(func, e)
            )
        except Exception as e:
            raise QMRException(
                f"Service error in {func.__name__}: {str(e)}",
                error_code="SERVICE_ERROR",
                details=_error_details(func, e)
            )
    return wrapper


def _error_details(func: Callable, error: Exception) -> Dict[str, Any]:
    return {
        "function": func.__name__,
        "module": func.__module__,
        "original_error": str(error),
        "error_type": type(error).__name__
    }


# Error Context Manager
class ErrorContext:
    """
    Context manager naming the pipeline operation a failure happened in.

    qmr errors leaving the block get ``operation`` and the context entries merged
    into their details (existing keys win), so the CLI error JSON points at the
    failing stage.
    """

    def __init__(self, operation: str, context: Optional[Dict[str, Any]] = None):
        self.operation = operation
        self.context = context or {}
        self._start = 0.0

    def __enter__(self):
        self._start = time.perf_counter()
        logger.debug(f"Starting {self.operation} {self.context}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        duration = time.perf_counter() - self._start
        if exc_type is None:
            logger.debug(f"{self.operation} finished in {duration:.2f}s")
            return False
        if isinstance(exc_val, QMRException):
            for key, value in {"operation": self.operation, **self.context}.items():
                exc_val.details.setdefault(key, value)
        logger.error(f"{self.operation} failed after {duration:.2f}s: {exc_type.__name__}: {exc_val}")
        return False


# Error Response Builders
def build_error_response(
    error: Exception,
    include_traceback: bool = False,
    include_details: bool = True
) -> Dict[str, Any]:
    """
    Build a standardized, JSON-serializable error dictionary.

    Args:
        error: The exception that occurred
        include_traceback: Whether to include stack trace
        include_details: Whether to include error details

    Returns:
        Dictionary with error information and the exit code it maps to
    """
    response = {
        "error": str(error),
        "error_type": type(error).__name__,
        "exit_code": exit_code_for(error),
        "timestamp": datetime.now().isoformat()
    }

    if isinstance(error, QMRException):
        response["error_code"] = error.error_code
        if include_details and error.details:
            response["details"] = error.details

    if include_traceback:
        response["traceback"] = traceback.format_exc()

    return response


# Validation Utilities
def validate_and_raise(condition: bool, message: str, error_class=ValidationError, **kwargs):
    """
    Validate condition and raise error if false.

    Args:
        condition: Condition to validate
        message: Error message if condition is false
        error_class: Exception class to raise
        **kwargs: Additional arguments for exception
    """
    if not condition:
        raise error_class(message, **kwargs)
