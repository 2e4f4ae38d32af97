"""qmr: exact model reduction for controlled Lindblad dynamics."""

__version__ = "1.0.0"
