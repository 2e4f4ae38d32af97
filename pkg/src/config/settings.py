"""
Configuration Management Module
Centralized configuration for qmr: numerical tolerances, iteration caps,
certificate sampling, simulation defaults and logging.
"""

import os
import logging
from dataclasses import dataclass, field, asdict
from typing import Optional, Dict, Any
from dotenv import load_dotenv

from src.utils.exceptions import ConfigurationError

# Load environment variables
load_dotenv()


def _env_float(key: str, default: float) -> float:
    value = os.getenv(key)
    return float(value) if value not in (None, "") else default


def _env_int(key: str, default: Optional[int]) -> Optional[int]:
    value = os.getenv(key)
    return int(value) if value not in (None, "") else default


@dataclass
class ToleranceConfig:
    """Numerical tolerances shared by every module."""
    orth: float = field(default_factory=lambda: _env_float("QMR_TOL_ORTH", 1e-10))
    herm: float = field(default_factory=lambda: _env_float("QMR_TOL_HERM", 1e-10))
    trace: float = field(default_factory=lambda: _env_float("QMR_TOL_TRACE", 1e-8))
    psd: float = field(default_factory=lambda: _env_float("QMR_TOL_PSD", 1e-9))
    krylov: float = field(default_factory=lambda: _env_float("QMR_TOL_KRYLOV", 1e-10))
    struct: float = field(default_factory=lambda: _env_float("QMR_TOL_STRUCT", 1e-8))
    num: float = field(default_factory=lambda: _env_float("QMR_TOL_NUM", 1e-10))
    compare: float = field(default_factory=lambda: _env_float("QMR_TOL_COMPARE", 1e-8))

    def __post_init__(self):
        """Validate tolerances."""
        for name, value in asdict(self).items():
            if not (0.0 < value < 1.0):
                raise ValueError(f"Tolerance '{name}' must lie in (0, 1), got {value}")


@dataclass
class KrylovConfig:
    """Krylov and closure iteration settings."""
    max_dim: Optional[int] = field(default_factory=lambda: _env_int("QMR_KRYLOV_MAX_DIM", None))
    superalg_max_n: int = 8

    def __post_init__(self):
        """Validate Krylov configuration."""
        if self.max_dim is not None and self.max_dim <= 0:
            raise ValueError("Krylov max_dim must be positive")
        if self.superalg_max_n <= 0:
            raise ValueError("Superoperator-algebra guard must be positive")


@dataclass
class WedderburnConfig:
    """Randomized structure-decomposition settings."""
    max_resamples: int = 5
    cluster_gap: float = 1e-8
    min_partial_isometry: float = 1e-6

    def __post_init__(self):
        """Validate Wedderburn configuration."""
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be at least 1")
        if not (0.0 < self.cluster_gap < 1.0):
            raise ValueError("cluster_gap must lie in (0, 1)")


@dataclass
class CertificateConfig:
    """Sampling of admissible controls for reduced-generator certificates."""
    random_samples: int = 8
    unbounded_control_scale: float = 1.0
    max_vertex_channels: int = 4

    def __post_init__(self):
        """Validate certificate configuration."""
        if self.random_samples < 0:
            raise ValueError("random_samples cannot be negative")
        if self.unbounded_control_scale <= 0:
            raise ValueError("unbounded_control_scale must be positive")


@dataclass
class SimulationConfig:
    """Propagation and comparison defaults."""
    max_workers: int = field(default_factory=lambda: _env_int("MAX_WORKERS", 4))
    compare_states: int = 5
    compare_schedules: int = 5
    compare_segments: int = 100
    compare_samples: int = 200
    segment_duration: float = 0.1

    def __post_init__(self):
        """Validate simulation configuration."""
        if self.max_workers <= 0:
            raise ValueError("max_workers must be positive")
        if min(self.compare_states, self.compare_schedules, self.compare_segments, self.compare_samples) <= 0:
            raise ValueError("Comparison sizes must be positive")
        if self.segment_duration <= 0:
            raise ValueError("segment_duration must be positive")


@dataclass
class LoggingConfig:
    """Logging configuration settings."""
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_path: Optional[str] = None

    def __post_init__(self):
        """Load from environment variables."""
        self.level = os.getenv("LOG_LEVEL", self.level).upper()
        self.file_path = os.getenv("QMR_LOG_FILE", self.file_path) or None
        if self.file_path and os.path.dirname(self.file_path):
            os.makedirs(os.path.dirname(self.file_path), exist_ok=True)


class AppConfig:
    """Main application configuration."""

    def __init__(self):
        """Initialize configuration with validation."""
        try:
            self.tolerances = ToleranceConfig()
            self.krylov = KrylovConfig()
            self.wedderburn = WedderburnConfig()
            self.certificates = CertificateConfig()
            self.simulation = SimulationConfig()
            self.logging = LoggingConfig()

            # Default seed for every randomized step
            self.seed = int(os.getenv("QMR_SEED", "1234"))
        except ValueError as e:
            raise ConfigurationError(f"Invalid configuration: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary (embedded in reports)."""
        return {
            "seed": self.seed,
            "tolerances": asdict(self.tolerances),
            "krylov": asdict(self.krylov),
            "wedderburn": asdict(self.wedderburn),
            "certificates": asdict(self.certificates),
            "simulation": asdict(self.simulation),
            "logging": {"level": self.logging.level, "file_path": self.logging.file_path}
        }


# Global configuration instance
config = AppConfig()


def get_config() -> AppConfig:
    """Get the global configuration instance."""
    return config


def reload_config() -> AppConfig:
    """Reload configuration from environment."""
    global config
    config = AppConfig()
    return config


def setup_logging(level: Optional[str] = None):
    """Setup application logging using global config."""
    cfg = get_config()
    handlers = [logging.StreamHandler()]
    if cfg.logging.file_path:
        handlers.append(logging.FileHandler(cfg.logging.file_path))

    logging.basicConfig(
        level=getattr(logging, (level or cfg.logging.level).upper()),
        format=cfg.logging.format,
        handlers=handlers
    )
