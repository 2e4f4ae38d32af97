"""Configuration package initialization."""

from .settings import (
    AppConfig,
    ToleranceConfig,
    KrylovConfig,
    WedderburnConfig,
    CertificateConfig,
    SimulationConfig,
    LoggingConfig,
    config,
    get_config,
    reload_config,
    setup_logging
)

__all__ = [
    "AppConfig",
    "ToleranceConfig",
    "KrylovConfig",
    "WedderburnConfig",
    "CertificateConfig",
    "SimulationConfig",
    "LoggingConfig",
    "config",
    "get_config",
    "reload_config",
    "setup_logging"
]
