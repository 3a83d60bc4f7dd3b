"""Benchmark problem builders: campus delivery and AV obstacle passing."""

from .bundle import ConfigError, DomainBundle, load_config
from .campus import build_campus
from .av import build_av

__all__ = ["ConfigError", "DomainBundle", "load_config", "build_campus",
           "build_av"]
