"""Rebuild the pickled citation benchmarks as plain-text dataset directories."""

from .convert import (
    EXPECTED_STATS,
    RawPlanetoidBundle,
    VerifyReport,
    convert,
    load_bundle,
    verify,
)

__version__ = "0.1.0"
__all__ = [
    "EXPECTED_STATS",
    "RawPlanetoidBundle",
    "VerifyReport",
    "convert",
    "load_bundle",
    "verify",
]
