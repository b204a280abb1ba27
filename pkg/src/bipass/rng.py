"""Deterministic random streams built on the Philox counter-based generator.

Every source of randomness in the library draws from a stream obtained via
:func:`stream`. A stream is identified by an integer seed plus a path of
string/int labels; the (seed, path) pair is hashed with SHA-256 into a
128-bit Philox key, so distinct paths give statistically independent
streams and the same path reproduces bit-identical draws on any platform.
"""

from __future__ import annotations

import hashlib

import numpy as np


def philox_key(seed: int, *labels) -> int:
    """128-bit key derived from a seed and a label path."""
    text = str(int(seed)) + "".join("/" + str(part) for part in labels)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for the given seed and label path.

    Labels name the consumer (e.g. ``stream(seed, "noise_level")`` or
    ``stream(seed, "run", 3, "dropout")``); two calls with equal arguments
    return generators that produce identical sequences.
    """
    return np.random.Generator(np.random.Philox(key=philox_key(seed, *labels)))


def derive_seed(seed: int, *labels) -> int:
    """63-bit integer seed derived from a label path, for recording in outputs."""
    return philox_key(seed, *labels) & 0x7FFF_FFFF_FFFF_FFFF
