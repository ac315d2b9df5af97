"""Seed derivation and small shared helpers.

All randomness in the package flows from one master seed through
``derive_rng``: every consumer names its stream with a path of integers
and/or strings, strings are folded to uint32 via CRC-32, and the pair
(seed, path) feeds a ``numpy.random.SeedSequence``.  Identical (seed, path)
always yields an identical generator, independent of call order.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import zlib

import numpy as np


def stream_id(part) -> int:
    """Map a stream-path component to a uint32 for SeedSequence spawn keys."""
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path ints must be nonnegative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Return the generator for stream ``path`` under ``seed``."""
    key = tuple(stream_id(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def config_hash(config: dict) -> str:
    """Stable short hash of a JSON-serializable configuration."""
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file + rename in the same dir."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def worker_count() -> int:
    """Worker cap from ROBUSTIFY_THREADS (default 1; never below 1)."""
    raw = os.environ.get("ROBUSTIFY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
