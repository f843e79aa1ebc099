"""Process-wide knobs shared by the numerical modules."""

import os

import numpy as np

from .errors import InvalidConfig

THREADS_ENV = "SMSLAB_THREADS"


def fft_workers() -> int:
    """Worker count for batched FFTs, capped by the SMSLAB_THREADS env var.

    The cap only limits CPU use; results are bit-identical for any value
    because every 1D transform is computed independently.
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise InvalidConfig(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, value)


def make_rng(*keys: int) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of integers.

    Every random draw in the package goes through one of these, with a
    fixed per-purpose stream tag as the first key, so that independent
    draws never share a stream and identical keys reproduce bit-identical
    values.
    """
    return np.random.default_rng([int(k) % (2**64) for k in keys])
