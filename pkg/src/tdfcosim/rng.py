"""Counter-based pseudo random numbers.

Every stream is keyed by ``seed ^ stream``. Draw number ``n`` (0-based) of a
stream is::

    mix64((key + (n + 1) * 0x9E3779B97F4A7C15) mod 2**64)

where ``mix64`` is the SplitMix64 finalizer. A stream therefore carries no
state besides the number of draws consumed, and any draw can be recomputed
from ``(seed, stream, n)`` in any language with 64-bit unsigned arithmetic.
"""

import zlib

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed, stream):
    return (seed ^ stream) & MASK64


def draw(key, n):
    """Raw 64-bit output number ``n`` of the stream keyed by ``key``."""
    return mix64((key + (n + 1) * GOLDEN) & MASK64)


def bounded(key, counter, lo, hi):
    """Uniform integer in ``[lo, hi]`` starting at draw ``counter``.

    Uses rejection on the low end of the 64-bit range so every value is
    exactly equiprobable. Returns ``(value, next_counter)``.
    """
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    span = hi - lo + 1
    if span > MASK64:
        raise ValueError("range wider than 64 bits")
    threshold = (1 << 64) % span
    while True:
        r = draw(key, counter)
        counter += 1
        if r >= threshold:
            return lo + r % span, counter


def name_stream(name):
    """Stable stream id for a named component (tasks use this for select)."""
    return (1 << 32) | zlib.crc32(name.encode("utf-8"))


class CounterRng:
    """Small stateful wrapper used by the DE side (one per task)."""

    def __init__(self, seed, stream):
        self.key = stream_key(seed, stream)
        self.counter = 0

    def randint(self, lo, hi):
        value, self.counter = bounded(self.key, self.counter, lo, hi)
        return value
