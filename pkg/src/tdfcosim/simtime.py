"""Simulation time: exact integer picoseconds."""

import re
from decimal import Decimal, InvalidOperation

PS = 1
NS = 1_000
US = 1_000_000
MS = 1_000_000_000
S = 1_000_000_000_000

UNITS = {"ps": PS, "ns": NS, "us": US, "ms": MS, "s": S}

_DURATION_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(ps|ns|us|ms|s)\s*$")


def parse_duration(text):
    """Convert ``"10ns"``, ``"1.5ms"`` or a bare integer (picoseconds) to ps.

    Raises ValueError when the value is not an exact non-negative number
    of picoseconds.
    """
    if isinstance(text, bool):
        raise ValueError(f"not a duration: {text!r}")
    if isinstance(text, int):
        if text < 0:
            raise ValueError(f"negative duration: {text}")
        return text
    if not isinstance(text, str):
        raise ValueError(f"not a duration: {text!r}")
    stripped = text.strip()
    if stripped.isdigit():
        return int(stripped)
    m = _DURATION_RE.match(text)
    if not m:
        raise ValueError(f"bad duration {text!r}; expected <number><ps|ns|us|ms|s>")
    try:
        value = Decimal(m.group(1)) * UNITS[m.group(2)]
    except InvalidOperation:  # pragma: no cover - regex already filters
        raise ValueError(f"bad duration {text!r}")
    if value != value.to_integral_value():
        raise ValueError(f"duration {text!r} is not a whole number of picoseconds")
    return int(value)


def format_duration(ps):
    """Largest unit that represents ``ps`` exactly, e.g. ``2000000 -> '2us'``."""
    if ps == 0:
        return "0ps"
    for unit in ("s", "ms", "us", "ns"):
        scale = UNITS[unit]
        if ps % scale == 0:
            return f"{ps // scale}{unit}"
    return f"{ps}ps"
