"""Primitive processing functions for TDF modules.

A behavior is a ``(kind, params)`` pair checked once at model-build time.
Sample-wise blocks may have different input and output rates; their
result is resampled to each output rate by zero-order hold (repeat when
upsampling, keep every n-th sample when downsampling).
Execution is a pure function of the behavior, the module state, the input
samples of one activation, and the static port shapes::

    outputs, state = execute_activation(behavior, state, inputs, ins, outs)
"""

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Real

from . import rng
from .errors import ArityMismatch, InvalidParams

SOURCE_KINDS = ("constant", "uniform_random_int", "sine", "sequence")
KINDS = SOURCE_KINDS + ("gain", "sum", "fir", "adc_threshold", "duplicate", "sink")

_PARAMS = {
    "constant": ({"value"}, set()),
    "uniform_random_int": (set(), {"lo", "hi", "ranges", "stream"}),
    "sine": ({"frequency"}, {"amplitude", "phase"}),
    "sequence": ({"values"}, {"repeat"}),
    "gain": ({"k"}, set()),
    "sum": (set(), set()),
    "fir": ({"coefficients"}, set()),
    "adc_threshold": ({"threshold"}, set()),
    "duplicate": (set(), set()),
    "sink": (set(), set()),
}

DEFAULTS = {"int": 0, "real": 0.0, "bool": False}


@dataclass(frozen=True)
class Behavior:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        validate_behavior(self.kind, self.params)


@dataclass(frozen=True)
class PortShape:
    """Static shape of one port as seen by a processing function."""

    rate: int
    timestep: int = 0
    value_type: str = "real"
    delay: int = 0


@dataclass(frozen=True)
class ModuleState:
    activation: int = 0
    rng_key: int = 0
    rng_counter: int = 0
    emitted: int = 0
    history: tuple = ()
    cursor: int = 0


def _is_number(x):
    return isinstance(x, Real) and not isinstance(x, bool)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def random_ranges(params):
    """Normalized list of ``(lo, hi)`` pairs a uniform source cycles through."""
    if "ranges" in params:
        return [tuple(r) for r in params["ranges"]]
    return [(params["lo"], params["hi"])]


def validate_behavior(kind, params):
    if kind not in _PARAMS:
        raise InvalidParams(f"unknown behavior kind {kind!r}")
    if not isinstance(params, dict):
        raise InvalidParams(f"{kind}: params must be a mapping")
    required, optional = _PARAMS[kind]
    missing = required - params.keys()
    if missing:
        raise InvalidParams(f"{kind}: missing parameter(s) {sorted(missing)}")
    unknown = params.keys() - required - optional
    if unknown:
        raise InvalidParams(f"{kind}: unknown parameter(s) {sorted(unknown)}")

    if kind == "constant":
        if not (_is_number(params["value"]) or isinstance(params["value"], bool)):
            raise InvalidParams("constant: value must be a number or bool")
    elif kind == "uniform_random_int":
        if "ranges" in params:
            if "lo" in params or "hi" in params:
                raise InvalidParams("uniform_random_int: give either lo/hi or ranges")
            ranges = params["ranges"]
            if not isinstance(ranges, list) or not ranges:
                raise InvalidParams("uniform_random_int: ranges must be a non-empty list")
            for r in ranges:
                if not (isinstance(r, (list, tuple)) and len(r) == 2):
                    raise InvalidParams("uniform_random_int: each range is [lo, hi]")
        elif not ("lo" in params and "hi" in params):
            raise InvalidParams("uniform_random_int: lo and hi are required")
        for lo, hi in random_ranges(params):
            if not (_is_int(lo) and _is_int(hi)):
                raise InvalidParams("uniform_random_int: bounds must be integers")
            if lo > hi:
                raise InvalidParams(f"uniform_random_int: lo={lo} > hi={hi}")
        if not _is_int(params.get("stream", 0)) or params.get("stream", 0) < 0:
            raise InvalidParams("uniform_random_int: stream must be a non-negative integer")
    elif kind == "sine":
        freq = _fraction(params["frequency"], "sine: frequency")
        if freq <= 0:
            raise InvalidParams("sine: frequency must be > 0")
        _fraction(params.get("phase", 0), "sine: phase")
        if not _is_number(params.get("amplitude", 1.0)):
            raise InvalidParams("sine: amplitude must be a number")
    elif kind == "sequence":
        values = params["values"]
        if not isinstance(values, list) or not values:
            raise InvalidParams("sequence: values must be a non-empty list")
        if not all(_is_number(v) or isinstance(v, bool) for v in values):
            raise InvalidParams("sequence: values must be numbers")
        if not isinstance(params.get("repeat", True), bool):
            raise InvalidParams("sequence: repeat must be a bool")
    elif kind == "gain":
        if not _is_number(params["k"]):
            raise InvalidParams("gain: k must be a number")
    elif kind == "fir":
        coeffs = params["coefficients"]
        if not isinstance(coeffs, list) or not coeffs:
            raise InvalidParams("fir: needs at least one coefficient")
        if not all(_is_number(c) for c in coeffs):
            raise InvalidParams("fir: coefficients must be numbers")
    elif kind == "adc_threshold":
        if not _is_number(params["threshold"]):
            raise InvalidParams("adc_threshold: threshold must be a number")


def _fraction(value, what):
    # str() first so 0.1 becomes exactly 1/10
    if isinstance(value, bool) or not (_is_number(value) or isinstance(value, str)):
        raise InvalidParams(f"{what} must be a number")
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise InvalidParams(f"{what} must be a number") from None


def check_ports(behavior, ins, outs):
    """Raise ArityMismatch if the port layout cannot host ``behavior``."""
    kind = behavior.kind
    n_in, n_out = len(ins), len(outs)

    def need(cond, what):
        if not cond:
            raise ArityMismatch(f"{kind}: {what} (has {n_in} input(s), {n_out} output(s))")

    if kind in SOURCE_KINDS:
        need(n_in == 0 and n_out == 1, "expects no inputs and exactly one output")
    elif kind in ("gain", "fir", "adc_threshold"):
        need(n_in == 1 and n_out == 1, "expects one input and one output")
    elif kind == "sum":
        need(n_in >= 1 and n_out == 1, "expects at least one input and one output")
    elif kind == "duplicate":
        need(n_in == 1 and n_out >= 1, "expects one input and at least one output")
    elif kind == "sink":
        need(n_out == 0, "expects no outputs")


def initial_state(behavior, seed=0):
    key = 0
    if behavior.kind == "uniform_random_int":
        key = rng.stream_key(seed, behavior.params.get("stream", 0))
    history = ()
    if behavior.kind == "fir":
        history = (0.0,) * (len(behavior.params["coefficients"]) - 1)
    return ModuleState(rng_key=key, history=history)


def _coerce(value, value_type):
    if value_type == "int":
        if isinstance(value, float):
            return math.floor(value)
        return int(value)
    if value_type == "bool":
        return bool(value)
    return float(value)


def resample(values, rate):
    """Zero-order-hold resampling of one activation's samples to ``rate``."""
    n = len(values)
    if n == rate:
        return list(values)
    return [values[j * n // rate] for j in range(rate)]


def execute_activation(behavior, state, inputs, ins, outs):
    """Run one activation.

    ``inputs`` holds one sample list per input port, in port order, each of
    length equal to that port's rate. Returns one sample list per output
    port together with the successor state.
    """
    if len(inputs) != len(ins):
        raise ArityMismatch(f"{behavior.kind}: expected {len(ins)} input arrays, got {len(inputs)}")
    for samples, shape in zip(inputs, ins):
        if len(samples) != shape.rate:
            raise ArityMismatch(
                f"{behavior.kind}: input array of length {len(samples)} for rate {shape.rate}")

    kind = behavior.kind
    p = behavior.params
    k = state.activation
    new = {"activation": k + 1}

    if kind == "constant":
        out = outs[0]
        result = [[p["value"]] * out.rate]
    elif kind == "uniform_random_int":
        ranges = random_ranges(p)
        counter = state.rng_counter
        values = []
        for j in range(outs[0].rate):
            lo, hi = ranges[(state.emitted + j) % len(ranges)]
            v, counter = rng.bounded(state.rng_key, counter, lo, hi)
            values.append(v)
        new["rng_counter"] = counter
        new["emitted"] = state.emitted + outs[0].rate
        result = [values]
    elif kind == "sine":
        out = outs[0]
        amp = float(p.get("amplitude", 1.0))
        freq = Fraction(str(p["frequency"]))
        phase = Fraction(str(p.get("phase", 0)))
        values = []
        for j in range(out.rate):
            t = (k * out.rate + j + out.delay) * out.timestep
            turns = (freq * Fraction(t, 10**12) + phase) % 1
            values.append(amp * math.sin(2 * math.pi * float(turns)))
        result = [values]
    elif kind == "sequence":
        seq = p["values"]
        repeat = p.get("repeat", True)
        cursor = state.cursor
        values = []
        for _ in range(outs[0].rate):
            if repeat:
                values.append(seq[cursor % len(seq)])
            else:
                values.append(seq[min(cursor, len(seq) - 1)])
            cursor += 1
        new["cursor"] = cursor
        result = [values]
    elif kind == "gain":
        result = [[p["k"] * x for x in inputs[0]]]
    elif kind == "sum":
        rate = outs[0].rate
        result = [[sum(col) for col in zip(*(resample(x, rate) for x in inputs))]]
    elif kind == "fir":
        coeffs = p["coefficients"]
        history = list(state.history)
        values = []
        for x in inputs[0]:
            # history holds previous inputs, most recent first
            window = [x] + history
            values.append(sum(c * w for c, w in zip(coeffs, window)))
            history = window[: len(coeffs) - 1]
        new["history"] = tuple(history)
        result = [values]
    elif kind == "adc_threshold":
        th = p["threshold"]
        result = [[1 if x >= th else 0 for x in inputs[0]]]
    elif kind == "duplicate":
        result = [list(inputs[0]) for _ in outs]
    elif kind == "sink":
        result = []
    else:  # pragma: no cover - rejected by validate_behavior
        raise InvalidParams(f"unknown behavior kind {kind!r}")

    # processing runs at the input rate; outputs hold or decimate to their own rate
    result = [[_coerce(v, shape.value_type) for v in resample(values, shape.rate)]
              for values, shape in zip(result, outs)]
    return result, replace(state, **new)
