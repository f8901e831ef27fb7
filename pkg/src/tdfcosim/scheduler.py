"""Static analysis of TDF clusters.

``infer_timesteps`` solves ``Tp * R = Tm`` per port and ``Tp(writer) =
Tp(reader)`` per signal. ``compute_schedule`` builds the periodic list
schedule over one hyperperiod, and ``analyze_causality`` checks that the
converter-port accesses it implies never go backwards in time, since the
DE kernel driving the cluster cannot rewind.

Access timestamps, for sample ``j`` of activation ``k`` on a converter port
with rate ``R``, timestep ``Tp`` and delay ``D``::

    output:  (k*R + j + D) * Tp
    input:   (k*R + j - D) * Tp     (negative: served from the D initial samples)
"""

import math
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import NamedTuple

from .errors import CausalityViolation, Deadlock, Inconsistent, Underdetermined
from .simtime import format_duration
from .tdf import PortRef

REPAIR_BOUND = 64


class Activation(NamedTuple):
    module: str
    index: int

    def __str__(self):
        return f"{self.module}{self.index}"


class ConverterAccess(NamedTuple):
    port: PortRef
    activation: int
    sample: int
    time: int
    direction: str

    def __str__(self):
        return f"{self.port}[k={self.activation},j={self.sample}]@{self.time}"


@dataclass(frozen=True)
class StaticSchedule:
    cluster: object
    hyperperiod: int
    activations: dict
    order: tuple
    converter_accesses: tuple
    initial_tokens: dict


@dataclass(frozen=True)
class Violation:
    earlier: ConverterAccess
    later: ConverterAccess
    delta: int


@dataclass(frozen=True)
class CausalityReport:
    violations: tuple
    suggested_delays: dict

    @property
    def ok(self):
        return not self.violations


# -- timestep inference -------------------------------------------------------

def _var_name(var):
    if var[0] == "m":
        return f"Tm({var[1]})"
    return f"Tp({var[1]}.{var[2]})"


def infer_timesteps(cluster):
    """Return a copy of ``cluster`` with every Tm and Tp filled in.

    Raises Inconsistent with a witness chain of constraints, or
    Underdetermined naming a component without any given timestep.
    """
    # var -> list of (neighbour, factor, text): value[neighbour] = value[var] * factor
    edges = {}
    given = {}
    order = []

    def add_var(var, value):
        edges.setdefault(var, [])
        order.append(var)
        if value is not None:
            given[var] = value

    for m in cluster.modules:
        mv = ("m", m.name)
        add_var(mv, m.timestep)
        for p in m.ports:
            pv = ("p", m.name, p.name)
            add_var(pv, p.timestep)
            text = f"{_var_name(mv)} = {p.rate} x {_var_name(pv)}"
            edges[mv].append((pv, Fraction(1, p.rate), text))
            edges[pv].append((mv, Fraction(p.rate), text))
    for s in cluster.signals:
        wv = ("p",) + tuple(s.writer)
        rv = ("p",) + tuple(s.reader)
        text = f"{_var_name(wv)} = {_var_name(rv)} (signal {s.name})"
        edges[wv].append((rv, Fraction(1), text))
        edges[rv].append((wv, Fraction(1), text))

    value = {}
    # var -> (parent var, constraint text) along the BFS tree
    parent = {}

    def chain(var):
        out = []
        while var in parent:
            prev, text = parent[var]
            out.append(text)
            var = prev
        out.append(f"{_var_name(var)} = {format_duration(given[var])} (given)")
        return list(reversed(out))

    for start in order:
        if start in value:
            continue
        # collect the component first so the anchor choice is deterministic
        comp, queue, seen = [], deque([start]), {start}
        while queue:
            v = queue.popleft()
            comp.append(v)
            for n, _, _ in edges[v]:
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        anchors = [v for v in order if v in seen and v in given]
        if not anchors:
            names = [_var_name(v) for v in order if v in seen]
            raise Underdetermined(
                f"cluster {cluster.name}: no timestep given for component {{{', '.join(names)}}}",
                names)
        anchor = anchors[0]
        value[anchor] = Fraction(given[anchor])
        queue = deque([anchor])
        while queue:
            v = queue.popleft()
            for n, factor, text in edges[v]:
                derived = value[v] * factor
                if n not in value:
                    value[n] = derived
                    parent[n] = (v, text)
                    if n in given and given[n] != derived:
                        witness = chain(v) + [text, f"{_var_name(n)} = {format_duration(given[n])} (given)"]
                        raise Inconsistent(
                            f"cluster {cluster.name}: {_var_name(n)} must be both "
                            f"{_fmt_frac(derived)} and {format_duration(given[n])}", witness)
                    queue.append(n)
                elif value[n] != derived:
                    witness = chain(v) + [text] + list(reversed(chain(n)))
                    raise Inconsistent(
                        f"cluster {cluster.name}: {_var_name(n)} must be both "
                        f"{_fmt_frac(value[n])} and {_fmt_frac(derived)}", witness)

    for var in order:
        v = value[var]
        if v.denominator != 1 or v <= 0:
            raise Inconsistent(
                f"cluster {cluster.name}: {_var_name(var)} = {_fmt_frac(v)} is not a whole "
                f"number of picoseconds", chain(var))

    modules = []
    for m in cluster.modules:
        ports = tuple(replace(p, timestep=int(value[("p", m.name, p.name)])) for p in m.ports)
        modules.append(replace(m, ports=ports, timestep=int(value[("m", m.name)])))
    return replace(cluster, modules=tuple(modules))


def _fmt_frac(v):
    if v.denominator == 1:
        return format_duration(int(v))
    return f"{v.numerator}/{v.denominator}ps"


def is_annotated(cluster):
    return all(m.timestep is not None and all(p.timestep is not None for p in m.ports)
               for m in cluster.modules)


# -- scheduling ---------------------------------------------------------------

def initial_tokens(cluster):
    out = {}
    for s in cluster.signals:
        out[s.name] = cluster.port(s.writer).delay + cluster.port(s.reader).delay
    return out


def activation_accesses(module, k):
    """Converter accesses of activation ``k`` as ``(inputs, outputs)``.

    Inputs are all read before the processing function runs and outputs
    written after it, each group sorted by timestamp then port name.
    """
    ins, outs = [], []
    for p in module.ports:
        if not p.is_converter:
            continue
        ref = PortRef(module.name, p.name)
        for j in range(p.rate):
            i = k * p.rate + j
            if p.is_input:
                ins.append(ConverterAccess(ref, k, j, (i - p.delay) * p.timestep, "in"))
            else:
                outs.append(ConverterAccess(ref, k, j, (i + p.delay) * p.timestep, "out"))
    key = lambda a: (a.time, a.port.port, a.sample)
    ins.sort(key=key)
    outs.sort(key=key)
    return ins, outs


def compute_schedule(cluster):
    """List schedule for one hyperperiod.

    Among modules with an unfired activation whose inputs hold enough
    samples, fire the one with the smallest activation time ``k * Tm``,
    ties broken by module name.
    """
    if not is_annotated(cluster):
        cluster = infer_timesteps(cluster)
    if not cluster.modules:
        return StaticSchedule(cluster, 0, {}, (), (), {})
    hyper = math.lcm(*(m.timestep for m in cluster.modules))
    counts = {m.name: hyper // m.timestep for m in cluster.modules}
    tokens = initial_tokens(cluster)
    by_reader = cluster.signal_by_reader()
    by_writer = cluster.signal_by_writer()
    inputs = {m.name: [(by_reader[PortRef(m.name, p.name)].name, p.rate)
                       for p in m.inputs if not p.is_converter] for m in cluster.modules}
    outputs = {m.name: [(by_writer[PortRef(m.name, p.name)].name, p.rate)
                        for p in m.outputs if not p.is_converter] for m in cluster.modules}
    fired = {m.name: 0 for m in cluster.modules}
    modules = sorted(cluster.modules, key=lambda m: m.name)
    order = []
    accesses = []
    total = sum(counts.values())
    while len(order) < total:
        best = None
        for m in modules:
            k = fired[m.name]
            if k >= counts[m.name]:
                continue
            if all(tokens[s] >= r for s, r in inputs[m.name]):
                t = k * m.timestep
                if best is None or t < best[0]:
                    best = (t, m)
        if best is None:
            blocked = sorted(n for n in counts if fired[n] < counts[n])
            raise Deadlock(
                f"cluster {cluster.name}: no module can fire; blocked: {', '.join(blocked)}",
                blocked)
        m = best[1]
        k = fired[m.name]
        for s, r in inputs[m.name]:
            tokens[s] -= r
        for s, r in outputs[m.name]:
            tokens[s] += r
        fired[m.name] = k + 1
        order.append(Activation(m.name, k))
        ins, outs = activation_accesses(m, k)
        accesses.extend(ins)
        accesses.extend(outs)
    return StaticSchedule(cluster, hyper, counts, tuple(order), tuple(accesses),
                          initial_tokens(cluster))


# -- causality ----------------------------------------------------------------

def unrolled_accesses(schedule, periods):
    """Real DE accesses of ``periods`` consecutive hyperperiods in execution order."""
    cluster = schedule.cluster
    out = []
    for p in range(periods):
        for act in schedule.order:
            m = cluster.module(act.module)
            k = p * schedule.activations[act.module] + act.index
            ins, outs = activation_accesses(m, k)
            out.extend(a for a in ins if a.time >= 0)
            out.extend(outs)
    return out


def _warmup_periods(schedule):
    cluster = schedule.cluster
    w = 0
    for m in cluster.modules:
        per_period = schedule.activations[m.name]
        for p in m.ports:
            if p.is_converter and p.is_input and p.delay:
                w = max(w, -(-p.delay // (per_period * p.rate)))
    return w


def find_violations(schedule):
    n = {m: c for m, c in schedule.activations.items()}
    seq = unrolled_accesses(schedule, _warmup_periods(schedule) + 2)
    seen = set()
    out = []
    for a, b in zip(seq, seq[1:]):
        if b.time < a.time:
            key = (a.port, a.activation % n[a.port.module], a.sample,
                   b.port, b.activation % n[b.port.module], b.sample, a.time - b.time)
            if key not in seen:
                seen.add(key)
                out.append(Violation(a, b, a.time - b.time))
    return out


def with_added_delays(cluster, added):
    if not added:
        return cluster
    modules = []
    for m in cluster.modules:
        ports = tuple(replace(p, delay=p.delay + added.get(PortRef(m.name, p.name), 0))
                      for p in m.ports)
        modules.append(replace(m, ports=ports))
    return replace(cluster, modules=tuple(modules))


def _repair_candidates(cluster, first):
    ordered = []
    if first.later.direction == "out":
        ordered.append(first.later.port)
    if first.earlier.direction == "in":
        ordered.append(first.earlier.port)
    conv_out, conv_in, normal_in = [], [], []
    for m in sorted(cluster.modules, key=lambda m: m.name):
        for p in sorted(m.ports, key=lambda p: p.name):
            ref = PortRef(m.name, p.name)
            if p.is_converter:
                (conv_in if p.is_input else conv_out).append(ref)
            elif p.is_input:
                normal_in.append(ref)
    for ref in conv_out + conv_in + normal_in:
        if ref not in ordered:
            ordered.append(ref)
    return ordered


def suggest_delays(schedule, bound=REPAIR_BOUND):
    """Greedy per-port delay increments that make the access stream monotone.

    Each round tries, port by port, the smallest increment ``1..bound`` that
    removes every violation; failing that it keeps the single increment that
    removes the most. Returns ``{}`` when nothing helps.
    """
    cluster = schedule.cluster
    added = {}
    current = find_violations(schedule)
    for _ in range(4 * len(cluster.converter_ports()) + 8):
        if not current:
            return added
        best = None
        for ref in _repair_candidates(cluster, current[0]):
            for d in range(1, bound + 1):
                trial = dict(added)
                trial[ref] = trial.get(ref, 0) + d
                v = find_violations(compute_schedule(with_added_delays(cluster, trial)))
                if not v:
                    return trial
                if len(v) < len(current) and (best is None or len(v) < len(best[1])):
                    best = (trial, v)
        if best is None:
            return {}
        added, current = best
    return {}


def analyze_causality(schedule):
    violations = find_violations(schedule)
    suggested = suggest_delays(schedule) if violations else {}
    return CausalityReport(tuple(violations), suggested)


# -- validation report --------------------------------------------------------

STATUS_EXIT = {
    "VALID": 0,
    "INVALID": 2,
    "INCONSISTENT": 2,
    "UNDERDETERMINED": 2,
    "CAUSALITY_VIOLATION": 3,
    "DEADLOCK": 4,
}


@dataclass
class Validation:
    cluster: object
    status: str
    text: str
    schedule: object = None
    causality: object = None
    error: Exception = None

    @property
    def exit_code(self):
        return STATUS_EXIT[self.status]


def validate(cluster):
    """Run inference, scheduling and causality analysis; never raises model errors."""
    lines = [f"# cluster {cluster.name}"]
    try:
        annotated = infer_timesteps(cluster)
    except Inconsistent as exc:
        lines.append(f"error Inconsistent: {exc}")
        lines.extend(f"witness {w}" for w in exc.witness)
        lines.append("INCONSISTENT")
        return Validation(cluster, "INCONSISTENT", "\n".join(lines) + "\n", error=exc)
    except Underdetermined as exc:
        lines.append(f"error Underdetermined: {exc}")
        lines.append("UNDERDETERMINED")
        return Validation(cluster, "UNDERDETERMINED", "\n".join(lines) + "\n", error=exc)

    for m in annotated.modules:
        lines.append(f"module {m.name} Tm_ps={m.timestep} behavior={m.behavior.kind}")
    for m in annotated.modules:
        for p in m.ports:
            lines.append(f"port {m.name}.{p.name} dir={p.direction} kind={p.kind} "
                         f"type={p.value_type} R={p.rate} D={p.delay} Tp_ps={p.timestep}")
    for ref, ep in annotated.bindings:
        lines.append(f"binding {ref} -> {ep}")

    try:
        schedule = compute_schedule(annotated)
    except Deadlock as exc:
        lines.append(f"error Deadlock: {exc}")
        lines.append("DEADLOCK")
        return Validation(annotated, "DEADLOCK", "\n".join(lines) + "\n", error=exc)

    lines.append(f"hyperperiod_ps {schedule.hyperperiod}")
    lines.append("activations " + " ".join(f"{m}={n}" for m, n in schedule.activations.items()))
    lines.append("order " + " ".join(str(a) for a in schedule.order))
    lines.append("access_columns index port dir k j tau_ps")
    for i, a in enumerate(schedule.converter_accesses):
        lines.append(f"access {i} {a.port} {a.direction} {a.activation} {a.sample} {a.time}")

    report = analyze_causality(schedule)
    for v in report.violations:
        lines.append(f"violation {v.earlier} -> {v.later} dt_ps={v.delta}")
    for ref, d in sorted(report.suggested_delays.items()):
        lines.append(f"suggest {ref} +{d}")
    if report.ok:
        lines.append("VALID")
        status = "VALID"
    else:
        lines.append("CAUSALITY_VIOLATION")
        status = "CAUSALITY_VIOLATION"
    return Validation(annotated, status, "\n".join(lines) + "\n", schedule, report)


def validation_report(cluster):
    return validate(cluster).text


def require_valid(cluster):
    """Schedule for a cluster that must pass validation, else the matching error."""
    v = validate(cluster)
    if v.status == "VALID":
        return v.schedule
    if v.error is not None:
        raise v.error
    first = v.causality.violations[0]
    raise CausalityViolation(
        f"cluster {cluster.name}: converter access {first.later} follows {first.earlier}")


__all__ = [
    "Activation", "CausalityReport", "ConverterAccess", "StaticSchedule", "Validation",
    "Violation", "analyze_causality", "compute_schedule", "infer_timesteps",
    "validate", "validation_report",
]
