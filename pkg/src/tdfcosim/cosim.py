"""Master/slave coupling of the DE kernel with TDF cluster executors.

Each cluster executor runs its static schedule ahead on its own and stops
at every converter-port access. The DE kernel (master) first dispatches
all of its events up to the access timestamp, then the access is
performed against the GPIO adapter, then the executor continues. Equal
timestamps: DE events go first, then clusters in name order.
"""

from collections import deque
from dataclasses import dataclass, field

from .blocks import DEFAULTS, execute_activation, initial_state
from .errors import SimulationError
from .kernel import Kernel
from .platform import Platform
from .scheduler import activation_accesses, require_valid
from .tdf import PortRef


class Request:
    """A pending converter access: what the executor is blocked on."""

    __slots__ = ("access", "value")

    def __init__(self, access, value=None):
        self.access = access
        self.value = value


class ClusterExecutor:
    def __init__(self, schedule, until, seed=0):
        self.schedule = schedule
        self.cluster = cluster = schedule.cluster
        self.name = cluster.name
        self.hyperperiod = schedule.hyperperiod
        self.periods = -(-until // self.hyperperiod) if self.hyperperiod else 0
        self.states = {m.name: initial_state(m.behavior, seed) for m in cluster.modules}
        self.by_writer = cluster.signal_by_writer()
        self.by_reader = cluster.signal_by_reader()
        self.buffers = {}
        self.produced = {}
        self.consumed = {}
        self.traces = {}
        for s in cluster.signals:
            vtype = cluster.port(s.writer).value_type
            n0 = schedule.initial_tokens[s.name]
            self.buffers[s.name] = deque([DEFAULTS[vtype]] * n0)
            self.produced[s.name] = n0
            self.consumed[s.name] = 0
            self.traces[f"{self.name}.{s.name}"] = []
        for ref in cluster.converter_ports():
            self.traces[f"{self.name}.{ref}"] = []
        self.accesses = 0
        self.position = (0, 0)

    def run(self):
        """Generator over converter accesses; send back the value of each input read."""
        cluster = self.cluster
        for period in range(self.periods):
            for pos, act in enumerate(self.schedule.order):
                self.position = (period, pos)
                m = cluster.module(act.module)
                k = period * self.schedule.activations[m.name] + act.index
                ins, outs = activation_accesses(m, k)
                conv_in = {p.name: [None] * p.rate for p in m.inputs if p.is_converter}
                for a in ins:
                    port = m.port(a.port.port)
                    if a.time < 0:
                        value = DEFAULTS[port.value_type]
                    else:
                        value = yield Request(a)
                        self.accesses += 1
                    conv_in[port.name][a.sample] = value
                for p in m.inputs:
                    if p.is_converter:
                        trace = self.traces[f"{self.name}.{m.name}.{p.name}"]
                        for j, v in enumerate(conv_in[p.name]):
                            trace.append(((k * p.rate + j) * p.timestep, v))

                inputs = []
                for p in m.inputs:
                    if p.is_converter:
                        inputs.append(conv_in[p.name])
                    else:
                        sig = self.by_reader[PortRef(m.name, p.name)].name
                        buf = self.buffers[sig]
                        inputs.append([buf.popleft() for _ in range(p.rate)])
                        self.consumed[sig] += p.rate
                outputs, self.states[m.name] = execute_activation(
                    m.behavior, self.states[m.name], inputs,
                    [p.shape() for p in m.inputs], [p.shape() for p in m.outputs])

                conv_out = {}
                for p, values in zip(m.outputs, outputs):
                    if p.is_converter:
                        conv_out[p.name] = values
                        trace = self.traces[f"{self.name}.{m.name}.{p.name}"]
                    else:
                        sig = self.by_writer[PortRef(m.name, p.name)].name
                        self.buffers[sig].extend(values)
                        self.produced[sig] += p.rate
                        trace = self.traces[f"{self.name}.{sig}"]
                    for j, v in enumerate(values):
                        trace.append(((k * p.rate + j + p.delay) * p.timestep, v))
                for a in outs:
                    yield Request(a, conv_out[a.port.port][a.sample])
                    self.accesses += 1

    def buffered(self):
        return {name: len(buf) for name, buf in self.buffers.items()}


@dataclass
class TraceSet:
    """Everything a run produces, ready for serialization."""

    signals: dict
    log: list
    stats: dict
    task_records: dict = field(default_factory=dict)
    ordering_violations: list = field(default_factory=list)


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_cosimulation(model, seed=None, until=None):
    """Co-simulate every cluster of ``model`` with its platform.

    ``model`` is a :class:`tdfcosim.modelio.ModelDocument`. ``seed`` and
    ``until`` default to the model's simulation section.
    """
    seed = model.seed if seed is None else seed
    until = model.until if until is None else until
    if until <= 0:
        raise SimulationError("simulation end time must be > 0")

    kernel = Kernel()
    platform = Platform(model.platform, seed=seed, kernel=kernel)
    schedules = [require_valid(c) for c in model.clusters]
    executors = sorted((ClusterExecutor(s, until, seed) for s in schedules), key=lambda e: e.name)
    endpoint_of = {}
    for ex in executors:
        for ref, ep in ex.cluster.bindings:
            endpoint_of[(ex.name, ref)] = platform.gpio(ep)

    platform.start()
    ordering_violations = []
    pending = {}
    gens = {}
    for ex in executors:
        gen = ex.run()
        try:
            pending[ex.name] = next(gen)
            gens[ex.name] = gen
        except StopIteration:
            pass
    by_name = {ex.name: ex for ex in executors}

    while pending:
        name = min(pending, key=lambda n: (pending[n].access.time, n))
        req = pending[name]
        a = req.access
        tau = a.time
        if tau < until:
            kernel.run_through(tau)
        else:
            kernel.run_before(until)
        nxt = kernel.peek()
        if nxt is not None and nxt < min(tau, until):
            ordering_violations.append((tau, nxt))
        kernel.advance(max(kernel.now, tau))
        gpio = endpoint_of[(name, a.port)]
        if a.direction == "out":
            gpio.push(tau, req.value)
            kernel.log.append([tau, name, f"tdf-push {gpio.name} {_fmt_value(req.value)}"])
            reply = None
        else:
            reply = gpio.sample_tx()
            kernel.log.append([tau, name, f"tdf-read {gpio.name} {_fmt_value(reply)}"])
        try:
            pending[name] = gens[name].send(reply)
        except StopIteration:
            del pending[name]
    kernel.run_before(until)

    signals = {}
    for ex in executors:
        signals.update(ex.traces)
    records = {name: list(t.records) for name, t in platform.tasks.items()}
    stats = _collect_stats(platform, kernel, executors)
    return TraceSet(signals=dict(sorted(signals.items())),
                    log=[tuple(e) for e in kernel.log], stats=stats,
                    task_records=records, ordering_violations=ordering_violations)


def _collect_stats(platform, kernel, executors):
    tdf_accesses = sum(ex.accesses for ex in executors)
    stats = {
        "initiators": platform.initiator_count,
        "targets": platform.target_count,
        "de_events": kernel.dispatched,
        "tdf_accesses": tdf_accesses,
        "target_transactions": {n: t.transactions for n, t in sorted(platform.targets.items())},
        "initiator_transactions": {n: c.transactions for n, c in sorted(platform.cpus.items())},
        "gpio": {
            n: {"pushes": g.pushes, "pops": g.pops, "residual": len(g.rx),
                "writes": g.writes, "tdf_reads": g.tdf_reads}
            for n, g in sorted(platform.gpios.items())
        },
        "signals": {},
        "channels": {
            n: {"writes": c.writes, "reads": c.reads, "drops": c.drops, "residual": len(c.items)}
            for n, c in sorted(platform.channels.items())
        },
        "tasks": {
            n: {"records": len(t.records), "state": t.state, "finished": t.finished}
            for n, t in sorted(platform.tasks.items())
        },
    }
    for ex in executors:
        buffered = ex.buffered()
        for sig in sorted(ex.produced):
            stats["signals"][f"{ex.name}.{sig}"] = {
                "produced": ex.produced[sig], "consumed": ex.consumed[sig],
                "buffered": buffered[sig]}
    stats["signals"] = dict(sorted(stats["signals"].items()))
    return stats


def trace_statistics(traces):
    """Summary of a completed run: counts, per-target traffic, per-GPIO throughput."""
    s = traces.stats
    return {
        "initiators": s["initiators"],
        "targets": s["targets"],
        "de_events": s["de_events"],
        "target_transactions": dict(s["target_transactions"]),
        "gpio_samples": {n: g["pushes"] for n, g in s["gpio"].items()},
        "gpio_consumed": {n: g["pops"] for n, g in s["gpio"].items()},
        "signal_samples": {n: len(v) for n, v in traces.signals.items()},
    }


def audit_log(entries):
    """Check the merged execution log for master/slave ordering.

    ``entries`` are ``(time, component, text)``; converter accesses have
    text starting with ``tdf-``. Returns a list of human-readable problems:
    any entry earlier than its predecessor (global monotonicity), which
    covers the case of a DE dispatch at ``t < tau`` after an access at
    ``tau``.
    """
    problems = []
    last = None
    for i, (time, component, text) in enumerate(entries):
        if last is not None and time < last[0]:
            kind = "DE event" if not text.startswith("tdf-") else "converter access"
            problems.append(
                f"line {i + 1}: {kind} at {time} after {last[1]} at {last[0]}")
        last = (time, "converter access" if text.startswith("tdf-") else "DE event")
    return problems


def check_conservation(traces):
    """Per-GPIO and per-signal conservation problems (empty list when clean)."""
    problems = []
    for name, g in traces.stats["gpio"].items():
        if g["pushes"] != g["pops"] + g["residual"]:
            problems.append(f"gpio {name}: pushes {g['pushes']} != pops {g['pops']} + residual {g['residual']}")
    for name, s in traces.stats["signals"].items():
        if s["buffered"] < 0 or s["produced"] != s["consumed"] + s["buffered"]:
            problems.append(f"signal {name}: produced {s['produced']} != consumed "
                            f"{s['consumed']} + buffered {s['buffered']}")
    return problems
