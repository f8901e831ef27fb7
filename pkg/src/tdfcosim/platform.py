"""Digital half of the co-simulation: initiators, targets and FSM tasks.

CPUs are the initiators. Targets are memories (hosting inter-task
channels), miscellaneous peripherals, and one GPIO adapter per TDF
endpoint. Every GPIO or mapped-channel access is an interconnect
transaction::

    issue --request_latency--> arrive (queue per target, FIFO)
          --service_time-----> complete (operation takes effect)
          --response_latency-> task resumes with the result
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    FifoOverflow, Livelock, SchemaError, StuckState, UnknownEndpoint, UnknownReference,
)
from .expr import ExprError, compile_expr
from .kernel import Kernel
from .rng import CounterRng, name_stream
from .simtime import NS

DEFAULT_FIFO_CAPACITY = 64
DEFAULT_CHANNEL_DEPTH = 16
LIVELOCK_LIMIT = 10_000

VAR_TYPES = {"int": 0, "real": 0.0, "bool": False}

# fields allowed per action op (besides "op"); required first, then optional
ACTION_FIELDS = {
    "gpio_read": ({"endpoint", "var"}, {"status", "blocking"}),
    "gpio_write": ({"endpoint", "value"}, set()),
    "chan_read": ({"channel", "var"}, set()),
    "chan_write": ({"channel", "value"}, set()),
    "select": ({"branches"}, {"choice"}),
    "compute": ({"delay"}, set()),
    "assign": ({"var", "value"}, set()),
    "log": ({"tag"}, {"values"}),
}
BRANCH_FIELDS = ({"vars"}, {"gpio", "channel", "guard"})


# -- descriptions (immutable, what the model file holds) ---------------------

@dataclass(frozen=True)
class InterconnectSpec:
    request_latency: int = 10 * NS
    response_latency: int = 10 * NS
    service_time: int = 10 * NS


@dataclass(frozen=True)
class TargetSpec:
    name: str
    kind: str = "memory"


@dataclass(frozen=True)
class GpioSpec:
    name: str
    capacity: int = DEFAULT_FIFO_CAPACITY


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    depth: int = DEFAULT_CHANNEL_DEPTH
    memory: Optional[str] = None


@dataclass(frozen=True)
class Transition:
    to: str
    guard: Optional[str] = None


@dataclass(frozen=True)
class StateSpec:
    name: str
    entry: tuple = ()
    transitions: tuple = ()


@dataclass(frozen=True)
class TaskSpec:
    name: str
    cpu: str
    initial: str
    states: tuple
    # ((name, type, initial value), ...)
    variables: tuple = ()
    stream: Optional[int] = None


@dataclass(frozen=True)
class PlatformSpec:
    cpus: tuple = ()
    targets: tuple = ()
    gpios: tuple = ()
    channels: tuple = ()
    tasks: tuple = ()
    interconnect: InterconnectSpec = field(default_factory=InterconnectSpec)

    @property
    def initiator_count(self):
        return len(self.cpus)

    @property
    def target_count(self):
        return len(self.targets) + len(self.gpios)


def validate_platform(spec):
    """Cross-reference checks on a platform description."""
    names = [c for c in spec.cpus] + [t.name for t in spec.targets] + [g.name for g in spec.gpios]
    seen = set()
    for n in names:
        if n in seen:
            raise SchemaError(f"platform: duplicate component name {n!r}")
        seen.add(n)
    memories = {t.name for t in spec.targets}
    chans = set()
    for c in spec.channels:
        if c.name in chans:
            raise SchemaError(f"platform: duplicate channel {c.name!r}")
        chans.add(c.name)
        if c.memory is not None and c.memory not in memories:
            raise UnknownReference(f"channel {c.name!r}: unknown memory target {c.memory!r}")
        if c.depth < 1:
            raise SchemaError(f"channel {c.name!r}: depth must be >= 1")
    for g in spec.gpios:
        if g.capacity < 1:
            raise SchemaError(f"gpio {g.name!r}: capacity must be >= 1")
    gpios = {g.name for g in spec.gpios}
    tasks = set()
    for t in spec.tasks:
        if t.name in tasks:
            raise SchemaError(f"platform: duplicate task {t.name!r}")
        tasks.add(t.name)
        if t.cpu not in spec.cpus:
            raise UnknownReference(f"task {t.name!r}: unknown cpu {t.cpu!r}")
        validate_task(t, gpios, chans)


def validate_task(task, gpios, channels):
    where = f"task {task.name}"
    variables = {}
    for name, vtype, _ in task.variables:
        if vtype not in VAR_TYPES:
            raise SchemaError(f"{where}: variable {name!r} has unknown type {vtype!r}")
        if name in variables:
            raise SchemaError(f"{where}: variable {name!r} declared twice")
        variables[name] = vtype
    states = {}
    for s in task.states:
        if s.name in states:
            raise SchemaError(f"{where}: duplicate state {s.name!r}")
        states[s.name] = s
    if task.initial not in states:
        raise UnknownReference(f"{where}: initial state {task.initial!r} does not exist")

    def var(name, ctx):
        if name not in variables:
            raise UnknownReference(f"{where}: {ctx} uses undeclared variable {name!r}")

    def expr(source, ctx):
        try:
            compile_expr(source, variables)
        except ExprError as exc:
            raise SchemaError(f"{where}: {ctx}: {exc}") from None

    for s in task.states:
        for i, a in enumerate(s.entry):
            ctx = f"state {s.name} action #{i}"
            op = a.get("op")
            if op not in ACTION_FIELDS:
                raise SchemaError(f"{where}: {ctx}: unknown op {op!r}")
            required, optional = ACTION_FIELDS[op]
            keys = set(a) - {"op"}
            if required - keys:
                raise SchemaError(f"{where}: {ctx}: missing {sorted(required - keys)}")
            if keys - required - optional:
                raise SchemaError(f"{where}: {ctx}: unknown field(s) {sorted(keys - required - optional)}")
            if "endpoint" in a and a["endpoint"] not in gpios:
                raise UnknownReference(f"{where}: {ctx}: unknown GPIO endpoint {a['endpoint']!r}")
            if "channel" in a and a["channel"] not in channels:
                raise UnknownReference(f"{where}: {ctx}: unknown channel {a['channel']!r}")
            for key in ("var", "status", "choice"):
                if key in a:
                    var(a[key], ctx)
            if "value" in a:
                expr(a["value"], ctx)
            for v in a.get("values", ()):
                expr(v, ctx)
            if op == "compute" and (not isinstance(a["delay"], int) or a["delay"] < 0):
                raise SchemaError(f"{where}: {ctx}: compute delay must be a non-negative duration")
            if op == "select":
                if not a["branches"]:
                    raise SchemaError(f"{where}: {ctx}: select needs at least one branch")
                for j, b in enumerate(a["branches"]):
                    bctx = f"{ctx} branch #{j}"
                    keys = set(b)
                    if BRANCH_FIELDS[0] - keys or keys - BRANCH_FIELDS[0] - BRANCH_FIELDS[1]:
                        raise SchemaError(f"{where}: {bctx}: expected vars plus gpio or channel")
                    if ("gpio" in b) == ("channel" in b):
                        raise SchemaError(f"{where}: {bctx}: exactly one of gpio/channel")
                    if "gpio" in b and b["gpio"] not in gpios:
                        raise UnknownReference(f"{where}: {bctx}: unknown GPIO endpoint {b['gpio']!r}")
                    if "channel" in b and b["channel"] not in channels:
                        raise UnknownReference(f"{where}: {bctx}: unknown channel {b['channel']!r}")
                    if not b["vars"]:
                        raise SchemaError(f"{where}: {bctx}: vars must not be empty")
                    for v in b["vars"]:
                        var(v, bctx)
                    if "guard" in b:
                        expr(b["guard"], bctx)
        for tr in s.transitions:
            if tr.to not in states:
                raise UnknownReference(f"{where}: state {s.name} transitions to unknown state {tr.to!r}")
            if tr.guard is not None:
                expr(tr.guard, f"state {s.name} guard")


# -- runtime components -------------------------------------------------------

class Target:
    def __init__(self, name, service_time, kind="memory"):
        self.name = name
        self.kind = kind
        self.service_time = service_time
        self.queue = deque()
        self.busy = False
        self.transactions = 0
        # (arrival order, completion order) sequence numbers for auditing
        self.arrivals = []
        self.completions = []


class Source:
    """Something a blocked task can wait on (GPIO rx fifo or channel)."""

    def __init__(self):
        self.reserved = 0
        self.waiters = []

    def available(self):
        return self.count() - self.reserved

    def notify(self):
        waiters, self.waiters = self.waiters, []
        for wake in waiters:
            wake()


class GpioAdapter(Target, Source):
    """GPIO target bridging one TDF endpoint.

    TDF to DE: bounded FIFO of ``(timestamp, value)`` samples.
    DE to TDF: a single register, last write wins.
    """

    DATA = 0x0
    STATUS = 0x4
    RX_COUNT = 0x8

    def __init__(self, name, capacity=DEFAULT_FIFO_CAPACITY, service_time=10 * NS):
        Target.__init__(self, name, service_time, kind="gpio")
        Source.__init__(self)
        self.capacity = capacity
        self.rx = deque()
        self.tx_register = 0
        self.tx_flag = False
        self.pushes = 0
        self.pops = 0
        self.writes = 0
        self.tdf_reads = 0

    def count(self):
        return len(self.rx)

    def push(self, time, value):
        if len(self.rx) >= self.capacity:
            raise FifoOverflow(self.name, time)
        self.rx.append((time, value))
        self.pushes += 1
        self.notify()

    def pop(self):
        """Returns ``(available, value)``; an empty fifo yields ``(False, 0)``."""
        if not self.rx:
            return False, 0
        _, value = self.rx.popleft()
        self.pops += 1
        if self.reserved:
            self.reserved -= 1
        return True, value

    def sample_tx(self):
        """TDF-side converter read of the software-written register."""
        self.tdf_reads += 1
        self.tx_flag = False
        return self.tx_register

    def register_read(self, offset):
        if offset == self.DATA:
            return self.pop()[1]
        if offset == self.STATUS:
            return (1 if self.rx else 0) | (2 if self.tx_flag else 0)
        if offset == self.RX_COUNT:
            return len(self.rx)
        raise UnknownEndpoint(f"{self.name}: no register at offset {offset:#x}")

    def register_write(self, offset, value):
        if offset != self.DATA:
            raise UnknownEndpoint(f"{self.name}: register {offset:#x} is read-only")
        self.tx_register = value
        self.tx_flag = True
        self.writes += 1


class Channel(Source):
    """Bounded inter-task FIFO: blocking read, lossy non-blocking write."""

    def __init__(self, name, depth=DEFAULT_CHANNEL_DEPTH, memory=None):
        super().__init__()
        self.name = name
        self.depth = depth
        self.memory = memory
        self.items = deque()
        self.writes = 0
        self.reads = 0
        self.drops = 0

    def count(self):
        return len(self.items)

    def put(self, value):
        if len(self.items) >= self.depth:
            self.drops += 1
            return False
        self.items.append(value)
        self.writes += 1
        self.notify()
        return True

    def take(self):
        value = self.items.popleft()
        self.reads += 1
        if self.reserved:
            self.reserved -= 1
        return value


class Cpu:
    def __init__(self, name):
        self.name = name
        self.free_at = 0
        self.transactions = 0


class Interconnect:
    def __init__(self, kernel, spec):
        self.kernel = kernel
        self.request_latency = spec.request_latency
        self.response_latency = spec.response_latency
        self._arrival_seq = 0
        self.completed = []

    def transaction(self, cpu, target, op, done, who, what):
        """Issue ``op`` on ``target`` for initiator ``cpu``; ``done(result)`` on response.

        Returns nothing; the result arrives through ``done`` once the
        response has travelled back.
        """
        k = self.kernel
        issued = k.now
        cpu.transactions += 1
        target.transactions += 1
        req = {"issued": issued, "op": op, "done": done, "who": who, "what": what}

        def arrive():
            req["seq"] = self._arrival_seq
            self._arrival_seq += 1
            target.arrivals.append(req["seq"])
            target.queue.append(req)
            if not target.busy:
                self._start(target)
        k.post(issued + self.request_latency, arrive, target.name, f"arrive {who} {what}")

    def _start(self, target):
        req = target.queue.popleft()
        target.busy = True
        k = self.kernel

        def complete():
            result = req["op"]()
            target.completions.append(req["seq"])
            target.busy = False
            if target.queue:
                self._start(target)
            resp_at = k.now + self.response_latency
            self.completed.append((req["issued"], resp_at, target.name))
            k.post(resp_at, lambda: req["done"](result), req["who"], f"resp {target.name} {req['what']}")
            return f"serve {req['who']} {req['what']} -> {_fmt(result)}"
        k.post(k.now + target.service_time, complete, target.name, f"serve {req['who']} {req['what']}")


def _fmt(value):
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Task:
    """Interpreter for one FSM task; runs as a generator driven by kernel events."""

    def __init__(self, spec, platform, seed):
        self.spec = spec
        self.name = spec.name
        self.platform = platform
        self.kernel = platform.kernel
        self.cpu = platform.cpus[spec.cpu]
        stream = spec.stream if spec.stream is not None else name_stream(spec.name)
        self.rng = CounterRng(seed, stream)
        self.env = {name: init for name, _, init in spec.variables}
        self.types = {name: vtype for name, vtype, _ in spec.variables}
        self.states = {s.name: s for s in spec.states}
        self.state = spec.initial
        self.records = []
        self.choices = []
        self.finished = False
        self.blocked = False
        self._compiled = {}
        self._gen = None
        self._same_time = (None, 0)

    # expressions are compiled lazily and cached by source text
    def eval(self, source):
        fn = self._compiled.get(source) if isinstance(source, str) else None
        if fn is None:
            fn = compile_expr(source, self.types)
            if isinstance(source, str):
                self._compiled[source] = fn
        return fn(self.env)

    def assign(self, name, value):
        vtype = self.types[name]
        if vtype == "int":
            value = int(value)
        elif vtype == "real":
            value = float(value)
        else:
            value = bool(value)
        self.env[name] = value

    def start(self):
        self._gen = self._body()
        self.kernel.post(self.kernel.now, self._resume, self.name, f"start {self.spec.initial}")

    # -- driver

    def _resume(self, value=None):
        now = self.kernel.now
        last, n = self._same_time
        n = n + 1 if last == now else 1
        self._same_time = (now, n)
        if n > LIVELOCK_LIMIT:
            raise Livelock(f"task {self.name} dispatched {n} events at {now} ps without time passing")
        self.blocked = False
        try:
            cmd = self._gen.send(value)
        except StopIteration:
            self.finished = True
            return
        kind = cmd[0]
        k = self.kernel
        if kind == "now":
            k.post(now, self._resume, self.name, cmd[1])
        elif kind == "delay":
            start = max(now, self.cpu.free_at)
            end = start + cmd[1]
            self.cpu.free_at = end
            k.post(end, self._resume, self.name, cmd[2])
        elif kind == "txn":
            _, target, op, what = cmd
            self.platform.interconnect.transaction(
                self.cpu, target, op, self._resume, self.name, what)
        elif kind == "wait":
            self.blocked = True
            sources = cmd[1]

            def wake():
                for s in sources:
                    if wake in s.waiters:
                        s.waiters.remove(wake)
                k.post(k.now, self._resume, self.name, "wake")
            for s in sources:
                s.waiters.append(wake)
        else:  # pragma: no cover
            raise AssertionError(kind)

    # -- FSM

    def _body(self):
        while True:
            yield ("now", f"enter {self.state}")
            st = self.states[self.state]
            for action in st.entry:
                yield from self._action(action)
            if not st.transitions:
                return
            for tr in st.transitions:
                if tr.guard is None or self.eval(tr.guard):
                    self.state = tr.to
                    break
            else:
                raise StuckState(
                    f"task {self.name}: no transition enabled out of state {st.name} "
                    f"at {self.kernel.now} ps")

    def _gpio(self, name):
        try:
            return self.platform.gpios[name]
        except KeyError:
            raise UnknownEndpoint(f"task {self.name}: unknown GPIO endpoint {name!r}") from None

    def _read_gpio(self, gpio):
        return (yield ("txn", gpio, gpio.pop, f"read {gpio.name}"))

    def _read_channel(self, chan):
        if chan.memory is None:
            return chan.take()
        return (yield ("txn", chan.memory, chan.take, f"chan_read {chan.name}"))

    def _write_channel(self, chan, value):
        if chan.memory is None:
            chan.put(value)
            return
        yield ("txn", chan.memory, lambda: chan.put(value), f"chan_write {chan.name} {_fmt(value)}")

    def _action(self, a):
        op = a["op"]
        if op == "assign":
            self.assign(a["var"], self.eval(a["value"]))
        elif op == "compute":
            yield ("delay", a["delay"], f"compute {a['delay']}ps")
        elif op == "log":
            values = tuple(self.eval(v) for v in a.get("values", ()))
            self.records.append((self.kernel.now, a["tag"], values))
            yield ("now", " ".join(["log", a["tag"]] + [_fmt(v) for v in values]))
        elif op == "gpio_read":
            gpio = self._gpio(a["endpoint"])
            if a.get("blocking", False):
                while gpio.available() < 1:
                    yield ("wait", [gpio], f"wait {gpio.name}")
                gpio.reserved += 1
            ok, value = yield from self._read_gpio(gpio)
            self.assign(a["var"], value)
            if "status" in a:
                self.assign(a["status"], 1 if ok else 0)
        elif op == "gpio_write":
            gpio = self._gpio(a["endpoint"])
            value = self.eval(a["value"])
            yield ("txn", gpio, lambda: gpio.register_write(GpioAdapter.DATA, value),
                   f"write {gpio.name} {_fmt(value)}")
        elif op == "chan_read":
            chan = self.platform.channels[a["channel"]]
            while chan.available() < 1:
                yield ("wait", [chan], f"wait {chan.name}")
            chan.reserved += 1
            value = yield from self._read_channel(chan)
            self.assign(a["var"], value)
        elif op == "chan_write":
            chan = self.platform.channels[a["channel"]]
            yield from self._write_channel(chan, self.eval(a["value"]))
        elif op == "select":
            yield from self._select(a)
        else:  # pragma: no cover - rejected at validation
            raise SchemaError(f"unknown op {op!r}")

    def _branch_source(self, b):
        if "gpio" in b:
            return self._gpio(b["gpio"])
        return self.platform.channels[b["channel"]]

    def _select(self, a):
        branches = a["branches"]
        sources = [self._branch_source(b) for b in branches]
        while True:
            ready = [i for i, (b, s) in enumerate(zip(branches, sources))
                     if s.available() >= len(b["vars"]) and ("guard" not in b or self.eval(b["guard"]))]
            if ready:
                break
            yield ("wait", list(dict.fromkeys(sources)), "wait select")
        if len(ready) == 1:
            idx = ready[0]
        else:
            idx = ready[self.rng.randint(0, len(ready) - 1)]
        self.choices.append(idx)
        b, src = branches[idx], sources[idx]
        if "choice" in a:
            self.assign(a["choice"], idx)
        src.reserved += len(b["vars"])
        for var in b["vars"]:
            if "gpio" in b:
                _, value = yield from self._read_gpio(src)
            else:
                value = yield from self._read_channel(src)
            self.assign(var, value)


class Platform:
    """Runtime instance of a :class:`PlatformSpec` on a fresh kernel."""

    def __init__(self, spec, seed=0, kernel=None):
        validate_platform(spec)
        self.spec = spec
        self.kernel = kernel if kernel is not None else Kernel()
        self.interconnect = Interconnect(self.kernel, spec.interconnect)
        service = spec.interconnect.service_time
        self.cpus = {name: Cpu(name) for name in spec.cpus}
        self.targets = {}
        for t in spec.targets:
            self.targets[t.name] = Target(t.name, service, kind=t.kind)
        self.gpios = {}
        for g in spec.gpios:
            adapter = GpioAdapter(g.name, g.capacity, service)
            self.gpios[g.name] = adapter
            self.targets[g.name] = adapter
        self.channels = {
            c.name: Channel(c.name, c.depth, self.targets[c.memory] if c.memory else None)
            for c in spec.channels
        }
        self.tasks = {t.name: Task(t, self, seed) for t in spec.tasks}

    @property
    def initiator_count(self):
        return len(self.cpus)

    @property
    def target_count(self):
        return len(self.targets)

    def start(self):
        for task in self.tasks.values():
            task.start()

    def gpio(self, name):
        try:
            return self.gpios[name]
        except KeyError:
            raise UnknownEndpoint(f"unknown GPIO endpoint {name!r}") from None
