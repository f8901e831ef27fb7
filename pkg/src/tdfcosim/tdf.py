"""TDF graph data model: clusters of modules joined by point-to-point signals.

Times are integer picoseconds. ``None`` marks a timestep still to be
inferred by :func:`tdfcosim.scheduler.infer_timesteps`.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .blocks import Behavior, PortShape, check_ports
from .errors import (
    DirectionMismatch, DuplicateName, InvalidParams, TypeMismatch,
    UnboundPort, UnknownReference,
)
from .simtime import parse_duration

VALUE_TYPES = ("int", "real", "bool")
DIRECTIONS = ("in", "out")
PORT_KINDS = ("normal", "converter")


class PortRef(NamedTuple):
    module: str
    port: str

    def __str__(self):
        return f"{self.module}.{self.port}"

    @classmethod
    def parse(cls, text):
        if not isinstance(text, str) or text.count(".") != 1:
            raise UnknownReference(f"port reference must look like 'module.port', got {text!r}")
        module, port = text.split(".")
        return cls(module, port)


@dataclass(frozen=True)
class TdfPort:
    name: str
    direction: str
    kind: str = "normal"
    rate: int = 1
    delay: int = 0
    timestep: Optional[int] = None
    value_type: str = "real"

    @property
    def is_input(self):
        return self.direction == "in"

    @property
    def is_converter(self):
        return self.kind == "converter"

    def shape(self):
        return PortShape(self.rate, self.timestep or 0, self.value_type, self.delay)


@dataclass(frozen=True)
class TdfModule:
    name: str
    ports: tuple
    behavior: Behavior
    timestep: Optional[int] = None

    def port(self, name):
        for p in self.ports:
            if p.name == name:
                return p
        raise UnknownReference(f"module {self.name!r} has no port {name!r}")

    @property
    def inputs(self):
        return tuple(p for p in self.ports if p.is_input)

    @property
    def outputs(self):
        return tuple(p for p in self.ports if not p.is_input)


@dataclass(frozen=True)
class TdfSignal:
    name: str
    writer: PortRef
    reader: PortRef


@dataclass(frozen=True)
class TdfCluster:
    name: str
    modules: tuple
    signals: tuple = ()
    # ((PortRef, endpoint name), ...) in declaration order
    bindings: tuple = ()
    _index: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {m.name: m for m in self.modules})

    def module(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise UnknownReference(f"cluster {self.name!r} has no module {name!r}") from None

    def port(self, ref):
        return self.module(ref.module).port(ref.port)

    def endpoint_of(self, ref):
        for r, ep in self.bindings:
            if r == ref:
                return ep
        raise UnknownReference(f"converter port {ref} is not bound")

    def converter_ports(self):
        return [PortRef(m.name, p.name) for m in self.modules for p in m.ports if p.is_converter]

    def signal_by_writer(self):
        return {s.writer: s for s in self.signals}

    def signal_by_reader(self):
        return {s.reader: s for s in self.signals}


def _port_from_description(d, where):
    try:
        direction = d["direction"]
        name = d["name"]
    except KeyError as exc:
        raise InvalidParams(f"{where}: missing field {exc.args[0]!r}") from None
    if direction not in DIRECTIONS:
        raise InvalidParams(f"{where}: direction must be one of {DIRECTIONS}")
    kind = d.get("kind", "normal")
    if kind not in PORT_KINDS:
        raise InvalidParams(f"{where}: kind must be one of {PORT_KINDS}")
    value_type = d.get("type", "real")
    if value_type not in VALUE_TYPES:
        raise InvalidParams(f"{where}: type must be one of {VALUE_TYPES}")
    rate = d.get("rate", 1)
    delay = d.get("delay", 0)
    if not isinstance(rate, int) or isinstance(rate, bool) or rate < 1:
        raise InvalidParams(f"{where}: rate must be an integer >= 1")
    if not isinstance(delay, int) or isinstance(delay, bool) or delay < 0:
        raise InvalidParams(f"{where}: delay must be an integer >= 0")
    return TdfPort(name=name, direction=direction, kind=kind, rate=rate, delay=delay,
                   timestep=_optional_time(d.get("timestep"), where),
                   value_type=value_type)


def _optional_time(value, where):
    if value is None:
        return None
    try:
        t = parse_duration(value)
    except ValueError as exc:
        raise InvalidParams(f"{where}: {exc}") from None
    if t == 0:
        raise InvalidParams(f"{where}: timestep must be > 0")
    return t


def build_cluster(description):
    """Build and structurally check a cluster from its parsed description.

    The description is the cluster object of the model file (see
    :mod:`tdfcosim.modelio`); durations may be given as ps integers or
    unit-suffixed strings.
    """
    cname = description.get("name")
    modules = []
    seen = set()
    for i, md in enumerate(description.get("modules", [])):
        where = f"cluster {cname}: module #{i}"
        name = md.get("name")
        if name in seen:
            raise DuplicateName(f"cluster {cname}: duplicate module name {name!r}")
        seen.add(name)
        ports = []
        pnames = set()
        for j, pd in enumerate(md.get("ports", [])):
            port = _port_from_description(pd, f"{where} port #{j}")
            if port.name in pnames:
                raise DuplicateName(f"module {name!r}: duplicate port name {port.name!r}")
            pnames.add(port.name)
            ports.append(port)
        bd = md.get("behavior", {"kind": "sink"})
        behavior = Behavior(bd["kind"], dict(bd.get("params", {})))
        module = TdfModule(name=name, ports=tuple(ports), behavior=behavior,
                           timestep=_optional_time(md.get("timestep"), where))
        check_ports(behavior, [p.shape() for p in module.inputs],
                    [p.shape() for p in module.outputs])
        modules.append(module)

    cluster = TdfCluster(name=cname, modules=tuple(modules))

    signals = []
    snames = set()
    bound = {}
    for sd in description.get("signals", []):
        sname = sd.get("name")
        if sname in snames:
            raise DuplicateName(f"cluster {cname}: duplicate signal name {sname!r}")
        snames.add(sname)
        writer = PortRef.parse(sd.get("from"))
        reader = PortRef.parse(sd.get("to"))
        wp, rp = cluster.port(writer), cluster.port(reader)
        if wp.is_input:
            raise DirectionMismatch(f"signal {sname!r}: writer {writer} is an input port")
        if not rp.is_input:
            raise DirectionMismatch(f"signal {sname!r}: reader {reader} is an output port")
        if wp.is_converter or rp.is_converter:
            raise TypeMismatch(f"signal {sname!r}: converter ports connect to GPIO endpoints, not signals")
        if wp.value_type != rp.value_type:
            raise TypeMismatch(
                f"signal {sname!r}: {writer} is {wp.value_type} but {reader} is {rp.value_type}")
        for ref in (writer, reader):
            if ref in bound:
                raise DuplicateName(f"port {ref} bound to both {bound[ref]!r} and {sname!r}")
            bound[ref] = sname
        signals.append(TdfSignal(sname, writer, reader))

    bindings = []
    for bd in description.get("bindings", []):
        ref = PortRef.parse(bd.get("port"))
        port = cluster.port(ref)
        if not port.is_converter:
            raise TypeMismatch(f"binding: {ref} is not a converter port")
        if ref in bound:
            raise DuplicateName(f"converter port {ref} bound more than once")
        bound[ref] = bd.get("endpoint")
        bindings.append((ref, bd.get("endpoint")))

    for m in modules:
        for p in m.ports:
            ref = PortRef(m.name, p.name)
            if ref not in bound:
                what = "GPIO endpoint" if p.is_converter else "signal"
                raise UnboundPort(f"cluster {cname}: port {ref} has no {what}")

    return TdfCluster(name=cname, modules=tuple(modules), signals=tuple(signals),
                      bindings=tuple(bindings))
