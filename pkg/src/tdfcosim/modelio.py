"""Model files, trace directories and statistics files.

A model is one JSON document::

    {
      "schema_version": 1,
      "simulation": {"seed": 1, "until": "100ms"},
      "clusters": [{"name", "modules", "signals", "bindings"}, ...],
      "platform": {"interconnect", "cpus", "targets", "gpios", "channels", "tasks"}
    }

Durations are integers (picoseconds) or strings with a ps/ns/us/ms/s suffix.
Unknown fields are rejected so typos surface as schema errors.
"""

import json
import os
from dataclasses import dataclass

from .blocks import KINDS
from .errors import BindingError, ModelError, ModelSyntaxError, SchemaError
from .platform import (
    VAR_TYPES, ChannelSpec, GpioSpec, InterconnectSpec, PlatformSpec, StateSpec,
    TargetSpec, TaskSpec, Transition, validate_platform,
)
from .simtime import MS, format_duration, parse_duration
from .tdf import build_cluster

SCHEMA_VERSION = 1
SUPPORTED_VERSIONS = (1,)


@dataclass(frozen=True)
class ModelDocument:
    clusters: tuple
    platform: PlatformSpec
    seed: int = 0
    until: int = 100 * MS
    name: str = "model"
    schema_version: int = SCHEMA_VERSION

    def cluster(self, name):
        for c in self.clusters:
            if c.name == name:
                return c
        raise ModelError(f"no cluster named {name!r}")


# -- parsing ------------------------------------------------------------------

def _obj(value, path, required=(), optional=()):
    if not isinstance(value, dict):
        raise SchemaError(f"{path}: expected an object")
    missing = [k for k in required if k not in value]
    if missing:
        raise SchemaError(f"{path}: missing field(s) {missing}")
    unknown = sorted(set(value) - set(required) - set(optional))
    if unknown:
        raise SchemaError(f"{path}.{unknown[0]}: unknown field")
    return value


def _list(value, path):
    if not isinstance(value, list):
        raise SchemaError(f"{path}: expected a list")
    return value


def _name(value, path):
    if not isinstance(value, str) or not value or any(c.isspace() for c in value) or "." in value:
        raise SchemaError(f"{path}: expected a name without spaces or dots, got {value!r}")
    return value


def _int(value, path, minimum=None):
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(f"{path}: expected an integer")
    if minimum is not None and value < minimum:
        raise SchemaError(f"{path}: must be >= {minimum}")
    return value


def _duration(value, path):
    try:
        return parse_duration(value)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def _rethrow(exc, where):
    """Re-raise a model error with location context, keeping its class."""
    try:
        new = type(exc)(f"{where}: {exc}")
    except TypeError:
        new = ModelError(f"{where}: {exc}")
    raise new from exc


def _cluster_description(cd, path):
    _obj(cd, path, ("name", "modules"), ("signals", "bindings"))
    _name(cd["name"], f"{path}.name")
    for i, md in enumerate(_list(cd["modules"], f"{path}.modules")):
        mp = f"{path}.modules[{i}]"
        _obj(md, mp, ("name", "behavior", "ports"), ("timestep",))
        _name(md["name"], f"{mp}.name")
        bd = _obj(md["behavior"], f"{mp}.behavior", ("kind",), ("params",))
        if bd["kind"] not in KINDS:
            raise SchemaError(f"{mp}.behavior.kind: unknown behavior kind {bd['kind']!r}")
        if "params" in bd:
            _obj(bd["params"], f"{mp}.behavior.params",
                 (), tuple(bd["params"]) if isinstance(bd["params"], dict) else ())
        for j, pd in enumerate(_list(md["ports"], f"{mp}.ports")):
            pp = f"{mp}.ports[{j}]"
            _obj(pd, pp, ("name", "direction"), ("kind", "rate", "delay", "timestep", "type"))
            _name(pd["name"], f"{pp}.name")
            if "rate" in pd:
                _int(pd["rate"], f"{pp}.rate", 1)
            if "delay" in pd:
                _int(pd["delay"], f"{pp}.delay", 0)
    for i, sd in enumerate(_list(cd.get("signals", []), f"{path}.signals")):
        _obj(sd, f"{path}.signals[{i}]", ("name", "from", "to"))
    for i, bd in enumerate(_list(cd.get("bindings", []), f"{path}.bindings")):
        _obj(bd, f"{path}.bindings[{i}]", ("port", "endpoint"))
    try:
        return build_cluster(cd)
    except ModelError as exc:
        _rethrow(exc, path)


def _action(ad, path):
    _obj(ad, path, ("op",), ("endpoint", "var", "status", "blocking", "value", "channel",
                             "branches", "choice", "delay", "tag", "values"))
    out = dict(ad)
    if "delay" in out:
        out["delay"] = _duration(out["delay"], f"{path}.delay")
    if "branches" in out:
        branches = []
        for i, b in enumerate(_list(out["branches"], f"{path}.branches")):
            _obj(b, f"{path}.branches[{i}]", ("vars",), ("gpio", "channel", "guard"))
            nb = dict(b)
            nb["vars"] = list(_list(b["vars"], f"{path}.branches[{i}].vars"))
            branches.append(nb)
        out["branches"] = branches
    if "values" in out:
        out["values"] = list(_list(out["values"], f"{path}.values"))
    if "blocking" in out and not isinstance(out["blocking"], bool):
        raise SchemaError(f"{path}.blocking: expected true or false")
    return out


def _task(td, path):
    _obj(td, path, ("name", "cpu", "initial", "states"), ("variables", "stream"))
    variables = []
    for i, vd in enumerate(_list(td.get("variables", []), f"{path}.variables")):
        vp = f"{path}.variables[{i}]"
        _obj(vd, vp, ("name", "type"), ("init",))
        if vd["type"] not in VAR_TYPES:
            raise SchemaError(f"{vp}.type: unknown type {vd['type']!r}")
        init = vd.get("init", VAR_TYPES[vd["type"]])
        variables.append((_name(vd["name"], f"{vp}.name"), vd["type"], init))
    states = []
    for i, sd in enumerate(_list(td["states"], f"{path}.states")):
        sp = f"{path}.states[{i}]"
        _obj(sd, sp, ("name",), ("entry", "transitions"))
        entry = tuple(_action(a, f"{sp}.entry[{j}]")
                      for j, a in enumerate(_list(sd.get("entry", []), f"{sp}.entry")))
        transitions = []
        for j, tr in enumerate(_list(sd.get("transitions", []), f"{sp}.transitions")):
            _obj(tr, f"{sp}.transitions[{j}]", ("to",), ("guard",))
            transitions.append(Transition(tr["to"], tr.get("guard")))
        states.append(StateSpec(sd["name"], entry, tuple(transitions)))
    stream = td.get("stream")
    if stream is not None:
        _int(stream, f"{path}.stream", 0)
    return TaskSpec(name=_name(td["name"], f"{path}.name"), cpu=td["cpu"], initial=td["initial"],
                    states=tuple(states), variables=tuple(variables), stream=stream)


def _platform(pd, path):
    _obj(pd, path, (), ("interconnect", "cpus", "targets", "gpios", "channels", "tasks"))
    ic = _obj(pd.get("interconnect", {}), f"{path}.interconnect", (),
              ("request_latency", "response_latency", "service_time"))
    default = InterconnectSpec()
    interconnect = InterconnectSpec(
        request_latency=_duration(ic.get("request_latency", default.request_latency),
                                  f"{path}.interconnect.request_latency"),
        response_latency=_duration(ic.get("response_latency", default.response_latency),
                                   f"{path}.interconnect.response_latency"),
        service_time=_duration(ic.get("service_time", default.service_time),
                               f"{path}.interconnect.service_time"),
    )
    cpus = tuple(_name(c, f"{path}.cpus[{i}]") for i, c in enumerate(_list(pd.get("cpus", []), f"{path}.cpus")))
    targets = []
    for i, td in enumerate(_list(pd.get("targets", []), f"{path}.targets")):
        _obj(td, f"{path}.targets[{i}]", ("name",), ("kind",))
        targets.append(TargetSpec(_name(td["name"], f"{path}.targets[{i}].name"), td.get("kind", "memory")))
    gpios = []
    for i, gd in enumerate(_list(pd.get("gpios", []), f"{path}.gpios")):
        _obj(gd, f"{path}.gpios[{i}]", ("name",), ("capacity",))
        gpios.append(GpioSpec(_name(gd["name"], f"{path}.gpios[{i}].name"),
                              _int(gd.get("capacity", 64), f"{path}.gpios[{i}].capacity", 1)))
    channels = []
    for i, cd in enumerate(_list(pd.get("channels", []), f"{path}.channels")):
        _obj(cd, f"{path}.channels[{i}]", ("name",), ("depth", "memory"))
        channels.append(ChannelSpec(_name(cd["name"], f"{path}.channels[{i}].name"),
                                    _int(cd.get("depth", 16), f"{path}.channels[{i}].depth", 1),
                                    cd.get("memory")))
    tasks = tuple(_task(td, f"{path}.tasks[{i}]")
                  for i, td in enumerate(_list(pd.get("tasks", []), f"{path}.tasks")))
    spec = PlatformSpec(cpus=cpus, targets=tuple(targets), gpios=tuple(gpios),
                        channels=tuple(channels), tasks=tasks, interconnect=interconnect)
    try:
        validate_platform(spec)
    except ModelError as exc:
        _rethrow(exc, path)
    return spec


def check_bindings(clusters, platform):
    """Converter bindings and GPIO endpoints must match one to one."""
    declared = [g.name for g in platform.gpios]
    used = {}
    for c in clusters:
        for ref, ep in c.bindings:
            if ep not in declared:
                raise BindingError(f"cluster {c.name}: {ref} bound to undeclared GPIO endpoint {ep!r}")
            if ep in used:
                raise BindingError(f"GPIO endpoint {ep!r} bound by both {used[ep]} and {c.name}.{ref}")
            used[ep] = f"{c.name}.{ref}"
    for ep in declared:
        if ep not in used:
            raise BindingError(f"GPIO endpoint {ep!r} is not bound to any converter port")


def load_model(data, source="<model>"):
    """Build a :class:`ModelDocument` from already-decoded JSON."""
    _obj(data, source, ("schema_version",), ("name", "simulation", "clusters", "platform"))
    version = data["schema_version"]
    if version not in SUPPORTED_VERSIONS:
        raise SchemaError(f"{source}.schema_version: unsupported version {version!r}")
    sim = _obj(data.get("simulation", {}), f"{source}.simulation", (), ("seed", "until"))
    seed = _int(sim.get("seed", 0), f"{source}.simulation.seed", 0)
    until = _duration(sim.get("until", 100 * MS), f"{source}.simulation.until")
    clusters = []
    names = set()
    for i, cd in enumerate(_list(data.get("clusters", []), f"{source}.clusters")):
        c = _cluster_description(cd, f"{source}.clusters[{i}]")
        if c.name in names:
            raise SchemaError(f"{source}.clusters[{i}].name: duplicate cluster {c.name!r}")
        names.add(c.name)
        clusters.append(c)
    platform = _platform(data.get("platform", {}), f"{source}.platform")
    try:
        check_bindings(clusters, platform)
    except BindingError as exc:
        _rethrow(exc, source)
    return ModelDocument(clusters=tuple(clusters), platform=platform, seed=seed, until=until,
                         name=data.get("name", "model"), schema_version=version)


def parse_model(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return load_model(data, source=str(path))


# -- serialization ------------------------------------------------------------

def _time_or_none(t):
    return None if t is None else format_duration(t)


def cluster_to_dict(c):
    modules = []
    for m in c.modules:
        ports = []
        for p in m.ports:
            pd = {"name": p.name, "direction": p.direction, "kind": p.kind, "rate": p.rate,
                  "delay": p.delay, "type": p.value_type}
            if p.timestep is not None:
                pd["timestep"] = format_duration(p.timestep)
            ports.append(pd)
        md = {"name": m.name}
        if m.timestep is not None:
            md["timestep"] = format_duration(m.timestep)
        md["behavior"] = {"kind": m.behavior.kind, "params": dict(m.behavior.params)}
        md["ports"] = ports
        modules.append(md)
    return {
        "name": c.name,
        "modules": modules,
        "signals": [{"name": s.name, "from": str(s.writer), "to": str(s.reader)} for s in c.signals],
        "bindings": [{"port": str(ref), "endpoint": ep} for ref, ep in c.bindings],
    }


def _action_to_dict(a):
    out = dict(a)
    if "delay" in out:
        out["delay"] = format_duration(out["delay"])
    return out


def platform_to_dict(p):
    ic = p.interconnect
    return {
        "interconnect": {
            "request_latency": format_duration(ic.request_latency),
            "response_latency": format_duration(ic.response_latency),
            "service_time": format_duration(ic.service_time),
        },
        "cpus": list(p.cpus),
        "targets": [{"name": t.name, "kind": t.kind} for t in p.targets],
        "gpios": [{"name": g.name, "capacity": g.capacity} for g in p.gpios],
        "channels": [dict({"name": c.name, "depth": c.depth},
                          **({"memory": c.memory} if c.memory else {})) for c in p.channels],
        "tasks": [
            dict({
                "name": t.name, "cpu": t.cpu, "initial": t.initial,
                "variables": [{"name": n, "type": ty, "init": init} for n, ty, init in t.variables],
                "states": [
                    {"name": s.name,
                     "entry": [_action_to_dict(a) for a in s.entry],
                     "transitions": [dict({"to": tr.to}, **({"guard": tr.guard} if tr.guard is not None else {}))
                                     for tr in s.transitions]}
                    for s in t.states
                ],
            }, **({"stream": t.stream} if t.stream is not None else {}))
            for t in p.tasks
        ],
    }


def model_to_dict(doc):
    return {
        "schema_version": doc.schema_version,
        "name": doc.name,
        "simulation": {"seed": doc.seed, "until": format_duration(doc.until)},
        "clusters": [cluster_to_dict(c) for c in doc.clusters],
        "platform": platform_to_dict(doc.platform),
    }


def serialize_model(doc):
    return json.dumps(model_to_dict(doc), indent=2) + "\n"


def write_model(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(doc))


# -- traces and statistics ----------------------------------------------------

def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        # repr is the shortest string that round-trips
        return repr(v)
    return str(v)


def format_stats(stats):
    lines = []
    for key in ("initiators", "targets", "de_events", "tdf_accesses", "seed", "until_ps"):
        if key in stats:
            lines.append(f"{key} {stats[key]}")
    tables = (
        ("target", "target_transactions"),
        ("initiator", "initiator_transactions"),
    )
    for label, key in tables:
        for name, n in stats.get(key, {}).items():
            lines.append(f"{label} {name} transactions={n}")
    for label, key in (("gpio", "gpio"), ("signal", "signals"), ("channel", "channels"), ("task", "tasks")):
        for name, fields in stats.get(key, {}).items():
            body = " ".join(f"{k}={format_value(v)}" for k, v in fields.items())
            lines.append(f"{label} {name} {body}")
    return "\n".join(lines) + "\n"


def _scalar(text):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        return text


def parse_stats(text):
    stats = {"target_transactions": {}, "initiator_transactions": {}, "gpio": {},
             "signals": {}, "channels": {}, "tasks": {}}
    tables = {"gpio": "gpio", "signal": "signals", "channel": "channels", "task": "tasks"}
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) == 2:
            stats[parts[0]] = _scalar(parts[1])
            continue
        label, name, fields = parts[0], parts[1], dict(p.split("=", 1) for p in parts[2:])
        if label in ("target", "initiator"):
            stats[f"{label}_transactions"][name] = int(fields["transactions"])
        elif label in tables:
            stats[tables[label]][name] = {k: _scalar(v) for k, v in fields.items()}
    return stats


def write_traces(traces, directory, seed=None, until=None):
    """Write one CSV per traced signal, ``events.log`` and ``stats.txt``.

    Returns the sorted list of file paths written.
    """
    os.makedirs(directory, exist_ok=True)
    written = []
    for name, samples in sorted(traces.signals.items()):
        path = os.path.join(directory, f"{name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("timestamp_ps,value\n")
            for t, v in samples:
                fh.write(f"{t},{format_value(v)}\n")
        written.append(path)
    path = os.path.join(directory, "events.log")
    with open(path, "w", encoding="utf-8") as fh:
        for time, component, text in traces.log:
            fh.write(f"{time} {component} {text}\n")
    written.append(path)
    stats = dict(traces.stats)
    if seed is not None:
        stats["seed"] = seed
    if until is not None:
        stats["until_ps"] = until
    path = os.path.join(directory, "stats.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_stats(stats))
    written.append(path)
    return sorted(written)


def read_stats(directory):
    with open(os.path.join(directory, "stats.txt"), encoding="utf-8") as fh:
        return parse_stats(fh.read())


def read_events(directory):
    """``events.log`` as a list of ``(time, component, text)``."""
    out = []
    with open(os.path.join(directory, "events.log"), encoding="utf-8") as fh:
        for line in fh:
            time, component, text = line.rstrip("\n").split(" ", 2)
            out.append((int(time), component, text))
    return out


def read_trace_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "timestamp_ps,value":
            raise ModelError(f"{path}: not a trace file")
        out = []
        for line in fh:
            t, v = line.rstrip("\n").split(",", 1)
            out.append((int(t), _parse_number(v)))
    return out


def _parse_number(text):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        return float(text)
