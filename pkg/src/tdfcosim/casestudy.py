"""Active-braking case study and the parametric scalability generator.

The braking model has five sensor clusters behind GPIO adapters, five
software tasks grouped by destination ECU, four CPUs and twelve further
platform targets (memories and peripherals), which gives 17 targets and 4
initiators on the interconnect.
"""

from dataclasses import dataclass

from .errors import InvalidParams
from .modelio import SCHEMA_VERSION, load_model
from .simtime import MS

CAR_POSITION = "CarPositionSimulator"
EMERGENCY = "EmergencySimulator"
DSRSC = "DSRSC_Management"
ID_RANGE = (1, 5)
POSITION_RANGE = (3, 10)

# name, ranges per emitted sample, module timestep
SENSORS = (
    (CAR_POSITION, [list(ID_RANGE), list(POSITION_RANGE)], "1ms"),
    (EMERGENCY, [list(ID_RANGE), list(POSITION_RANGE)], "5ms"),
    ("VehicleSpeedSensor", [[0, 200]], "1ms"),
    ("SteeringAngleSensor", [[-45, 45]], "1ms"),
    ("WheelSpeedSensor", [[0, 2000]], "1ms"),
)

EXTRA_TARGETS = (
    ("ram0", "memory"), ("ram1", "memory"), ("ram2", "memory"), ("ram3", "memory"),
    ("ram4", "memory"), ("ram5", "memory"), ("rom", "memory"), ("tty", "peripheral"),
    ("timer", "peripheral"), ("icu", "peripheral"), ("locks", "peripheral"),
    ("fdaccess", "peripheral"),
)


@dataclass(frozen=True)
class BrakingModelParams:
    sensor_count: int = 5
    cpu_count: int = 4
    extra_target_count: int = 12
    seed: int = 1
    until: str = "100ms"

    def check(self):
        if not (isinstance(self.sensor_count, int) and self.sensor_count >= 1):
            raise InvalidParams("sensor_count must be a positive integer")
        if not (isinstance(self.cpu_count, int) and self.cpu_count >= 1):
            raise InvalidParams("cpu_count must be a positive integer")
        if not (isinstance(self.extra_target_count, int) and self.extra_target_count >= 0):
            raise InvalidParams("extra_target_count must be a non-negative integer")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise InvalidParams("seed must be a non-negative integer")


def gpio_name(sensor):
    return f"gpio_{sensor}"


def sensor_cluster(name, ranges, timestep, stream):
    return {
        "name": name,
        "modules": [{
            "name": "gen",
            "timestep": timestep,
            "behavior": {"kind": "uniform_random_int", "params": {"ranges": ranges, "stream": stream}},
            "ports": [{"name": "out", "direction": "out", "kind": "converter",
                       "rate": len(ranges), "type": "int"}],
        }],
        "bindings": [{"port": "gen.out", "endpoint": gpio_name(name)}],
    }


def extra_targets(count):
    out = [{"name": n, "kind": k} for n, k in EXTRA_TARGETS[:count]]
    for i in range(len(EXTRA_TARGETS), count):
        out.append({"name": f"ram{i - len(EXTRA_TARGETS) + 6}", "kind": "memory"})
    return out


def _sensor_specs(count):
    specs = list(SENSORS[:count])
    for i in range(len(SENSORS), count):
        specs.append((f"Sensor{i + 1}", [[0, 100]], "1ms"))
    return specs


def _var(name, vtype="int"):
    return {"name": name, "type": vtype}


def _dispatch_task(name, cpu, branches, handlers, variables, wait="Wait"):
    """Task waiting in a select; branch ``i`` jumps to ``handlers[i]`` (a state dict)."""
    states = [{
        "name": wait,
        "entry": [{"op": "select", "branches": branches, "choice": "src"}],
        "transitions": [{"to": h["name"], "guard": f"src == {i}"} for i, h in enumerate(handlers)],
    }]
    for h in handlers:
        states.append(dict(h, transitions=[{"to": wait}]))
    return {"name": name, "cpu": cpu, "initial": wait,
            "variables": [_var("src")] + variables, "states": states}


def build_braking_model(params=None):
    """Model document for the active-braking application."""
    params = params or BrakingModelParams()
    params.check()
    sensors = _sensor_specs(params.sensor_count)
    present = {name for name, _, _ in sensors}
    clusters = [sensor_cluster(name, ranges, ts, stream=i + 1)
                for i, (name, ranges, ts) in enumerate(sensors)]

    targets = extra_targets(params.extra_target_count)
    memories = [t["name"] for t in targets if t["kind"] == "memory"]
    channel_names = ["positionInfo", "emergencyMessage", "brakeOrder", "torqueRequest",
                     "broadcastEmergencyBrakingMessage", "toNeighbours"]
    channels = []
    for i, c in enumerate(channel_names):
        ch = {"name": c, "depth": 16}
        if memories:
            ch["memory"] = memories[i % len(memories)]
        channels.append(ch)

    cpus = [f"cpu{i}" for i in range(params.cpu_count)]
    task_order = [DSRSC, "CSCU", "DangerAvoidanceStrategy", "PTC", "CommunicationECU"]
    cpu_of = {t: cpus[i % len(cpus)] for i, t in enumerate(task_order)}

    # DSRSC_Management: reads either sensor pair or the broadcast message
    branches, handlers = [], []
    if CAR_POSITION in present:
        branches.append({"gpio": gpio_name(CAR_POSITION), "vars": ["id", "position"]})
        handlers.append({"name": "HandlePosition", "entry": [
            {"op": "log", "tag": "pair", "values": ["id", "position"]},
            {"op": "compute", "delay": "5us"},
            {"op": "chan_write", "channel": "positionInfo", "value": "id * 100 + position"},
        ]})
    if EMERGENCY in present:
        branches.append({"gpio": gpio_name(EMERGENCY), "vars": ["eid", "epos"]})
        handlers.append({"name": "HandleEmergency", "entry": [
            {"op": "log", "tag": "emergency", "values": ["eid", "epos"]},
            {"op": "compute", "delay": "5us"},
            {"op": "chan_write", "channel": "emergencyMessage", "value": "eid * 100 + epos"},
        ]})
    branches.append({"channel": "broadcastEmergencyBrakingMessage", "vars": ["bmsg"]})
    handlers.append({"name": "HandleBroadcast", "entry": [
        {"op": "log", "tag": "broadcast", "values": ["bmsg"]},
        {"op": "compute", "delay": "5us"},
        {"op": "chan_write", "channel": "toNeighbours", "value": "bmsg"},
    ]})
    dsrsc = _dispatch_task(DSRSC, cpu_of[DSRSC], branches, handlers,
                           [_var(v) for v in ("id", "position", "eid", "epos", "bmsg")],
                           wait="WaitForEnvironmentInput")

    # sensors beyond the two pair emitters feed the ECUs through extra branches
    aux = {"CSCU": [], "DangerAvoidanceStrategy": [], "PTC": []}
    preferred = {"SteeringAngleSensor": "CSCU", "WheelSpeedSensor": "DangerAvoidanceStrategy",
                 "VehicleSpeedSensor": "PTC"}
    rr = list(aux)
    extra_i = 0
    for name, _, _ in sensors:
        if name in (CAR_POSITION, EMERGENCY):
            continue
        owner = preferred.get(name)
        if owner is None:
            owner = rr[extra_i % len(rr)]
            extra_i += 1
        aux[owner].append(name)

    def aux_parts(owner):
        br, hs = [], []
        for name in aux[owner]:
            br.append({"gpio": gpio_name(name), "vars": ["sample"]})
            hs.append({"name": f"Read{name}", "entry": [
                {"op": "assign", "var": "last", "value": "sample"}]})
        return br, hs

    # CSCU: plausibility check on emergencies, brake order when close enough
    br = [{"channel": "emergencyMessage", "vars": ["msg"]},
          {"channel": "positionInfo", "vars": ["pos"]}]
    hs = [{"name": "PlausibilityCheck", "entry": [
              {"op": "compute", "delay": "20us"},
              {"op": "assign", "var": "plausible", "value": "msg % 100 <= 6"}]},
          {"name": "UpdatePosition", "entry": [
              {"op": "assign", "var": "lastpos", "value": "pos"}]}]
    b2, h2 = aux_parts("CSCU")
    cscu = _dispatch_task("CSCU", cpu_of["CSCU"], br + b2, hs + h2,
                          [_var("msg"), _var("pos"), _var("lastpos"), _var("sample"),
                           _var("last"), _var("plausible", "bool")])
    check = cscu["states"][1]
    check["transitions"] = [{"to": "OrderBraking", "guard": "plausible"}, {"to": "Wait"}]
    cscu["states"].append({"name": "OrderBraking", "entry": [
        {"op": "log", "tag": "brake_order", "values": ["msg"]},
        {"op": "chan_write", "channel": "brakeOrder", "value": "msg"}],
        "transitions": [{"to": "Wait"}]})

    # BCU: decide how to slow down, request torque, warn neighbours
    br = [{"channel": "brakeOrder", "vars": ["order"]}]
    hs = [{"name": "PlanAvoidance", "entry": [
        {"op": "compute", "delay": "10us"},
        {"op": "chan_write", "channel": "torqueRequest", "value": "order % 100"},
        {"op": "chan_write", "channel": "broadcastEmergencyBrakingMessage", "value": "order"},
        {"op": "log", "tag": "avoid", "values": ["order"]}]}]
    b2, h2 = aux_parts("DangerAvoidanceStrategy")
    bcu = _dispatch_task("DangerAvoidanceStrategy", cpu_of["DangerAvoidanceStrategy"],
                         br + b2, hs + h2, [_var("order"), _var("sample"), _var("last")])

    # PTC: apply engine torque modification
    br = [{"channel": "torqueRequest", "vars": ["torque"]}]
    hs = [{"name": "ApplyTorque", "entry": [
        {"op": "compute", "delay": "5us"},
        {"op": "log", "tag": "torque", "values": ["torque"]}]}]
    b2, h2 = aux_parts("PTC")
    ptc = _dispatch_task("PTC", cpu_of["PTC"], br + b2, hs + h2,
                         [_var("torque"), _var("sample"), _var("last")])

    comm = {"name": "CommunicationECU", "cpu": cpu_of["CommunicationECU"], "initial": "Wait",
            "variables": [_var("msg")],
            "states": [
                {"name": "Wait", "entry": [{"op": "chan_read", "channel": "toNeighbours", "var": "msg"}],
                 "transitions": [{"to": "Send"}]},
                {"name": "Send", "entry": [{"op": "compute", "delay": "10us"},
                                           {"op": "log", "tag": "forward", "values": ["msg"]}],
                 "transitions": [{"to": "Wait"}]},
            ]}

    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": "active_braking",
        "simulation": {"seed": params.seed, "until": params.until},
        "clusters": clusters,
        "platform": {
            "interconnect": {"request_latency": "10ns", "response_latency": "10ns",
                             "service_time": "10ns"},
            "cpus": cpus,
            "targets": targets,
            "gpios": [{"name": gpio_name(n), "capacity": 64} for n, _, _ in sensors],
            "channels": channels,
            "tasks": [dsrsc, cscu, bcu, ptc, comm],
        },
    }
    return load_model(doc, source="active_braking")


def build_scaled_model(sensors, cpus, seed=1, until="100ms"):
    """N CarPositionSimulator clones, each drained by its own consumer task."""
    if not (isinstance(sensors, int) and sensors >= 1):
        raise InvalidParams("sensors must be a positive integer")
    if not (isinstance(cpus, int) and cpus >= 1):
        raise InvalidParams("cpus must be a positive integer")
    if not (isinstance(seed, int) and seed >= 0):
        raise InvalidParams("seed must be a non-negative integer")
    _, ranges, ts = SENSORS[0]
    clusters, gpios, tasks = [], [], []
    cpu_names = [f"cpu{i}" for i in range(cpus)]
    for i in range(sensors):
        name = f"{CAR_POSITION}{i}"
        clusters.append(sensor_cluster(name, ranges, ts, stream=i + 1))
        gpios.append({"name": gpio_name(name), "capacity": 64})
        tasks.append({
            "name": f"Consumer{i}", "cpu": cpu_names[i % cpus], "initial": "Wait",
            "variables": [_var("id"), _var("position")],
            "states": [
                {"name": "Wait",
                 "entry": [{"op": "select",
                            "branches": [{"gpio": gpio_name(name), "vars": ["id", "position"]}]}],
                 "transitions": [{"to": "Handle"}]},
                {"name": "Handle",
                 "entry": [{"op": "log", "tag": "pair", "values": ["id", "position"]},
                           {"op": "compute", "delay": "1us"}],
                 "transitions": [{"to": "Wait"}]},
            ],
        })
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": f"scaled_{sensors}x{cpus}",
        "simulation": {"seed": seed, "until": until},
        "clusters": clusters,
        "platform": {
            "cpus": cpu_names,
            "targets": extra_targets(len(EXTRA_TARGETS)),
            "gpios": gpios,
            "tasks": tasks,
        },
    }
    return load_model(doc, source=f"scaled_{sensors}x{cpus}")


DEFAULT_UNTIL = 100 * MS
