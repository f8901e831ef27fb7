"""Random cluster generators and a brute-force schedule oracle for tests."""

import math

from tdfcosim.errors import ArityMismatch
from tdfcosim.scheduler import initial_tokens
from tdfcosim.simtime import MS
from tdfcosim.tdf import PortRef, build_cluster

# 12 is divisible by every activation count 1..4
PERIOD = 12 * MS


def _behavior(n_in, n_out):
    if n_out == 0:
        return {"kind": "sink"}
    if n_in == 0 and n_out == 1:
        return {"kind": "constant", "params": {"value": 1}}
    if n_in >= 1 and n_out == 1:
        return {"kind": "sum"}
    if n_in == 1:
        return {"kind": "duplicate"}
    return None


def _assemble(name, names, counts, ports, signals, bindings, annotate, period):
    modules = []
    for m in names:
        n_in = sum(1 for p in ports[m] if p["direction"] == "in")
        b = _behavior(n_in, len(ports[m]) - n_in)
        if b is None:
            return None
        md = {"name": m, "behavior": b, "ports": ports[m]}
        if m in annotate:
            md["timestep"] = period // counts[m]
        modules.append(md)
    return build_cluster({"name": name, "modules": modules, "signals": signals,
                          "bindings": bindings})


def random_consistent_cluster(rng, max_modules=5, max_count=4, converters=True,
                              annotate_all=None, name="G", period=PERIOD):
    """A connected, rate-consistent, deadlock-free cluster.

    Forward edges follow a random spanning tree plus extras; back edges
    carry a full period of initial samples so the graph stays live.
    Module names are shuffled against topology to exercise tie-breaking.
    """
    while True:
        n = rng.randint(1, max_modules)
        names = [f"M{i}" for i in range(n)]
        rng.shuffle(names)
        counts = {m: rng.randint(1, max_count) for m in names}
        ports = {m: [] for m in names}
        signals, bindings = [], []

        def edge(a, b, back=False):
            g = math.gcd(counts[a], counts[b])
            c = rng.randint(1, 2)
            ra, rb = counts[b] // g * c, counts[a] // g * c
            i = len(signals)
            wd = 0 if back else rng.choice((0, 0, 0, 1))
            rd = counts[b] * rb if back else rng.choice((0, 0, 0, 1, 2))
            ports[a].append({"name": f"o{i}", "direction": "out", "rate": ra,
                             "delay": wd, "type": "int"})
            ports[b].append({"name": f"i{i}", "direction": "in", "rate": rb,
                             "delay": rd, "type": "int"})
            signals.append({"name": f"s{i}", "from": f"{a}.o{i}", "to": f"{b}.i{i}"})

        for i in range(1, n):
            edge(names[rng.randrange(i)], names[i])
        for _ in range(rng.randint(0, 2)):
            if n < 2:
                break
            i, j = sorted(rng.sample(range(n), 2))
            if rng.random() < 0.3:
                edge(names[j], names[i], back=True)
            else:
                edge(names[i], names[j])
        if converters:
            for m in names:
                if rng.random() < 0.4:
                    d = rng.choice(("in", "out"))
                    rates = [r for r in (1, 2, 3) if (period // counts[m]) % r == 0]
                    p = f"c{d}"
                    ports[m].append({"name": p, "direction": d, "kind": "converter",
                                     "rate": rng.choice(rates), "type": "int"})
                    bindings.append({"port": f"{m}.{p}", "endpoint": f"gpio_{m}_{p}"})
        all_ts = rng.random() < 0.5 if annotate_all is None else annotate_all
        annotate = set(names) if all_ts else {names[0]}
        try:
            cluster = _assemble(name, names, counts, ports, signals, bindings, annotate, period)
        except ArityMismatch:
            cluster = None
        if cluster is not None:
            return cluster, {m: period // counts[m] for m in names}


def violating_cluster(rng, name="V"):
    """Cluster whose converter accesses are guaranteed non-monotone.

    Producer X fires ``nx`` times per period, reading a converter input
    each time; consumer Y fires fewer times and needs samples from more
    than one X activation before its first converter write at time 0.

    The write side keeps rate 1: a multi-sample write burst wider than the
    gap between two read bursts cannot be made monotone by any delay.
    """
    nx = rng.randint(2, 4)
    ny = rng.choice([d for d in range(1, nx) if nx % d == 0])
    scale = rng.choice((1, 2, 5)) * MS
    period = 12 * scale
    g = math.gcd(nx, ny)
    c = rng.randint(1, 2)
    x, y = rng.sample(["A", "B", "X", "Y", "Q"], 2)
    ports = {
        x: [{"name": "cin", "direction": "in", "kind": "converter",
             "rate": rng.choice([r for r in (1, 2, 3) if (period // nx) % r == 0]), "type": "int"},
            {"name": "o", "direction": "out", "rate": ny // g * c, "type": "int"}],
        y: [{"name": "i", "direction": "in", "rate": nx // g * c, "type": "int"},
            {"name": "cout", "direction": "out", "kind": "converter", "rate": 1, "type": "int"}],
    }
    signals = [{"name": "s", "from": f"{x}.o", "to": f"{y}.i"}]
    bindings = [{"port": f"{x}.cin", "endpoint": "gin"}, {"port": f"{y}.cout", "endpoint": "gout"}]
    names = [x, y]
    counts = {x: nx, y: ny}
    if rng.random() < 0.5:
        # downstream sink on Y, same rate balance
        z = rng.choice([n for n in ("C", "Z", "D") if n not in names])
        ports[y].append({"name": "o2", "direction": "out", "rate": 1, "type": "int"})
        ports[z] = [{"name": "i", "direction": "in", "rate": 1, "type": "int"}]
        signals.append({"name": "s2", "from": f"{y}.o2", "to": f"{z}.i"})
        counts[z] = ny
        names.append(z)
    # y with two outputs needs a single input: duplicate fits
    annotate = set(names) if rng.random() < 0.5 else {x}
    return _assemble(name, names, counts, ports, signals, bindings, annotate, period)


# -- oracle -------------------------------------------------------------------

def _edges(cluster):
    by_reader = cluster.signal_by_reader()
    by_writer = cluster.signal_by_writer()
    ins = {m.name: [(by_reader[PortRef(m.name, p.name)].name, p.rate)
                    for p in m.inputs if not p.is_converter] for m in cluster.modules}
    outs = {m.name: [(by_writer[PortRef(m.name, p.name)].name, p.rate)
                     for p in m.outputs if not p.is_converter] for m in cluster.modules}
    return ins, outs


def replay(cluster, counts, order, periods=1):
    """Token levels after each period, or raise AssertionError on an invalid order."""
    ins, outs = _edges(cluster)
    tokens = initial_tokens(cluster)
    levels = []
    for p in range(periods):
        fired = {m: 0 for m in counts}
        for module, index in order:
            assert index == fired[module], f"{module}{index} fired out of sequence"
            for s, r in ins[module]:
                assert tokens[s] >= r, f"{module}{index} underflows {s}"
                tokens[s] -= r
            for s, r in outs[module]:
                tokens[s] += r
            fired[module] += 1
        assert fired == counts, f"activation counts {fired} != {counts}"
        levels.append(dict(tokens))
    return levels


def enumerate_orders(cluster, counts, cap=50_000):
    """Every precedence-respecting order of one period, or None past ``cap``."""
    ins, outs = _edges(cluster)
    names = sorted(counts)
    found = []
    tokens = initial_tokens(cluster)
    fired = {m: 0 for m in names}
    total = sum(counts.values())
    path = []

    def dfs():
        if len(found) > cap:
            return
        if len(path) == total:
            found.append(tuple(path))
            return
        for m in names:
            if fired[m] < counts[m] and all(tokens[s] >= r for s, r in ins[m]):
                for s, r in ins[m]:
                    tokens[s] -= r
                for s, r in outs[m]:
                    tokens[s] += r
                path.append((m, fired[m]))
                fired[m] += 1
                dfs()
                fired[m] -= 1
                path.pop()
                for s, r in outs[m]:
                    tokens[s] -= r
                for s, r in ins[m]:
                    tokens[s] += r

    dfs()
    return None if len(found) > cap else set(found)


def reference_order(cluster, timesteps, counts):
    """The list-scheduling rule restated: earliest k*Tm among fireable, then name."""
    ins, outs = _edges(cluster)
    tokens = initial_tokens(cluster)
    fired = {m: 0 for m in counts}
    order = []
    while len(order) < sum(counts.values()):
        ready = [(fired[m] * timesteps[m], m) for m in counts
                 if fired[m] < counts[m] and all(tokens[s] >= r for s, r in ins[m])]
        if not ready:
            return None
        _, m = min(ready)
        for s, r in ins[m]:
            tokens[s] -= r
        for s, r in outs[m]:
            tokens[s] += r
        order.append((m, fired[m]))
        fired[m] += 1
    return tuple(order)


def expected_counts(timesteps):
    hyper = math.lcm(*timesteps.values())
    return hyper, {m: hyper // t for m, t in timesteps.items()}
