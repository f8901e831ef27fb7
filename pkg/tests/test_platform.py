from collections import Counter

import pytest

from tdfcosim.errors import (
    FifoOverflow, Livelock, SchemaError, StuckState, TimeTravel, UnknownEndpoint, UnknownReference,
)
from tdfcosim.kernel import Kernel
from tdfcosim.platform import (
    ChannelSpec, GpioAdapter, GpioSpec, InterconnectSpec, Platform, PlatformSpec, StateSpec,
    TargetSpec, TaskSpec, Transition, validate_platform,
)
from tdfcosim.simtime import NS


def state(name, *entry, to=None, guard=None, transitions=None):
    if transitions is None:
        transitions = () if to is None else (Transition(to, guard),)
    return StateSpec(name, tuple(entry), tuple(transitions))


def task(name, states, variables=(), cpu="cpu0", stream=None):
    return TaskSpec(name, cpu, states[0].name, tuple(states),
                    tuple((v, "int", 0) for v in variables), stream)


def platform(tasks=(), gpios=("g",), channels=(), cpus=("cpu0",), targets=(), seed=0, **kw):
    spec = PlatformSpec(cpus=tuple(cpus), targets=tuple(TargetSpec(t) for t in targets),
                        gpios=tuple(GpioSpec(g, **kw) for g in gpios),
                        channels=tuple(channels), tasks=tuple(tasks))
    return Platform(spec, seed=seed)


# -- kernel -------------------------------------------------------------------

def test_kernel_orders_by_time_then_post_sequence():
    k = Kernel()
    seen = []
    k.post(5, lambda: seen.append("late"))
    k.post(0, lambda: seen.append("now"))
    k.post(3, lambda: seen.append("a"))
    k.post(3, lambda: seen.append("b"))
    k.run_through(10)
    assert seen == ["now", "a", "b", "late"]
    assert k.dispatched == 4


def test_kernel_rejects_time_travel():
    k = Kernel()
    k.post(10, lambda: None)
    k.run_through(10)
    with pytest.raises(TimeTravel):
        k.post(9, lambda: None)


def test_kernel_run_before_excludes_limit_and_labels():
    k = Kernel()
    k.post(1, lambda: "renamed", "c", "orig")
    k.post(2, lambda: None, "c", "kept")
    k.run_before(2)
    assert k.log == [[1, "c", "renamed"]]
    assert k.peek() == 2
    assert len(k) == 1


# -- gpio adapter -------------------------------------------------------------

def test_gpio_fifo_semantics():
    g = GpioAdapter("g")
    assert g.pop() == (False, 0)
    g.push(5, 3)
    assert g.pop() == (True, 3)
    assert g.count() == 0
    g.push(1, 3)
    g.push(2, 9)
    assert [g.pop()[1], g.pop()[1]] == [3, 9]
    assert g.pushes == g.pops + len(g.rx)


def test_gpio_register_last_write_wins():
    g = GpioAdapter("g")
    g.register_write(GpioAdapter.DATA, 42)
    assert g.register_read(GpioAdapter.STATUS) & 2
    assert g.sample_tx() == 42
    assert g.sample_tx() == 42
    g.register_write(GpioAdapter.DATA, 1)
    g.register_write(GpioAdapter.DATA, 2)
    assert g.sample_tx() == 2
    assert not g.register_read(GpioAdapter.STATUS) & 2


def test_gpio_register_map():
    g = GpioAdapter("g")
    g.push(0, 7)
    g.push(0, 8)
    assert g.register_read(GpioAdapter.RX_COUNT) == 2
    assert g.register_read(GpioAdapter.STATUS) & 1
    assert g.register_read(GpioAdapter.DATA) == 7
    with pytest.raises(UnknownEndpoint):
        g.register_read(0xC)
    with pytest.raises(UnknownEndpoint):
        g.register_write(GpioAdapter.STATUS, 1)


def test_gpio_overflow():
    g = GpioAdapter("g", capacity=2)
    g.push(0, 1)
    g.push(1, 2)
    with pytest.raises(FifoOverflow) as exc:
        g.push(7, 3)
    assert exc.value.exit_code == 5


def test_unknown_endpoint():
    with pytest.raises(UnknownEndpoint):
        platform().gpio("nope")


# -- interconnect -------------------------------------------------------------

def test_transaction_round_trip_and_fifo_service():
    cpus = ("c0", "c1", "c2")
    tasks = [task(f"t{i}", [state("R", {"op": "gpio_read", "endpoint": "g", "var": "v"})],
                  ["v"], cpu=c) for i, c in enumerate(cpus)]
    p = platform(tasks, cpus=cpus)
    p.start()
    p.kernel.run_through(10**6)
    g = p.gpios["g"]
    assert g.transactions == 3
    assert g.completions == g.arrivals
    ic = InterconnectSpec()
    for issued, resp, _ in p.interconnect.completed:
        assert resp - issued >= ic.request_latency + ic.response_latency + ic.service_time
    # three requests contend: the last waits for two services
    assert max(r for _, r, _ in p.interconnect.completed) == 20 * NS + 3 * 10 * NS


# -- FSM tasks ----------------------------------------------------------------

def enter_times(p, task_name, state_name):
    return [t for t, c, text in p.kernel.log if c == task_name and text == f"enter {state_name}"]


def test_compute_cost_then_transition():
    t = task("T", [state("A", {"op": "compute", "delay": 10 * NS}, to="B"), state("B")])
    p = platform([t])
    p.start()
    p.kernel.run_through(10**6)
    assert enter_times(p, "T", "B")[0] - enter_times(p, "T", "A")[0] == 10 * NS
    assert p.tasks["T"].finished


def test_compute_serializes_on_shared_cpu():
    a = task("A", [state("S", {"op": "compute", "delay": 10 * NS}, to="E"), state("E")])
    b = task("B", [state("S", {"op": "compute", "delay": 10 * NS}, to="E"), state("E")])
    p = platform([a, b])
    p.start()
    p.kernel.run_through(10**6)
    assert sorted(enter_times(p, "A", "E") + enter_times(p, "B", "E")) == [10 * NS, 20 * NS]


def test_gpio_read_costs_round_trip():
    t = task("T", [state("A", {"op": "gpio_read", "endpoint": "g", "var": "v", "status": "ok"},
                         to="B"), state("B")], ["v", "ok"])
    p = platform([t])
    p.start()
    p.kernel.run_through(10**6)
    assert enter_times(p, "T", "B") == [30 * NS]
    assert p.tasks["T"].env == {"v": 0, "ok": 0}


def test_stuck_state():
    t = task("T", [state("A", to="B", guard="x > 0"), state("B")], ["x"])
    p = platform([t])
    p.start()
    with pytest.raises(StuckState):
        p.kernel.run_through(10**6)


def test_livelock_detected():
    t = task("T", [state("A", {"op": "assign", "var": "x", "value": "x + 1"}, to="A")], ["x"])
    p = platform([t])
    p.start()
    with pytest.raises(Livelock):
        p.kernel.run_through(10**6)


def pair_reader():
    return task("R", [
        state("W", {"op": "gpio_read", "endpoint": "g", "var": "id", "blocking": True},
              {"op": "gpio_read", "endpoint": "g", "var": "pos", "blocking": True},
              {"op": "log", "tag": "pair", "values": ["id", "pos"]}, to="W"),
    ], ["id", "pos"])


def test_sequential_reads_reconstruct_pairs():
    p = platform([pair_reader()])
    p.start()
    g = p.gpios["g"]
    pairs = [(i % 5 + 1, i % 8 + 3) for i in range(20)]
    k = p.kernel
    for n, (a, b) in enumerate(pairs):
        t = n * 1000 * NS
        k.run_through(t)
        k.advance(t)
        g.push(t, a)
        g.push(t + 1, b)
    k.run_through(10**9)
    assert [r[2] for r in p.tasks["R"].records] == pairs


def test_blocking_read_waits_for_push():
    p = platform([pair_reader()])
    p.start()
    p.kernel.run_through(10**6)
    assert p.tasks["R"].blocked
    assert p.tasks["R"].records == []


def two_way_select(stream=None):
    return task("S", [state("W", {"op": "select", "choice": "c", "branches": [
        {"vars": ["v"], "gpio": "a"}, {"vars": ["v"], "gpio": "b"}]}, to="W")],
        ["v", "c"], stream=stream)


def run_select(seed, n, fill_a=True, fill_b=True):
    p = platform([two_way_select()], gpios=("a", "b"), seed=seed, capacity=4 * n)
    for i in range(2 * n):
        if fill_a:
            p.gpios["a"].push(0, i)
        if fill_b:
            p.gpios["b"].push(0, i)
    p.start()
    k = p.kernel
    while len(p.tasks["S"].choices) < n and len(k):
        k.step()
    return p.tasks["S"].choices[:n]


def test_select_single_ready_branch():
    assert set(run_select(1, 50, fill_a=False)) == {1}
    assert set(run_select(1, 50, fill_b=False)) == {0}


def test_select_reproducible():
    assert run_select(3, 200) == run_select(3, 200)
    assert run_select(3, 200) != run_select(4, 200)


def test_select_statistics_across_seeds():
    counts = Counter()
    for seed in range(10):
        counts.update(run_select(seed, 1000))
    assert sum(counts.values()) == 10_000
    assert counts[0] >= 3000 and counts[1] >= 3000


def test_channel_lossy_write_and_blocking_read():
    chan = ChannelSpec("ch", depth=2, memory="ram")
    writer = task("W", [state("A", *[{"op": "chan_write", "channel": "ch", "value": str(i)}
                                     for i in range(3)])])
    reader = task("R", [state("A", {"op": "compute", "delay": 1000 * NS},
                              {"op": "chan_read", "channel": "ch", "var": "v"},
                              {"op": "log", "tag": "got", "values": ["v"]}, to="A")], ["v"],
                  cpu="cpu1")
    p = platform([writer, reader], gpios=(), channels=[chan], cpus=("cpu0", "cpu1"),
                 targets=("ram",))
    p.start()
    p.kernel.run_through(10**8)
    c = p.channels["ch"]
    assert (c.writes, c.drops, c.reads) == (2, 1, 2)
    assert [r[2] for r in p.tasks["R"].records] == [(0,), (1,)]
    assert p.targets["ram"].transactions == 5


@pytest.mark.parametrize("spec,err", [
    (PlatformSpec(cpus=("c",), tasks=(task("T", [state("A")], cpu="x"),)), UnknownReference),
    (PlatformSpec(cpus=("cpu0",), tasks=(task("T", [state("A", to="Z")]),)), UnknownReference),
    (PlatformSpec(cpus=("cpu0",), tasks=(task("T", [state("A", {"op": "assign", "var": "q",
                                                                 "value": "1"})]),)),
     UnknownReference),
    (PlatformSpec(cpus=("cpu0",), tasks=(task("T", [state("A", {"op": "jump"})]),)), SchemaError),
    (PlatformSpec(cpus=("cpu0",), tasks=(task("T", [state("A", {"op": "gpio_read",
                                                                 "endpoint": "nope", "var": "v"})],
                                              ["v"]),)), UnknownReference),
    (PlatformSpec(cpus=("cpu0",), channels=(ChannelSpec("c", memory="ram9"),)), UnknownReference),
    (PlatformSpec(cpus=("cpu0",), tasks=(task("T", [state("A", to="A", guard="x >")], ["x"]),)),
     SchemaError),
])
def test_platform_validation(spec, err):
    with pytest.raises(err):
        validate_platform(spec)


def test_de_log_deterministic():
    def run():
        p = platform([two_way_select()], gpios=("a", "b"), seed=11, capacity=100)
        for i in range(30):
            p.gpios["a"].push(0, i)
            p.gpios["b"].push(0, -i)
        p.start()
        p.kernel.run_through(10**9)
        return p.kernel.log
    assert run() == run()
