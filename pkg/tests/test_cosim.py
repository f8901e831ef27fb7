import hashlib
import os

import pytest

from models import constant_source_model, pure_tdf_model, with_until, write_back_model
from tdfcosim.blocks import DEFAULTS, execute_activation, initial_state
from tdfcosim.cosim import audit_log, check_conservation, run_cosimulation, trace_statistics
from tdfcosim.errors import CausalityViolation, FifoOverflow, SimulationError
from tdfcosim.modelio import load_model, write_traces
from tdfcosim.scheduler import compute_schedule
from tdfcosim.simtime import MS
from tdfcosim.tdf import PortRef


def test_constant_source_observed_by_task():
    traces = run_cosimulation(load_model(constant_source_model()))
    values = [r[2][0] for r in traces.task_records["Reader"]]
    assert len(values) == 10 and set(values) == {7}
    g = traces.stats["gpio"]["g"]
    assert g["pushes"] == g["pops"] + g["residual"] == 10
    assert check_conservation(traces) == []
    assert audit_log(traces.log) == []


def test_source_sink_two_hyperperiods():
    doc = load_model(pure_tdf_model())
    s = compute_schedule(doc.clusters[0])
    until = 2 * s.hyperperiod
    traces = run_cosimulation(doc, until=until)
    for sig in doc.clusters[0].signals:
        w = doc.clusters[0].port(sig.writer)
        per_period = s.activations[sig.writer.module] * w.rate
        assert len(traces.signals[f"P.{sig.name}"]) == 2 * per_period
    assert check_conservation(traces) == []


def standalone(cluster, periods, seed):
    """Execute the static schedule with no DE side at all."""
    s = compute_schedule(cluster)
    c = s.cluster
    states = {m.name: initial_state(m.behavior, seed) for m in c.modules}
    bufs = {sig.name: [DEFAULTS[c.port(sig.writer).value_type]] * s.initial_tokens[sig.name]
            for sig in c.signals}
    by_reader, by_writer = c.signal_by_reader(), c.signal_by_writer()
    traces = {sig.name: [] for sig in c.signals}
    for p in range(periods):
        for act in s.order:
            m = c.module(act.module)
            k = p * s.activations[m.name] + act.index
            inputs = []
            for port in m.inputs:
                name = by_reader[PortRef(m.name, port.name)].name
                inputs.append(bufs[name][:port.rate])
                del bufs[name][:port.rate]
            outs, states[m.name] = execute_activation(
                m.behavior, states[m.name], inputs,
                [x.shape() for x in m.inputs], [x.shape() for x in m.outputs])
            for port, values in zip(m.outputs, outs):
                name = by_writer[PortRef(m.name, port.name)].name
                bufs[name].extend(values)
                traces[name].extend(((k * port.rate + j + port.delay) * port.timestep, v)
                                    for j, v in enumerate(values))
    return traces


def test_no_converter_cluster_matches_standalone_schedule():
    doc = load_model(pure_tdf_model("24ms"))
    traces = run_cosimulation(doc)
    hyper = compute_schedule(doc.clusters[0]).hyperperiod
    ref = standalone(doc.clusters[0], 24 * MS // hyper, doc.seed)
    assert {f"P.{k}": v for k, v in ref.items()} == traces.signals
    assert traces.log == []


def test_per_signal_timestamps_strictly_increase():
    traces = run_cosimulation(load_model(pure_tdf_model("24ms")))
    for samples in traces.signals.values():
        times = [t for t, _ in samples]
        assert times == sorted(set(times))


def test_doubling_duration_doubles_samples():
    a = run_cosimulation(load_model(pure_tdf_model("8ms")))
    b = run_cosimulation(load_model(pure_tdf_model("16ms")))
    for name in a.signals:
        assert len(b.signals[name]) == 2 * len(a.signals[name])


def test_zero_tasks_zero_transactions():
    traces = run_cosimulation(load_model(constant_source_model(reader=False, capacity=100)))
    assert set(traces.stats["target_transactions"].values()) == {0}
    stats = trace_statistics(traces)
    assert stats["gpio_samples"] == {"g": 10} and stats["gpio_consumed"] == {"g": 0}


def test_register_write_visible_to_later_reads():
    traces = run_cosimulation(load_model(write_back_model()))
    samples = traces.signals["W.adc.cin"]
    # write n*10 completes 20ns after each 1ms tick begins; read at k*1ms sees previous tick
    assert [v for _, v in samples] == [0, 10, 20, 30, 40, 50]
    assert audit_log(traces.log) == []


def test_equal_time_write_wins():
    doc = write_back_model()
    # latency 0 puts the register write exactly on the sampling instants
    doc["platform"]["interconnect"] = {"request_latency": 0, "response_latency": 0,
                                       "service_time": 0}
    doc["platform"]["tasks"][0]["states"][0]["entry"][2]["delay"] = "1ms"
    traces = run_cosimulation(load_model(doc))
    assert [v for _, v in traces.signals["W.adc.cin"]] == [10, 20, 30, 40, 50, 60]


def test_overflow_when_nobody_reads():
    doc = load_model(constant_source_model(reader=False, capacity=4))
    with pytest.raises(FifoOverflow):
        run_cosimulation(doc)


def test_causality_violation_blocks_simulation():
    doc = constant_source_model()
    doc["clusters"][0]["modules"] = [
        {"name": "X", "timestep": "1ms", "behavior": {"kind": "gain", "params": {"k": 1}},
         "ports": [{"name": "cin", "direction": "in", "kind": "converter", "type": "int"},
                   {"name": "o", "direction": "out", "type": "int"}]},
        {"name": "Y", "timestep": "2ms", "behavior": {"kind": "gain", "params": {"k": 1}},
         "ports": [{"name": "i", "direction": "in", "rate": 2, "type": "int"},
                   {"name": "out", "direction": "out", "kind": "converter", "type": "int"}]}]
    doc["clusters"][0]["signals"] = [{"name": "s", "from": "X.o", "to": "Y.i"}]
    doc["clusters"][0]["bindings"] = [{"port": "X.cin", "endpoint": "g"},
                                      {"port": "Y.out", "endpoint": "h"}]
    doc["platform"]["gpios"].append({"name": "h"})
    with pytest.raises(CausalityViolation):
        run_cosimulation(load_model(doc))


def test_until_must_be_positive():
    with pytest.raises(SimulationError):
        run_cosimulation(load_model(constant_source_model()), until=0)


def digest(directory):
    return {f: hashlib.sha256(open(os.path.join(directory, f), "rb").read()).hexdigest()
            for f in sorted(os.listdir(directory))}


def test_rerun_is_byte_identical(tmp_path):
    doc = load_model(with_until(constant_source_model(), "20ms"))
    write_traces(run_cosimulation(doc), tmp_path / "a")
    write_traces(run_cosimulation(doc), tmp_path / "b")
    assert digest(tmp_path / "a") == digest(tmp_path / "b")


def test_audit_log_flags_out_of_order_entries():
    log = [(0, "T", "enter A"), (5, "C", "tdf-push g 1"), (3, "T", "resp g")]
    problems = audit_log(log)
    assert len(problems) == 1 and "DE event at 3" in problems[0]
