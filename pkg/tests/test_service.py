import json
import math
import threading
from collections import deque

import pytest

from qetsim.errors import ServiceError
from qetsim.isa import Instruction
from qetsim.service import (AddressTable, EmulatorBackend, ExecutionBatch,
                            QpfService, Segment, ServiceServer, analyze,
                            buffer_and_batch, demux_results, dispatch,
                            encode_message, parse_client_ops,
                            request_over_socket, serve_stdio, transform)

BELL_OPS = [
    {"op": "QET", "qubits": [0], "theta": -math.pi / 2},
    {"op": "QET", "qubits": [0], "theta": math.pi},
    {"op": "CQET", "qubits": [0, 1]},
    {"op": "PHASE", "qubits": [0], "theta": math.pi / 2,
     "phi": 3 * math.pi / 2},
    {"op": "QET", "qubits": [0], "theta": math.pi},
    {"op": "MEASURE", "qubits": [0]},
    {"op": "MEASURE", "qubits": [1]},
]


def _ops(raw):
    return parse_client_ops(raw)


def _segment(client, raw, table=None, request_id=0):
    table = table if table is not None else AddressTable()
    ops = analyze(_ops(raw), table, client)
    return transform(ops, table, client, request_id), table


# -- analysis ----------------------------------------------------------------


def test_analyze_missing_theta_names_op_index():
    with pytest.raises(ServiceError) as info:
        analyze(_ops([{"op": "QET", "qubits": [0]},
                      {"op": "MEASURE", "qubits": [0]}]),
                AddressTable(), "c")
    assert info.value.errors[0][0] == 0
    assert "missing parameter" in info.value.errors[0][1]


def test_analyze_accepts_two_qubit_request():
    ops = analyze(_ops([{"op": "QET", "qubits": [0], "theta": 0.3},
                        {"op": "CQET", "qubits": [0, 1]},
                        {"op": "MEASURE", "qubits": [0]},
                        {"op": "MEASURE", "qubits": [1]}]),
                  AddressTable(), "c")
    assert len(ops) == 4


def test_analyze_rejects_address_beyond_budget():
    with pytest.raises(ServiceError) as info:
        analyze(_ops([{"op": "CQET", "qubits": [0, 99999]},
                      {"op": "MEASURE", "qubits": [0]}]),
                AddressTable(), "c", qubit_budget=256)
    assert "outside declared range" in info.value.errors[0][1]


def test_analyze_rejects_measure_free_request():
    with pytest.raises(ServiceError, match="no MEASURE"):
        analyze(_ops([{"op": "QET", "qubits": [0], "theta": 1.0}]),
                AddressTable(), "c")


def test_analyze_rejects_stray_parameters():
    with pytest.raises(ServiceError, match="no angle"):
        analyze(_ops([{"op": "MEASURE", "qubits": [0], "theta": 1.0}]),
                AddressTable(), "c")


def test_parse_rejects_malformed_descriptors():
    with pytest.raises(ServiceError):
        parse_client_ops([{"op": "NOPE", "qubits": [0]}])
    with pytest.raises(ServiceError):
        parse_client_ops([{"op": "QET", "qubits": "zero", "theta": 1.0}])
    with pytest.raises(ServiceError):
        parse_client_ops("not a list")


# -- transformation ----------------------------------------------------------


def test_transform_allocates_pair_per_logical_qubit():
    segment, table = _segment("alice", [{"op": "MEASURE", "qubits": [0]}])
    assert table.locals_of("alice") == {0: 0}
    assert table.pair_of("alice", 0) == (0, 1)
    assert segment.init_bits == {0: 0, 1: 1}
    assert segment.measures == [(0, 0, 1)]


def test_transform_distinct_globals_for_overlapping_locals():
    table = AddressTable()
    _segment("alice", [{"op": "MEASURE", "qubits": [0]}], table)
    _segment("bob", [{"op": "MEASURE", "qubits": [0]}], table)
    assert table.pair_of("alice", 0) != table.pair_of("bob", 0)
    table.check_consistency()


def test_transform_is_idempotent_per_local_address():
    table = AddressTable()
    _segment("alice", [{"op": "QET", "qubits": [0], "theta": 1.0},
                       {"op": "MEASURE", "qubits": [0]}], table)
    first = table.pair_of("alice", 0)
    _segment("alice", [{"op": "MEASURE", "qubits": [0]}], table, request_id=1)
    assert table.pair_of("alice", 0) == first


# -- buffering ---------------------------------------------------------------


def _stub_segment(name, commands):
    return Segment(name, 0, [Instruction.measure(0)] * commands, {}, [])


def test_batch_takes_whole_segments_up_to_capacity():
    queue = deque(_stub_segment(str(k), 30) for k in range(3))
    batch = buffer_and_batch(queue, 100)
    assert len(batch.segments) == 3
    assert not queue


def test_batch_never_splits_a_segment():
    queue = deque([_stub_segment("a", 30), _stub_segment("b", 30)])
    batch = buffer_and_batch(queue, 50)
    assert [seg.client_id for seg in batch.segments] == ["a"]
    assert len(queue) == 1


def test_batch_empty_queue():
    assert buffer_and_batch(deque(), 10).segments == []


# -- dispatch ----------------------------------------------------------------


def test_dispatch_inserts_init_before_first_use():
    segment, _ = _segment("alice", [{"op": "QET", "qubits": [0], "theta": 1.0},
                                    {"op": "MEASURE", "qubits": [0]}])
    result = dispatch(ExecutionBatch([segment]), EmulatorBackend(seed=0))
    trace = result.outcomes[0].trace
    # every slot is initialized before its first non-INIT use
    first_use = {}
    first_init = {}
    for position, record in enumerate(trace):
        slot = record.instruction.memory_addr
        if slot is None:
            continue
        if record.opcode == "INIT":
            first_init.setdefault(slot, position)
        else:
            first_use.setdefault(slot, position)
    assert set(first_use) == set(first_init)
    assert all(first_init[slot] < first_use[slot] for slot in first_use)
    init_bits = [record.instruction.init_value
                 for record in trace if record.opcode == "INIT"]
    assert sorted(init_bits) == [0, 1]


def test_dispatch_reuses_slots_across_segments():
    table = AddressTable()
    seg_a, _ = _segment("alice", [{"op": "MEASURE", "qubits": [0]}], table)
    seg_b, _ = _segment("bob", [{"op": "MEASURE", "qubits": [0]}], table,
                        request_id=1)
    result = dispatch(ExecutionBatch([seg_a, seg_b]), EmulatorBackend(seed=0))
    for outcome in result.outcomes:
        assert sorted(addr.index for addr in outcome.addresses.values()) == [0, 1]
    # but the global physical addresses stay disjoint
    gpas = [set(outcome.addresses) for outcome in result.outcomes]
    assert gpas[0].isdisjoint(gpas[1])


def test_dispatch_isolates_failing_segment():
    table = AddressTable()
    seg_a, _ = _segment("alice", [{"op": "MEASURE", "qubits": [0]}], table)
    seg_c, _ = _segment("carol", [{"op": "MEASURE", "qubits": [0]}], table,
                        request_id=2)
    broken = Segment("bob", 1, [Instruction.qet(1.0),
                                Instruction.measure(0)], {0: 0}, [(0, 0, 1)])
    result = dispatch(ExecutionBatch([seg_a, broken, seg_c]),
                      EmulatorBackend(seed=0))
    assert result.outcomes[0].error is None
    assert result.outcomes[1].error is not None
    assert result.outcomes[2].error is None
    responses = demux_results(result, table)
    assert responses[("alice", 0)]["type"] == "result"
    assert responses[("bob", 1)]["type"] == "error"
    assert responses[("carol", 2)]["type"] == "result"


# -- demultiplexing ----------------------------------------------------------


def _outcome_with_bits(first_bit, second_bit):
    from qetsim.service import DispatchResult, SegmentOutcome
    outcome = SegmentOutcome("alice", 0, [(4, 10, 11)],
                             [(10, first_bit), (11, second_bit)], {})
    return DispatchResult([outcome])


def test_demux_first_bit_rule():
    table = AddressTable()
    assert demux_results(_outcome_with_bits(0, 1), table)[("alice", 0)] == {
        "type": "result", "results": [{"qubit": 4, "bit": 0}]}
    assert demux_results(_outcome_with_bits(1, 0), table)[("alice", 0)] == {
        "type": "result", "results": [{"qubit": 4, "bit": 1}]}


def test_demux_equal_bits_is_leakage_error():
    response = demux_results(_outcome_with_bits(1, 1),
                             AddressTable())[("alice", 0)]
    assert response["type"] == "error"
    assert "leakage" in response["errors"][0]["message"]


def test_demux_orphan_address():
    from qetsim.service import DispatchResult, SegmentOutcome
    outcome = SegmentOutcome("alice", 0, [(4, 10, 11)], [(10, 1)], {})
    response = demux_results(DispatchResult([outcome]),
                             AddressTable())[("alice", 0)]
    assert response["type"] == "error"
    assert "orphan" in response["errors"][0]["message"]


# -- full service ------------------------------------------------------------


def test_service_measure_only_round_trip():
    service = QpfService(seed=0)
    response = service.submit_request("alice", [{"op": "MEASURE",
                                                 "qubits": [0]}])
    assert response == {"type": "result", "results": [{"qubit": 0, "bit": 0}]}


def test_service_bell_correlations():
    service = QpfService(seed=11, capacity=4096)
    equal = 0
    shots = 2000
    for _ in range(shots):
        response = service.submit_request("bob", BELL_OPS)
        assert response["type"] == "result"
        bits = {entry["qubit"]: entry["bit"] for entry in response["results"]}
        equal += bits[0] == bits[1]
    assert equal / shots >= 0.98


def test_service_results_per_client_under_concurrency():
    service = QpfService(seed=5)
    programs = {
        "a": ([{"op": "MEASURE", "qubits": [0]}], {0: 0}),
        "b": ([{"op": "QET", "qubits": [0], "theta": math.pi},
               {"op": "MEASURE", "qubits": [0]}], {0: 1}),
        "c": ([{"op": "QET", "qubits": [1], "theta": math.pi},
               {"op": "MEASURE", "qubits": [0]},
               {"op": "MEASURE", "qubits": [1]}], {0: 0, 1: 1}),
    }
    failures = []

    def client(name):
        ops, expected = programs[name]
        for _ in range(5):
            response = service.submit_request(name, ops)
            got = {entry["qubit"]: entry["bit"]
                   for entry in response.get("results", [])}
            if got != expected:
                failures.append((name, response))

    threads = [threading.Thread(target=client, args=(name,))
               for name in programs]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert failures == []
    service.table.check_consistency()


def test_service_deterministic_for_fixed_arrival_order():
    def transcript():
        service = QpfService(seed=1234)
        lines = []
        lines.append(encode_message(service.submit_request("a", BELL_OPS)))
        lines.append(encode_message(service.submit_request(
            "b", [{"op": "MEASURE", "qubits": [0]}])))
        lines.append(encode_message(service.submit_request("a", BELL_OPS)))
        return "\n".join(lines)

    assert transcript() == transcript()


def test_service_rejects_oversized_request():
    service = QpfService(seed=0, capacity=5)
    response = service.submit_request("a", BELL_OPS)
    assert response["type"] == "error"
    assert "capacity" in response["errors"][0]["message"]


def test_capacity_query_and_malformed_line():
    service = QpfService(seed=0, capacity=77)
    assert json.loads(service.handle_line('{"type":"capacity"}')) == {
        "type": "capacity", "capacity": 77}
    bad = json.loads(service.handle_line("{nope"))
    assert bad["type"] == "error"
    # the service stays usable afterwards
    ok = json.loads(service.handle_line(
        '{"type":"submit","client":"a","ops":[{"op":"MEASURE","qubits":[0]}]}'))
    assert ok["type"] == "result"


def test_serve_stdio_round_trip():
    import io
    service = QpfService(seed=0)
    stdin = io.StringIO(
        '{"type":"capacity"}\n'
        '{"type":"submit","client":"a","ops":[{"op":"MEASURE","qubits":[0]}]}\n')
    stdout = io.StringIO()
    serve_stdio(service, stdin, stdout)
    lines = stdout.getvalue().strip().splitlines()
    assert json.loads(lines[0])["type"] == "capacity"
    assert json.loads(lines[1]) == {"type": "result",
                                    "results": [{"qubit": 0, "bit": 0}]}


def test_socket_transport_round_trip():
    service = QpfService(seed=0)
    server = ServiceServer(service, "127.0.0.1", 0)
    server.start()
    try:
        reply = request_over_socket(server.address, {
            "type": "submit", "client": "a",
            "ops": [{"op": "MEASURE", "qubits": [0]}]})
        assert reply == {"type": "result", "results": [{"qubit": 0, "bit": 0}]}
        capacity = request_over_socket(server.address, {"type": "capacity"})
        assert capacity["capacity"] == service.capacity()
    finally:
        server.stop()
