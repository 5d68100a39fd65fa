"""Multi-client programming service and dispatcher.

Requests carry universal-basis operations on logical qubits addressed by
client-local integers.  The pipeline mirrors the layer structure of the
framework: request analysis, logical-to-physical transformation against
shared address tables, capacity-bounded batching of whole segments,
dispatch onto a backend, and demultiplexing of measurement results back
to local addresses.

Wire protocol (newline-delimited JSON, UTF-8):

    {"type": "submit", "client": "<id>", "ops": [{"op": "QET",
        "qubits": [0], "theta": 3.14}, ...]}
    {"type": "result", "results": [{"qubit": 0, "bit": 1}, ...]}
    {"type": "error", "errors": [{"index": 0, "message": "..."}]}
    {"type": "capacity"}  ->  {"type": "capacity", "capacity": 1024}

A segment is the span of one client's physical commands ending with its
measure group; segments are never split across batches, and no two
clients' qubits are ever live in the same segment.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from collections import deque
from dataclasses import dataclass

from .errors import QetSimError, ServiceError
from .isa import Instruction, QuantumProgram
from .machine import ExecutionTrace, run_program
from .statevector import RandomSource

logger = logging.getLogger(__name__)

VALID_OPS = ("QET", "PHASE", "CQET", "MEASURE")
DEFAULT_CAPACITY = 1024
DEFAULT_QUBIT_BUDGET = 256


@dataclass(frozen=True)
class ClientOp:
    """One validated operation descriptor from a submit message."""

    op: str
    qubits: tuple[int, ...]
    theta: float | None = None
    phi: float | None = None


@dataclass(frozen=True)
class PhysicalAddress:
    """Per-segment address metadata handed out by the dispatcher."""

    index: int
    frequency: float
    recording_time: int


@dataclass
class Segment:
    """One client's physical command run, ending at its measure group."""

    client_id: str
    request_id: int
    instructions: list  # Instruction over global physical addresses
    init_bits: dict  # global physical address -> encoded basis bit
    measures: list  # (local logical address, first gpa, second gpa)

    @property
    def command_count(self) -> int:
        return len(self.instructions)


@dataclass
class ExecutionBatch:
    segments: list

    @property
    def command_count(self) -> int:
        return sum(seg.command_count for seg in self.segments)


@dataclass
class SegmentOutcome:
    """What dispatch produced for one segment."""

    client_id: str
    request_id: int
    measures: list
    records: list  # (global physical address, bit)
    addresses: dict  # global physical address -> PhysicalAddress
    trace: ExecutionTrace | None = None
    error: str | None = None


@dataclass
class DispatchResult:
    outcomes: list


class AddressTable:
    """Local-to-global logical addresses and their physical pairs.

    Per client the local mapping is a bijection; physical pairs are
    globally disjoint because global addresses are never recycled.
    """

    def __init__(self):
        self._locals: dict[str, dict[int, int]] = {}
        self._pairs: dict[int, tuple[int, int]] = {}
        self._next_logical = 0
        self._next_physical = 0

    def knows(self, client_id: str, local: int) -> bool:
        return local in self._locals.get(client_id, {})

    def ensure(self, client_id: str, local: int) -> tuple[int, tuple[int, int]]:
        """Global logical address and physical pair, allocating on first use."""
        table = self._locals.setdefault(client_id, {})
        if local not in table:
            glob = self._next_logical
            self._next_logical += 1
            pair = (self._next_physical, self._next_physical + 1)
            self._next_physical += 2
            table[local] = glob
            self._pairs[glob] = pair
        glob = table[local]
        return glob, self._pairs[glob]

    def pair_of(self, client_id: str, local: int) -> tuple[int, int]:
        return self._pairs[self._locals[client_id][local]]

    def locals_of(self, client_id: str) -> dict[int, int]:
        return dict(self._locals.get(client_id, {}))

    def check_consistency(self):
        for client, table in self._locals.items():
            if len(set(table.values())) != len(table):
                raise ServiceError([(0, f"duplicate global address for {client}")])
        used = [addr for pair in self._pairs.values() for addr in pair]
        if len(set(used)) != len(used):
            raise ServiceError([(0, "physical pairs are not disjoint")])


def parse_client_ops(raw_ops) -> list[ClientOp]:
    """Structural decode of the wire-level ops array."""
    if not isinstance(raw_ops, list):
        raise ServiceError([(0, "ops must be a list")])
    errors = []
    ops = []
    for index, raw in enumerate(raw_ops):
        if not isinstance(raw, dict):
            errors.append((index, "operation must be an object"))
            continue
        name = raw.get("op")
        if name not in VALID_OPS:
            errors.append((index, f"unknown operation {name!r}"))
            continue
        qubits = raw.get("qubits")
        if (not isinstance(qubits, list) or not qubits
                or not all(isinstance(q, int) and not isinstance(q, bool)
                           for q in qubits)):
            errors.append((index, "qubits must be a non-empty list of integers"))
            continue
        bad_angle = False
        for label in ("theta", "phi"):
            value = raw.get(label)
            if value is not None and (not isinstance(value, (int, float))
                                      or isinstance(value, bool)):
                errors.append((index, f"{label} must be a number"))
                bad_angle = True
        if bad_angle:
            continue
        theta = raw.get("theta")
        phi = raw.get("phi")
        ops.append(ClientOp(name, tuple(qubits),
                            None if theta is None else float(theta),
                            None if phi is None else float(phi)))
    if errors:
        raise ServiceError(errors)
    return ops


def analyze(ops: list[ClientOp], table: AddressTable, client_id: str,
            qubit_budget: int = DEFAULT_QUBIT_BUDGET) -> list[ClientOp]:
    """The three request checks: structure, parameters, addresses.

    Returns the ops unchanged when everything passes; otherwise raises
    with one diagnostic per offending operation and nothing is enqueued.
    """
    errors = []
    for index, op in enumerate(ops):
        arity = 2 if op.op == "CQET" else 1
        if len(op.qubits) != arity:
            errors.append((index, f"{op.op} takes {arity} qubit(s), "
                                  f"got {len(op.qubits)}"))
        elif op.op == "CQET" and op.qubits[0] == op.qubits[1]:
            errors.append((index, "CQET control and target must differ"))
        if op.op in ("QET", "PHASE") and op.theta is None:
            errors.append((index, f"missing parameter theta for {op.op}"))
        if op.op in ("CQET", "MEASURE") and (op.theta is not None
                                             or op.phi is not None):
            errors.append((index, f"{op.op} takes no angle parameters"))
        if op.op == "QET" and op.phi is not None:
            errors.append((index, "QET takes no phi parameter"))
        for q in op.qubits:
            if q < 0 or q >= qubit_budget:
                errors.append(
                    (index, f"qubit address {q} outside declared range "
                            f"[0, {qubit_budget})"))
    if not any(op.op == "MEASURE" for op in ops):
        errors.append((len(ops), "request contains no MEASURE; results would "
                                 "be unreturnable"))
    if errors:
        raise ServiceError(errors)
    return ops


def transform(ops: list[ClientOp], table: AddressTable, client_id: str,
              request_id: int = 0) -> Segment:
    """Rewrite validated logical ops into a physical segment.

    Allocates global addresses for first-seen locals, splits each
    logical qubit onto its physical pair and lowers each universal-basis
    operation; initialization bits for the dispatcher encode every pair
    as logical 0.
    """
    instructions: list[Instruction] = []
    init_bits: dict[int, int] = {}
    measures = []

    def pair(local: int) -> tuple[int, int]:
        _, (first, second) = table.ensure(client_id, local)
        init_bits.setdefault(first, 0)
        init_bits.setdefault(second, 1)
        return first, second

    for op in ops:
        if op.op == "QET":
            first, second = pair(op.qubits[0])
            instructions += [Instruction.load(first, 1),
                             Instruction.load(second, 2),
                             Instruction.qet(op.theta),
                             Instruction.save(1, first),
                             Instruction.save(2, second)]
        elif op.op == "PHASE":
            first, second = pair(op.qubits[0])
            instructions += [Instruction.load(first, 1),
                             Instruction.load(second, 2),
                             Instruction.phase(op.theta,
                                               0.0 if op.phi is None else op.phi),
                             Instruction.save(1, first),
                             Instruction.save(2, second)]
        elif op.op == "CQET":
            ctrl = pair(op.qubits[0])
            tgt = pair(op.qubits[1])
            instructions += [Instruction.load(ctrl[0], 0),
                             Instruction.load(tgt[0], 1),
                             Instruction.load(tgt[1], 2),
                             Instruction.cqet(),
                             Instruction.save(0, ctrl[0]),
                             Instruction.save(1, tgt[0]),
                             Instruction.save(2, tgt[1])]
        else:
            first, second = pair(op.qubits[0])
            instructions += [Instruction.measure(first),
                             Instruction.measure(second)]
            measures.append((op.qubits[0], first, second))
    return Segment(client_id, request_id, instructions, init_bits, measures)


def buffer_and_batch(queue: deque, capacity: int) -> ExecutionBatch:
    """Fill a batch with whole segments, FIFO, up to ``capacity`` commands."""
    segments = []
    used = 0
    while queue and used + queue[0].command_count <= capacity:
        segment = queue.popleft()
        used += segment.command_count
        segments.append(segment)
    return ExecutionBatch(segments)


class EmulatorBackend:
    """In-process backend running physical programs on the emulator."""

    def __init__(self, seed: int = 0, capacity: int = DEFAULT_CAPACITY):
        self.capacity = int(capacity)
        self._rng = RandomSource(seed)

    def max_commands(self) -> int:
        return self.capacity

    def run(self, program: QuantumProgram):
        return run_program(program, self._rng)


def _concretize(segment: Segment, clock: int):
    """Assign machine slots to global addresses and insert INIT commands."""
    slots: dict[int, int] = {}
    addresses: dict[int, PhysicalAddress] = {}
    resident: set[int] = set()
    concrete: list[Instruction] = []

    def slot_of(gpa: int) -> int:
        if gpa not in slots:
            slots[gpa] = len(slots)
            addresses[gpa] = PhysicalAddress(
                index=slots[gpa],
                frequency=1.0e9 + 1.0e6 * slots[gpa],
                recording_time=clock)
        return slots[gpa]

    for instr in segment.instructions:
        if instr.memory_addr is None:
            concrete.append(instr)
            continue
        gpa = instr.memory_addr
        slot = slot_of(gpa)
        if gpa not in resident:
            concrete.append(Instruction.init(slot, segment.init_bits.get(gpa, 0)))
            resident.add(gpa)
        if instr.opcode == "MEASURE":
            resident.discard(gpa)
        concrete.append(Instruction(
            instr.opcode, memory_addr=slot, cell=instr.cell,
            theta=instr.theta, phi=instr.phi,
            transistor_id=instr.transistor_id, init_value=instr.init_value))
    program = QuantumProgram(max(len(slots), 1), tuple(concrete))
    slot_to_gpa = {slot: gpa for gpa, slot in slots.items()}
    return program, slot_to_gpa, addresses


def dispatch(batch: ExecutionBatch, backend) -> DispatchResult:
    """Run every segment of a batch; a failing segment hurts only itself."""
    outcomes = []
    for clock, segment in enumerate(batch.segments):
        program, slot_to_gpa, addresses = _concretize(segment, clock)
        try:
            results, trace = backend.run(program)
        except QetSimError as exc:
            logger.warning("segment %s/%s failed: %s",
                           segment.client_id, segment.request_id, exc)
            outcomes.append(SegmentOutcome(
                segment.client_id, segment.request_id, list(segment.measures),
                [], addresses, None, str(exc)))
            continue
        records = [(slot_to_gpa[slot], bit) for slot, bit in results]
        outcomes.append(SegmentOutcome(
            segment.client_id, segment.request_id, list(segment.measures),
            records, addresses, trace))
    logger.info("dispatched batch: %d segment(s), %d command(s)",
                len(batch.segments), batch.command_count)
    return DispatchResult(outcomes)


def demux_results(result: DispatchResult, table: AddressTable) -> dict:
    """Per-request responses keyed by ``(client_id, request_id)``.

    Each logical readout takes the first physical bit; a pair with equal
    bits means the state left the encoded subspace and is surfaced as a
    decode error rather than being resolved silently.
    """
    responses = {}
    for outcome in result.outcomes:
        key = (outcome.client_id, outcome.request_id)
        if outcome.error is not None:
            responses[key] = {"type": "error",
                              "errors": [{"index": -1,
                                          "message": outcome.error}]}
            continue
        bits = dict(outcome.records)
        results = []
        errors = []
        for position, (local, first, second) in enumerate(outcome.measures):
            if first not in bits or second not in bits:
                errors.append({"index": position,
                               "message": f"orphan physical address for q{local}"})
                continue
            if bits[first] == bits[second]:
                errors.append({"index": position,
                               "message": f"leakage decoding q{local}: physical "
                                          f"pair read ({bits[first]}, "
                                          f"{bits[second]})"})
                continue
            results.append({"qubit": local, "bit": bits[first]})
        if errors:
            responses[key] = {"type": "error", "errors": errors}
        else:
            responses[key] = {"type": "result", "results": results}
    return responses


class _Pending:
    """Handoff slot for one in-flight request."""

    def __init__(self):
        self._done = threading.Event()
        self.response = None

    def set(self, response):
        self.response = response
        self._done.set()

    def wait(self, timeout=None):
        if not self._done.wait(timeout):
            raise TimeoutError("request was never dispatched")
        return self.response


class QpfService:
    """The framework front end: accepts requests, batches, dispatches.

    Thread-safe: the tables and queue form one critical section, and at
    most one batch is in flight on the backend at a time.
    """

    def __init__(self, seed: int = 0, capacity: int = DEFAULT_CAPACITY,
                 backend=None, qubit_budget: int = DEFAULT_QUBIT_BUDGET):
        self.backend = backend or EmulatorBackend(seed, capacity)
        self.table = AddressTable()
        self.qubit_budget = qubit_budget
        self._queue: deque = deque()
        self._pending: dict[tuple[str, int], _Pending] = {}
        self._state_lock = threading.Lock()
        self._backend_lock = threading.Lock()
        self._next_request = 0

    def capacity(self) -> int:
        return self.backend.max_commands()

    def submit_request(self, client_id: str, raw_ops) -> dict:
        """Full pipeline for one request; blocks until its batch ran."""
        try:
            ops = parse_client_ops(raw_ops)
            with self._state_lock:
                analyze(ops, self.table, client_id, self.qubit_budget)
                request_id = self._next_request
                self._next_request += 1
                segment = transform(ops, self.table, client_id, request_id)
                if segment.command_count > self.capacity():
                    raise ServiceError(
                        [(0, f"request needs {segment.command_count} commands; "
                             f"controller capacity is {self.capacity()}")])
                pending = _Pending()
                self._pending[(client_id, request_id)] = pending
                self._queue.append(segment)
        except ServiceError as exc:
            return {"type": "error",
                    "errors": [{"index": i, "message": m}
                               for i, m in exc.errors]}
        self._pump()
        return pending.wait()

    def _pump(self):
        """Drain whole batches; exactly one batch in flight at a time."""
        while True:
            with self._backend_lock:
                with self._state_lock:
                    batch = buffer_and_batch(self._queue, self.capacity())
                if not batch.segments:
                    return
                result = dispatch(batch, self.backend)
                responses = demux_results(result, self.table)
            with self._state_lock:
                for key, response in responses.items():
                    pending = self._pending.pop(key, None)
                    if pending is not None:
                        pending.set(response)

    # -- wire protocol -----------------------------------------------------

    def handle_message(self, message: dict) -> dict:
        kind = message.get("type")
        if kind == "capacity":
            return {"type": "capacity", "capacity": self.capacity()}
        if kind == "submit":
            client = message.get("client")
            if not isinstance(client, str) or not client:
                return {"type": "error",
                        "errors": [{"index": -1,
                                    "message": "submit needs a client id"}]}
            return self.submit_request(client, message.get("ops"))
        return {"type": "error",
                "errors": [{"index": -1,
                            "message": f"unknown message type {kind!r}"}]}

    def handle_line(self, line: str) -> str:
        try:
            message = json.loads(line)
            if not isinstance(message, dict):
                raise ValueError("message must be an object")
        except ValueError as exc:
            return encode_message(
                {"type": "error",
                 "errors": [{"index": -1, "message": f"malformed message: {exc}"}]})
        return encode_message(self.handle_message(message))


def encode_message(obj: dict) -> str:
    """Canonical one-line encoding used by both transports and the CLI."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def serve_stdio(service: QpfService, stdin, stdout):
    """Serve the line protocol on a pair of text streams until EOF."""
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(service.handle_line(line) + "\n")
        stdout.flush()


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line:
                return
            text = line.decode("utf-8").strip()
            if not text:
                continue
            reply = self.server.service.handle_line(text)
            self.wfile.write(reply.encode("utf-8") + b"\n")


class ServiceServer(socketserver.ThreadingTCPServer):
    """TCP transport for the line protocol; one thread per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, service: QpfService, host: str = "127.0.0.1",
                 port: int = 0):
        super().__init__((host, port), _LineHandler)
        self.service = service
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever,
                                        name="qpf-service", daemon=True)
        self._thread.start()
        logger.info("service listening on %s:%d", *self.server_address)

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def request_over_socket(address: tuple[str, int], message: dict,
                        timeout: float = 30.0) -> dict:
    """One-shot client helper: send a message, read one reply line."""
    with socket.create_connection(address, timeout=timeout) as conn:
        conn.sendall(encode_message(message).encode("utf-8") + b"\n")
        chunks = []
        while True:
            data = conn.recv(4096)
            if not data:
                break
            chunks.append(data)
            if b"\n" in data:
                break
    return json.loads(b"".join(chunks).decode("utf-8").strip())
