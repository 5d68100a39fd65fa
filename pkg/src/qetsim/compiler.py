"""Lowering of logical programs to physical instruction sequences.

A logical qubit lives on a pair of physical memory slots in the
one-excitation subspace: logical 0 is ``|01>``, logical 1 is ``|10>``,
and the logical basis is read from the first slot of the pair.  On that
subspace a transfer gate of angle ``theta`` acts as ``Rx(-theta)`` and
the phase gate as ``Rz(theta)`` times ``e^{i phi / 2}``, which is all
the compiler needs to realize arbitrary rotations.

Logical program text: header ``LQ n=<int>``; lines ``RX <theta> q<i>``,
``RZ <theta> q<i>``, ``CNOT q<i> q<j>``, ``SU2 q<i> <8 reals>``
(row-major re/im pairs) and ``MEASURE q<i>``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ProgramSyntaxError, SynthesisError
from .gates import cqet_matrix, qet_matrix
from .isa import Instruction, QuantumProgram, validate_program
from .statevector import StateVector

# Correction angles that turn the raw controlled transfer into an exact
# CNOT: the controlled transfer fires on control |0> and adds a factor i,
# so the control is conjugated by full transfers (logical iX each) and the
# leftover diagonal phases are absorbed by one phase gate on the control
# pair.  ``derive_cnot_corrections`` re-derives both numbers.
CNOT_CORRECTION_THETA = math.pi / 2
CNOT_CORRECTION_PHI = 3 * math.pi / 2

GATE_KINDS = ("RX", "RZ", "CNOT", "SU2")


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)]).astype(complex)


def _is_unitary_2x2(m: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(2))) <= tol)


@dataclass(frozen=True)
class LogicalQubitMap:
    """Logical id to ordered, disjoint pair of physical memory slots."""

    pairs: dict

    def __post_init__(self):
        seen = set()
        for lid, (first, second) in self.pairs.items():
            if first == second:
                raise SynthesisError(f"q{lid} maps to a degenerate pair")
            for addr in (first, second):
                if addr < 0:
                    raise SynthesisError(f"q{lid} uses negative address {addr}")
                if addr in seen:
                    raise SynthesisError(f"physical address {addr} assigned twice")
                seen.add(addr)

    @classmethod
    def default(cls, n: int) -> "LogicalQubitMap":
        return cls({i: (2 * i, 2 * i + 1) for i in range(n)})

    def pair(self, logical_id: int) -> tuple[int, int]:
        try:
            return self.pairs[logical_id]
        except KeyError:
            raise SynthesisError(
                f"logical qubit q{logical_id} has no assigned pair") from None

    @property
    def physical_span(self) -> int:
        if not self.pairs:
            return 0
        return 1 + max(max(p) for p in self.pairs.values())


@dataclass(frozen=True)
class LogicalGate:
    """One gate of a logical program."""

    kind: str
    qubits: tuple[int, ...]
    theta: float | None = None
    matrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SynthesisError(f"unknown logical gate {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if self.kind in ("RX", "RZ"):
            if len(self.qubits) != 1 or self.theta is None:
                raise SynthesisError(f"{self.kind} takes one qubit and an angle")
            if not math.isfinite(self.theta):
                raise SynthesisError("angle must be finite")
        elif self.kind == "CNOT":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise SynthesisError("CNOT takes two distinct qubits")
        else:
            if len(self.qubits) != 1 or self.matrix is None:
                raise SynthesisError("SU2 takes one qubit and a matrix")
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (2, 2) or not _is_unitary_2x2(m):
                raise SynthesisError("SU2 matrix must be 2x2 unitary")
            object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class LogicalProgram:
    """Gate list over ``n`` logical qubits plus terminal measurements."""

    n: int
    gates: tuple[LogicalGate, ...]
    measured: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "measured", tuple(self.measured))
        for gate in self.gates:
            for q in gate.qubits:
                if not 0 <= q < self.n:
                    raise SynthesisError(f"gate operand q{q} out of range [0, {self.n})")
        for q in self.measured:
            if not 0 <= q < self.n:
                raise SynthesisError(f"measured q{q} out of range [0, {self.n})")


def encode_init(lmap: LogicalQubitMap, logical_id: int,
                basis_bit: int) -> list[Instruction]:
    """Prepare a pair in the encoded basis state ``basis_bit``."""
    if basis_bit not in (0, 1):
        raise SynthesisError(f"basis bit must be 0 or 1, got {basis_bit}")
    first, second = lmap.pair(logical_id)
    return [Instruction.init(first, basis_bit),
            Instruction.init(second, 1 - basis_bit)]


def _bracket(pair: tuple[int, int],
             inner: list[Instruction]) -> list[Instruction]:
    first, second = pair
    return ([Instruction.load(first, 1), Instruction.load(second, 2)]
            + inner
            + [Instruction.save(1, first), Instruction.save(2, second)])


def logical_rx(lmap: LogicalQubitMap, logical_id: int,
               theta: float) -> list[Instruction]:
    """Rotation about x: a transfer of angle ``-theta`` on the pair.

    The transfer block carries ``+i sin``, which is ``Rx`` of the negated
    angle, hence the sign flip.
    """
    return _bracket(lmap.pair(logical_id), [Instruction.qet(-theta)])


def logical_rz(lmap: LogicalQubitMap, logical_id: int,
               theta: float) -> list[Instruction]:
    """Rotation about z: a phase gate with ``phi = 0`` on the pair."""
    return _bracket(lmap.pair(logical_id), [Instruction.phase(theta, 0.0)])


def synthesize_logical_cnot(lmap: LogicalQubitMap, ctrl_id: int,
                            tgt_id: int) -> list[Instruction]:
    """Exact CNOT (control 1 flips target) from the controlled transfer.

    The control pair is conjugated by full transfers, the control's
    first slot rides in the control cell during the conditional
    transfer, and one phase gate removes the leftover branch phases;
    the result has no residual global phase at all.
    """
    if ctrl_id == tgt_id:
        raise SynthesisError("CNOT control and target must differ")
    ctrl = lmap.pair(ctrl_id)
    tgt = lmap.pair(tgt_id)
    seq = _bracket(ctrl, [Instruction.qet(math.pi)])
    seq += [Instruction.load(ctrl[0], 0),
            Instruction.load(tgt[0], 1),
            Instruction.load(tgt[1], 2),
            Instruction.cqet(),
            Instruction.save(0, ctrl[0]),
            Instruction.save(1, tgt[0]),
            Instruction.save(2, tgt[1])]
    seq += _bracket(ctrl, [
        Instruction.phase(CNOT_CORRECTION_THETA, CNOT_CORRECTION_PHI),
        Instruction.qet(math.pi),
    ])
    return seq


def derive_cnot_corrections() -> tuple[float, float]:
    """Re-derive the phase-correction angles from the gate matrices.

    Works entirely on the 4-dim logical frame (control, target): solves
    for the diagonal control correction D in
    ``X . D . M . X = CNOT`` where X is the logical action of a full
    transfer on the control pair and M that of the controlled transfer.
    """
    xl = np.kron(qet_matrix(math.pi).entries[1:3, 1:3], np.eye(2))
    frame = [1, 2, 5, 6]  # cell configurations 001, 010, 101, 110
    m = cqet_matrix().entries[np.ix_(frame, frame)]
    # frame order above is (control, target) = 00, 01, 10, 11
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0],
                     [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    d = np.linalg.inv(xl) @ cnot @ np.linalg.inv(xl) @ np.linalg.inv(m)
    off = d - np.diag(np.diag(d))
    if np.max(np.abs(off)) > 1e-12:
        raise SynthesisError("correction is not diagonal on the frame")
    if (abs(d[0, 0] - d[1, 1]) > 1e-12 or abs(d[2, 2] - d[3, 3]) > 1e-12):
        raise SynthesisError("correction does not factor onto the control")
    d0, d1 = d[0, 0], d[2, 2]
    theta = cmath.phase(d1 / d0) % (4 * math.pi)
    phi = 2 * cmath.phase(d0 * np.exp(0.5j * theta)) % (4 * math.pi)
    return theta, phi


def decompose_su2(u) -> tuple[float, float, float, float]:
    """Factor a 2x2 unitary as ``e^{i d} Rz(a) Rx(b) Rz(c)``.

    Returns ``(a, b, c, d)``.  Branch cuts: pure-z and pure-x inputs
    come out with the other two angles zero; otherwise ``b`` is in
    ``(0, pi)`` and ``a, c`` are reduced modulo ``4 pi``.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise SynthesisError(f"expected a 2x2 matrix, got shape {u.shape}")
    if not _is_unitary_2x2(u):
        raise SynthesisError("matrix is not unitary")
    det = u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0]
    delta = 0.5 * cmath.phase(det)
    v = u * np.exp(-1j * delta)
    z, w = v[0, 0], v[0, 1]
    two_pi = 2 * math.pi
    four_pi = 4 * math.pi

    if abs(w) < 1e-12:
        a = (-2 * cmath.phase(z)) % four_pi
        result = (a, 0.0, 0.0, delta)
    else:
        b = 2 * math.atan2((1j * w).real, z.real)
        if (np.max(np.abs(v - _rx(b))) < 1e-12
                and abs((1j * w).imag) < 1e-12 and abs(z.imag) < 1e-12):
            if b < 0:
                b, delta = b + two_pi, delta + math.pi
            result = (0.0, b % (2 * two_pi), 0.0, delta)
        elif abs(z) < 1e-12:
            m = -math.pi / 2 - cmath.phase(w)
            result = ((2 * m) % four_pi, math.pi, 0.0, delta)
        else:
            b = 2 * math.atan2(abs(w), abs(z))
            p = -cmath.phase(z)
            m = -math.pi / 2 - cmath.phase(w)
            result = ((p + m) % four_pi, b, (p - m) % four_pi, delta)

    a, b, c, d = result
    rebuilt = np.exp(1j * d) * (_rz(a) @ _rx(b) @ _rz(c))
    if np.max(np.abs(rebuilt - u)) > 1e-10:
        raise SynthesisError("decomposition failed to recompose the input")
    return result


def _gate_instructions(lmap: LogicalQubitMap,
                       gate: LogicalGate) -> list[Instruction]:
    if gate.kind == "RX":
        return logical_rx(lmap, gate.qubits[0], gate.theta)
    if gate.kind == "RZ":
        return logical_rz(lmap, gate.qubits[0], gate.theta)
    if gate.kind == "CNOT":
        return synthesize_logical_cnot(lmap, gate.qubits[0], gate.qubits[1])
    a, b, c, _ = decompose_su2(gate.matrix)
    q = gate.qubits[0]
    # temporal order is rightmost factor first; global phase is dropped
    return (logical_rz(lmap, q, c)
            + logical_rx(lmap, q, b)
            + logical_rz(lmap, q, a))


def transform_program(lp: LogicalProgram,
                      lmap: LogicalQubitMap | None = None) -> QuantumProgram:
    """Lower a logical program to a validated physical program.

    Every logical qubit is encoded to logical 0 up front; measured pairs
    are read out first-slot-first, with the second slot measured too so
    both slots end free.
    """
    if lmap is None:
        lmap = LogicalQubitMap.default(lp.n)
    instructions: list[Instruction] = []
    for q in range(lp.n):
        instructions += encode_init(lmap, q, 0)
    for gate in lp.gates:
        instructions += _gate_instructions(lmap, gate)
    for q in lp.measured:
        first, second = lmap.pair(q)
        instructions += [Instruction.measure(first),
                         Instruction.measure(second)]
    program = QuantumProgram(lmap.physical_span, tuple(instructions))
    issues = validate_program(program)
    if issues:  # pragma: no cover - synthesis always emits valid programs
        raise SynthesisError(f"emitted program fails validation: {issues}")
    return program


def leakage_check(state: StateVector, lmap: LogicalQubitMap,
                  tol: float = 1e-9) -> bool:
    """True when the state's mass sits in the per-pair one-excitation span.

    Positions outside the mapped pairs are ignored, so the check works
    on the full machine register as well as on a bare memory state.
    """
    n = state.shape.subsystems
    if any(d != 2 for d in state.shape.dims):
        raise SynthesisError("leakage check expects a qubit register")
    indices = np.arange(state.shape.dim)
    good = np.ones(state.shape.dim, dtype=bool)
    for first, second in lmap.pairs.values():
        bit_first = (indices >> (n - 1 - first)) & 1
        bit_second = (indices >> (n - 1 - second)) & 1
        good &= bit_first != bit_second
    bad_mass = float(np.sum(np.abs(state.amps[~good]) ** 2))
    return bad_mass <= tol


# -- logical program text -----------------------------------------------------


def parse_logical_program(text: str) -> LogicalProgram:
    issues: list[tuple[int, str]] = []
    gates: list[LogicalGate] = []
    measured: list[int] = []
    n: int | None = None

    def qubit(token: str) -> int:
        if not token.lower().startswith("q") or len(token) < 2:
            raise ValueError(f"expected qubit like 'q0', got {token!r}")
        try:
            value = int(token[1:])
        except ValueError:
            raise ValueError(f"expected qubit like 'q0', got {token!r}") from None
        if value < 0:
            raise ValueError(f"qubit index must be non-negative, got {token!r}")
        return value

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if n is None:
            head = tokens[0].upper()
            if head == "LQ" and len(tokens) == 2 and tokens[1].lower().startswith("n="):
                try:
                    n = int(tokens[1][2:])
                except ValueError:
                    issues.append((lineno, f"bad qubit count {tokens[1]!r}"))
                    n = 0
                continue
            issues.append((lineno, "expected header 'LQ n=<int>'"))
            n = 0
        op = tokens[0].upper()
        try:
            if op in ("RX", "RZ"):
                if len(tokens) != 3:
                    raise ValueError(f"{op} takes an angle and a qubit")
                theta = float(tokens[1])
                if not math.isfinite(theta):
                    raise ValueError("angle must be finite")
                gates.append(LogicalGate(op, (qubit(tokens[2]),), theta=theta))
            elif op == "CNOT":
                if len(tokens) != 3:
                    raise ValueError("CNOT takes two qubits")
                gates.append(LogicalGate("CNOT", (qubit(tokens[1]),
                                                  qubit(tokens[2]))))
            elif op == "SU2":
                if len(tokens) != 10:
                    raise ValueError("SU2 takes a qubit and 8 matrix entries")
                reals = [float(x) for x in tokens[2:]]
                matrix = np.array(
                    [[complex(reals[0], reals[1]), complex(reals[2], reals[3])],
                     [complex(reals[4], reals[5]), complex(reals[6], reals[7])]])
                gates.append(LogicalGate("SU2", (qubit(tokens[1]),),
                                         matrix=matrix))
            elif op == "MEASURE":
                if len(tokens) != 2:
                    raise ValueError("MEASURE takes a qubit")
                measured.append(qubit(tokens[1]))
            else:
                raise ValueError(f"unknown logical operation {tokens[0]!r}")
        except (ValueError, SynthesisError) as exc:
            issues.append((lineno, str(exc)))
    if n is None:
        issues.append((1, "empty program: expected header 'LQ n=<int>'"))
        n = 0
    if not issues:
        try:
            return LogicalProgram(n, tuple(gates), tuple(measured))
        except SynthesisError as exc:
            issues.append((1, str(exc)))
    raise ProgramSyntaxError(issues)


def format_logical_program(lp: LogicalProgram) -> str:
    lines = [f"LQ n={lp.n}"]
    for gate in lp.gates:
        if gate.kind in ("RX", "RZ"):
            lines.append(f"{gate.kind} {gate.theta!r} q{gate.qubits[0]}")
        elif gate.kind == "CNOT":
            lines.append(f"CNOT q{gate.qubits[0]} q{gate.qubits[1]}")
        else:
            flat = []
            for row in gate.matrix:
                for entry in row:
                    flat += [repr(float(entry.real)), repr(float(entry.imag))]
            lines.append(f"SU2 q{gate.qubits[0]} " + " ".join(flat))
    lines.extend(f"MEASURE q{q}" for q in lp.measured)
    return "\n".join(lines) + "\n"
