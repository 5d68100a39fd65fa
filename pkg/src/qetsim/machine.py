"""Execution of machine programs on a state-vector register.

The register holds the ``s`` memory slots followed by the three
transistor cells.  LOAD and SAVE are swaps with an empty receiving
position, which is the only unitary move semantics that keeps
entanglement with spectator qubits intact.  Unoccupied positions are
always ``|0>`` and unentangled, so measuring one yields 0 with
probability one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QpuRuntimeError
from .gates import cqet_matrix, phase_matrix, qet_matrix
from .isa import Instruction, QuantumProgram
from .statevector import (LocalUnitary, RandomSource, StateVector,
                          apply_local, basis_state, measure_subsystem)

_SWAP = LocalUnitary((2, 2), np.array(
    [[1, 0, 0, 0],
     [0, 0, 1, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1]], dtype=complex))

_FLIP = LocalUnitary((2,), np.array([[0, 1], [1, 0]], dtype=complex))


@dataclass(frozen=True, eq=False)
class MachineState:
    """Register plus occupancy bookkeeping and accumulated results."""

    register: StateVector
    memory_occupied: tuple[bool, ...]
    cell_occupied: tuple[bool, bool, bool]
    classical_results: tuple[tuple[int, int], ...]

    @property
    def s(self) -> int:
        return len(self.memory_occupied)

    def cell_subsystem(self, cell: int) -> int:
        return self.s + cell


@dataclass(frozen=True)
class TraceRecord:
    """What one executed instruction did to the machine."""

    index: int
    opcode: str
    instruction: Instruction
    memory_occupied: tuple[bool, ...]
    cell_occupied: tuple[bool, bool, bool]
    outcome: int | None = None


ExecutionTrace = tuple[TraceRecord, ...]


def fresh_machine(s: int) -> MachineState:
    register = basis_state((2,) * (s + 3), (0,) * (s + 3))
    return MachineState(register, (False,) * s, (False, False, False), ())


def _require(condition: bool, index: int, opcode: str, message: str):
    if not condition:
        raise QpuRuntimeError(index, opcode, message)


def execute_instruction(machine: MachineState, instr: Instruction,
                        rng: RandomSource,
                        index: int = 0) -> tuple[MachineState, TraceRecord]:
    """Run one instruction, returning the new machine and a trace record."""
    op = instr.opcode
    s = machine.s
    mem = list(machine.memory_occupied)
    cells = list(machine.cell_occupied)
    register = machine.register
    results = machine.classical_results
    outcome = None

    if instr.transistor_id not in (None, 0):
        raise QpuRuntimeError(index, op,
                              f"transistor t{instr.transistor_id} does not exist")

    if op == "INIT":
        addr = instr.memory_addr
        _require(0 <= addr < s, index, op, f"address m{addr} out of range [0, {s})")
        _require(not mem[addr], index, op, f"slot m{addr} already occupied")
        if instr.init_value == 1:
            register = apply_local(register, _FLIP, (addr,))
        mem[addr] = True
    elif op == "LOAD":
        addr, cell = instr.memory_addr, instr.cell
        _require(0 <= addr < s, index, op, f"address m{addr} out of range [0, {s})")
        _require(mem[addr], index, op, f"slot m{addr} unoccupied")
        _require(not cells[cell], index, op, f"cell c{cell} already occupied")
        register = apply_local(register, _SWAP,
                               (addr, machine.cell_subsystem(cell)))
        mem[addr] = False
        cells[cell] = True
    elif op == "SAVE":
        addr, cell = instr.memory_addr, instr.cell
        _require(0 <= addr < s, index, op, f"address m{addr} out of range [0, {s})")
        _require(cells[cell], index, op, f"cell c{cell} unoccupied")
        _require(not mem[addr], index, op, f"slot m{addr} already occupied")
        register = apply_local(register, _SWAP,
                               (addr, machine.cell_subsystem(cell)))
        mem[addr] = True
        cells[cell] = False
    elif op in ("QET", "PHASE"):
        _require(cells[1] and cells[2], index, op,
                 "transistor cells c1, c2 unoccupied")
        gate = (qet_matrix(instr.theta) if op == "QET"
                else phase_matrix(instr.theta, instr.phi))
        register = apply_local(register, gate,
                               (machine.cell_subsystem(1),
                                machine.cell_subsystem(2)))
    elif op == "CQET":
        _require(all(cells), index, op, "transistor cells c0, c1, c2 unoccupied")
        register = apply_local(register, cqet_matrix(),
                               (machine.cell_subsystem(0),
                                machine.cell_subsystem(1),
                                machine.cell_subsystem(2)))
    elif op == "MEASURE":
        addr = instr.memory_addr
        _require(0 <= addr < s, index, op, f"address m{addr} out of range [0, {s})")
        _require(mem[addr], index, op, f"slot m{addr} unoccupied")
        outcome, register = measure_subsystem(register, addr, rng)
        if outcome == 1:
            # classical-conditional flip back to |0> so the slot can be reused
            register = apply_local(register, _FLIP, (addr,))
        mem[addr] = False
        results = results + ((addr, outcome),)
    else:  # pragma: no cover - Instruction validates opcodes
        raise QpuRuntimeError(index, op, "unknown opcode")

    new = MachineState(register, tuple(mem), tuple(cells), results)
    record = TraceRecord(index, op, instr, new.memory_occupied,
                         new.cell_occupied, outcome)
    return new, record


def run_program(program: QuantumProgram,
                rng: RandomSource) -> tuple[list[tuple[int, int]], ExecutionTrace]:
    """Execute all instructions in order on a fresh machine.

    Returns the classical results in measurement order and the full
    trace.  The first runtime precondition failure aborts with the
    offending instruction index.
    """
    machine = fresh_machine(program.s)
    trace = []
    for index, instr in enumerate(program.instructions):
        machine, record = execute_instruction(machine, instr, rng, index)
        trace.append(record)
    return list(machine.classical_results), tuple(trace)
