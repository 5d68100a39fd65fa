"""The seven-instruction machine language and its text format.

A program is a header line ``QPU s=<int>`` followed by one instruction
per line.  Opcodes are case-insensitive and ``#`` starts a comment.

    INIT m<k> <0|1>
    LOAD m<k> c<j>
    SAVE c<j> m<k>
    QET <theta> [t<id>]
    PHASE <theta> <phi> [t<id>]
    CQET [t<id>]
    MEASURE m<k>

Angles are decimal radians.  A program over ``s`` memory slots with
``t`` instructions has space cost ``s`` and time cost ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ProgramSyntaxError

OPCODES = ("INIT", "LOAD", "SAVE", "QET", "PHASE", "CQET", "MEASURE")

_REQUIRED_FIELDS = {
    "INIT": ("memory_addr", "init_value"),
    "LOAD": ("memory_addr", "cell"),
    "SAVE": ("cell", "memory_addr"),
    "QET": ("theta", "transistor_id"),
    "PHASE": ("theta", "phi", "transistor_id"),
    "CQET": ("transistor_id",),
    "MEASURE": ("memory_addr",),
}

_ALL_FIELDS = ("memory_addr", "cell", "theta", "phi", "transistor_id",
               "init_value")


@dataclass(frozen=True)
class Instruction:
    """One machine instruction; only fields meaningful for the opcode are set."""

    opcode: str
    memory_addr: int | None = None
    cell: int | None = None
    theta: float | None = None
    phi: float | None = None
    transistor_id: int | None = None
    init_value: int | None = None

    def __post_init__(self):
        if self.opcode not in OPCODES:
            raise ValueError(f"unknown opcode {self.opcode!r}")
        required = _REQUIRED_FIELDS[self.opcode]
        for name in _ALL_FIELDS:
            value = getattr(self, name)
            if name in required:
                if value is None:
                    raise ValueError(f"{self.opcode} requires {name}")
            elif value is not None:
                raise ValueError(f"{self.opcode} does not take {name}")
        if self.memory_addr is not None and self.memory_addr < 0:
            raise ValueError("memory address must be non-negative")
        if self.cell is not None and self.cell not in (0, 1, 2):
            raise ValueError(f"cell must be 0, 1 or 2, got {self.cell}")
        for name in ("theta", "phi"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        if self.transistor_id is not None and self.transistor_id < 0:
            raise ValueError("transistor id must be non-negative")
        if self.init_value is not None and self.init_value not in (0, 1):
            raise ValueError(f"init value must be 0 or 1, got {self.init_value}")

    @classmethod
    def init(cls, memory_addr: int, value: int = 0) -> "Instruction":
        return cls("INIT", memory_addr=memory_addr, init_value=value)

    @classmethod
    def load(cls, memory_addr: int, cell: int) -> "Instruction":
        return cls("LOAD", memory_addr=memory_addr, cell=cell)

    @classmethod
    def save(cls, cell: int, memory_addr: int) -> "Instruction":
        return cls("SAVE", memory_addr=memory_addr, cell=cell)

    @classmethod
    def qet(cls, theta: float, transistor_id: int = 0) -> "Instruction":
        return cls("QET", theta=float(theta), transistor_id=transistor_id)

    @classmethod
    def phase(cls, theta: float, phi: float,
              transistor_id: int = 0) -> "Instruction":
        return cls("PHASE", theta=float(theta), phi=float(phi),
                   transistor_id=transistor_id)

    @classmethod
    def cqet(cls, transistor_id: int = 0) -> "Instruction":
        return cls("CQET", transistor_id=transistor_id)

    @classmethod
    def measure(cls, memory_addr: int) -> "Instruction":
        return cls("MEASURE", memory_addr=memory_addr)


@dataclass(frozen=True)
class QuantumProgram:
    """A fixed instruction sequence over an ``s``-slot quantum memory."""

    s: int
    instructions: tuple[Instruction, ...]

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if self.s < 0:
            raise ValueError("memory size must be non-negative")

    @property
    def t(self) -> int:
        return len(self.instructions)


def _parse_operand(token: str, prefix: str, what: str) -> int:
    if not token.lower().startswith(prefix) or len(token) <= len(prefix):
        raise ValueError(f"expected {what} like '{prefix}0', got {token!r}")
    try:
        value = int(token[len(prefix):])
    except ValueError:
        raise ValueError(f"expected {what} like '{prefix}0', got {token!r}") from None
    if value < 0:
        raise ValueError(f"{what} must be non-negative, got {token!r}")
    return value


def _parse_angle(token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ValueError(f"expected {what} in radians, got {token!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite, got {token!r}")
    return value


def _parse_optional_transistor(tokens: list[str]) -> int:
    if not tokens:
        return 0
    if len(tokens) > 1:
        raise ValueError(f"unexpected trailing tokens {tokens[1:]}")
    return _parse_operand(tokens[0], "t", "transistor id")


def _parse_instruction(tokens: list[str]) -> Instruction:
    opcode = tokens[0].upper()
    args = tokens[1:]
    if opcode == "INIT":
        if len(args) != 2:
            raise ValueError("INIT takes a memory address and a bit")
        addr = _parse_operand(args[0], "m", "memory address")
        if args[1] not in ("0", "1"):
            raise ValueError(f"init bit must be 0 or 1, got {args[1]!r}")
        return Instruction.init(addr, int(args[1]))
    if opcode == "LOAD":
        if len(args) != 2:
            raise ValueError("LOAD takes a memory address and a cell")
        return Instruction.load(_parse_operand(args[0], "m", "memory address"),
                                _parse_operand(args[1], "c", "cell"))
    if opcode == "SAVE":
        if len(args) != 2:
            raise ValueError("SAVE takes a cell and a memory address")
        return Instruction.save(_parse_operand(args[0], "c", "cell"),
                                _parse_operand(args[1], "m", "memory address"))
    if opcode == "QET":
        if not args:
            raise ValueError("QET is missing parameter theta")
        theta = _parse_angle(args[0], "theta")
        return Instruction.qet(theta, _parse_optional_transistor(args[1:]))
    if opcode == "PHASE":
        if len(args) < 2:
            raise ValueError("PHASE is missing parameters theta and phi")
        theta = _parse_angle(args[0], "theta")
        phi = _parse_angle(args[1], "phi")
        return Instruction.phase(theta, phi, _parse_optional_transistor(args[2:]))
    if opcode == "CQET":
        return Instruction.cqet(_parse_optional_transistor(args))
    if opcode == "MEASURE":
        if len(args) != 1:
            raise ValueError("MEASURE takes a memory address")
        return Instruction.measure(_parse_operand(args[0], "m", "memory address"))
    raise ValueError(f"unknown opcode {tokens[0]!r}")


def parse_program_with_lines(text: str) -> tuple[QuantumProgram, tuple[int, ...]]:
    """Parse program text, returning the source line of each instruction.

    Collects every line-level problem before raising, so diagnostics
    cover the whole file.
    """
    issues: list[tuple[int, str]] = []
    instructions: list[Instruction] = []
    lines_of: list[int] = []
    s: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if s is None:
            head = tokens[0].upper()
            if head == "QPU" and len(tokens) == 2 and tokens[1].lower().startswith("s="):
                try:
                    s = int(tokens[1][2:])
                except ValueError:
                    issues.append((lineno, f"bad memory size {tokens[1]!r}"))
                    s = 0
                else:
                    if s < 0:
                        issues.append((lineno, "memory size must be non-negative"))
                        s = 0
                continue
            issues.append((lineno, "expected header 'QPU s=<int>'"))
            s = 0
        try:
            instructions.append(_parse_instruction(tokens))
            lines_of.append(lineno)
        except ValueError as exc:
            issues.append((lineno, str(exc)))
    if s is None:
        issues.append((1, "empty program: expected header 'QPU s=<int>'"))
        s = 0
    if issues:
        raise ProgramSyntaxError(issues)
    return QuantumProgram(s, tuple(instructions)), tuple(lines_of)


def parse_program(text: str) -> QuantumProgram:
    return parse_program_with_lines(text)[0]


def format_instruction(instr: Instruction) -> str:
    op = instr.opcode
    if op == "INIT":
        return f"INIT m{instr.memory_addr} {instr.init_value}"
    if op == "LOAD":
        return f"LOAD m{instr.memory_addr} c{instr.cell}"
    if op == "SAVE":
        return f"SAVE c{instr.cell} m{instr.memory_addr}"
    if op == "QET":
        return f"QET {instr.theta!r} t{instr.transistor_id}"
    if op == "PHASE":
        return f"PHASE {instr.theta!r} {instr.phi!r} t{instr.transistor_id}"
    if op == "CQET":
        return f"CQET t{instr.transistor_id}"
    return f"MEASURE m{instr.memory_addr}"


def format_program(program: QuantumProgram) -> str:
    lines = [f"QPU s={program.s}"]
    lines.extend(format_instruction(i) for i in program.instructions)
    return "\n".join(lines) + "\n"


def validate_program(program: QuantumProgram) -> list[tuple[int, str]]:
    """Static checks: address ranges, occupancy discipline, parameters.

    Returns one ``(instruction index, message)`` pair per problem;
    occupancy is simulated best-effort so later issues are still found.
    """
    issues: list[tuple[int, str]] = []
    mem = [False] * program.s
    cells = [False, False, False]

    def addr_ok(index: int, addr: int) -> bool:
        if not 0 <= addr < program.s:
            issues.append((index, f"address m{addr} out of range [0, {program.s})"))
            return False
        return True

    for index, instr in enumerate(program.instructions):
        op = instr.opcode
        if instr.transistor_id not in (None, 0):
            issues.append((index,
                           f"transistor t{instr.transistor_id} does not exist "
                           "(single transistor machine)"))
        if op == "INIT":
            if addr_ok(index, instr.memory_addr):
                if mem[instr.memory_addr]:
                    issues.append((index, f"slot m{instr.memory_addr} already occupied"))
                mem[instr.memory_addr] = True
        elif op == "LOAD":
            if addr_ok(index, instr.memory_addr):
                if not mem[instr.memory_addr]:
                    issues.append((index, f"slot m{instr.memory_addr} unoccupied"))
                mem[instr.memory_addr] = False
            if cells[instr.cell]:
                issues.append((index, f"cell c{instr.cell} already occupied"))
            cells[instr.cell] = True
        elif op == "SAVE":
            if not cells[instr.cell]:
                issues.append((index, f"cell c{instr.cell} unoccupied"))
            cells[instr.cell] = False
            if addr_ok(index, instr.memory_addr):
                if mem[instr.memory_addr]:
                    issues.append((index, f"slot m{instr.memory_addr} already occupied"))
                mem[instr.memory_addr] = True
        elif op in ("QET", "PHASE"):
            if not (cells[1] and cells[2]):
                issues.append((index, "transistor cells c1, c2 unoccupied"))
        elif op == "CQET":
            if not all(cells):
                issues.append((index, "transistor cells c0, c1, c2 unoccupied"))
        elif op == "MEASURE":
            if addr_ok(index, instr.memory_addr):
                if not mem[instr.memory_addr]:
                    issues.append((index, f"slot m{instr.memory_addr} unoccupied"))
                mem[instr.memory_addr] = False
    return issues
