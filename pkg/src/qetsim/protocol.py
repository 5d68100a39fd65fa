"""Multilevel simulation of the three-cavity conditional excitation transfer.

The composite system, in ket order: cavity-a photon mode (2), memory-a
atomic level (4, levels 0..3), cavity-b photon mode (2), gate-dot level
(3, levels 1..3), cavity-c photon mode (2), memory-c level (4).  Total
dimension 384.

The stored qubit starts with its excitation marker on level 3 of one of
the two memories (ground storage is level 1); level 2 is the transient
readout level.  Three elementary operations move excitations around:

* ``R`` - cavity-assisted transition coupling an atomic level pair to
  the photon number of its own cavity (emission drops the atom and adds
  a photon),
* ``U`` - a direct pulse swapping two atomic levels,
* ``Q`` - photon exchange between two cavities.

The eleven-step sequence below routes the stored excitation through the
gate dot: with the dot on level 1 the excitation ends up in the other
memory, with the dot on level 3 it returns to where it started.  Under
the ``ideal`` convention every operation is a plain permutation of
configurations; under the ``physical`` convention each swapped
component picks up the factor ``i`` of a half-period transfer.

One known wart of the sequence itself: the final pulse on memory a also
hits the preserved branch's excitation, moving it from level 3 to
level 2.  The ground/excited content is unaffected, so the conditional
transfer still holds on the logical frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError
from .gates import cqet_matrix
from .statevector import (LocalUnitary, StateVector, SubsystemShape,
                          apply_local, basis_state)

PROTOCOL_DIMS = (2, 4, 2, 3, 2, 4)
PHOTON_A, MEM_A, PHOTON_B, DOT, PHOTON_C, MEM_C = range(6)

_CAVITY_PHOTON = {"a": PHOTON_A, "b": PHOTON_B, "c": PHOTON_C}
_CAVITY_ATOM = {"a": MEM_A, "b": DOT, "c": MEM_C}
# first level number and dimension of each atomic subsystem
_ATOM_LEVELS = {"a": (0, 4), "b": (1, 3), "c": (0, 4)}

CONVENTIONS = ("ideal", "physical")

# starting configurations of the four coefficient lineages, as level tuples
# (photon a, memory a, photon b, dot, photon c, memory c)
LINEAGES = ("alpha", "beta", "gamma", "delta")
START_CONFIGS = {
    "alpha": (0, 3, 0, 1, 0, 1),
    "beta": (0, 1, 0, 1, 0, 3),
    "gamma": (0, 3, 0, 3, 0, 1),
    "delta": (0, 1, 0, 3, 0, 3),
}


def protocol_shape() -> SubsystemShape:
    return SubsystemShape(PROTOCOL_DIMS)


def config_index(config) -> int:
    """Flat index of a level tuple (dot levels run 1..3)."""
    pa, ma, pb, dot, pc, mc = config
    return protocol_shape().index_of((pa, ma, pb, dot - 1, pc, mc))


@dataclass(frozen=True)
class ProtocolInput:
    """Coefficients of the four-term input state."""

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def __post_init__(self):
        total = sum(abs(c) ** 2 for c in self.coefficients)
        if abs(total - 1.0) > 1e-9:
            raise ProtocolError(f"input norm {total} is not 1 within 1e-9")

    @property
    def coefficients(self) -> tuple[complex, complex, complex, complex]:
        return (complex(self.alpha), complex(self.beta),
                complex(self.gamma), complex(self.delta))


@dataclass(frozen=True)
class ElementaryOp:
    """One R, U or Q factor of a protocol step.

    ``system`` is a cavity name for R/U or an ordered cavity pair such
    as ``"ab"`` for Q.  ``levels`` names the coupled atomic levels for
    R/U (R supports (1, 2) and (2, 3); emission drops to the smaller
    level).
    """

    kind: str
    system: str
    levels: tuple[int, int] | None = None
    convention: str = "ideal"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ProtocolError(f"unknown convention {self.convention!r}")
        if self.kind in ("R", "U"):
            if self.system not in _CAVITY_ATOM:
                raise ProtocolError(f"unknown cavity {self.system!r}")
            if self.levels is None:
                raise ProtocolError(f"{self.kind} needs an atomic level pair")
            lo, hi = sorted(self.levels)
            if lo == hi:
                raise ProtocolError("level pair must be distinct")
            first, dim = _ATOM_LEVELS[self.system]
            if not (first <= lo and hi < first + dim):
                raise ProtocolError(
                    f"levels {self.levels} outside {self.system!r} range "
                    f"[{first}, {first + dim})")
            if self.kind == "R" and (lo, hi) not in ((1, 2), (2, 3)):
                raise ProtocolError(
                    f"R couples level pairs (1, 2) or (2, 3), got {self.levels}")
            object.__setattr__(self, "levels", (lo, hi))
        elif self.kind == "Q":
            if (len(self.system) != 2
                    or any(c not in _CAVITY_PHOTON for c in self.system)
                    or self.system[0] == self.system[1]):
                raise ProtocolError(f"Q needs two distinct cavities, got "
                                    f"{self.system!r}")
            if self.levels is not None:
                raise ProtocolError("Q does not take atomic levels")
        else:
            raise ProtocolError(f"unknown operation kind {self.kind!r}")

    @property
    def targets(self) -> tuple[int, ...]:
        if self.kind == "R":
            return (_CAVITY_PHOTON[self.system], _CAVITY_ATOM[self.system])
        if self.kind == "U":
            return (_CAVITY_ATOM[self.system],)
        return tuple(_CAVITY_PHOTON[c] for c in self.system)


def elementary_unitary(op: ElementaryOp) -> LocalUnitary:
    """Permutation (ideal) or i-phased permutation (physical) of the basis."""
    swap = 1j if op.convention == "physical" else 1.0
    if op.kind == "U":
        first, dim = _ATOM_LEVELS[op.system]
        lo, hi = op.levels
        i, j = lo - first, hi - first
        m = np.eye(dim, dtype=complex)
        m[i, i] = m[j, j] = 0
        m[i, j] = m[j, i] = swap
        return LocalUnitary((dim,), m)
    if op.kind == "R":
        first, dim = _ATOM_LEVELS[op.system]
        lo, hi = op.levels
        # photon-number-0 x upper level  <->  photon-number-1 x lower level;
        # the second rung would need two photons and stays put
        src = 0 * dim + (hi - first)
        dst = 1 * dim + (lo - first)
        m = np.eye(2 * dim, dtype=complex)
        m[src, src] = m[dst, dst] = 0
        m[src, dst] = m[dst, src] = swap
        return LocalUnitary((2, dim), m)
    m = np.eye(4, dtype=complex)
    m[1, 1] = m[2, 2] = 0
    m[1, 2] = m[2, 1] = swap
    return LocalUnitary((2, 2), m)


@dataclass(frozen=True)
class ProtocolStep:
    """Named composite step; ``ops`` are listed in application order."""

    name: str
    ops: tuple[ElementaryOp, ...]


def protocol_sequence(convention: str = "ideal") -> tuple[ProtocolStep, ...]:
    """The fixed eleven-step conditional-transfer sequence."""

    def r(system):
        return ElementaryOp("R", system, (1, 2), convention)

    def u(system):
        return ElementaryOp("U", system, (2, 3), convention)

    def q(pair):
        return ElementaryOp("Q", pair, None, convention)

    return (
        ProtocolStep("read out memory a", (u("a"), r("a"))),
        ProtocolStep("shift photon a to b", (q("ab"),)),
        ProtocolStep("dot absorbs cavity-b photon", (r("b"),)),
        ProtocolStep("park dot excitation on level 3", (u("b"),)),
        ProtocolStep("return photon to memory a", (q("ba"), r("a"), u("a"))),
        ProtocolStep("read out memory c into cavity b", (u("c"), r("c"), q("cb"))),
        ProtocolStep("swap dot parking levels", (u("b"),)),
        ProtocolStep("dot emits into cavity b", (r("b"),)),
        ProtocolStep("store cavity-b photon in memory c", (q("cb"), r("c"), u("c"))),
        ProtocolStep("dot releases parked excitation", (r("b"),)),
        ProtocolStep("store remaining photon in memory a", (q("ab"), r("a"), u("a"))),
    )


def initial_state(inp: ProtocolInput) -> StateVector:
    amps = np.zeros(protocol_shape().dim, dtype=complex)
    for lineage, coeff in zip(LINEAGES, inp.coefficients):
        amps[config_index(START_CONFIGS[lineage])] = coeff
    return StateVector(protocol_shape(), amps)


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    """Full trajectory of one protocol run."""

    input: ProtocolInput
    convention: str
    intermediates: tuple[StateVector, ...]

    @property
    def final(self) -> StateVector:
        return self.intermediates[-1]


def run_protocol(inp: ProtocolInput,
                 convention: str = "ideal") -> ProtocolResult:
    """Apply the full sequence to the four-term input state."""
    if convention not in CONVENTIONS:
        raise ProtocolError(f"unknown convention {convention!r}")
    state = initial_state(inp)
    intermediates = []
    for step in protocol_sequence(convention):
        for op in step.ops:
            state = apply_local(state, elementary_unitary(op), op.targets)
        intermediates.append(state)
    return ProtocolResult(inp, convention, tuple(intermediates))


# -- term-level shadow bookkeeping ------------------------------------------
#
# Each lineage stays a single product configuration throughout, so the
# trajectory can also be derived by rewriting level tuples directly.  This
# lightweight second route backs the per-step fidelity report and the tests.


def _apply_op_to_config(op: ElementaryOp, config, phase):
    pa, ma, pb, dot, pc, mc = config
    atoms = {"a": ma, "b": dot, "c": mc}
    photons = {"a": pa, "b": pb, "c": pc}
    hit = False
    if op.kind == "U":
        lo, hi = op.levels
        level = atoms[op.system]
        if level == lo:
            atoms[op.system] = hi
            hit = True
        elif level == hi:
            atoms[op.system] = lo
            hit = True
    elif op.kind == "R":
        lo, hi = op.levels
        n, level = photons[op.system], atoms[op.system]
        if n == 0 and level == hi:
            photons[op.system], atoms[op.system] = 1, lo
            hit = True
        elif n == 1 and level == lo:
            photons[op.system], atoms[op.system] = 0, hi
            hit = True
    else:
        x, y = op.system
        if (photons[x], photons[y]) == (1, 0):
            photons[x], photons[y] = 0, 1
            hit = True
        elif (photons[x], photons[y]) == (0, 1):
            photons[x], photons[y] = 1, 0
            hit = True
    if hit and op.convention == "physical":
        phase = phase * 1j
    new = (photons["a"], atoms["a"], photons["b"], atoms["b"],
           photons["c"], atoms["c"])
    return new, phase


def step_term_trace(convention: str = "ideal"):
    """Per-step (configuration, phase) of each lineage, by term rewriting.

    Returns one ``{lineage: (config, phase)}`` dict per step.
    """
    terms = {name: (config, complex(1.0))
             for name, config in START_CONFIGS.items()}
    trace = []
    for step in protocol_sequence(convention):
        for op in step.ops:
            terms = {name: _apply_op_to_config(op, config, phase)
                     for name, (config, phase) in terms.items()}
        trace.append(dict(terms))
    return trace


def assemble_state(terms, inp: ProtocolInput) -> StateVector:
    """State built from per-lineage configurations, phases and coefficients."""
    amps = np.zeros(protocol_shape().dim, dtype=complex)
    for lineage, coeff in zip(LINEAGES, inp.coefficients):
        config, phase = terms[lineage]
        amps[config_index(config)] += coeff * phase
    return StateVector(protocol_shape(), amps)


# -- comparison against the three-qubit gate matrix --------------------------


def _frame_bits(config) -> tuple[int, int, int]:
    """Map a configuration to (control, excitation-in-a, excitation-in-c)."""
    pa, ma, pb, dot, pc, mc = config
    if pa or pb or pc:
        raise ProtocolError(f"photon still in flight in {config}")
    if dot == 2:
        raise ProtocolError(f"gate dot on transient level in {config}")
    control = 0 if dot == 1 else 1
    bit_a = 1 if ma >= 2 else 0
    bit_c = 1 if mc >= 2 else 0
    if bit_a + bit_c != 1:
        raise ProtocolError(f"not exactly one stored excitation in {config}")
    return control, bit_a, bit_c


def frame_vector(state: StateVector, tol: float = 1e-12) -> np.ndarray:
    """Project a protocol state onto the 8-dim logical frame."""
    out = np.zeros(8, dtype=complex)
    for index in np.nonzero(np.abs(state.amps) > tol)[0]:
        levels = list(state.shape.levels_of(int(index)))
        levels[DOT] += 1
        control, bit_a, bit_c = _frame_bits(tuple(levels))
        out[(control << 2) | (bit_a << 1) | bit_c] += state.amps[index]
    return out


def conditional_transfer_matrix() -> np.ndarray:
    """Phase-free conditional swap: the transfer pattern with no i factors."""
    m = np.eye(8, dtype=complex)
    m[1, 1] = m[2, 2] = 0
    m[1, 2] = m[2, 1] = 1
    return m


@dataclass(frozen=True)
class CqetComparison:
    """Protocol-versus-matrix comparison over sampled inputs.

    ``transfer_infidelity`` is measured against the phase-free
    conditional swap, ``matrix_infidelity`` against the transistor gate
    matrix with its ``i`` factors; both are worst cases over the
    samples, already insensitive to a global phase.  ``branch_phases``
    holds the per-lineage phase relative to the phase-free target.
    """

    convention: str
    samples: int
    transfer_infidelity: float
    matrix_infidelity: float
    branch_phases: dict


def verify_against_cqet(samples: int, convention: str = "ideal",
                        seed: int = 0) -> CqetComparison:
    """Run random inputs through the protocol and compare on the frame."""
    if samples < 1:
        raise ProtocolError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    plain = conditional_transfer_matrix()
    gate = cqet_matrix().entries
    worst_plain = 0.0
    worst_gate = 0.0
    for _ in range(samples):
        raw = rng.normal(size=4) + 1j * rng.normal(size=4)
        raw /= math.sqrt(float(np.sum(np.abs(raw) ** 2)))
        inp = ProtocolInput(*raw)
        frame_in = frame_vector(initial_state(inp))
        frame_out = frame_vector(run_protocol(inp, convention).final)
        worst_plain = max(worst_plain,
                          1.0 - abs(np.vdot(plain @ frame_in, frame_out)) ** 2)
        worst_gate = max(worst_gate,
                         1.0 - abs(np.vdot(gate @ frame_in, frame_out)) ** 2)

    branch_phases = {}
    for lineage in LINEAGES:
        coeffs = [0.0] * 4
        coeffs[LINEAGES.index(lineage)] = 1.0
        inp = ProtocolInput(*coeffs)
        expected = plain @ frame_vector(initial_state(inp))
        got = frame_vector(run_protocol(inp, convention).final)
        target = int(np.argmax(np.abs(expected)))
        branch_phases[lineage] = complex(got[target] / expected[target])
    return CqetComparison(convention, samples, float(worst_plain),
                          float(worst_gate), branch_phases)
