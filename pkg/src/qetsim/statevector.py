"""Dense complex state vectors over composite discrete systems.

Subsystems may have different dimensions (qubits, three-level dots,
four-level memories).  Amplitudes are stored flat in row-major order,
so the first listed subsystem is the most significant index digit.
All operations are value-in, value-out; nothing here mutates shared
state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, MeasurementError

NORM_TOL = 1e-9
ALGEBRA_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SubsystemShape:
    """Ordered per-subsystem dimensions of a composite system."""

    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims:
            raise DimensionError("a composite system needs at least one subsystem")
        if any(d < 2 for d in self.dims):
            raise DimensionError(f"subsystem dimensions must be >= 2, got {self.dims}")

    def __eq__(self, other):
        return isinstance(other, SubsystemShape) and self.dims == other.dims

    @property
    def subsystems(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        out = 1
        for d in self.dims:
            out *= d
        return out

    def index_of(self, levels) -> int:
        """Flat row-major index of a product basis configuration."""
        levels = tuple(int(x) for x in levels)
        if len(levels) != len(self.dims):
            raise DimensionError(
                f"expected {len(self.dims)} levels, got {len(levels)}")
        for sub, (level, d) in enumerate(zip(levels, self.dims)):
            if not 0 <= level < d:
                raise DimensionError(
                    f"level {level} out of range for subsystem {sub} "
                    f"(dimension {d})")
        index = 0
        for level, d in zip(levels, self.dims):
            index = index * d + level
        return index

    def levels_of(self, index: int) -> tuple[int, ...]:
        """Inverse of :meth:`index_of`."""
        out = []
        for d in reversed(self.dims):
            out.append(index % d)
            index //= d
        return tuple(reversed(out))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitudes of a composite system."""

    shape: SubsystemShape
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.shape.dim,):
            raise DimensionError(
                f"amplitude array of length {amps.shape} does not match "
                f"shape of dimension {self.shape.dim}")
        if not np.isfinite(amps).all():
            raise DimensionError("non-finite amplitude")
        object.__setattr__(self, "amps", amps)

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))


@dataclass(frozen=True, eq=False)
class LocalUnitary:
    """Square operator acting on an ordered subset of subsystems."""

    dims: tuple[int, ...]
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        entries = np.asarray(self.entries, dtype=complex)
        block = 1
        for d in self.dims:
            block *= d
        if entries.shape != (block, block):
            raise DimensionError(
                f"matrix shape {entries.shape} does not match dims {self.dims}")
        object.__setattr__(self, "entries", entries)

    @property
    def arity(self) -> int:
        return len(self.dims)


class RandomSource:
    """Deterministic outcome sampler; a fixed seed fixes the whole sequence.

    A single instance must not be shared between threads.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._gen = np.random.default_rng(self.seed)

    def choose(self, probabilities) -> int:
        """Sample an index by inverse CDF over one uniform draw."""
        r = self._gen.random()
        acc = 0.0
        last = 0
        for k, p in enumerate(probabilities):
            acc += p
            last = k
            if r < acc:
                return k
        return last


def basis_state(shape, levels) -> StateVector:
    """Product basis state with amplitude 1 on the given configuration."""
    if not isinstance(shape, SubsystemShape):
        shape = SubsystemShape(tuple(shape))
    amps = np.zeros(shape.dim, dtype=complex)
    amps[shape.index_of(levels)] = 1.0
    return StateVector(shape, amps)


def apply_local(state: StateVector, u: LocalUnitary, targets) -> StateVector:
    """Apply ``u`` to the listed subsystems, identity elsewhere."""
    dims = state.shape.dims
    n = len(dims)
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise DimensionError(f"duplicate target subsystems {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise DimensionError(f"target out of range in {targets} for {n} subsystems")
    actual = tuple(dims[t] for t in targets)
    if actual != u.dims:
        raise DimensionError(
            f"operator dims {u.dims} do not match target dims {actual}")
    psi = state.amps.reshape(dims)
    psi = np.moveaxis(psi, targets, range(len(targets)))
    moved_shape = psi.shape
    block = 1
    for d in u.dims:
        block *= d
    flat = psi.reshape(block, -1)
    flat = u.entries @ flat
    psi = np.moveaxis(flat.reshape(moved_shape), range(len(targets)), targets)
    return StateVector(state.shape, psi.reshape(-1))


def measure_subsystem(state: StateVector, target: int,
                      rng: RandomSource) -> tuple[int, StateVector]:
    """Born-rule measurement of one subsystem.

    Returns the sampled level and the renormalized post-measurement
    state.  A state with total probability below ``NORM_TOL`` is an
    error rather than being silently rescaled.
    """
    dims = state.shape.dims
    if not 0 <= target < len(dims):
        raise DimensionError(f"no subsystem {target} in shape {dims}")
    moved = np.moveaxis(state.amps.reshape(dims), target, 0)
    flat = moved.reshape(dims[target], -1)
    weights = np.sum(np.abs(flat) ** 2, axis=1)
    total = float(weights.sum())
    if total < NORM_TOL:
        raise MeasurementError(
            f"state norm {total:.3e} too small to measure subsystem {target}")
    outcome = rng.choose(weights / total)
    collapsed = np.zeros_like(flat)
    collapsed[outcome] = flat[outcome] / np.sqrt(weights[outcome])
    collapsed = np.moveaxis(collapsed.reshape(moved.shape), 0, target)
    return outcome, StateVector(state.shape, collapsed.reshape(-1))


def fidelity(a: StateVector, b: StateVector) -> float:
    """Squared overlap of two states of identical shape."""
    if a.shape.dims != b.shape.dims:
        raise DimensionError(
            f"shape mismatch: {a.shape.dims} vs {b.shape.dims}")
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)


def is_unitary(u: LocalUnitary, tol: float = ALGEBRA_TOL) -> bool:
    m = u.entries
    gram = m.conj().T @ m
    return bool(np.max(np.abs(gram - np.eye(m.shape[0]))) <= tol)
