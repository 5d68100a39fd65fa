"""Exception types shared across the emulator."""


class QetSimError(Exception):
    """Base class for all emulator errors."""


class DimensionError(QetSimError):
    """Shape or subsystem mismatch in state-vector algebra."""


class MeasurementError(QetSimError):
    """Sampling was attempted on a state with no probability mass."""


class ProgramSyntaxError(QetSimError):
    """Program text failed to parse; carries every (line, message) pair."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(f"line {n}: {m}" for n, m in self.issues))


class QpuRuntimeError(QetSimError):
    """An instruction precondition was violated during execution."""

    def __init__(self, index, opcode, condition):
        self.index = index
        self.opcode = opcode
        self.condition = condition
        super().__init__(f"instruction {index} ({opcode}): {condition}")


class SynthesisError(QetSimError):
    """A logical gate could not be lowered to physical instructions."""


class ConvergenceError(QetSimError):
    """The step-halving check of the numerical integrator failed."""


class ProtocolError(QetSimError):
    """Ill-formed elementary operation or unmappable protocol state."""


class ServiceError(QetSimError):
    """Client request rejected; carries every (op index, message) pair."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"op {i}: {m}" for i, m in self.errors))
