"""Exception hierarchy shared by all flitnoc modules."""


class NocError(Exception):
    """Base class for every error raised by this package."""


class CoordinateOverflow(NocError, ValueError):
    pass


class LengthMismatch(NocError, ValueError):
    pass


class PacketTooLarge(NocError, ValueError):
    pass


class InvalidLocalPort(NocError, ValueError):
    pass


class DuplicateInput(NocError):
    """Two outputs claimed the same crossbar input (arbiter bug)."""


class HandshakeViolation(NocError):
    pass


class FifoFull(NocError):
    pass


class FifoEmpty(NocError):
    pass


class InvalidTiming(NocError, ValueError):
    pass


class TopologyError(NocError, ValueError):
    pass


class DeadlockSuspected(NocError):
    pass


class Saturated(NocError, ArithmeticError):
    """Occupied bandwidth leaves nothing for the analysed flow."""


class _ScenarioError(NocError, ValueError):
    """Carries every problem found, as ``(line, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(f"line {n}: {msg}" if n else msg for n, msg in self.errors))


class ParseError(_ScenarioError):
    pass


class ValidationError(_ScenarioError):
    pass
