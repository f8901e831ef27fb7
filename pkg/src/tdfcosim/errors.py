"""Exception hierarchy. Each family carries the CLI exit code it maps to."""


class CosimError(Exception):
    exit_code = 5


# -- model / schema (exit 2) -------------------------------------------------

class ModelError(CosimError):
    exit_code = 2


class UnknownReference(ModelError):
    pass


class DuplicateName(ModelError):
    pass


class TypeMismatch(ModelError):
    pass


class DirectionMismatch(TypeMismatch):
    pass


class UnboundPort(ModelError):
    pass


class ArityMismatch(ModelError):
    pass


class InvalidParams(ModelError):
    pass


class SchemaError(ModelError):
    pass


class ModelSyntaxError(ModelError):
    pass


class BindingError(ModelError):
    pass


class Inconsistent(ModelError):
    """Timestep constraints contradict each other.

    ``witness`` lists the chain of constraints that produced the conflict.
    """

    def __init__(self, message, witness=()):
        super().__init__(message)
        self.witness = tuple(witness)


class Underdetermined(ModelError):
    def __init__(self, message, component=()):
        super().__init__(message)
        self.component = tuple(component)


# -- scheduling (exit 3/4) ---------------------------------------------------

class CausalityViolation(CosimError):
    exit_code = 3


class Deadlock(CosimError):
    exit_code = 4

    def __init__(self, message, blocked=()):
        super().__init__(message)
        self.blocked = tuple(blocked)


# -- runtime (exit 5) --------------------------------------------------------

class SimulationError(CosimError):
    exit_code = 5


class TimeTravel(SimulationError):
    pass


class UnknownEndpoint(SimulationError):
    pass


class StuckState(SimulationError):
    pass


class FifoOverflow(SimulationError):
    def __init__(self, endpoint, time):
        super().__init__(f"rx fifo overflow on {endpoint!r} at {time} ps")
        self.endpoint = endpoint
        self.time = time


class Livelock(SimulationError):
    pass
