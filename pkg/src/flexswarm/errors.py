"""Exception hierarchy shared by the library and the command line front end."""


class SwarmError(Exception):
    """Base class for all errors raised by flexswarm."""


class ContractError(SwarmError, ValueError):
    """A function was called with arguments violating its precondition."""


class ConfigError(SwarmError, ValueError):
    """A scenario or sweep description is malformed or out of range."""


class InvariantViolation(SwarmError, RuntimeError):
    """A run broke one of the simulator's hard invariants."""


class ConnectivityLost(InvariantViolation):
    def __init__(self, step: int, components: int):
        self.step = step
        self.components = components
        super().__init__(
            f"connectivity lost at step {step} ({components} components)"
        )
