"""Error types shared across the simulator.

ValidationError maps to CLI exit code 1 (bad inputs/config),
InternalError to exit code 2 (a broken invariant inside the simulator).
"""


class ValidationError(ValueError):
    pass


class InternalError(AssertionError):
    pass
