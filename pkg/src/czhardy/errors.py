"""Exception types shared across the package."""


class ContainmentError(ValueError):
    """A vertex or vertex set does not fit inside the truncation."""


class ParameterError(ValueError):
    """A numerical parameter lies outside the range where a construction is valid."""


class InvariantViolation(RuntimeError):
    """An exact inequality or inclusion that must always hold was found false.

    ``witness`` carries a JSON-serializable description of the offending object.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
