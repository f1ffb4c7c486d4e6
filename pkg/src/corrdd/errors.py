"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A caller supplied a value outside an operation's domain."""


class ContractViolation(ValueError):
    """An operand does not carry the property its role requires."""


class FitFailure(RuntimeError):
    """A curve fit did not converge.

    The best grid-search estimate is kept in ``fallback`` so callers can
    still report something.
    """

    def __init__(self, message, fallback=None):
        super().__init__(message)
        self.fallback = fallback


class NoPositiveSolution(ValueError):
    """An inversion has no positive root."""


class ConfigError(ValueError):
    """Malformed or out-of-range configuration input."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path
