"""Exception types raised across okselect."""


class OkselectError(Exception):
    """Base class for all okselect errors."""


class InvalidInputError(OkselectError, ValueError):
    pass


class UnsupportedError(OkselectError, NotImplementedError):
    pass


class NumericalError(OkselectError, ArithmeticError):
    """A computation produced a non-finite value or failed to converge.

    ``diagnostics`` carries whatever state is useful for reproducing it.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} [{details}]"


class StateCorruptionError(OkselectError, RuntimeError):
    pass


class ParseError(OkselectError, ValueError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column


class InvalidTaskError(OkselectError, ValueError):
    pass


class InvalidConfigError(OkselectError, ValueError):
    pass


class RunError(OkselectError, RuntimeError):
    """Wraps a failure inside a run with the round / seed where it happened."""
