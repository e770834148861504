"""Exception hierarchy; the CLI maps these onto exit codes."""


class MolTweezerError(Exception):
    """Base class for all package errors."""


class ValidationError(MolTweezerError, ValueError):
    """Invalid physical or numerical input. Carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class EmptyBasisError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class NumericalError(MolTweezerError, RuntimeError):
    """A numerical routine failed its accuracy contract.

    ``diagnostics`` is a plain dict written out by the CLI next to the outputs.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class QuadratureError(NumericalError):
    pass


class EigensolverError(NumericalError):
    pass


class PropagationError(NumericalError):
    pass
