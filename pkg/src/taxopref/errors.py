"""Exception hierarchy shared by all modules."""


class TaxoprefError(Exception):
    """Base class for every error raised by the package."""


class InputError(TaxoprefError):
    """Malformed or inconsistent user input (CLI exit status 2)."""

    def __init__(self, message, source=None, line=None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class CycleDetected(InputError):
    pass


class MalformedLine(InputError):
    pass


class EmptyTaxonomy(InputError):
    pass


class UnknownValue(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class FormulaSyntaxError(InputError):
    pass


class AmbiguousBareValue(InputError):
    pass


class UnsatisfiableClause(InputError):
    pass


class InsufficientRoots(InputError):
    pass


class InsufficientAttributes(InputError):
    pass


class EmptyRequest(InputError):
    pass


class InvalidCharacter(InputError):
    pass


class CapacityExceeded(TaxoprefError):
    """A rewrite produced more clauses than the configured bound."""


class DomainTooLarge(TaxoprefError):
    """The enumerated domain exceeds the oracle cap (CLI exit status 3)."""
