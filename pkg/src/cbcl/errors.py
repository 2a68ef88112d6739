"""Exception hierarchy shared by every stage of the message pipeline."""

from __future__ import annotations


class CBCLError(Exception):
    """Base class for all typed rejections."""

    @property
    def code(self) -> str:
        return type(self).__name__

    @property
    def summary(self) -> str:
        """Short tag used when rendering ``Rejected(stage, summary)``."""
        return self.code


# -- parse stage -------------------------------------------------------------


class ParseError(CBCLError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.reason = message
        self.position = position


class EmptyInput(ParseError):
    pass


class UnbalancedParen(ParseError):
    pass


class UnterminatedString(ParseError):
    pass


class TrailingInput(ParseError):
    pass


class InvalidAtom(ParseError):
    pass


class InvalidEncoding(ParseError):
    pass


class FuelExhausted(ParseError):
    """Raised only if the fuel bound is wrong; no input should reach it."""


# -- classify stage ----------------------------------------------------------


class ValidationError(CBCLError):
    pass


class UnknownPerformative(ValidationError):
    pass


class MissingRecipient(ValidationError):
    pass


class MalformedParams(ValidationError):
    pass


class MalformedWrapper(ValidationError):
    pass


class MalformedMeta(ValidationError):
    pass


class MalformedLang(ValidationError):
    pass


# -- dialect definitions -----------------------------------------------------


class DialectParseError(CBCLError):
    pass


class MalformedDefinition(DialectParseError):
    pass


class MissingResourceRequirements(DialectParseError):
    pass


class MalformedResourceRequirements(DialectParseError):
    pass


class MalformedExtend(DialectParseError):
    pass


class MalformedExamples(DialectParseError):
    pass


class UnknownClause(DialectParseError):
    pass


class DuplicatePerformative(DialectParseError):
    pass


class UndeclaredParamInTemplate(DialectParseError):
    pass


# -- verification / installation ---------------------------------------------


class UnknownAlgorithm(CBCLError):
    def __init__(self, algorithm: str):
        super().__init__(f"no signature provider registered for {algorithm!r}")
        self.algorithm = algorithm


class VerificationFailed(CBCLError):
    """Wraps a failing ``VerificationResult`` so the pipeline can reject with it."""

    def __init__(self, result):
        self.result = result
        super().__init__("; ".join(str(v) for v in result.violations))

    @property
    def summary(self) -> str:
        return ", ".join(f"{v.rule}: {v.name}" for v in self.result.violations)


class NameCollision(CBCLError):
    def __init__(self, name: str, installed: str, offered: str):
        super().__init__(
            f"dialect {name!r} already installed with hash {installed[:16]}, "
            f"offered {offered[:16]}"
        )
        self.name = name


class PolicyRejected(CBCLError):
    pass


# -- expansion ---------------------------------------------------------------


class ExpansionError(CBCLError):
    pass


class ResourceExhausted(ExpansionError):
    def __init__(self, resource: str, limit: int, attempted: int):
        super().__init__(f"{resource} limit {limit} exceeded (would reach {attempted})")
        self.resource = resource
        self.limit = limit
        self.attempted = attempted

    @property
    def summary(self) -> str:
        return f"ResourceExhausted({self.resource})"


class AbsentParameter(ExpansionError):
    pass


class NoMatchingBranch(ExpansionError):
    pass


class ArityMismatch(ExpansionError):
    pass


class UnknownKeyword(ExpansionError):
    pass


class DuplicateKeyword(ExpansionError):
    pass


class DanglingKeyword(ExpansionError):
    pass


class UnknownDialect(ExpansionError):
    pass


class UnknownDialectPerformative(ExpansionError):
    pass


class ResultNotValidMessage(ExpansionError):
    pass
