"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PNVError(Exception):
    """Base class for all package errors."""


class InvalidSpec(PNVError):
    pass


class SingularMetric(PNVError):
    def __init__(self, message: str, node: tuple[int, ...] | None = None):
        super().__init__(message if node is None else f"{message} at node {node}")
        self.node = node


class SlotOutOfRange(PNVError):
    pass


class EmptyMask(PNVError):
    pass


class ParseError(PNVError):
    def __init__(self, message: str, offset: int, expected: set[str] | frozenset[str] = frozenset()):
        exp = ", ".join(sorted(expected))
        super().__init__(f"{message} at byte {offset}" + (f" (expected one of: {exp})" if exp else ""))
        self.offset = offset
        self.expected = frozenset(expected)


class ZeroVector(PNVError):
    pass


class NonZeroMean(PNVError):
    pass


class ClosednessViolated(PNVError):
    pass


class AsymmetricW(PNVError):
    pass


class NonPositiveWarp(PNVError):
    pass


class BadW0Shape(PNVError):
    pass


class ConstraintViolation(PNVError):
    pass


class DegenerateU(PNVError):
    pass


class StepRejected(PNVError):
    pass


class Blowup(PNVError):
    pass


class SignatureError(PNVError):
    pass


class NonRealCurrent(PNVError):
    pass


class ConfigError(PNVError):
    def __init__(self, message: str, location: str | None = None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location
