"""Exception taxonomy.

Two families matter to callers: model-loading problems (ModelError subclasses,
CLI exit code 2) and inference-time problems (InferenceError subclasses, CLI
exit code 3). Everything derives from EngineError.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all package errors."""


class ModelError(EngineError):
    """Problems detected while loading or validating a model file."""


class ParseError(ModelError):
    pass


class UnknownVariable(ModelError):
    pass


class NonlinearExpression(ModelError):
    pass


class InvalidJoinTree(ModelError):
    pass


class InferenceError(EngineError):
    """Problems raised while computing with potentials."""


class InvalidPoint(InferenceError):
    pass


class DomainMismatch(InferenceError):
    pass


class CapacityExceeded(InferenceError):
    pass


class DivergentIntegral(InferenceError):
    pass


class DegenerateDensity(InferenceError):
    pass


class NonInvertibleEquation(InferenceError):
    pass


class UnsupportedElimination(InferenceError):
    pass


class UnknownState(InferenceError):
    pass


class InconsistentEvidence(InferenceError):
    pass


class OracleDimension(InferenceError):
    pass
