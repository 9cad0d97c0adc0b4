"""
Exception hierarchy for the fan intersection cohomology workbench.

Every error carries the batch exit code the CLI reports for it.
"""
from __future__ import annotations


class FanIHError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class InputError(FanIHError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class HypothesisError(FanIHError):
    """A theorem hypothesis could not be certified on the given data."""

    exit_code = 4


class TheoremCheckFailed(FanIHError):
    """A verified statement failed on a concrete instance."""

    exit_code = 1


class InternalTripwire(FanIHError):
    """An internal consistency check failed (never expected on valid input)."""

    exit_code = 3


# fan-core
class DegenerateRay(InputError):
    pass


class OverlappingCones(InputError):
    pass


class NotAFace(InputError):
    pass


class MixedDimension(InputError):
    pass


class RayNotInterior(InputError):
    pass


class RayNotOpposite(InputError):
    pass


class SubdivisionMismatch(InputError):
    pass


class SourceNotSimplicial(InputError):
    pass


class NotPiecewiseLinear(InputError):
    pass


class NotASection(InputError):
    pass


class NotConvex(HypothesisError):
    pass


# graded-linalg
class CapTooLow(InputError):
    pass


class NotSymmetric(InternalTripwire):
    pass


class OddDegree(InternalTripwire):
    pass


# sheaf-engine
class NotQuasiConvex(InputError):
    pass


class FreenessCheckFailed(InternalTripwire):
    pass


class SumRuleViolation(InternalTripwire):
    pass


# pairing
class RefinementNotSimplicial(InputError):
    pass


class DenominatorNotCleared(InternalTripwire):
    pass


class DegenerateRestriction(InternalTripwire):
    pass


class PairingDegenerate(InternalTripwire):
    pass


class NoLocalProduct(HypothesisError):
    pass


# lefschetz
class NotComplete(HypothesisError):
    pass


class NotStrictlyConvex(HypothesisError):
    pass


class NotRelativelyConvex(HypothesisError):
    pass


class HLFailed(TheoremCheckFailed):
    pass
