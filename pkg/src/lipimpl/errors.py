"""Exception hierarchy for solver, perturbation and oscillator failures.

Three families map onto the CLI exit codes: ``NumericalError`` (3),
``CertificateError`` (1) and ``SpecError`` (2).
"""


class LipimplError(Exception):
    """Base class for all lipimpl errors."""


class NumericalError(LipimplError):
    """A computation broke down: singular matrix, divergence, sticking."""


class CertificateError(LipimplError):
    """A run-time certificate could not be established."""


class SpecError(LipimplError, ValueError):
    """The request itself is malformed or incomplete."""


class SingularJacobian(NumericalError):
    pass


class NoContraction(NumericalError):
    pass


class MaxIterExceeded(NumericalError):
    pass


class IntegrationFailed(NumericalError):
    pass


class StickDetected(NumericalError):
    """Non-transversal contact with the switching surface u = 0."""


class MaxEventsExceeded(NumericalError):
    pass


class NoZeroInBracket(NumericalError):
    pass


class MultipleZerosInBracket(NumericalError):
    pass


class EmptySamples(NumericalError):
    pass


class AllPairsDegenerate(NumericalError):
    pass


class LeftBall(CertificateError):
    pass


class NoRootInBall(CertificateError):
    pass


class OutsideBall(CertificateError):
    """A point handed to the solver lies outside its admissible ball."""


class DeltaBallUnknown(SpecError):
    pass


class UnknownProblem(SpecError, KeyError):
    pass


class SweepPathError(SpecError):
    pass


class InvalidRunSpec(SpecError):
    """A run file failed to parse or validate."""
