"""Exception and warning classes raised by the toolkit."""


class PencilError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PencilError):
    """Invalid configuration file or option."""


class MissingArtifact(PencilError):
    """A prerequisite run artifact is absent."""


# numerical failures

class NumericalFailure(PencilError):
    pass


class StepFailure(NumericalFailure):
    """The adaptive integrator could not meet its tolerance."""

    def __init__(self, message, lam=None, edge=None):
        super().__init__(message)
        self.lam = lam
        self.edge = edge


class MultiplicityTooHigh(NumericalFailure):
    pass


class DivisionDegeneracy(NumericalFailure):
    pass


class RankDeficient(NumericalFailure):
    pass


class FitDiverged(NumericalFailure):
    pass


class BranchSingular(NumericalFailure):
    pass


class SingularGram(NumericalFailure):
    pass


class LemmaViolated(NumericalFailure):
    """A consequence of a verified assumption failed numerically."""


# assumption violations

class AssumptionViolated(PencilError):
    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending or []


class DegenerateAlphas(AssumptionViolated):
    pass


class NotNormalized(AssumptionViolated):
    pass


class AssumptionBViolated(AssumptionViolated):
    pass


class AssumptionDViolated(AssumptionViolated):
    pass


class ConditionCViolated(AssumptionViolated):
    pass


class AssignmentAmbiguous(UserWarning):
    """Two eigenvalue-to-lattice assignments tie; the first was taken."""
