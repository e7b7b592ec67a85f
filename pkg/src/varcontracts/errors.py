"""Exception taxonomy shared across the package."""


class VarContractsError(Exception):
    """Base class for all package errors."""


class ValidationError(VarContractsError):
    """Invalid model, measure or scenario configuration.

    Carries the full list of violations so callers can report every
    problem at once rather than one per run.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class WealthDomainError(VarContractsError):
    """A wealth level fell outside the utility's evaluation domain."""


class MarginalRangeError(VarContractsError):
    """A target value is outside the range of the marginal utility."""


class TailMassError(VarContractsError):
    """Conditioning on a tail with zero probability mass."""


class SlackScenarioError(VarContractsError):
    """Bracket machinery invoked although the variance bound is slack."""


class BracketInconsistencyError(VarContractsError):
    """Degenerate indemnity bracket on a loss that is not two-point."""


class UnsupportedScenarioError(VarContractsError):
    """Scenario violates a structural hypothesis of the interior solver."""


class SolverError(VarContractsError):
    """Root-finding or optimisation failed to converge.

    ``diagnostics`` holds the best residuals / probe values seen.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PreconditionError(VarContractsError):
    """A comparative-statics hypothesis is not satisfied."""
