"""Exception types shared across the package."""


class PenaltyParameterError(ValueError):
    """Invalid penalty family parameters (shape below family minimum, etc.)."""


class UnboundedDerivativeError(ValueError):
    """Penalty derivative is unbounded at the requested point (bridge at 0)."""


class DegenerateDesignError(ValueError):
    """Design matrix unusable: zero column, wrong shape, bad file."""


class RankDeficientError(ValueError):
    """A submatrix required to be full rank is singular."""


class NotNormalizedError(ValueError):
    """Operation requires a column-normalized design."""


class EnumerationCapError(RuntimeError):
    """Requested exhaustive enumeration exceeds the configured cap."""


class OracleRefusalError(RuntimeError):
    """A checker refused to run because only heuristic diagnostics are available."""


class DiagnosticError(RuntimeError):
    """A diagnostic search failed to converge; carries bracketing info."""
