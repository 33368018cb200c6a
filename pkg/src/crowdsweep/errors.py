"""Exception hierarchy shared by all modules."""


class CrowdError(Exception):
    """Base class for every error raised by :mod:`crowdsweep`."""


class ScenarioError(CrowdError, ValueError):
    """Malformed or out-of-range scenario data."""


class InfeasibleScenarioError(ScenarioError):
    """Initial configuration has overlapping disks."""


class DegenerateGeometryError(CrowdError, ValueError):
    """A direction is undefined (coincident centers, participant at the exit)."""


class ProjectionError(CrowdError):
    """Cyclic projection did not reach the requested tolerance."""

    def __init__(self, message, violation):
        super().__init__(f"{message} (achieved violation {violation:.3e})")
        self.violation = violation


class NoRatioError(CrowdError, ValueError):
    """The contact geometry does not determine a control ratio."""


class InconsistentSolutionError(CrowdError, ValueError):
    """Controls, contact time and multiplier do not describe one motion."""


class NoFeasibleBranchError(CrowdError):
    """No branch of the two-participant solver produced a feasible candidate."""


class NoCertificateError(CrowdError):
    """The adjoint stationarity system has no solution at tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class BudgetExceededError(CrowdError):
    """A grid search would need more evaluations than allowed."""

    def __init__(self, required, budget):
        super().__init__(
            f"grid needs {required} evaluations, budget is {budget}"
        )
        self.required = required
        self.budget = budget
