"""Simulation, closed-form control and optimality checks for a planar crowd-motion model."""

from .errors import (
    BudgetExceededError,
    CrowdError,
    DegenerateGeometryError,
    InconsistentSolutionError,
    InfeasibleScenarioError,
    NoCertificateError,
    NoFeasibleBranchError,
    NoRatioError,
    ProjectionError,
    ScenarioError,
)
from .integrator import Trajectory, catching_up_step, project_feasible, simulate
from .kernels import BACKEND
from .model import (
    ParticipantSpec,
    ProxConstants,
    Scenario,
    bundled_scenario,
    cost,
    distance_gradient,
    load_scenario,
    prox_constants,
    signed_distance,
)
from .optimality import DualCertificate, VerificationReport, reconstruct_duals, verify
from .search import GridSpec, grid_search, refine_local
from .two_body import TwoBodySolution, optimize, solution_for_controls

__version__ = "0.1.0"
