"""Optimal linear strategies for teams whose members can stand in for one another.

Static teams that are not partially nested are solved in an expanded
information structure, then rewritten so each member uses only its own
information.  Finite-horizon decentralized LQG problems get controllers
that each run a local filter on their own observations yet reach the
centralized optimal cost.
"""
from .errors import (
    AssumptionViolated,
    BadCertificate,
    BadIndex,
    DimensionMismatch,
    InfoViolation,
    InternalError,
    InvalidCovariance,
    InvalidMatrix,
    InvarianceBroken,
    NothingToDo,
    ParseError,
    SingularInnovation,
    TeamsubError,
)
from .linalg import DEFAULT_TOL, Tolerance, colspace_contains, pinv, quad_cost, solve_minimum_norm
from .lqg import (
    GainSchedule,
    LqgProblem,
    SimulationResult,
    certify_lqg_substitutability,
    decentralized_gains,
    exact_cost,
    kalman_schedule,
    sum_identity_residual,
    lqr_schedule,
    simulate,
    synthesize,
)
from .static import (
    LinearTeamStrategy,
    composite,
    expand,
    expected_cost,
    realize_static_strategy,
    solve_static,
    to_static,
)
from .team import (
    InfoBlock,
    Member,
    TeamProblem,
    analyze_precedence,
    certify_substitutability,
    validate,
)
from .transform import remove_violations, substitute_pair, measure_drift, violations

__version__ = "0.1.0"
