"""Policy gradient and policy mirror descent on tabular discounted MDPs."""

__version__ = "0.1.0"

from ._config import Tolerances, get_tolerances, set_tolerances, tolerance_context
from .bounds import BoundContext, smoothness, strong_dominance_check, theoretical_bounds
from .estimators import PolicyMirrorDescent, ProjectedPolicyGradient
from .exceptions import (
    BoundViolation,
    NonUniqueStationaryError,
    PlanOverflowError,
    SolverError,
    ValidationError,
)
from .instances import InstanceSpec, generate, load, save, validate
from .mdp import (
    Dmdp,
    induced_dynamics,
    mismatch_coefficient,
    performance_difference,
    policy_gradient,
    q_function,
    value_function,
    value_rho,
    visitation,
    visitation_matrix,
)
from .optimizers import IterationRecord, RunTrace, gradient_mapping, pmd_run, ppg_run
from .ratefit import RateFit, rate_fit
from .sampling import (
    ExactOracle,
    InjectedNoise,
    RolloutOracle,
    SamplingPlan,
    estimate_q_table,
    inexact_pmd_run,
    plan_sampling,
    rollout_q_estimate,
    sampled_pmd_run,
)
from .schedules import StepSchedule, step_eta
from .simplex import (
    BregmanKind,
    bregman_divergence,
    mirror_step,
    mirror_update,
    project_simplex,
    three_point_residual,
    weighted_divergence,
)
from .solvers import (
    OptimalReference,
    greedy_policy,
    optimal_reference,
    policy_improvement,
    policy_iteration,
    stationary_distribution,
    value_iteration_oracle,
)
from .verify import mutated, verify_suite
