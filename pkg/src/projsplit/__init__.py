"""Asynchronous block-iterative projective splitting with forward steps."""

from .errors import (
    BacktrackError,
    CapabilityError,
    DimensionError,
    InexactnessError,
    NumericalError,
    ParameterError,
    ProjSplitError,
)
from .hyperplane import ProjectionComputation, apply_projection, compute_projection, separator_value
from .operators import (
    AffineOperator,
    ForwardAffine,
    ForwardLipschitz,
    IdentityMap,
    L1Norm,
    LeastSquaresOperator,
    LinearMap,
    LipschitzOperator,
    MatrixMap,
    OperatorBlock,
    ProxExact,
    ProxInexact,
    ProxOperator,
    RowSubmatrixMap,
    check_relative_error,
    forward_eval,
    prox_exact,
    prox_inexact_cg,
)
from .product_space import GammaMetric, PrimalDualPoint, derived_dual, gamma_distance, gamma_inner, gamma_norm_sq
from .scheduler import DelayModel, SchedulePolicy, select_blocks
from .solver import Mode, Problem, RunRecord, SolverConfig, Status, count_q_equivalents, solve
from .steps import affine_autostep, backtracking_forward, backward_step, forward_step_plain

__version__ = "0.1.0"
