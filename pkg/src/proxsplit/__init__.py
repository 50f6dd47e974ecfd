"""Proximity operators of weighted sums of composite convex functions.

The solver splits the composite prox problem into one dual variable per
summand, activating each function only through its own proximity operator
and each linear map only through apply/adjoint calls.  Derived front ends
compute best approximations onto intersections of affine preimages of
convex sets and recover images under a total-variation + elastic-net prior.
"""

from .bestapprox import (
    CompositeConstraint,
    ProjectionConfig,
    QualificationError,
    SummableErrorSchedule,
    feasibility_residual,
    project_intersection,
)
from .functions import (
    ElasticNet,
    Indicator,
    NormL1,
    NormL2,
    ProxFunction,
    SumOfNorms,
    ZeroFunction,
    elastic_net,
    function_from_config,
    make_indicator,
    prox,
    prox_conjugate,
)
from .imaging import (
    MeasurementModel,
    OrthonormalBasisOp,
    backward_divergence,
    degrade,
    forward_gradient,
    haar_basis,
    identity_basis,
    project_disk_field,
    recover_image,
    recovery_problem,
    tv,
)
from .linops import (
    LinearOperator,
    check_adjoint,
    estimate_operator_norm,
    inner,
    load_matrix_csv,
    operator_from_config,
)
from .oracle import (
    Certificate,
    CertificationError,
    GridBoundsError,
    grid_oracle,
    long_run_reference,
    scalar_oracle,
)
from .sets import AffineSet, Ball, Box, ConvexSet, Halfspace, set_from_config
from .solver import (
    CompositeProxProblem,
    QualificationReport,
    Solution,
    SolverConfig,
    SolverState,
    Term,
    Trace,
    check_qualification,
    dual_objective,
    load_problem,
    make_decay_injector,
    primal_objective,
    problem_from_config,
    solve,
    solve_dykstra,
    step,
)

__version__ = "0.1.0"
