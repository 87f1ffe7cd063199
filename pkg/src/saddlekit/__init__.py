"""Primal-dual first-order solvers with active-set identification diagnostics.

Solve inequality-constrained convex programs (LP, QP, QCQP) with PDHG,
ADMM, or the extragradient method, record per-iteration traces, and
analyze the two-stage convergence pattern: finite-time identification of
the active constraints followed by a faster local linear regime.
"""

from .identification import (
    ActiveSetPartition,
    EmptyEstimateError,
    IdentificationError,
    ModuliEstimate,
    ModulusSample,
    PointOracle,
    RegionTooThinError,
    StabilityRadius,
    TwoStageFit,
    classify,
    estimate_moduli,
    fit_two_stage,
    identification_iteration,
    membership_M,
    predicted_counts,
    stability_radius,
)
from .instances import (
    BUILTIN_NAMES,
    InstanceDescriptor,
    InstanceError,
    SolutionSet,
    builtin,
    intro_qp,
    load,
    random_lp,
    random_qcqp,
    random_qp,
    rotated_house,
    save,
    trivial_lp,
)
from .linalg import PSeminorm
from .problem import (
    AffineConstraint,
    PrimalDualPoint,
    ProblemError,
    ProblemSpec,
    QuadraticConstraint,
    dual_value,
    eval_G,
    f_value,
    kkt_residual,
    saddle_dist,
)
from .solvers import (
    IterationTrace,
    SolverConfig,
    SolverError,
    TraceRecord,
    UnsupportedAlgorithmError,
    auto_stepsize,
    gamma_bound,
    read_summary,
    replay_config,
    run,
    seminorm_for,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # problem model
    "ProblemSpec",
    "AffineConstraint",
    "QuadraticConstraint",
    "PrimalDualPoint",
    "ProblemError",
    "f_value",
    "eval_G",
    "dual_value",
    "kkt_residual",
    "saddle_dist",
    # solvers
    "SolverConfig",
    "SolverError",
    "UnsupportedAlgorithmError",
    "IterationTrace",
    "TraceRecord",
    "run",
    "auto_stepsize",
    "gamma_bound",
    "seminorm_for",
    "write_trace",
    "read_summary",
    "replay_config",
    # instances
    "InstanceDescriptor",
    "InstanceError",
    "SolutionSet",
    "BUILTIN_NAMES",
    "builtin",
    "intro_qp",
    "load",
    "save",
    "rotated_house",
    "trivial_lp",
    "random_lp",
    "random_qp",
    "random_qcqp",
    # identification
    "ActiveSetPartition",
    "classify",
    "membership_M",
    "identification_iteration",
    "StabilityRadius",
    "stability_radius",
    "ModuliEstimate",
    "ModulusSample",
    "estimate_moduli",
    "PointOracle",
    "TwoStageFit",
    "fit_two_stage",
    "predicted_counts",
    "IdentificationError",
    "RegionTooThinError",
    "EmptyEstimateError",
    # seminorms
    "PSeminorm",
]
