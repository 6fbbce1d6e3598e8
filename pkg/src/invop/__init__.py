"""Regularized inversion of 1-D elliptic coefficients with learned surrogates.

The package solves coefficient identification problems for two-point
boundary value problems by Tikhonov regularization, where the forward map
inside the functional may be the Galerkin solver itself, a rank-N linear
expansion built from training pairs, or a branch/trunk sigmoid operator
initialized from that expansion.
"""

from .errors import (
    ConfigInvalid,
    DegenerateFit,
    DegenerateScale,
    DependentImages,
    DimensionMismatch,
    EmptyProbeSet,
    IllConditionedFit,
    InvopError,
    NonAdmissibleCoefficient,
    NonAdmissiblePerturbation,
    OutOfRange,
    PropertyViolation,
    RangeViolation,
    SingularSystem,
    Stalled,
    WidthTooLarge,
)
from .fem import (
    REFERENCE_CELLS,
    ProblemKind,
    ProblemTag,
    adjoint_apply,
    derivative_apply,
    solve_forward_fem,
    solve_forward_reference,
)
from .grid import GridFunction, SpaceKind, inner, norm, trapezoid_weights
from .mollify import MollifierParams, mollification_report, mollifier_kernel, mollify, mollify_matrix
from .neural import (
    ActivationKind,
    BranchCoeffs,
    NeuralOperatorCoeffs,
    StructuredSurrogateCoeffs,
    TrunkCoeffs,
    eval_branch,
    eval_neural_operator,
    eval_structured,
    eval_structured_with_gradient,
    eval_trunk,
    flatten_structured,
)
from .studies import RateTable, StudyConfig, calibrate_fem_rho, fem_rho, fit_slope, run_study
from .tikhonov import (
    RUN_COLUMNS,
    ApproximateMinimizer,
    Certificate,
    RegularizationRun,
    SurrogateHandle,
    TikhonovConfig,
    add_noise,
    choose_parameters,
    minimize_tikhonov,
    solve_inverse_problem,
    tikhonov_value,
    tikhonov_value_and_gradient,
)
from .training import (
    CenteredTrainingSet,
    LinearSurrogate,
    PerturbationSpec,
    SurrogateDiagnostics,
    TrainingSet,
    apply_linear_surrogate,
    assemble_neural_surrogate,
    build_linear_surrogate,
    center_training_set,
    estimate_nu_N,
    generate_training_set,
    gram_schmidt,
    perturbation_shape,
)

__version__ = "0.1.0"
