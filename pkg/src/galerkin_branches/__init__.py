"""Spectral-Galerkin eigenproblems and bifurcation branches for Hessian-determinant equations."""
from .basis import (
    DomainSpec,
    Field,
    GridValues,
    constant,
    eval_field,
    evaluate,
    exact_quad_order,
    grid_function,
    hessian_determinant,
    hessian_determinant_directional,
    integrate,
)
from .continuation import (
    Branch,
    BranchPoint,
    bifurcation_tangent,
    classify_alternative,
    positivity_scan,
    refine_at_amplitude,
    trace_branch,
)
from .convergence import (
    SweepReport,
    branch_distance,
    epsilon_sweep,
    induced_weight,
    vanishing_ratio_diagnostic,
    weight_limit_diagnostic,
)
from .eigen import (
    AuxSpectrum,
    Decomposition,
    EigenPair,
    PerturbedCurve,
    StabilityWindow,
    aux_spectrum,
    compactness_probe,
    decompose,
    perturbed_curve,
    perturbed_eigenpair,
    principal_eigenpair,
    second_eigenvalue,
    simplicity_check,
    stability_window,
    verify_bounds,
)
from .errors import (
    ConfigError,
    DegenerateGapError,
    InadmissibleWeightError,
    InconsistentInputError,
    NonConvergenceError,
    SingularJacobianError,
)
from .gram import gram_h1, gram_x, mass
from .nonlinear import NonlinearityKind, ResidualSystem, newton_correct, smallness_check

__version__ = "0.1.0"
