"""Numerical toolkit for the Dirichlet problem
-lap u = lam c(x) u + mu(x) |grad u|^2 + h(x) on boxes:
finite-difference operators, hypothesis checks, a Cole-Hopf pipeline for
constant mu, Newton and fixed-point solvers, enclosure between lower and
upper solutions, and pseudo-arclength branch continuation."""

from .conditions import (
    ConditionReport,
    EigenResult,
    ExponentWitness,
    check_ferone_murat,
    check_smallness,
    exponent_margins,
    find_exponents,
    first_eigen,
    sobolev_constant,
    weighted_rayleigh_sup,
)
from .continuation import (
    Branch,
    BranchAnalysis,
    BranchPoint,
    ContinuationOptions,
    analyze_branch,
    locate_fold,
    trace_branch,
)
from .grid import (
    DiscreteOperators,
    GridError,
    GridFunction,
    GridSpec,
    build_operators,
    grad_sq,
    norms,
    poisson_solve,
)
from .problem import (
    CoefficientSpec,
    ProblemData,
    ValidationReport,
    compute_zero_mask,
    load_values_file,
    parse_coefficient,
    save_values_file,
    validate_profile,
)
from .solver import (
    EnclosureError,
    K_mu,
    SolveOptions,
    SolveReport,
    SolverError,
    UniquenessReport,
    fixed_point_T,
    monotone_enclosure,
    multi_start,
    newton_solve,
    residual_P,
)
from .transform import (
    CoercivityError,
    TransformedProblem,
    TransformError,
    cole_hopf,
    functional_I,
    g_and_G,
    g_prime,
    solve_transformed,
)

__version__ = "0.1.0"

__all__ = [
    "Branch", "BranchAnalysis", "BranchPoint", "CoefficientSpec",
    "CoercivityError", "ConditionReport", "ContinuationOptions",
    "DiscreteOperators", "EigenResult", "EnclosureError", "ExponentWitness",
    "GridError", "GridFunction", "GridSpec", "K_mu", "ProblemData",
    "SolveOptions", "SolveReport", "SolverError", "TransformError",
    "TransformedProblem", "UniquenessReport", "ValidationReport",
    "analyze_branch", "build_operators", "check_ferone_murat",
    "check_smallness", "cole_hopf", "compute_zero_mask", "exponent_margins",
    "find_exponents", "first_eigen", "fixed_point_T", "functional_I",
    "g_and_G", "g_prime", "grad_sq", "load_values_file", "locate_fold",
    "monotone_enclosure", "multi_start", "newton_solve", "norms",
    "parse_coefficient", "poisson_solve", "residual_P", "save_values_file",
    "sobolev_constant", "solve_transformed", "trace_branch",
    "validate_profile", "weighted_rayleigh_sup",
]
