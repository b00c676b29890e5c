from ._scfo import (
    InternalError,
    Problem,
    ValidationError,
    builtin,
    builtin_names,
    derived_optimum,
    filter_gain_floor,
    fj_error,
    linear_growth,
    load_problem,
    lp_feasible,
    min_nonnegative_rayleigh,
    qp_project,
    quadratic_growth,
    run,
    validate_lipschitz,
    worst_case_growth,
)

__all__ = [
    "InternalError",
    "Problem",
    "ValidationError",
    "builtin",
    "builtin_names",
    "derived_optimum",
    "filter_gain_floor",
    "fj_error",
    "linear_growth",
    "load_problem",
    "lp_feasible",
    "min_nonnegative_rayleigh",
    "qp_project",
    "quadratic_growth",
    "run",
    "validate_lipschitz",
    "worst_case_growth",
]
