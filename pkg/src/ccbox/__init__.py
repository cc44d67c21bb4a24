"""Numerical toolkit for families of bracket-generating vector fields:
commutator tables, approximate commutator exponentials, almost-exponential
charts, control-distance and ball-measure estimation, stratification and
mollification, all verified against closed-form oracles at desk scale."""

from .errors import (
    CCBoxError, ConfigError, DegenerateBasisError, DomainError,
    DomainEscapeError, HormanderViolationError, HormanderWarning,
    IllConditionedJacobianError, NonConvergenceError, SingularScalingError,
    StiffnessError, UnreachableWithinBudgetError, UnsupportedDepthError,
)
from .fields import (
    BUILTIN_NAMES, CommutatorTable, RegularityConstants, VectorFieldFamily,
    Word, build_table, builtin_family, estimate_constants, eval_commutator,
    load_family,
)
from .flow import FlowLeg, FlowPlan, Trajectory, integrate_flow, run_plan
from .approxexp import (
    AnisotropicBox, ExpansionReport, TupleSelection, almost_exponential,
    approx_commutator_plan, approx_exp, derivative_expansion_check, invert_E,
    jacobian_E, jacobian_structure_check, pullback_check,
    pullback_coefficients, scaling_map,
)
from .maximality import (
    MaximalityReport, Stratification, big_lambda, lambda_det,
    resolve_in_basis, select_maximal, stability_check, stratify,
)
from .metric import (
    BallEstimate, DistanceEstimate, ballbox_verify, cc_lower, cc_upper,
    doubling_estimate, injectivity_fit, reachable_grid, rho_sample,
)
from .mollify import (
    MollifiedFamily, convergence_check, mollified_commutator, mollify_family,
    uniform_bound_check,
)
from .reports import VerificationReport, rows_to_csv, write_report_csv

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
