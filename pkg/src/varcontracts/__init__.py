"""Optimal insurance indemnity schedules under an insurer variance constraint.

The insured maximises expected utility of terminal wealth; the insurer
prices by the expected-value principle and caps the variance of its risk
exposure.  The package solves for the optimal schedule (stop-loss when the
bound is slack, a two-point payment on Bernoulli losses, coinsurance above
a deductible otherwise), certifies it against a brute-force convex program
on the same grid, and checks the comparative-statics predictions for
wealth and bound changes under fair pricing.
"""

from .arrow import ArrowSolution, arrow_deductible, is_variance_slack, phi
from .bounds import IndemnityBracket, compute_bracket, two_point_solution
from .contracts import (
    INTERIOR_FAIR,
    INTERIOR_LOADED,
    SLACK_STOP_LOSS,
    TWO_POINT,
    ContractSolution,
)
from .errors import (
    BracketInconsistencyError,
    MarginalRangeError,
    PreconditionError,
    SlackScenarioError,
    SolverError,
    TailMassError,
    UnsupportedScenarioError,
    ValidationError,
    VarContractsError,
    WealthDomainError,
)
from .losses import (
    DiscreteLoss,
    GridMeasure,
    TruncatedContinuousLoss,
    cap_mean,
    cap_var,
    cdf,
    discretize,
    stop_loss_mean,
    stop_loss_var,
    tail_expectation,
    var_threshold,
)
from .oracle import (
    CrossingProfile,
    OracleResult,
    brute_solve,
    convex_order_leq,
    less_downside_risk,
    upcross_count,
)
from .scenarios import Scenario, Tolerances, from_config
from .solver import (
    indemnity_pointwise,
    kkt_phi,
    kkt_phi_profile,
    residuals,
    solve,
    vajda_ratio,
)
from .statics import ComparisonReport, compare_variance, compare_wealth
from .utilities import (
    CaraUtility,
    CrraUtility,
    HaraUtility,
    LogUtility,
    QuadraticUtility,
    UtilityModel,
)

__version__ = "0.1.0"
