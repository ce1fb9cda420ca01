"""Triple-dyad ratio estimation for the p1 directed-network model."""

__version__ = "0.1.0"

from .asymptotics import AsymptoticTable, bias_terms, g_m, plug_in, variance_table
from .errors import DataError, DegeneracyError, DegenerateCounts, P1Error
from .estimator import (
    EstimateReport,
    estimate_all,
    estimate_alpha,
    estimate_beta,
    estimate_filtered,
    estimate_rho,
    estimate_theta,
    estimate_theta_filtered,
    gamma_filter,
    triple_counts,
)
from .inference import (
    TestReport,
    ci_alpha_diff,
    ci_theta,
    compare_graphs,
    fit,
    test_alpha_equality,
    test_beta_equality,
    test_reciprocity,
)
from .mle import MleResult, fit_mle, log_likelihood
from .model import (
    Digraph,
    DyadProbTable,
    DyadTally,
    ParamVector,
    center,
    dyad_probs,
    linear_design,
    sample_graph,
    tally,
)
