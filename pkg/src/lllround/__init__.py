"""Rounding covering and minimax integer programs with certified bounds.

The package splits into tail-probability kernels (:mod:`lllround.tailbounds`),
instance modelling and generators (:mod:`lllround.model`), a small dense LP
solver (:mod:`lllround.lp`), the covering rounding pipeline with its success
estimator and derandomizer (:mod:`lllround.cip`), minimax group rounding with
support bootstrapping (:mod:`lllround.mip`), exhaustive verification oracles
(:mod:`lllround.oracle`), and the command-line front end (:mod:`lllround.cli`).
"""

from .cip import (
    EstimatorError,
    EstimatorState,
    ParameterError,
    RoundedSolution,
    RoundingScheme,
    choose_alpha_beta,
    derandomize,
    make_estimator,
    make_scheme,
    multicriteria_params,
    round_cip,
    row_failure_bound,
    standard_certificate,
    standard_round,
    success_lower_bound,
)
from .lp import InfeasibleError, LpReport, ingest_solution, solve_cip_lp, solve_mip_lp
from .mip import (
    BootstrapConfig,
    BootstrapResult,
    LasVegasReport,
    MipTarget,
    bootstrap_reduce,
    full_mip_pipeline,
    group_round,
    las_vegas_mip,
    mip_target,
)
from .model import (
    CipInstance,
    FractionalSolution,
    GenerationError,
    InstanceError,
    MipInstance,
    ParseError,
    SparsityStats,
    gen_facility_location,
    gen_hypergraph_partition,
    gen_set_cover,
    parse_instance,
    row_cover,
    serialize_instance,
    sparsity_stats,
)
from .oracle import (
    BudgetExceeded,
    EnumerationBudget,
    ExactProbs,
    OracleError,
    VerifyReport,
    exact_event_probs,
    exact_ilp,
    lp_vertex_optimum,
    verify_branch_inequality,
    verify_extended_lll,
    verify_fkg_and_antifkg,
    verify_phi_domination,
)
from .tailbounds import (
    binomial_real,
    deviation_for_budget,
    elementary_symmetric,
    esym_mean_bound,
    lower_tail_bound,
    upper_tail_bound,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "BootstrapResult",
    "BudgetExceeded",
    "CipInstance",
    "EnumerationBudget",
    "EstimatorError",
    "EstimatorState",
    "ExactProbs",
    "FractionalSolution",
    "GenerationError",
    "InfeasibleError",
    "InstanceError",
    "LasVegasReport",
    "LpReport",
    "MipInstance",
    "MipTarget",
    "OracleError",
    "ParameterError",
    "ParseError",
    "RoundedSolution",
    "RoundingScheme",
    "SparsityStats",
    "VerifyReport",
    "binomial_real",
    "bootstrap_reduce",
    "choose_alpha_beta",
    "derandomize",
    "deviation_for_budget",
    "elementary_symmetric",
    "esym_mean_bound",
    "exact_event_probs",
    "exact_ilp",
    "full_mip_pipeline",
    "gen_facility_location",
    "gen_hypergraph_partition",
    "gen_set_cover",
    "group_round",
    "ingest_solution",
    "las_vegas_mip",
    "lower_tail_bound",
    "lp_vertex_optimum",
    "make_estimator",
    "make_scheme",
    "mip_target",
    "multicriteria_params",
    "parse_instance",
    "round_cip",
    "row_cover",
    "row_failure_bound",
    "serialize_instance",
    "solve_cip_lp",
    "solve_mip_lp",
    "sparsity_stats",
    "standard_certificate",
    "standard_round",
    "success_lower_bound",
    "upper_tail_bound",
    "verify_branch_inequality",
    "verify_extended_lll",
    "verify_fkg_and_antifkg",
    "verify_phi_domination",
]
