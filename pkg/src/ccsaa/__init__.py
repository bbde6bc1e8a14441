"""Scenario-program toolkit for chance-constrained linear programs.

Core pieces: scenario-budget certificates, a warm-starting bounded-variable
LP engine with branch-and-bound on top, Gaussian sampling plus an exact
second-order-cone baseline, seven constraint-discard heuristics, and an
experiment harness with out-of-sample validation.
"""

from .certificate import (RiskSpec, ScenarioBudget, cg_log_beta, max_removals,
                          binomial_upper_limit)
from .data import Instance, default_instance, read_instance, write_instance
from .errors import (CcsaaError, ConfigError, NoFeasibleBudget,
                     NotPositiveSemidefinite, UnsupportedForMip, CapExceeded,
                     NumericalFailure)
from .gaussian import (GaussianModel, cholesky, inv_norm_cdf,
                       sample_scenarios, solve_gaussian_exact)
from .heuristics import (AsmConfig, active_set, dual_greedy_removal,
                         greedy_removal, pool_and_discard, polish_dual,
                         polish_resolve, random_removal, run_method,
                         solve_full)
from .mip import SemiContinuousSpec, build_saa_bigm, mip_solve
from .reports import SolveReport, WorkingSet
from .saa import (ChanceProgramSpec, OutcomeVector, ScenarioSet, build_saa_lp,
                  certify, evaluate_outcomes)

__all__ = [
    "RiskSpec", "ScenarioBudget", "cg_log_beta", "max_removals",
    "binomial_upper_limit",
    "Instance", "default_instance", "read_instance", "write_instance",
    "GaussianModel", "cholesky", "inv_norm_cdf", "sample_scenarios",
    "solve_gaussian_exact",
    "AsmConfig", "active_set", "dual_greedy_removal", "greedy_removal",
    "pool_and_discard", "polish_dual", "polish_resolve", "random_removal",
    "run_method", "solve_full",
    "SemiContinuousSpec", "build_saa_bigm", "mip_solve",
    "SolveReport", "WorkingSet",
    "ChanceProgramSpec", "OutcomeVector", "ScenarioSet", "build_saa_lp",
    "certify", "evaluate_outcomes",
    "CcsaaError", "ConfigError", "NoFeasibleBudget", "NotPositiveSemidefinite",
    "UnsupportedForMip", "CapExceeded", "NumericalFailure",
]

__version__ = "0.1.0"
