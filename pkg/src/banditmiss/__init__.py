"""Two-armed Bernoulli bandit allocation under missing-at-random outcomes.

Library layout: ``core`` (shared types), ``gittins`` (index computation),
``policies`` (allocation rules), ``engine`` (single-trial loop),
``metrics`` (operating characteristics), ``experiments`` (scenario catalog
and replication matrix), ``report`` (CSV), ``figures`` (named figure
reproduction), ``cli`` (command line).
"""
from .core import (
    Algorithm,
    ArmState,
    MissingnessProfile,
    PolicySpec,
    Scenario,
    TrialResult,
    effective_observation_count,
    posterior_mean,
)
from .engine import ImputationMode, current_success_estimate, run_trial, simulate_replications
from .experiments import (
    Cell,
    CellOutcome,
    ExperimentPlan,
    builtin_scenarios,
    load_plan,
    run_plan,
    scenario_by_label,
)
from .gittins import GittinsTable, TableMissError, build_table, gittins_index, retirement_value
from .metrics import AggregateReport, UnusableEstimateError, aggregate, bias_identity_residual
from .policies import (
    Decision,
    UrnState,
    perturbed_index,
    randucb_index,
    rpw_draw_and_update,
    select_arm,
    superiority_probability,
    thompson_allocation,
    ucb_index,
)

__version__ = "0.1.0"

__all__ = [
    "Algorithm", "ArmState", "MissingnessProfile", "PolicySpec", "Scenario",
    "TrialResult", "posterior_mean", "effective_observation_count",
    "ImputationMode", "current_success_estimate", "run_trial", "simulate_replications",
    "Cell", "CellOutcome", "ExperimentPlan", "builtin_scenarios", "load_plan",
    "run_plan", "scenario_by_label",
    "GittinsTable", "TableMissError", "build_table", "gittins_index", "retirement_value",
    "AggregateReport", "UnusableEstimateError", "aggregate", "bias_identity_residual",
    "Decision", "UrnState", "perturbed_index", "randucb_index", "rpw_draw_and_update",
    "select_arm", "superiority_probability", "thompson_allocation", "ucb_index",
    "__version__",
]
