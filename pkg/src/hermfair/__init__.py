"""Fairness-constrained ad allocation with interpretative-uptake costs.

The package combines a linear allocation model with group-equality
constraints, exact and LP solvers with an enumeration oracle, a seeded
Monte-Carlo scenario engine, and contingency-table statistics for survey
diagnostics.
"""

from .model import (
    Allocation,
    AllocationMode,
    ConstraintSet,
    DegenerateGroupError,
    GroupLabel,
    ModelParams,
    Population,
    UserRecord,
    decision_gains,
    economic_utility,
    eho_gap,
    eo_gap,
    herm_aware_utility,
    hermeneutical_cost,
    is_hermeneutically_fair,
    parity_gap,
    user_hermeneutical_cost,
    user_utility,
)
from .population import (
    RNG_STREAM,
    ClickConfig,
    PopulationSpec,
    UptakeConfig,
    beta_sample,
    population_from_csv,
    population_to_csv,
    sample_population,
    subseed,
)
from .scenarios import (
    AggregateRow,
    AllocationRule,
    ScenarioId,
    ScenarioSpec,
    SweepRecord,
    SweepResult,
    UptakeVariant,
    aggregate,
    builtin_scenario,
    run_sweep,
)
from .solver import (
    NoFeasibleBinaryError,
    PopulationTooLargeError,
    RoundingStrategy,
    SolveMode,
    SolveRequest,
    SolveResult,
    SolveStatus,
    SolverNumericalError,
    round_allocation,
    solve,
    solve_binary_exact,
    solve_constrained_lp,
    solve_unconstrained,
    threshold_rule,
)
from .stats import (
    Chi2Result,
    ContingencyTable,
    WilsonInterval,
    chi2_independence,
    conditional_proportions,
    table_from_csv,
    wilson_interval,
)

__version__ = "0.1.0"
