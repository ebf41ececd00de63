"""Deterministic multi-goal self-regulation engine.

Hierarchical feedback loops over innate needs, utility-based arbitration
with fatigue-limited goal shielding, affect-based progress monitoring,
and a scriptable needs-world to exercise the stability properties: no
single goal monopolizes the agent, blocked goals reroute through
alternative means, and misspecified goal values cannot capture behavior
for long.
"""

from .affect import AffectSignal, ProgressCriteria, affect_update, intrinsic_pulse, priority_mult, recalibrate
from .arbitration import (
    Means,
    MotivationTable,
    Selection,
    abandonment_check,
    aggregate,
    build_table,
    equifinal_alternatives,
    prune,
    select,
    motivation_utility,
    update_expectancy,
)
from .errors import (
    EngineInvariantError,
    ScenarioParseError,
    ScenarioValidationError,
    SelfRegError,
    UnknownGoalError,
    UnobservableGoalError,
)
from .feedback_loop import LoopState, compare, perceive, update_loop
from .goal_model import (
    EngineParams,
    GoalHierarchy,
    GoalNode,
    drop_resistance,
    lineage,
    load_hierarchy,
)
from .harness import (
    Metrics,
    TraceEvent,
    compute_metrics,
    load_trace,
    run_episode,
    sweep,
    validate_scenario,
    write_metrics,
    write_trace,
)
from .regulation_dynamics import (
    ShieldFatigueState,
    effective_sigma,
    fatigue_step,
    grant_override,
)
from .world_sim import (
    Outcome,
    Scenario,
    ScenarioEvent,
    WorldConfig,
    WorldState,
    apply_action,
    init_world,
    load_scenario_file,
    observe,
    parse_scenario,
    serialize_scenario,
    validate_document,
)
from .world_sim import tick as world_tick

__version__ = "0.1.0"
