"""Motivation and action selection.

Each means gets a utility per goal it serves, combining learned success
expectancy, effective value (base value x importance x affect priority),
its contribution to the goal, the goal's normalized discrepancy, and a
delay discount. Loss-framed outcomes weigh in with the loss multiplier
and a negative sign, so risky means deter themselves.

Per-goal utilities add up across served goals (multifinality), the table
is pruned to a shortlist, and a deterministic selection rule decides
between continuing the current pursuit, switching, or idling:

* competitors are suppressed multiplicatively by the shield strength and
  must additionally clear a hysteresis margin to displace the incumbent;
* once the shield has collapsed to the critical floor the switch is
  forced to the best unshielded alternative, whatever the incumbent's
  utility;
* a pursuit dissolves on its own when its means becomes blocked,
  unaffordable, or useless (utility <= 0), after which candidates compete
  unshielded, since there is nothing left to protect.

Blocked goals route around obstacles through the per-goal alternatives
search (equifinality); a goal with no alternative worth at least its
drop-resistance threshold is deactivated for a cooldown.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .errors import SelfRegError
from .feedback_loop import LoopState
from .goal_model import AVOIDANCE, EngineParams, GoalNode, drop_resistance
from .regulation_dynamics import ShieldFatigueState, effective_sigma

CONTINUE = "continue"
SWITCH = "switch"
IDLE = "idle"

REASON_SHIELDED_INFERIOR = "shielded-inferior"
REASON_HYSTERESIS = "hysteresis"
REASON_FORCED_SWITCH = "forced-switch"
REASON_NO_VIABLE_MEANS = "no-viable-means"


@dataclass(frozen=True)
class Means:
    """An executable action bound to the goals it serves."""

    id: str
    serves: Mapping[str, float]  # goal id -> contribution in (0, 1]
    delay: float = 0.0  # ticks until effects land
    cost: float = 0.0  # resource units per execution
    blocked: bool = False
    expectancy: Mapping[str, float] = field(default_factory=dict)  # goal id -> E
    loss_framed: frozenset[str] = frozenset()  # goals with declared negative payoff

    def check(self) -> list[str]:
        errs = []
        if not self.serves:
            errs.append(f"means '{self.id}': serves is empty")
        for gid, c in self.serves.items():
            if not 0 < c <= 1:
                errs.append(f"means '{self.id}': contribution for '{gid}' outside (0, 1]")
        for gid, e in self.expectancy.items():
            if not 0 <= e <= 1:
                errs.append(f"means '{self.id}': expectancy for '{gid}' outside [0, 1]")
        if self.delay < 0:
            errs.append(f"means '{self.id}': negative delay")
        if self.cost < 0:
            errs.append(f"means '{self.id}': negative cost")
        return errs


@dataclass(frozen=True)
class MotivationTable:
    """Per-(means, goal) utilities and per-means aggregates for one tick."""

    utilities: Mapping[tuple[str, str], float]
    aggregate: Mapping[str, float]
    tick: int

    def total(self, means_id: str) -> float:
        return self.aggregate.get(means_id, 0.0)


@dataclass(frozen=True)
class Selection:
    kind: str  # CONTINUE | SWITCH | IDLE
    means_id: str | None  # the means to execute this tick; None iff idle
    reason: str


def motivation_utility(
    goal: GoalNode,
    loop: LoopState,
    means: Means,
    affect_mult: float,
    params: EngineParams,
    base_value: float | None = None,
) -> float:
    """Motivational pull of one means toward one goal.

    ``base_value`` overrides the node's static value when the scenario
    has rescaled it mid-episode. A loss frame flips the sign and scales
    magnitude by the loss multiplier: a means that would shrink an
    avoidance goal's safety margin, or that the scenario declares a
    negative payoff for, repels instead of attracts.
    """
    if goal.id not in means.serves:
        raise SelfRegError(f"means '{means.id}' does not serve goal '{goal.id}'")
    expectancy = means.expectancy.get(goal.id, 0.0)
    value = goal.base_value if base_value is None else base_value
    v_eff = value * goal.importance * affect_mult
    d_norm = loop.discrepancy / max(abs(goal.reference), 1.0)
    u = (expectancy * v_eff * means.serves[goal.id] * d_norm) / (
        1.0 + params.gamma * means.delay
    )
    loss = goal.id in means.loss_framed or (
        goal.polarity == AVOIDANCE and loop.current < goal.reference
    )
    if loss:
        u = -params.lambda_loss * u
    return u


def aggregate(
    means: Means,
    goals: Mapping[str, GoalNode],
    loops: Mapping[str, LoopState],
    affect_mults: Mapping[str, float],
    params: EngineParams,
    value_overrides: Mapping[str, float] | None = None,
    active: frozenset[str] | None = None,
) -> dict[tuple[str, str], float]:
    """Utility rows for one means; goals outside ``active`` contribute nothing."""
    rows: dict[tuple[str, str], float] = {}
    for gid in sorted(means.serves):
        if active is not None and gid not in active:
            continue
        if means.blocked:
            rows[(means.id, gid)] = 0.0
            continue
        override = value_overrides.get(gid) if value_overrides else None
        rows[(means.id, gid)] = motivation_utility(
            goals[gid], loops[gid], means, affect_mults.get(gid, 1.0), params,
            base_value=override,
        )
    return rows


def build_table(
    means_map: Mapping[str, Means],
    goals: Mapping[str, GoalNode],
    loops: Mapping[str, LoopState],
    affect_mults: Mapping[str, float],
    params: EngineParams,
    tick: int,
    value_overrides: Mapping[str, float] | None = None,
    active: frozenset[str] | None = None,
) -> MotivationTable:
    utilities: dict[tuple[str, str], float] = {}
    totals: dict[str, float] = {}
    for mid in sorted(means_map):
        rows = aggregate(
            means_map[mid], goals, loops, affect_mults, params,
            value_overrides=value_overrides, active=active,
        )
        utilities.update(rows)
        totals[mid] = sum(rows.values()) if not means_map[mid].blocked else 0.0
    return MotivationTable(utilities=utilities, aggregate=totals, tick=tick)


def prune(table: MotivationTable, params: EngineParams) -> list[str]:
    """Top prune_k positive-utility means, best first, ids break ties."""
    ranked = sorted(
        (mid for mid, u in table.aggregate.items() if u > 0),
        key=lambda mid: (-table.aggregate[mid], mid),
    )
    return ranked[: params.prune_k]


def _viable(means: Means, table: MotivationTable, resource: float) -> bool:
    return (not means.blocked) and means.cost <= resource and table.total(means.id) > 0


def select(
    shortlist: Iterable[str],
    table: MotivationTable,
    means_map: Mapping[str, Means],
    current_id: str | None,
    shield: ShieldFatigueState,
    resource: float,
    params: EngineParams,
) -> Selection:
    """Decide what to execute this tick. Fully deterministic."""
    sigma = effective_sigma(shield, params)

    if current_id is not None and not _viable(means_map[current_id], table, resource):
        current_id = None  # pursuit dissolves; nothing left to shield

    candidates = [
        mid
        for mid in shortlist
        if mid != current_id and _viable(means_map[mid], table, resource)
    ]

    if current_id is None:
        if not candidates:
            return Selection(IDLE, None, REASON_NO_VIABLE_MEANS)
        best = min(candidates, key=lambda m: (-table.total(m), m))
        if table.total(best) > params.hysteresis:
            return Selection(SWITCH, best, REASON_SHIELDED_INFERIOR)
        return Selection(IDLE, None, REASON_HYSTERESIS)

    u_star = table.total(current_id)
    if sigma <= params.sigma_crit:
        # Shield collapse exposes every viable alternative, shortlisted or not.
        fallback = [
            mid
            for mid in sorted(means_map)
            if mid != current_id and _viable(means_map[mid], table, resource)
        ]
        if fallback:
            best = min(fallback, key=lambda m: (-table.total(m), m))
            return Selection(SWITCH, best, REASON_FORCED_SWITCH)
        return Selection(CONTINUE, current_id, REASON_NO_VIABLE_MEANS)

    if not candidates:
        return Selection(CONTINUE, current_id, REASON_NO_VIABLE_MEANS)
    best = min(candidates, key=lambda m: (-table.total(m) * (1.0 - sigma), m))
    shielded = table.total(best) * (1.0 - sigma)
    if shielded > u_star + params.hysteresis:
        return Selection(SWITCH, best, REASON_SHIELDED_INFERIOR)
    if shielded > u_star:
        return Selection(CONTINUE, current_id, REASON_HYSTERESIS)
    return Selection(CONTINUE, current_id, REASON_SHIELDED_INFERIOR)


def suppressed_count(
    table: MotivationTable,
    means_map: Mapping[str, Means],
    pursued_id: str | None,
    resource: float,
) -> int:
    """Viable alternatives held below the bar while ``pursued_id`` runs."""
    if pursued_id is None:
        return 0
    return sum(
        1
        for mid in means_map
        if mid != pursued_id and _viable(means_map[mid], table, resource)
    )


def update_expectancy(
    means: Means, goal_id: str, success: bool, params: EngineParams
) -> Means:
    """EMA step of the learned success probability for one served goal."""
    if goal_id not in means.serves:
        raise SelfRegError(f"means '{means.id}' does not serve goal '{goal_id}'")
    old = means.expectancy.get(goal_id, 0.0)
    new = (1.0 - params.ema_alpha) * old + params.ema_alpha * (1.0 if success else 0.0)
    expectancy = dict(means.expectancy)
    expectancy[goal_id] = new
    return replace(means, expectancy=expectancy)


def equifinal_alternatives(
    goal_id: str, means_map: Mapping[str, Means], table: MotivationTable
) -> list[str]:
    """Unblocked means serving the goal, best aggregate utility first."""
    serving = [
        mid
        for mid in means_map
        if goal_id in means_map[mid].serves and not means_map[mid].blocked
    ]
    return sorted(serving, key=lambda m: (-table.total(m), m))


def abandonment_check(
    goal: GoalNode,
    alternatives: list[str],
    table: MotivationTable,
    params: EngineParams,
) -> bool:
    """True iff the goal should be deactivated for a cooldown."""
    if not alternatives:
        return True
    best = max(table.total(mid) for mid in alternatives)
    return best < drop_resistance(goal, params)
