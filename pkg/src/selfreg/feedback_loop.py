"""Per-goal cybernetic loop: perceive, compare, track discrepancy velocity.

Everything here is pure value-in/value-out; the harness owns one LoopState
per goal and replaces it each tick.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import EngineInvariantError, UnobservableGoalError
from .goal_model import AVOIDANCE, EngineParams, GoalNode

Observation = Mapping[str, float]


@dataclass(frozen=True)
class LoopState:
    goal_id: str
    current: float = 0.0  # last perceived channel value
    discrepancy: float = 0.0  # nonnegative mismatch vs reference
    velocity: float = 0.0  # positive while the discrepancy shrinks
    history: tuple[tuple[int, float], ...] = ()  # (tick, discrepancy), len <= window


def perceive(observation: Observation, goal: GoalNode) -> float:
    """Read the goal's channel out of an observation."""
    try:
        return float(observation[goal.id])
    except KeyError:
        raise UnobservableGoalError(f"unobservable goal '{goal.id}'") from None


def compare(current: float, goal: GoalNode) -> float:
    """Discrepancy between the perceived state and the goal's reference.

    Approach goals want current >= reference; avoidance goals want the
    distance from the avoided state to stay above the safety margin, so
    discrepancy is the shortfall of that distance. Clamped at zero:
    overshoot produces no corrective drive.
    """
    if goal.polarity == AVOIDANCE:
        return max(0.0, goal.avoidance_margin - abs(current - goal.reference))
    return max(0.0, goal.reference - current)


def update_loop(
    state: LoopState,
    observation: Observation,
    goal: GoalNode,
    tick: int,
    params: EngineParams,
) -> LoopState:
    """Advance the loop one tick: re-perceive, re-compare, update velocity.

    Velocity is the discrepancy drop per tick across the ends of the
    bounded history window; zero until two samples exist.
    """
    if state.history and tick <= state.history[-1][0]:
        raise EngineInvariantError(
            f"loop '{goal.id}': tick {tick} not after {state.history[-1][0]}"
        )
    current = perceive(observation, goal)
    d = compare(current, goal)
    history = (state.history + ((tick, d),))[-params.window:]
    if len(history) >= 2:
        (t0, d0), (t1, d1) = history[0], history[-1]
        velocity = (d0 - d1) / (t1 - t0)
    else:
        velocity = 0.0
    return LoopState(
        goal_id=state.goal_id,
        current=current,
        discrepancy=d,
        velocity=velocity,
        history=history,
    )
