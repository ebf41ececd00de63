"""Progress meta-monitoring: velocity becomes signed affect per goal.

Valence tracks how actual progress compares to an adaptive expected rate.
Because the expected rate recalibrates toward whatever is chronic, affect
settles back to neutral under any constant condition; only changes in
progress move it durably. Valence feeds back into arbitration as a
priority multiplier, and small intrinsic pulses bridge the gap while
delayed effects are still in flight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .feedback_loop import LoopState
from .goal_model import EngineParams, GoalHierarchy, GoalNode

PRIORITY_FLOOR = 0.1
VALENCE_LIMIT = 1.0 - 1e-9  # valence is confined to the open interval (-1, 1)


@dataclass(frozen=True)
class ProgressCriteria:
    """Adaptive reference a goal's progress is judged against."""

    goal_id: str
    v_ref: float = 0.0  # expected progress rate, EMA of observed velocity
    deadzone: float = 0.0  # effective neutral band half-width
    novelty: float = 0.0  # in [0, 1]; loosens the criterion when high


@dataclass(frozen=True)
class AffectSignal:
    goal_id: str
    valence: float = 0.0  # in (-1, 1)
    arousal: float = 0.0  # >= 0
    tick: int = -1


def _effective_deadzone(novelty: float, params: EngineParams) -> float:
    return params.deadzone * (1.0 + params.novelty_widen * novelty)


def fresh_criteria(goal_id: str, params: EngineParams) -> ProgressCriteria:
    return ProgressCriteria(goal_id=goal_id, deadzone=_effective_deadzone(0.0, params))


def affect_update(
    loop: LoopState,
    crit: ProgressCriteria,
    goal: GoalNode,
    prev: AffectSignal,
    params: EngineParams,
    tick: int,
) -> AffectSignal:
    """One tick of the valence dynamics.

    The raw error is observed velocity minus the expected rate; inside the
    deadzone the target is neutral, outside it saturates through tanh.
    Valence relaxes toward the target with the goal's own time constant,
    so root-need affect outlasts leaf affect after the same impulse.
    """
    e = loop.velocity - crit.v_ref
    target = 0.0 if abs(e) <= crit.deadzone else math.tanh(params.k_affect * e)
    valence = prev.valence + (target - prev.valence) / goal.affect_decay
    valence = max(-VALENCE_LIMIT, min(VALENCE_LIMIT, valence))
    return AffectSignal(
        goal_id=goal.id, valence=valence, arousal=abs(target), tick=tick
    )


def recalibrate(
    crit: ProgressCriteria,
    observed_velocity: float,
    params: EngineParams,
    novelty_reset: bool = False,
) -> ProgressCriteria:
    """Move the expected rate toward what is actually happening.

    Novelty jumps to 1 when a never-before-selected means was executed
    this tick and otherwise decays geometrically; the deadzone widens
    with it so unfamiliar situations are judged more leniently.
    """
    v_ref = crit.v_ref + params.eta * (observed_velocity - crit.v_ref)
    novelty = 1.0 if novelty_reset else crit.novelty * params.novelty_decay
    return ProgressCriteria(
        goal_id=crit.goal_id,
        v_ref=v_ref,
        deadzone=_effective_deadzone(novelty, params),
        novelty=novelty,
    )


def intrinsic_pulse(
    progress_events: Iterable[str],
    hierarchy: GoalHierarchy,
    params: EngineParams,
) -> dict[str, float]:
    """Micro-reward for every goal whose discrepancy just shrank.

    Each progressing goal gets the full pulse and every ancestor gets an
    attenuated share, summed over all pulses that reach it.
    """
    increments: dict[str, float] = {}
    for gid in sorted(set(progress_events)):
        for hops, ancestor in enumerate(hierarchy.lineage(gid)):
            inc = params.pulse_gain * params.pulse_attenuation ** hops
            increments[ancestor] = increments.get(ancestor, 0.0) + inc
    return increments


def apply_pulses(
    affects: Mapping[str, AffectSignal], increments: Mapping[str, float]
) -> dict[str, AffectSignal]:
    """Add pulse increments to valences, staying inside (-1, 1)."""
    out = dict(affects)
    for gid, inc in increments.items():
        sig = out[gid]
        valence = max(-VALENCE_LIMIT, min(VALENCE_LIMIT, sig.valence + inc))
        out[gid] = replace(sig, valence=valence)
    return out


def priority_mult(affect: AffectSignal, params: EngineParams) -> float:
    """Positive multiplier on a goal's effective value, floored at 0.1."""
    return max(PRIORITY_FLOOR, 1.0 + params.beta_priority * affect.valence)
