"""Goal shielding and its fatigue.

One global shield suppresses competitors of the pursued means. Holding
competitors down depletes the shield; rest restores it (more slowly).
When effective strength falls to the critical floor the next selection is
forced to switch, which is what keeps any single goal from being pursued
indefinitely. Reward events or very important goals can temporarily prop
the shield up via an override boost.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .goal_model import EngineParams


@dataclass(frozen=True)
class ShieldFatigueState:
    sigma: float  # current strength, in [sigma_min, sigma_max]
    override_boost: float = 0.0
    override_ticks_left: int = 0
    suppressing: bool = False  # was a competitor suppressed last tick


def fresh_shield(params: EngineParams) -> ShieldFatigueState:
    return ShieldFatigueState(sigma=params.sigma_max)


def effective_sigma(state: ShieldFatigueState, params: EngineParams) -> float:
    if state.override_ticks_left > 0:
        return min(params.sigma_max, state.sigma + state.override_boost)
    return state.sigma


def fatigue_step(
    state: ShieldFatigueState, suppressed_load: float, params: EngineParams
) -> ShieldFatigueState:
    """One tick of depletion (load > 0) or recovery (load = 0).

    ``suppressed_load`` is the count of positive-utility competitors held
    back this tick, normalized by prune_k and capped at 1.
    """
    if suppressed_load > 0:
        sigma = max(params.sigma_min, state.sigma - params.delta_dep * suppressed_load)
    else:
        sigma = min(params.sigma_max, state.sigma + params.delta_rec)
    ticks = max(0, state.override_ticks_left - 1)
    boost = state.override_boost if ticks > 0 else 0.0
    return ShieldFatigueState(
        sigma=sigma,
        override_boost=boost,
        override_ticks_left=ticks,
        suppressing=suppressed_load > 0,
    )


def suppression_load(suppressed_count: int, params: EngineParams) -> float:
    return min(1.0, suppressed_count / params.prune_k)


def grant_override(
    state: ShieldFatigueState,
    reward_salience: float,
    importance: float,
    params: EngineParams,
) -> ShieldFatigueState:
    """Prop the shield up for a while after a salient reward.

    Boost is capped at 0.5 so an override can delay, but never fully
    cancel, the forced switch. Zero salience is a no-op.
    """
    boost = min(0.5, reward_salience * importance * params.override_gain)
    if boost <= 0:
        return state
    return replace(
        state, override_boost=boost, override_ticks_left=params.override_ticks
    )
