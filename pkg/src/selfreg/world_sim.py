"""The scriptable needs-world.

Discrete time, one scalar reservoir per goal channel, a single resource
pool, stochastic action outcomes with latent per-goal success rates, a
delay queue for effects in flight, and a scripted event timeline
(block/unblock means, reward pulses, value changes, resource top-ups).
Every random draw goes through one seeded generator in a fixed order, so
a (scenario, seed) pair fully determines the trajectory.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

from .arbitration import Means
from .errors import (
    EngineInvariantError,
    ScenarioParseError,
    ScenarioValidationError,
)
from .goal_model import EngineParams, GoalHierarchy, load_hierarchy

EVENT_BLOCK = "block"
EVENT_UNBLOCK = "unblock"
EVENT_REWARD = "reward"
EVENT_SET_VALUE = "set_value"
EVENT_ADD_RESOURCE = "add_resource"
EVENT_TYPES = (EVENT_BLOCK, EVENT_UNBLOCK, EVENT_REWARD, EVENT_SET_VALUE, EVENT_ADD_RESOURCE)


@dataclass(frozen=True)
class ScenarioEvent:
    tick: int
    type: str
    means: str | None = None  # block / unblock
    goal: str | None = None  # set_value
    value: float | None = None  # set_value
    salience: float | None = None  # reward
    amount: float | None = None  # add_resource

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {"tick": self.tick, "type": self.type}
        for key in ("means", "goal", "value", "salience", "amount"):
            val = getattr(self, key)
            if val is not None:
                rec[key] = val
        return rec


@dataclass(frozen=True)
class WorldConfig:
    """Scenario knobs that belong to the world rather than the engine."""

    reservoirs: Mapping[str, float]  # explicit initial levels by goal id
    default_reservoir: float = 0.0
    resource: float = 0.0
    resource_regen: float = 0.0
    cap: float = 10.0  # reservoir upper bound
    base_step: float = 1.0  # effect size of one successful contribution unit
    observe: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)

    def initial_level(self, gid: str) -> float:
        return float(self.reservoirs.get(gid, self.default_reservoir))


@dataclass(frozen=True)
class Scenario:
    hierarchy: GoalHierarchy
    means: Mapping[str, Means]  # episode template; copied before mutation
    p_true: Mapping[str, Mapping[str, float]]  # latent success rate per (means, goal)
    drains: Mapping[str, float]
    events: tuple[ScenarioEvent, ...]
    horizon: int
    params: EngineParams
    config: WorldConfig

    def events_at(self, tick: int) -> list[ScenarioEvent]:
        return [ev for ev in self.events if ev.tick == tick]


@dataclass
class WorldState:
    tick: int
    reservoirs: dict[str, float]
    resource: float
    pending_effects: list[tuple[float, int, str, float]]  # (land_tick, seq, goal, delta)
    rng: random.Random
    next_seq: int = 0


@dataclass(frozen=True)
class Outcome:
    """Success/failure per served goal for one execution of a means."""

    means_id: str
    tick: int
    results: Mapping[str, bool]


def init_world(scenario: Scenario, seed: int) -> WorldState:
    reservoirs = {
        gid: scenario.config.initial_level(gid) for gid in scenario.hierarchy
    }
    return WorldState(
        tick=0,
        reservoirs=reservoirs,
        resource=float(scenario.config.resource),
        pending_effects=[],
        rng=random.Random(seed),
    )


def apply_action(world: WorldState, means: Means, scenario: Scenario) -> Outcome:
    """Execute a means: spend resource, roll each served goal, queue effects.

    One rng draw per served goal in ascending goal-id order keeps traces
    reproducible. Successful effects land ``delay`` ticks later.
    """
    if means.blocked:
        raise EngineInvariantError(f"executed blocked means '{means.id}'")
    if means.cost > world.resource:
        raise EngineInvariantError(
            f"means '{means.id}' costs {means.cost} with only {world.resource} available"
        )
    world.resource -= means.cost
    rates = scenario.p_true.get(means.id, {})
    results: dict[str, bool] = {}
    for gid in sorted(means.serves):
        success = world.rng.random() < rates.get(gid, 1.0)
        results[gid] = success
        if success:
            delta = means.serves[gid] * scenario.config.base_step
            heapq.heappush(
                world.pending_effects,
                (world.tick + means.delay, world.next_seq, gid, delta),
            )
            world.next_seq += 1
    return Outcome(means_id=means.id, tick=world.tick, results=results)


def tick(world: WorldState, scenario: Scenario) -> list[ScenarioEvent]:
    """Advance one tick: drains, regen, land due effects, surface events.

    Returns the events scripted for the new tick, in listed order. World-
    local ones (add_resource) are applied here; the caller dispatches the
    rest, since blocking and rewards live in engine state.
    """
    world.tick += 1
    for gid in sorted(scenario.drains):
        world.reservoirs[gid] = max(0.0, world.reservoirs[gid] - scenario.drains[gid])
    world.resource += scenario.config.resource_regen
    while world.pending_effects and world.pending_effects[0][0] <= world.tick:
        _, _, gid, delta = heapq.heappop(world.pending_effects)
        world.reservoirs[gid] = min(scenario.config.cap, world.reservoirs[gid] + delta)
    fired = scenario.events_at(world.tick)
    for ev in fired:
        if ev.type == EVENT_ADD_RESOURCE:
            world.resource += float(ev.amount)
    return fired


def observe(world: WorldState, hierarchy: GoalHierarchy, config: WorldConfig) -> dict[str, float]:
    """One channel per goal id.

    Roots expose their reservoir directly. Non-root channels are derived:
    by default the root's reservoir scaled by a configured factor, or the
    goal's own reservoir when the scenario sets ``source: self``.
    """
    obs: dict[str, float] = {}
    for gid in hierarchy:
        node = hierarchy.node(gid)
        if node.parent_id is None:
            obs[gid] = world.reservoirs[gid]
            continue
        cfg = config.observe.get(gid, {})
        if cfg.get("source") == "self":
            obs[gid] = world.reservoirs[gid]
        else:
            factor = float(cfg.get("factor", 1.0))
            obs[gid] = world.reservoirs[hierarchy.root_of(gid)] * factor
    return obs


def world_fingerprint(world: WorldState) -> str:
    """Canonical serialization of the full world state, rng included."""
    state = {
        "tick": world.tick,
        "reservoirs": {k: world.reservoirs[k] for k in sorted(world.reservoirs)},
        "resource": world.resource,
        "pending": sorted(world.pending_effects),
        "rng": repr(world.rng.getstate()),
        "next_seq": world.next_seq,
    }
    return json.dumps(state, sort_keys=True)


# ---------------------------------------------------------------------------
# Scenario document handling
# ---------------------------------------------------------------------------

_INITIAL_KEYS = {
    "reservoirs", "default_reservoir", "resource", "resource_regen",
    "cap", "base_step", "observe",
}


def _validate_means_records(records: Any, hierarchy: GoalHierarchy | None) -> list[str]:
    errs: list[str] = []
    if not isinstance(records, list):
        return ["'means' must be a list"]
    seen: set[str] = set()
    for rec in records:
        if not isinstance(rec, Mapping) or "id" not in rec:
            errs.append("means record without an 'id'")
            continue
        mid = str(rec["id"])
        if mid in seen:
            errs.append(f"duplicate means id '{mid}'")
        seen.add(mid)
        serves = rec.get("serves")
        if not isinstance(serves, Mapping) or not serves:
            errs.append(f"means '{mid}': serves must be a nonempty mapping")
            serves = {}
        for gid, c in serves.items():
            if hierarchy is not None and gid not in hierarchy:
                errs.append(f"means '{mid}': serves unknown goal '{gid}'")
            try:
                if not 0 < float(c) <= 1:
                    errs.append(f"means '{mid}': contribution for '{gid}' outside (0, 1]")
            except (TypeError, ValueError):
                errs.append(f"means '{mid}': contribution for '{gid}' not a number")
        for key, lo, hi in (("expectancy", 0.0, 1.0), ("p_true", 0.0, 1.0)):
            table = rec.get(key, {})
            if not isinstance(table, Mapping):
                errs.append(f"means '{mid}': {key} must be a mapping")
                continue
            for gid, v in table.items():
                if gid not in serves:
                    errs.append(f"means '{mid}': {key} for unserved goal '{gid}'")
                try:
                    if not lo <= float(v) <= hi:
                        errs.append(f"means '{mid}': {key} for '{gid}' outside [0, 1]")
                except (TypeError, ValueError):
                    errs.append(f"means '{mid}': {key} for '{gid}' not a number")
        for gid in rec.get("loss", []):
            if gid not in serves:
                errs.append(f"means '{mid}': loss frame for unserved goal '{gid}'")
        if float(rec.get("delay", 0.0)) < 0:
            errs.append(f"means '{mid}': negative delay")
        if float(rec.get("cost", 0.0)) < 0:
            errs.append(f"means '{mid}': negative cost")
    return errs


def _validate_events(records: Any, horizon: int, hierarchy: GoalHierarchy | None,
                     means_ids: set[str]) -> list[str]:
    errs: list[str] = []
    if not isinstance(records, list):
        return ["'events' must be a list"]
    for i, rec in enumerate(records):
        if not isinstance(rec, Mapping):
            errs.append(f"event #{i}: not a mapping")
            continue
        etype = rec.get("type")
        label = f"event #{i} ({etype})"
        if etype not in EVENT_TYPES:
            errs.append(f"event #{i}: unknown type '{etype}'")
            continue
        tick_ = rec.get("tick")
        if not isinstance(tick_, int) or not 0 <= tick_ <= horizon:
            errs.append(f"{label}: tick must be an integer in [0, {horizon}]")
        if etype in (EVENT_BLOCK, EVENT_UNBLOCK):
            if rec.get("means") not in means_ids:
                errs.append(f"{label}: unknown means '{rec.get('means')}'")
        elif etype == EVENT_REWARD:
            if float(rec.get("salience", -1.0)) < 0:
                errs.append(f"{label}: salience must be >= 0")
        elif etype == EVENT_SET_VALUE:
            if hierarchy is not None and rec.get("goal") not in hierarchy:
                errs.append(f"{label}: unknown goal '{rec.get('goal')}'")
            if float(rec.get("value", 0.0)) <= 0:
                errs.append(f"{label}: value must be > 0")
        elif etype == EVENT_ADD_RESOURCE:
            if float(rec.get("amount", -1.0)) < 0:
                errs.append(f"{label}: amount must be >= 0")
    return errs


def _validate_initial(rec: Any, hierarchy: GoalHierarchy | None) -> list[str]:
    errs: list[str] = []
    if rec is None:
        return errs
    if not isinstance(rec, Mapping):
        return ["'initial' must be a mapping"]
    for key in rec:
        if key not in _INITIAL_KEYS:
            errs.append(f"initial: unknown key '{key}'")
    cap = float(rec.get("cap", 10.0))
    if cap <= 0:
        errs.append("initial: cap must be > 0")
    if float(rec.get("base_step", 1.0)) <= 0:
        errs.append("initial: base_step must be > 0")
    if float(rec.get("resource", 0.0)) < 0:
        errs.append("initial: resource must be >= 0")
    if float(rec.get("resource_regen", 0.0)) < 0:
        errs.append("initial: resource_regen must be >= 0")
    default_res = float(rec.get("default_reservoir", 0.0))
    if not 0 <= default_res <= cap:
        errs.append("initial: default_reservoir outside [0, cap]")
    reservoirs = rec.get("reservoirs", {})
    if not isinstance(reservoirs, Mapping):
        errs.append("initial: reservoirs must be a mapping")
        reservoirs = {}
    for gid, v in reservoirs.items():
        if hierarchy is not None and gid not in hierarchy:
            errs.append(f"initial: reservoir for unknown goal '{gid}'")
        try:
            if not 0 <= float(v) <= cap:
                errs.append(f"initial: reservoir for '{gid}' outside [0, cap]")
        except (TypeError, ValueError):
            errs.append(f"initial: reservoir for '{gid}' not a number")
    observe_cfg = rec.get("observe", {})
    if not isinstance(observe_cfg, Mapping):
        errs.append("initial: observe must be a mapping")
        observe_cfg = {}
    for gid, cfg in observe_cfg.items():
        if hierarchy is not None:
            if gid not in hierarchy:
                errs.append(f"initial: observe config for unknown goal '{gid}'")
            elif hierarchy.node(gid).parent_id is None:
                errs.append(f"initial: observe config for root goal '{gid}'")
        if not isinstance(cfg, Mapping):
            errs.append(f"initial: observe config for '{gid}' must be a mapping")
            continue
        if cfg.get("source", "root") not in ("root", "self"):
            errs.append(f"initial: observe source for '{gid}' must be 'root' or 'self'")
    return errs


def validate_document(document: Any) -> list[str]:
    """Every invariant violation in the scenario document, without running."""
    if not isinstance(document, Mapping):
        return ["scenario document must be a mapping"]
    errs: list[str] = []

    horizon = document.get("horizon")
    if not isinstance(horizon, int) or horizon < 1:
        errs.append("'horizon' must be a positive integer")
        horizon = 0

    hierarchy: GoalHierarchy | None = None
    try:
        hierarchy = load_hierarchy(document)
    except ScenarioValidationError as exc:
        errs.extend(exc.violations)

    try:
        EngineParams.from_overrides(document.get("params"))
    except ScenarioValidationError as exc:
        errs.extend(exc.violations)

    means_records = document.get("means", [])
    errs.extend(_validate_means_records(means_records, hierarchy))
    means_ids = {
        str(r["id"])
        for r in means_records
        if isinstance(r, Mapping) and "id" in r
    } if isinstance(means_records, list) else set()

    drains = document.get("drains", {})
    if not isinstance(drains, Mapping):
        errs.append("'drains' must be a mapping")
    else:
        for gid, rate in drains.items():
            if hierarchy is not None and gid not in hierarchy:
                errs.append(f"drain for unknown goal '{gid}'")
            try:
                if float(rate) < 0:
                    errs.append(f"drain for '{gid}' must be >= 0")
            except (TypeError, ValueError):
                errs.append(f"drain for '{gid}' not a number")

    errs.extend(_validate_events(document.get("events", []), horizon, hierarchy, means_ids))
    errs.extend(_validate_initial(document.get("initial"), hierarchy))
    return errs


def parse_scenario(document: Any) -> Scenario:
    """Validate a document and build the Scenario, or raise with all violations."""
    errs = validate_document(document)
    if errs:
        raise ScenarioValidationError(errs)

    hierarchy = load_hierarchy(document)
    params = EngineParams.from_overrides(document.get("params"))

    means: dict[str, Means] = {}
    p_true: dict[str, dict[str, float]] = {}
    for rec in document.get("means", []):
        mid = str(rec["id"])
        serves = {str(g): float(c) for g, c in rec["serves"].items()}
        expectancy = {g: 0.5 for g in serves}
        expectancy.update(
            {str(g): float(e) for g, e in rec.get("expectancy", {}).items()}
        )
        means[mid] = Means(
            id=mid,
            serves=serves,
            delay=float(rec.get("delay", 0.0)),
            cost=float(rec.get("cost", 0.0)),
            blocked=bool(rec.get("blocked", False)),
            expectancy=expectancy,
            loss_framed=frozenset(str(g) for g in rec.get("loss", [])),
        )
        p_true[mid] = {g: 1.0 for g in serves}
        p_true[mid].update(
            {str(g): float(p) for g, p in rec.get("p_true", {}).items()}
        )

    events = tuple(
        ScenarioEvent(
            tick=int(rec["tick"]),
            type=str(rec["type"]),
            means=rec.get("means"),
            goal=rec.get("goal"),
            value=float(rec["value"]) if "value" in rec else None,
            salience=float(rec["salience"]) if "salience" in rec else None,
            amount=float(rec["amount"]) if "amount" in rec else None,
        )
        for rec in document.get("events", [])
    )

    init = document.get("initial") or {}
    config = WorldConfig(
        reservoirs={str(g): float(v) for g, v in init.get("reservoirs", {}).items()},
        default_reservoir=float(init.get("default_reservoir", 0.0)),
        resource=float(init.get("resource", 0.0)),
        resource_regen=float(init.get("resource_regen", 0.0)),
        cap=float(init.get("cap", 10.0)),
        base_step=float(init.get("base_step", 1.0)),
        observe={
            str(g): dict(cfg) for g, cfg in init.get("observe", {}).items()
        },
    )

    return Scenario(
        hierarchy=hierarchy,
        means=means,
        p_true=p_true,
        drains={str(g): float(r) for g, r in document.get("drains", {}).items()},
        events=events,
        horizon=int(document["horizon"]),
        params=params,
        config=config,
    )


def serialize_scenario(scenario: Scenario) -> dict[str, Any]:
    """Document form of a scenario; parse(serialize(s)) reproduces s."""
    means_records = []
    for mid in sorted(scenario.means):
        m = scenario.means[mid]
        rec: dict[str, Any] = {
            "id": m.id,
            "serves": {g: m.serves[g] for g in sorted(m.serves)},
            "delay": m.delay,
            "cost": m.cost,
            "blocked": m.blocked,
            "expectancy": {g: m.expectancy[g] for g in sorted(m.expectancy)},
            "p_true": {
                g: scenario.p_true[mid][g] for g in sorted(scenario.p_true[mid])
            },
        }
        if m.loss_framed:
            rec["loss"] = sorted(m.loss_framed)
        means_records.append(rec)

    return {
        "horizon": scenario.horizon,
        "params": asdict(scenario.params),
        "goals": scenario.hierarchy.serialize(),
        "means": means_records,
        "drains": {g: scenario.drains[g] for g in sorted(scenario.drains)},
        "events": [ev.to_record() for ev in scenario.events],
        "initial": {
            "reservoirs": {
                g: scenario.config.reservoirs[g]
                for g in sorted(scenario.config.reservoirs)
            },
            "default_reservoir": scenario.config.default_reservoir,
            "resource": scenario.config.resource,
            "resource_regen": scenario.config.resource_regen,
            "cap": scenario.config.cap,
            "base_step": scenario.config.base_step,
            "observe": {
                g: dict(scenario.config.observe[g])
                for g in sorted(scenario.config.observe)
            },
        },
    }


def load_scenario_file(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"scenario is not valid JSON: {exc}") from exc
    return parse_scenario(document)
