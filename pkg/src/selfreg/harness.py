"""Episode driver, trace recording, stability metrics, scenario checks.

Pipeline order within a tick (selection always acts on this tick's
freshest discrepancies):

    observe -> update loops -> intrinsic pulses + affect updates
    -> cooldown bookkeeping -> motivation table -> abandonment checks
    -> prune -> fatigue-aware select -> execute -> expectancy updates
    -> fatigue step -> criteria recalibration -> world tick + events
    -> trace event
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Sequence

from . import affect as affect_mod
from . import arbitration as arb
from . import regulation_dynamics as reg
from . import world_sim as ws
from .errors import EngineInvariantError, SelfRegError
from .feedback_loop import LoopState, update_loop
from .goal_model import GoalHierarchy
from .world_sim import Scenario, ScenarioEvent

_EPS = 1e-12


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    selected_means: str | None  # None iff idle this tick
    pursued_root_need: str | None
    sigma: float  # shield strength at end of tick
    override_boost: float
    override_ticks_left: int
    switched: bool
    forced_switch: bool
    abandoned: tuple[str, ...]  # goals deactivated this tick
    resource: float
    roots: Mapping[str, Mapping[str, float]]  # per-root loop/affect snapshot

    def to_record(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "selected_means": self.selected_means,
            "pursued_root_need": self.pursued_root_need,
            "sigma": self.sigma,
            "override_boost": self.override_boost,
            "override_ticks_left": self.override_ticks_left,
            "switched": self.switched,
            "forced_switch": self.forced_switch,
            "abandoned": list(self.abandoned),
            "resource": self.resource,
            "roots": {rid: dict(self.roots[rid]) for rid in sorted(self.roots)},
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "TraceEvent":
        return cls(
            tick=int(rec["tick"]),
            selected_means=rec["selected_means"],
            pursued_root_need=rec["pursued_root_need"],
            sigma=float(rec["sigma"]),
            override_boost=float(rec["override_boost"]),
            override_ticks_left=int(rec["override_ticks_left"]),
            switched=bool(rec["switched"]),
            forced_switch=bool(rec["forced_switch"]),
            abandoned=tuple(rec["abandoned"]),
            resource=float(rec["resource"]),
            roots={rid: dict(v) for rid, v in rec["roots"].items()},
        )


@dataclass(frozen=True)
class Metrics:
    monomania_index: float  # max root share of attributed ticks
    allocation_entropy: float  # normalized Shannon entropy of root shares
    switch_count: int
    forced_switch_count: int
    need_floor: float  # lowest observed root reservoir
    mean_abs_valence: float
    abandonment_count: int
    idle_fraction: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "monomania_index": self.monomania_index,
            "allocation_entropy": self.allocation_entropy,
            "switch_count": self.switch_count,
            "forced_switch_count": self.forced_switch_count,
            "need_floor": self.need_floor,
            "mean_abs_valence": self.mean_abs_valence,
            "abandonment_count": self.abandonment_count,
            "idle_fraction": self.idle_fraction,
        }


def attribution_root(means: arb.Means, hierarchy: GoalHierarchy) -> str:
    """Root need a tick of executing ``means`` is attributed to.

    Highest contribution wins; ties go to the lowest root id, then the
    lowest goal id, for determinism.
    """
    best = min(
        means.serves,
        key=lambda g: (-means.serves[g], hierarchy.root_of(g), g),
    )
    return hierarchy.root_of(best)


class _Episode:
    """Mutable state for one run; everything is derived from (scenario, seed)."""

    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.params = scenario.params
        self.hierarchy = scenario.hierarchy
        self.world = ws.init_world(scenario, seed)
        self.means: dict[str, arb.Means] = dict(scenario.means)
        self.loops: dict[str, LoopState] = {
            gid: LoopState(goal_id=gid) for gid in self.hierarchy
        }
        self.criteria = {
            gid: affect_mod.fresh_criteria(gid, self.params) for gid in self.hierarchy
        }
        self.affects = {gid: affect_mod.AffectSignal(goal_id=gid) for gid in self.hierarchy}
        self.shield = reg.fresh_shield(self.params)
        self.current: str | None = None
        self.cooldowns: dict[str, int] = {}
        self.value_overrides: dict[str, float] = {}
        self.executed: set[str] = set()
        self.importance_bar = self._importance_bar()

    def _importance_bar(self) -> float | None:
        pct = self.params.importance_override_pct
        if pct > 1.0:
            return None
        imps = sorted(self.hierarchy.node(g).importance for g in self.hierarchy)
        return imps[min(len(imps) - 1, int(pct * (len(imps) - 1)))]

    # -- events -------------------------------------------------------------

    def apply_events(self, events: Iterable[ScenarioEvent], at_init: bool = False) -> None:
        for ev in events:
            if ev.type == ws.EVENT_BLOCK:
                self.means[ev.means] = replace(self.means[ev.means], blocked=True)
            elif ev.type == ws.EVENT_UNBLOCK:
                self.means[ev.means] = replace(self.means[ev.means], blocked=False)
            elif ev.type == ws.EVENT_SET_VALUE:
                self.value_overrides[ev.goal] = float(ev.value)
            elif ev.type == ws.EVENT_REWARD:
                if self.current is not None:
                    gid = min(
                        self.means[self.current].serves,
                        key=lambda g: (-self.means[self.current].serves[g], g),
                    )
                    self.shield = reg.grant_override(
                        self.shield,
                        float(ev.salience),
                        self.hierarchy.node(gid).importance,
                        self.params,
                    )
            elif ev.type == ws.EVENT_ADD_RESOURCE and at_init:
                # world_sim.tick applies these itself on later ticks
                self.world.resource += float(ev.amount)

    # -- one tick -------------------------------------------------------------

    def step(self, tick: int) -> TraceEvent:
        params = self.params
        obs = ws.observe(self.world, self.hierarchy, self.scenario.config)

        progressed: set[str] = set()
        for gid in self.hierarchy:
            old = self.loops[gid]
            new = update_loop(old, obs, self.hierarchy.node(gid), tick, params)
            if new.discrepancy < old.discrepancy - _EPS:
                progressed.add(gid)
            self.loops[gid] = new

        pulses = affect_mod.intrinsic_pulse(progressed, self.hierarchy, params)
        self.affects = affect_mod.apply_pulses(self.affects, pulses)
        for gid in self.hierarchy:
            self.affects[gid] = affect_mod.affect_update(
                self.loops[gid],
                self.criteria[gid],
                self.hierarchy.node(gid),
                self.affects[gid],
                params,
                tick,
            )

        for gid in list(self.cooldowns):
            self.cooldowns[gid] -= 1
            if self.cooldowns[gid] <= 0:
                del self.cooldowns[gid]

        active = frozenset(g for g in self.hierarchy if g not in self.cooldowns)
        mults = {
            gid: affect_mod.priority_mult(self.affects[gid], params) for gid in active
        }

        def table_for(active_set: frozenset[str]) -> arb.MotivationTable:
            return arb.build_table(
                self.means,
                {g: self.hierarchy.node(g) for g in self.hierarchy},
                self.loops,
                mults,
                params,
                tick,
                value_overrides=self.value_overrides,
                active=active_set,
            )

        table = table_for(active)

        abandoned: list[str] = []
        for gid in sorted(active):
            if self.loops[gid].discrepancy <= 0:
                continue  # satisfied goals are dormant, not abandoned
            alts = arb.equifinal_alternatives(gid, self.means, table)
            if arb.abandonment_check(self.hierarchy.node(gid), alts, table, params):
                self.cooldowns[gid] = params.cooldown_ticks
                abandoned.append(gid)
        if abandoned:
            active = frozenset(g for g in active if g not in self.cooldowns)
            table = table_for(active)

        shortlist = arb.prune(table, params)
        resource_at_selection = self.world.resource
        selection = arb.select(
            shortlist, table, self.means, self.current,
            self.shield, resource_at_selection, params,
        )
        switched = selection.kind == arb.SWITCH
        forced = selection.reason == arb.REASON_FORCED_SWITCH
        self.current = selection.means_id

        novelty_hits: set[str] = set()
        if selection.means_id is not None:
            mid = selection.means_id
            if mid not in self.executed:
                self.executed.add(mid)
                novelty_hits.update(self.means[mid].serves)
            if switched and self.importance_bar is not None:
                gid = attribution_root(self.means[mid], self.hierarchy)
                if self.hierarchy.node(gid).importance > self.importance_bar:
                    self.shield = reg.grant_override(
                        self.shield, 1.0, self.hierarchy.node(gid).importance, params
                    )
            outcome = ws.apply_action(self.world, self.means[mid], self.scenario)
            for gid in sorted(outcome.results):
                self.means[mid] = arb.update_expectancy(
                    self.means[mid], gid, outcome.results[gid], params
                )

        count = arb.suppressed_count(
            table, self.means, selection.means_id, resource_at_selection
        )
        self.shield = reg.fatigue_step(
            self.shield, reg.suppression_load(count, params), params
        )

        for gid in self.hierarchy:
            self.criteria[gid] = affect_mod.recalibrate(
                self.criteria[gid],
                self.loops[gid].velocity,
                params,
                novelty_reset=gid in novelty_hits,
            )

        self._check_invariants(tick)

        fired = ws.tick(self.world, self.scenario)
        self.apply_events(ev for ev in fired if ev.type != ws.EVENT_ADD_RESOURCE)

        roots_snapshot = {
            rid: {
                "discrepancy": self.loops[rid].discrepancy,
                "velocity": self.loops[rid].velocity,
                "valence": self.affects[rid].valence,
                "reservoir": obs[rid],
            }
            for rid in self.hierarchy.roots
        }
        pursued_root = (
            attribution_root(self.means[selection.means_id], self.hierarchy)
            if selection.means_id is not None
            else None
        )
        return TraceEvent(
            tick=tick,
            selected_means=selection.means_id,
            pursued_root_need=pursued_root,
            sigma=self.shield.sigma,
            override_boost=self.shield.override_boost,
            override_ticks_left=self.shield.override_ticks_left,
            switched=switched,
            forced_switch=forced,
            abandoned=tuple(abandoned),
            resource=self.world.resource,
            roots=roots_snapshot,
        )

    def _check_invariants(self, tick: int) -> None:
        p = self.params
        if not p.sigma_min - _EPS <= self.shield.sigma <= p.sigma_max + _EPS:
            raise EngineInvariantError(f"tick {tick}: sigma out of bounds")
        cap = self.scenario.config.cap
        for gid, level in self.world.reservoirs.items():
            if not -_EPS <= level <= cap + _EPS:
                raise EngineInvariantError(f"tick {tick}: reservoir '{gid}' out of bounds")
        for gid, sig in self.affects.items():
            if not -1.0 < sig.valence < 1.0:
                raise EngineInvariantError(f"tick {tick}: valence '{gid}' out of bounds")
        if self.world.resource < -_EPS:
            raise EngineInvariantError(f"tick {tick}: negative resource")


def run_episode(
    scenario: Scenario, seed: int, steps: int | None = None
) -> list[TraceEvent]:
    """Run one deterministic episode and return its trace."""
    episode = _Episode(scenario, seed)
    episode.apply_events(scenario.events_at(0), at_init=True)
    horizon = scenario.horizon if steps is None else int(steps)
    return [episode.step(t) for t in range(horizon)]


def compute_metrics(trace: Sequence[TraceEvent]) -> Metrics:
    """Stability measurements over a finished trace."""
    if not trace:
        raise SelfRegError("cannot compute metrics for an empty trace")
    root_ids = sorted(trace[0].roots)
    attributed: dict[str, int] = {rid: 0 for rid in root_ids}
    idle = 0
    switches = 0
    forced = 0
    abandonments = 0
    floor = math.inf
    valence_sum = 0.0
    for ev in trace:
        if ev.pursued_root_need is None:
            idle += 1
        else:
            attributed[ev.pursued_root_need] = attributed.get(ev.pursued_root_need, 0) + 1
        switches += 1 if ev.switched else 0
        forced += 1 if ev.forced_switch else 0
        abandonments += len(ev.abandoned)
        for rid in root_ids:
            snap = ev.roots[rid]
            floor = min(floor, snap["reservoir"])
            valence_sum += abs(snap["valence"])

    total_attributed = sum(attributed.values())
    if total_attributed > 0:
        shares = [n / total_attributed for n in attributed.values() if n > 0]
        monomania = max(shares)
        entropy = -sum(s * math.log(s) for s in shares)
        entropy /= math.log(len(root_ids)) if len(root_ids) > 1 else 1.0
    else:
        monomania = 0.0
        entropy = 0.0

    return Metrics(
        monomania_index=monomania,
        allocation_entropy=min(1.0, entropy),
        switch_count=switches,
        forced_switch_count=forced,
        need_floor=floor if floor is not math.inf else 0.0,
        mean_abs_valence=valence_sum / (len(trace) * max(1, len(root_ids))),
        abandonment_count=abandonments,
        idle_fraction=idle / len(trace),
    )


def validate_scenario(document: Any) -> list[str]:
    """All invariant violations in a scenario document; empty means ok."""
    return ws.validate_document(document)


def sweep(scenario: Scenario, seeds: Iterable[int]) -> list[dict[str, Any]]:
    """One independent episode per seed; returns per-seed metric rows."""
    rows = []
    for seed in seeds:
        metrics = compute_metrics(run_episode(scenario, seed))
        rows.append({"seed": seed, **metrics.to_dict()})
    return rows


# ---------------------------------------------------------------------------
# Trace / metrics files
# ---------------------------------------------------------------------------

def dump_trace(trace: Sequence[TraceEvent]) -> str:
    """Line-delimited records, one JSON object per tick, bit-stable."""
    return "".join(
        json.dumps(ev.to_record(), separators=(",", ":")) + "\n" for ev in trace
    )


def write_trace(trace: Sequence[TraceEvent], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_trace(trace))


def load_trace(path: str) -> list[TraceEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(TraceEvent.from_record(json.loads(line)))
    return events


def write_metrics(metrics: Metrics, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_dict(), fh, indent=2)
        fh.write("\n")
