"""Hierarchical goal structure: nodes, validated tree, structural queries.

A hierarchy is a forest of at least two root needs. Roots are the
agent-defining drives (competence, connection, ...); deeper nodes are
progressively more concrete ways of serving them. The tree is immutable
after validation and safe to share read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Any, Iterable, Mapping

from .errors import ScenarioValidationError, UnknownGoalError

APPROACH = "approach"
AVOIDANCE = "avoidance"

# Default affect time constant per level: root affect lingers, leaf affect
# is fleeting. Floor of 1.0 keeps the valence update a convex step.
_AFFECT_DECAY_ROOT = 8.0


def default_affect_decay(level: int) -> float:
    return max(1.0, _AFFECT_DECAY_ROOT / (2.0 ** level))


@dataclass(frozen=True)
class GoalNode:
    """One goal in the hierarchy with its loop reference values."""

    id: str
    parent_id: str | None  # None iff root need
    level: int  # 0 = root need
    polarity: str  # APPROACH or AVOIDANCE
    label: str
    base_value: float  # anticipated satisfaction, > 0
    importance: float  # static weight, > 0
    reference: float  # ideal state the loop compares against
    avoidance_margin: float  # safety distance, > 0 for avoidance nodes
    affect_decay: float  # valence time constant, >= 1, larger near the root

    def check(self) -> list[str]:
        errs = []
        if self.polarity not in (APPROACH, AVOIDANCE):
            errs.append(f"goal '{self.id}': polarity must be approach or avoidance")
        if self.base_value <= 0:
            errs.append(f"goal '{self.id}': nonpositive base_value")
        if self.importance <= 0:
            errs.append(f"goal '{self.id}': nonpositive importance")
        if self.avoidance_margin < 0:
            errs.append(f"goal '{self.id}': negative avoidance_margin")
        if self.polarity == AVOIDANCE and self.avoidance_margin <= 0:
            errs.append(f"goal '{self.id}': avoidance node needs avoidance_margin > 0")
        if self.affect_decay < 1.0:
            errs.append(f"goal '{self.id}': affect_decay must be >= 1")
        if self.level < 0:
            errs.append(f"goal '{self.id}': negative level")
        return errs


class GoalHierarchy:
    """Validated goal tree. Construction runs all structural checks."""

    def __init__(self, nodes: Iterable[GoalNode]):
        self._nodes: dict[str, GoalNode] = {}
        violations: list[str] = []
        for node in nodes:
            if node.id in self._nodes:
                violations.append(f"duplicate goal id '{node.id}'")
            self._nodes[node.id] = node
            violations.extend(node.check())
        violations.extend(self._check_structure())
        if violations:
            raise ScenarioValidationError(violations)
        self.roots: tuple[str, ...] = tuple(
            sorted(n.id for n in self._nodes.values() if n.parent_id is None)
        )
        self._lineages: dict[str, tuple[str, ...]] = {
            gid: self._walk(gid) for gid in self._nodes
        }

    def _check_structure(self) -> list[str]:
        errs = []
        roots = [n for n in self._nodes.values() if n.parent_id is None]
        if len(roots) < 2:
            errs.append(f"fewer than 2 roots (found {len(roots)})")
        for node in self._nodes.values():
            if node.parent_id is None:
                if node.level != 0:
                    errs.append(f"root '{node.id}' must have level 0")
                continue
            parent = self._nodes.get(node.parent_id)
            if parent is None:
                errs.append(f"goal '{node.id}': unknown parent '{node.parent_id}'")
                continue
            if node.level != parent.level + 1:
                errs.append(
                    f"goal '{node.id}': level {node.level} != parent level + 1"
                )
        # Cycle detection: follow parents, bounded by node count.
        for node in self._nodes.values():
            seen = {node.id}
            cur = node
            while cur.parent_id is not None:
                if cur.parent_id in seen:
                    errs.append(f"cycle through goal '{cur.parent_id}'")
                    break
                cur = self._nodes.get(cur.parent_id)
                if cur is None:
                    break  # orphan parent already reported
                seen.add(cur.id)
        return errs

    def _walk(self, gid: str) -> tuple[str, ...]:
        chain = [gid]
        cur = self._nodes[gid]
        while cur.parent_id is not None:
            chain.append(cur.parent_id)
            cur = self._nodes[cur.parent_id]
        return tuple(chain)

    def __contains__(self, gid: str) -> bool:
        return gid in self._nodes

    def __iter__(self):
        return iter(sorted(self._nodes))

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, gid: str) -> GoalNode:
        try:
            return self._nodes[gid]
        except KeyError:
            raise UnknownGoalError(f"unknown goal '{gid}'") from None

    def lineage(self, gid: str) -> tuple[str, ...]:
        """Ids from the node up to its root, inclusive."""
        if gid not in self._lineages:
            raise UnknownGoalError(f"unknown goal '{gid}'")
        return self._lineages[gid]

    def root_of(self, gid: str) -> str:
        return self.lineage(gid)[-1]

    def serialize(self) -> list[dict[str, Any]]:
        """Node records in the scenario document form, sorted by id."""
        out = []
        for gid in sorted(self._nodes):
            n = self._nodes[gid]
            out.append(
                {
                    "id": n.id,
                    "parent_id": n.parent_id,
                    "level": n.level,
                    "polarity": n.polarity,
                    "label": n.label,
                    "base_value": n.base_value,
                    "importance": n.importance,
                    "reference": n.reference,
                    "avoidance_margin": n.avoidance_margin,
                    "affect_decay": n.affect_decay,
                }
            )
        return out


def _node_from_record(rec: Mapping[str, Any], level_hint: int | None) -> GoalNode:
    level = rec.get("level", level_hint)
    if level is None:
        level = 0 if rec.get("parent_id") is None else 1
    level = int(level)
    return GoalNode(
        id=str(rec["id"]),
        parent_id=rec.get("parent_id"),
        level=level,
        polarity=rec.get("polarity", APPROACH),
        label=rec.get("label", ""),
        base_value=float(rec.get("base_value", 1.0)),
        importance=float(rec.get("importance", 1.0)),
        reference=float(rec.get("reference", 1.0)),
        avoidance_margin=float(rec.get("avoidance_margin", 0.0)),
        affect_decay=float(rec.get("affect_decay", default_affect_decay(level))),
    )


def load_hierarchy(document: Any) -> GoalHierarchy:
    """Build a validated hierarchy from a scenario document.

    Accepts either the full scenario mapping (reads its ``goals`` key) or
    the bare list of node records. ``level`` may be omitted per record, in
    which case it is derived from the parent chain.
    """
    if isinstance(document, Mapping):
        records = document.get("goals")
        if records is None:
            raise ScenarioValidationError(["document has no 'goals' key"])
    else:
        records = document
    if not isinstance(records, list) or not records:
        raise ScenarioValidationError(["'goals' must be a nonempty list"])
    for rec in records:
        if not isinstance(rec, Mapping) or "id" not in rec:
            raise ScenarioValidationError(["goal record without an 'id'"])

    by_id = {str(r["id"]): r for r in records}
    levels: dict[str, int] = {}

    def derive_level(gid: str, trail: set[str]) -> int | None:
        if gid in levels:
            return levels[gid]
        rec = by_id.get(gid)
        if rec is None:
            return None
        pid = rec.get("parent_id")
        if pid is None:
            levels[gid] = 0
            return 0
        if pid in trail or pid == gid:
            return None  # cycle; left for structural validation to report
        up = derive_level(str(pid), trail | {gid})
        if up is None:
            return None
        levels[gid] = up + 1
        return levels[gid]

    for gid in by_id:
        derive_level(gid, set())

    nodes = [_node_from_record(rec, levels.get(str(rec["id"]))) for rec in records]
    return GoalHierarchy(nodes)


@dataclass(frozen=True)
class EngineParams:
    """All numeric knobs of the regulation engine.

    Range constraints are enforced by :meth:`check`, run at scenario load.
    """

    gamma: float = 0.5  # temporal discount rate on means delay
    lambda_loss: float = 2.0  # loss amplification, >= 1
    theta0: float = 0.1  # base abandonment threshold at the root
    kappa: float = 0.5  # per-level attenuation of the threshold, in (0, 1]
    sigma_max: float = 1.0  # shield upper bound
    sigma_min: float = 0.2  # shield lower bound
    sigma_crit: float = 0.2  # forced-switch floor, sigma_min <= crit < max
    delta_dep: float = 0.05  # shield depletion per tick at full load
    delta_rec: float = 0.02  # shield recovery per restful tick
    hysteresis: float = 0.1  # margin a competitor must clear to displace
    k_affect: float = 2.0  # gain from progress error to valence target
    eta: float = 0.05  # criterion adaptation rate, in (0, 1)
    beta_priority: float = 0.4  # affect-to-priority coupling
    ema_alpha: float = 0.2  # expectancy learning rate, in (0, 1)
    prune_k: int = 8  # shortlist size for deliberate switching
    novelty_widen: float = 1.0  # deadzone widening at full novelty
    window: int = 8  # velocity window length (samples)
    deadzone: float = 0.05  # base neutral band half-width
    novelty_decay: float = 0.9  # per-tick novelty retention factor
    pulse_gain: float = 0.02  # intrinsic reward for a progress event
    pulse_attenuation: float = 0.5  # pulse shrink per level toward the root
    override_gain: float = 0.3  # reward salience to shield boost
    override_ticks: int = 20  # override duration
    cooldown_ticks: int = 100  # deactivation span after abandonment
    importance_override_pct: float = 2.0  # auto-override percentile; > 1 disables

    def check(self) -> list[str]:
        errs = []

        def require(ok: bool, msg: str) -> None:
            if not ok:
                errs.append(f"params: {msg}")

        require(self.gamma > 0, "gamma must be > 0")
        require(self.lambda_loss >= 1, "lambda_loss must be >= 1")
        require(self.theta0 > 0, "theta0 must be > 0")
        require(0 < self.kappa <= 1, "kappa must be in (0, 1]")
        require(
            0 <= self.sigma_min <= self.sigma_crit < self.sigma_max <= 1,
            "need 0 <= sigma_min <= sigma_crit < sigma_max <= 1",
        )
        require(self.delta_dep > 0, "delta_dep must be > 0")
        require(self.delta_rec > 0, "delta_rec must be > 0")
        require(self.hysteresis >= 0, "hysteresis must be >= 0")
        require(self.k_affect > 0, "k_affect must be > 0")
        require(0 < self.eta < 1, "eta must be in (0, 1)")
        require(self.beta_priority >= 0, "beta_priority must be >= 0")
        require(0 < self.ema_alpha < 1, "ema_alpha must be in (0, 1)")
        require(isinstance(self.prune_k, int) and self.prune_k >= 1, "prune_k must be a positive integer")
        require(self.novelty_widen >= 0, "novelty_widen must be >= 0")
        require(isinstance(self.window, int) and self.window >= 1, "window must be a positive integer")
        require(self.deadzone >= 0, "deadzone must be >= 0")
        require(0 <= self.novelty_decay <= 1, "novelty_decay must be in [0, 1]")
        require(self.pulse_gain >= 0, "pulse_gain must be >= 0")
        require(0 <= self.pulse_attenuation <= 1, "pulse_attenuation must be in [0, 1]")
        require(self.override_gain >= 0, "override_gain must be >= 0")
        require(isinstance(self.override_ticks, int) and self.override_ticks >= 1, "override_ticks must be a positive integer")
        require(isinstance(self.cooldown_ticks, int) and self.cooldown_ticks >= 1, "cooldown_ticks must be a positive integer")
        require(self.importance_override_pct >= 0, "importance_override_pct must be >= 0")
        return errs

    @classmethod
    def from_overrides(cls, overrides: Mapping[str, Any] | None) -> "EngineParams":
        if not overrides:
            params = cls()
        else:
            known = {f.name for f in fields(cls)}
            unknown = sorted(set(overrides) - known)
            if unknown:
                raise ScenarioValidationError(
                    [f"params: unknown key '{k}'" for k in unknown]
                )
            ints = {"prune_k", "window", "override_ticks", "cooldown_ticks"}
            coerced = {
                k: int(v) if k in ints else float(v) for k, v in overrides.items()
            }
            params = replace(cls(), **coerced)
        errs = params.check()
        if errs:
            raise ScenarioValidationError(errs)
        return params


def drop_resistance(node: GoalNode, params: EngineParams) -> float:
    """Abandonment threshold for a goal at its level.

    A goal survives an abandonment check only while its best available
    utility stays at or above this value; the bar is highest at the root
    (theta0) and shrinks by kappa per level of depth, so deep, concrete
    goals keep grinding at utilities that would pause a root need.
    """
    return params.theta0 * params.kappa ** node.level


def lineage(hierarchy: GoalHierarchy, gid: str) -> tuple[str, ...]:
    """Ids from ``gid`` to its root; thin wrapper over the hierarchy."""
    return hierarchy.lineage(gid)
