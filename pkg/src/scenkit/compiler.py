"""Compile lane-change parameters into an abstract OpenSCENARIO/OpenDRIVE document.

Every numeric value placed in a document is rounded to 6 decimals so that
XML serialisation (fixed 6-decimal formatting) round-trips exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .config import DEFAULT_CONFIG, Config
from .errors import CompileError, ValidationError
from .events import CUT_IN
from .params import BASELINE_LEAD_TIME, BaselineParameters, LaneChangeParameters

EGO = "Ego"
CHALLENGER = "Challenger"

LESS_THAN = "lessThan"
GREATER_THAN = "greaterThan"


def q(x: float) -> float:
    """Quantise to the 6-decimal grid used by the XML writer."""
    v = round(float(x), 6)
    return 0.0 if v == 0 else v


@dataclass(frozen=True)
class RoadSpec:
    length: float
    lane_count: int
    lane_width: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValidationError(f"road length must be positive, got {self.length}")
        if not 1 <= self.lane_count <= 4:
            raise ValidationError(f"lane_count must be in 1..4, got {self.lane_count}")
        if not self.lane_width > 0:
            raise ValidationError(f"lane_width must be positive, got {self.lane_width}")

    def lane_center(self, lane: int) -> float:
        """Lateral road coordinate of a right-hand lane centre (lane ids -1, -2, ...)."""
        return -(abs(lane) - 0.5) * self.lane_width

    def has_lane(self, lane: int) -> bool:
        return -self.lane_count <= lane <= -1


@dataclass(frozen=True)
class EntitySpec:
    name: str
    lane: int
    s: float
    offset: float
    speed: float
    length: float = 4.5
    width: float = 1.8
    height: float = 1.5


@dataclass(frozen=True)
class TraveledDistance:
    entity: str
    value: float


@dataclass(frozen=True)
class RelativeLongitudinalDistance:
    """Signed gap ``s(entity) - s(target)`` compared against ``value``."""

    entity: str
    target: str
    value: float
    rule: str = LESS_THAN


@dataclass(frozen=True)
class SimulationTime:
    value: float


Condition = Union[TraveledDistance, RelativeLongitudinalDistance, SimulationTime]


@dataclass(frozen=True)
class SpeedChange:
    target_speed: float
    duration: float


@dataclass(frozen=True)
class LaneChange:
    target_lane: int
    distance: float
    shape: str = "sinusoidal"


@dataclass(frozen=True)
class LaneOffset:
    value: float


Action = Union[SpeedChange, LaneChange, LaneOffset]


@dataclass(frozen=True)
class TriggeredEvent:
    name: str
    actor: str
    condition: Condition
    action: Action


@dataclass(frozen=True)
class StopCondition:
    condition: Union[TraveledDistance, SimulationTime]
    timeout: float = 120.0


@dataclass(frozen=True)
class ScenarioDocument:
    road: RoadSpec
    entities: tuple[EntitySpec, ...]
    events: tuple[TriggeredEvent, ...]
    stop: StopCondition
    road_file: str = "road.xodr"

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "events", tuple(self.events))
        names = [e.name for e in self.entities]
        if len(names) != 2 or len(set(names)) != 2:
            raise ValidationError("a scenario document holds exactly two distinct entities")
        for ent in self.entities:
            if not self.road.has_lane(ent.lane):
                raise ValidationError(f"entity {ent.name} starts in lane {ent.lane} not on the road")
        for ev in self.events:
            refs = [ev.actor, ev.condition.entity] if not isinstance(ev.condition, SimulationTime) else [ev.actor]
            if isinstance(ev.condition, RelativeLongitudinalDistance):
                refs.append(ev.condition.target)
            for ref in refs:
                if ref not in names:
                    raise ValidationError(f"event {ev.name} references unknown entity {ref!r}")
            act = ev.action
            if isinstance(act, SpeedChange) and not (act.duration > 0 and act.target_speed >= 0):
                raise ValidationError(f"event {ev.name}: speed change needs duration > 0 and speed >= 0")
            if isinstance(act, LaneChange):
                if not act.distance > 0:
                    raise ValidationError(f"event {ev.name}: lane change distance must be > 0")
                if not self.road.has_lane(act.target_lane):
                    raise ValidationError(f"event {ev.name}: target lane {act.target_lane} not on the road")

    def entity(self, name: str) -> EntitySpec:
        for ent in self.entities:
            if ent.name == name:
                return ent
        raise KeyError(name)


def _trigger(d0: float, trigger_distance: float) -> RelativeLongitudinalDistance:
    # the gap must move from d0 towards the trigger value; pick the rule that is false at start
    rule = LESS_THAN if d0 > trigger_distance else GREATER_THAN
    return RelativeLongitudinalDistance(CHALLENGER, EGO, q(trigger_distance), rule)


def _entities(ego_lane, ego_v0, ch_lane, d0, ch_offset0, ch_v0, cfg: Config):
    ego_s = q(cfg.road_margin + max(0.0, -d0))
    dims = dict(length=q(cfg.vehicle_length), width=q(cfg.vehicle_width), height=q(cfg.vehicle_height))
    return (
        EntitySpec(EGO, ego_lane, ego_s, 0.0, q(ego_v0), **dims),
        EntitySpec(CHALLENGER, ch_lane, q(ego_s + d0), q(ch_offset0), q(ch_v0), **dims),
    )


def road_for(p: LaneChangeParameters, lane_count: int | None = None, lane_width: float | None = None,
             cfg: Config = DEFAULT_CONFIG) -> RoadSpec:
    """Straight road long enough for both vehicles over the whole scenario.

    The lane count is widened when the parameters use lanes beyond the hint.
    """
    lane_count = max(lane_count or cfg.lane_count, -min(p.ego_lane0, p.ch_lane0, p.ch_lane_final))
    ego_s = cfg.road_margin + max(0.0, -p.d0)
    reach = max(ego_s + p.d0 + p.dist_total, ego_s + p.ego_v0 * p.duration)
    return RoadSpec(float(math.ceil(reach + cfg.road_margin)), lane_count, q(lane_width or cfg.lane_width))


def compile_4pt(p: LaneChangeParameters, road: RoadSpec, cfg: Config = DEFAULT_CONFIG) -> ScenarioDocument:
    problems = p.problems()
    for name in ("ego_lane0", "ch_lane0", "ch_lane_final"):
        lane = getattr(p, name)
        if not road.has_lane(lane):
            problems.append(f"{name}: lane {lane} not on a {road.lane_count}-lane road")
    ego_s = cfg.road_margin + max(0.0, -p.d0)
    if not road.length > ego_s + p.d0 + p.dist_total:
        problems.append(f"dist_total: road length {road.length} too short")
    if problems:
        raise CompileError(problems)

    trigger = _trigger(p.d0, p.trigger_distance)
    events = (
        TriggeredEvent("SpeedToCutStart", CHALLENGER, TraveledDistance(CHALLENGER, 0.0),
                       SpeedChange(q(p.v_cut_start), q(p.dur_to_cut_start))),
        TriggeredEvent("SpeedToCutEnd", CHALLENGER, TraveledDistance(CHALLENGER, q(p.dist_cut_start)),
                       SpeedChange(q(p.v_cut_end), q(p.dur_cut_start_to_end))),
        TriggeredEvent("SpeedToFinal", CHALLENGER, TraveledDistance(CHALLENGER, q(p.dist_cut_end)),
                       SpeedChange(q(p.v_final), q(p.dur_cut_end_to_end))),
        TriggeredEvent("LaneChange", CHALLENGER, trigger, LaneChange(p.ch_lane_final, q(p.cut_distance))),
        TriggeredEvent("LaneOffset", CHALLENGER, trigger, LaneOffset(q(p.ch_offset_final))),
    )
    return ScenarioDocument(
        road=road,
        entities=_entities(p.ego_lane0, p.ego_v0, p.ch_lane0, p.d0, p.ch_offset0, p.ch_v0, cfg),
        events=events,
        stop=StopCondition(TraveledDistance(CHALLENGER, q(p.dist_total)), q(cfg.timeout)),
    )


def baseline_duration(b: BaselineParameters, cfg: Config = DEFAULT_CONFIG) -> float:
    """Scenario length implied by the baseline model alone."""
    return BASELINE_LEAD_TIME + b.cut_distance / max(0.5 * (b.ch_v0 + b.ch_v_final), 0.1) + cfg.postroll


def compile_2pt(
    b: BaselineParameters,
    road: RoadSpec,
    cfg: Config = DEFAULT_CONFIG,
    ego_lane: int | None = None,
    stop_time: float | None = None,
) -> ScenarioDocument:
    """Two-control-point scenario: constant initial speed, one speed change at the lane-change trigger."""
    problems = b.problems()
    if ego_lane is None:
        ego_lane = -2 if b.ch_relative_lane > 0 else -1
    side_lane = ego_lane + b.ch_relative_lane
    ch_lane0, target = (side_lane, ego_lane) if b.kind == CUT_IN else (ego_lane, side_lane)
    for name, lane in (("ego_lane", ego_lane), ("ch_relative_lane", side_lane)):
        if not road.has_lane(lane):
            problems.append(f"{name}: lane {lane} not on a {road.lane_count}-lane road")
    if problems:
        raise CompileError(problems)

    trigger = _trigger(b.d0, b.trigger_distance)
    mean_speed = max(0.5 * (b.ch_v0 + b.ch_v_final), 0.1)
    events = (
        TriggeredEvent("SpeedToFinal", CHALLENGER, trigger,
                       SpeedChange(q(b.ch_v_final), q(max(b.cut_distance / mean_speed, 1e-3)))),
        TriggeredEvent("LaneChange", CHALLENGER, trigger, LaneChange(target, q(b.cut_distance))),
        TriggeredEvent("LaneOffset", CHALLENGER, trigger, LaneOffset(q(b.ch_offset_final))),
    )
    duration = stop_time if stop_time is not None else baseline_duration(b, cfg)
    return ScenarioDocument(
        road=road,
        entities=_entities(ego_lane, b.ego_v0, ch_lane0, b.d0, b.ch_offset0, b.ch_v0, cfg),
        events=events,
        stop=StopCondition(SimulationTime(q(duration)), q(cfg.timeout)),
    )
