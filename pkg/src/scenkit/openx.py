"""OpenSCENARIO 1.1 / OpenDRIVE 1.6 subset serialisation.

Only the constructs produced by :mod:`scenkit.compiler` are supported.  The
parser rejects anything else with :class:`UnsupportedFeatureError` naming the
offending element.  Numbers are written fixed-point with 6 decimals so equal
documents serialise to identical bytes.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Iterable

from .compiler import (
    GREATER_THAN,
    LESS_THAN,
    EntitySpec,
    LaneChange,
    LaneOffset,
    RelativeLongitudinalDistance,
    RoadSpec,
    ScenarioDocument,
    SimulationTime,
    SpeedChange,
    StopCondition,
    TraveledDistance,
    TriggeredEvent,
)
from .errors import MalformedDocumentError, UnsupportedFeatureError, ValidationError

OSC_REV = (1, 1)
ODR_REV = (1, 6)
ROAD_ID = "0"
FILE_DATE = "2024-01-01T00:00:00"


def _f(x: float) -> str:
    s = f"{float(x):.6f}"
    return "0.000000" if s == "-0.000000" else s


def _el(parent, tag, **attrs):
    return ET.SubElement(parent, tag, {k: v for k, v in attrs.items()})


def _tostring(root: ET.Element) -> str:
    ET.indent(root, space="  ")
    body = ET.tostring(root, encoding="unicode", short_empty_elements=True)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + body + "\n"


# --------------------------------------------------------------------------- xosc writer

def _write_entity(entities: ET.Element, ent: EntitySpec) -> None:
    obj = _el(entities, "ScenarioObject", name=ent.name)
    veh = _el(obj, "Vehicle", name=f"{ent.name.lower()}_car", vehicleCategory="car")
    _el(veh, "ParameterDeclarations")
    bb = _el(veh, "BoundingBox")
    _el(bb, "Center", x=_f(0.0), y=_f(0.0), z=_f(ent.height / 2))
    _el(bb, "Dimensions", width=_f(ent.width), length=_f(ent.length), height=_f(ent.height))
    _el(veh, "Performance", maxSpeed=_f(70.0), maxAcceleration=_f(10.0), maxDeceleration=_f(10.0))
    axles = _el(veh, "Axles")
    _el(axles, "FrontAxle", maxSteering=_f(0.5), wheelDiameter=_f(0.6), trackWidth=_f(1.8),
        positionX=_f(3.1), positionZ=_f(0.3))
    _el(axles, "RearAxle", maxSteering=_f(0.0), wheelDiameter=_f(0.6), trackWidth=_f(1.8),
        positionX=_f(0.0), positionZ=_f(0.3))
    _el(veh, "Properties")


def _write_init(actions: ET.Element, ent: EntitySpec) -> None:
    priv = _el(actions, "Private", entityRef=ent.name)
    pa = _el(priv, "PrivateAction")
    tele = _el(pa, "TeleportAction")
    pos = _el(tele, "Position")
    _el(pos, "LanePosition", roadId=ROAD_ID, laneId=str(ent.lane), s=_f(ent.s), offset=_f(ent.offset))
    pa = _el(priv, "PrivateAction")
    speed = _el(_el(pa, "LongitudinalAction"), "SpeedAction")
    _el(speed, "SpeedActionDynamics", dynamicsShape="step", value=_f(0.0), dynamicsDimension="time")
    _el(_el(speed, "SpeedActionTarget"), "AbsoluteTargetSpeed", value=_f(ent.speed))


def _write_condition(group: ET.Element, name: str, cond) -> None:
    c = _el(group, "Condition", name=name, delay=_f(0.0), conditionEdge="none")
    if isinstance(cond, SimulationTime):
        by = _el(c, "ByValueCondition")
        _el(by, "SimulationTimeCondition", value=_f(cond.value), rule=GREATER_THAN)
        return
    by = _el(c, "ByEntityCondition")
    trig = _el(by, "TriggeringEntities", triggeringEntitiesRule="any")
    _el(trig, "EntityRef", entityRef=cond.entity)
    ec = _el(by, "EntityCondition")
    if isinstance(cond, TraveledDistance):
        _el(ec, "TraveledDistanceCondition", value=_f(cond.value))
    elif isinstance(cond, RelativeLongitudinalDistance):
        _el(ec, "RelativeDistanceCondition", entityRef=cond.target, relativeDistanceType="longitudinal",
            freespace="false", rule=cond.rule, value=_f(cond.value))
    else:  # pragma: no cover - guarded by the document model
        raise ValidationError(f"cannot serialise condition {cond!r}")


def _write_action(parent: ET.Element, act) -> None:
    pa = _el(parent, "PrivateAction")
    if isinstance(act, SpeedChange):
        sa = _el(_el(pa, "LongitudinalAction"), "SpeedAction")
        _el(sa, "SpeedActionDynamics", dynamicsShape="linear", value=_f(act.duration), dynamicsDimension="time")
        _el(_el(sa, "SpeedActionTarget"), "AbsoluteTargetSpeed", value=_f(act.target_speed))
    elif isinstance(act, LaneChange):
        lc = _el(_el(pa, "LateralAction"), "LaneChangeAction")
        _el(lc, "LaneChangeActionDynamics", dynamicsShape=act.shape, value=_f(act.distance),
            dynamicsDimension="distance")
        _el(_el(lc, "LaneChangeTarget"), "AbsoluteTargetLane", value=str(act.target_lane))
    elif isinstance(act, LaneOffset):
        lo = _el(_el(pa, "LateralAction"), "LaneOffsetAction", continuous="false")
        _el(lo, "LaneOffsetActionDynamics", dynamicsShape="step")
        _el(_el(lo, "LaneOffsetTarget"), "AbsoluteTargetLaneOffset", value=_f(act.value))
    else:  # pragma: no cover
        raise ValidationError(f"cannot serialise action {act!r}")


def _runs(events: Iterable[TriggeredEvent]) -> list[list[TriggeredEvent]]:
    runs: list[list[TriggeredEvent]] = []
    for ev in events:
        if runs and runs[-1][0].actor == ev.actor:
            runs[-1].append(ev)
        else:
            runs.append([ev])
    return runs


def write_xosc(doc: ScenarioDocument) -> str:
    root = ET.Element("OpenSCENARIO")
    _el(root, "FileHeader", revMajor=str(OSC_REV[0]), revMinor=str(OSC_REV[1]), date=FILE_DATE,
        description="scenkit lane-change scenario", author="scenkit")
    _el(root, "ParameterDeclarations")
    _el(root, "CatalogLocations")
    rn = _el(root, "RoadNetwork")
    _el(rn, "LogicFile", filepath=doc.road_file)
    entities = _el(root, "Entities")
    for ent in doc.entities:
        _write_entity(entities, ent)

    sb = _el(root, "Storyboard")
    init_actions = _el(_el(sb, "Init"), "Actions")
    for ent in doc.entities:
        _write_init(init_actions, ent)
    runs = _runs(doc.events)
    if runs:
        _write_story(sb, runs)
    stop = _el(sb, "StopTrigger")
    _write_condition(_el(stop, "ConditionGroup"), "ScenarioEnd", doc.stop.condition)
    _write_condition(_el(stop, "ConditionGroup"), "Timeout", SimulationTime(doc.stop.timeout))
    return _tostring(root)


def _write_story(sb: ET.Element, runs: list[list[TriggeredEvent]]) -> None:
    # an Act needs at least one ManeuverGroup, so an event-free document has no Story at all
    story = _el(sb, "Story", name="LaneChangeStory")
    act = _el(story, "Act", name="LaneChangeAct")
    for k, run in enumerate(runs):
        mg = _el(act, "ManeuverGroup", maximumExecutionCount="1", name=f"Group{k}_{run[0].actor}")
        actors = _el(mg, "Actors", selectTriggeringEntities="false")
        _el(actors, "EntityRef", entityRef=run[0].actor)
        man = _el(mg, "Maneuver", name=f"Maneuver{k}_{run[0].actor}")
        for ev in run:
            e = _el(man, "Event", name=ev.name, priority="parallel", maximumExecutionCount="1")
            _write_action(_el(e, "Action", name=f"{ev.name}Action"), ev.action)
            _write_condition(_el(_el(e, "StartTrigger"), "ConditionGroup"), f"{ev.name}Condition", ev.condition)
    start = _el(_el(act, "StartTrigger"), "ConditionGroup")
    _write_condition(start, "ActStart", SimulationTime(0.0))


# --------------------------------------------------------------------------- xosc parser

_XOSC_TAGS = {
    "OpenSCENARIO", "FileHeader", "ParameterDeclarations", "CatalogLocations", "RoadNetwork", "LogicFile",
    "Entities", "ScenarioObject", "Vehicle", "BoundingBox", "Center", "Dimensions", "Performance", "Axles",
    "FrontAxle", "RearAxle", "Properties", "Storyboard", "Init", "Actions", "Private", "PrivateAction",
    "TeleportAction", "Position", "LanePosition", "LongitudinalAction", "SpeedAction", "SpeedActionDynamics",
    "SpeedActionTarget", "AbsoluteTargetSpeed", "LateralAction", "LaneChangeAction",
    "LaneChangeActionDynamics", "LaneChangeTarget", "AbsoluteTargetLane", "LaneOffsetAction",
    "LaneOffsetActionDynamics", "LaneOffsetTarget", "AbsoluteTargetLaneOffset", "Story", "Act",
    "ManeuverGroup", "Actors", "EntityRef", "Maneuver", "Event", "Action", "StartTrigger", "StopTrigger",
    "ConditionGroup", "Condition", "ByEntityCondition", "ByValueCondition", "TriggeringEntities",
    "EntityCondition", "TraveledDistanceCondition", "RelativeDistanceCondition", "SimulationTimeCondition",
}


def _parse_root(text: str, tag: str, known: set[str]) -> ET.Element:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedDocumentError(f"malformed XML: {exc}") from None
    if root.tag != tag:
        raise UnsupportedFeatureError(root.tag, f"expected <{tag}> root")
    for el in root.iter():
        if el.tag not in known:
            raise UnsupportedFeatureError(el.tag)
    return root


def _one(parent: ET.Element, tag: str) -> ET.Element:
    found = parent.findall(tag)
    if len(found) != 1:
        raise MalformedDocumentError(f"<{parent.tag}> must contain exactly one <{tag}>, found {len(found)}")
    return found[0]


def _attr(el: ET.Element, name: str) -> str:
    try:
        return el.attrib[name]
    except KeyError:
        raise MalformedDocumentError(f"<{el.tag}> lacks attribute {name!r}") from None


def _num(el: ET.Element, name: str) -> float:
    try:
        return float(_attr(el, name))
    except ValueError:
        raise MalformedDocumentError(f"<{el.tag} {name}=...> is not a number") from None


def _int(el: ET.Element, name: str) -> int:
    try:
        return int(_attr(el, name))
    except ValueError:
        raise MalformedDocumentError(f"<{el.tag} {name}=...> is not an integer") from None


def _only_child(el: ET.Element) -> ET.Element:
    kids = list(el)
    if len(kids) != 1:
        raise MalformedDocumentError(f"<{el.tag}> must have exactly one child, found {len(kids)}")
    return kids[0]


def _parse_condition(cond_el: ET.Element):
    body = _only_child(cond_el)
    if body.tag == "ByValueCondition":
        st = _only_child(body)
        if st.tag != "SimulationTimeCondition":
            raise UnsupportedFeatureError(st.tag)
        if _attr(st, "rule") != GREATER_THAN:
            raise UnsupportedFeatureError("SimulationTimeCondition", f"rule {st.get('rule')!r}")
        return SimulationTime(_num(st, "value"))
    trig = _one(body, "TriggeringEntities")
    refs = trig.findall("EntityRef")
    if len(refs) != 1:
        raise UnsupportedFeatureError("TriggeringEntities", "exactly one triggering entity is supported")
    entity = _attr(refs[0], "entityRef")
    inner = _only_child(_one(body, "EntityCondition"))
    if inner.tag == "TraveledDistanceCondition":
        return TraveledDistance(entity, _num(inner, "value"))
    if inner.tag == "RelativeDistanceCondition":
        if inner.get("relativeDistanceType") != "longitudinal" or inner.get("freespace") != "false":
            raise UnsupportedFeatureError("RelativeDistanceCondition", "only longitudinal, freespace=false")
        rule = _attr(inner, "rule")
        if rule not in (LESS_THAN, GREATER_THAN):
            raise UnsupportedFeatureError("RelativeDistanceCondition", f"rule {rule!r}")
        return RelativeLongitudinalDistance(entity, _attr(inner, "entityRef"), _num(inner, "value"), rule)
    raise UnsupportedFeatureError(inner.tag)


def _parse_action(action_el: ET.Element):
    pa = _only_child(action_el)
    if pa.tag != "PrivateAction":
        raise UnsupportedFeatureError(pa.tag)
    kind = _only_child(pa)
    inner = _only_child(kind)
    if inner.tag == "SpeedAction":
        dyn = _one(inner, "SpeedActionDynamics")
        if dyn.get("dynamicsShape") != "linear" or dyn.get("dynamicsDimension") != "time":
            raise UnsupportedFeatureError("SpeedActionDynamics", "only linear/time transitions")
        target = _only_child(_one(inner, "SpeedActionTarget"))
        if target.tag != "AbsoluteTargetSpeed":
            raise UnsupportedFeatureError(target.tag)
        return SpeedChange(_num(target, "value"), _num(dyn, "value"))
    if inner.tag == "LaneChangeAction":
        dyn = _one(inner, "LaneChangeActionDynamics")
        if dyn.get("dynamicsDimension") != "distance":
            raise UnsupportedFeatureError("LaneChangeActionDynamics", "only distance-based transitions")
        target = _only_child(_one(inner, "LaneChangeTarget"))
        if target.tag != "AbsoluteTargetLane":
            raise UnsupportedFeatureError(target.tag)
        return LaneChange(_int(target, "value"), _num(dyn, "value"), _attr(dyn, "dynamicsShape"))
    if inner.tag == "LaneOffsetAction":
        target = _only_child(_one(inner, "LaneOffsetTarget"))
        if target.tag != "AbsoluteTargetLaneOffset":
            raise UnsupportedFeatureError(target.tag)
        return LaneOffset(_num(target, "value"))
    raise UnsupportedFeatureError(inner.tag)


def _parse_entities(root: ET.Element, init: ET.Element) -> tuple[EntitySpec, ...]:
    dims = {}
    for obj in _one(root, "Entities").findall("ScenarioObject"):
        veh = _one(obj, "Vehicle")
        d = _one(_one(veh, "BoundingBox"), "Dimensions")
        dims[_attr(obj, "name")] = (_num(d, "length"), _num(d, "width"), _num(d, "height"))
    entities = []
    for priv in _one(init, "Actions").findall("Private"):
        name = _attr(priv, "entityRef")
        if name not in dims:
            raise MalformedDocumentError(f"init references unknown entity {name!r}")
        lane_pos = speed = None
        for pa in priv.findall("PrivateAction"):
            kind = _only_child(pa)
            if kind.tag == "TeleportAction":
                lane_pos = _only_child(_one(kind, "Position"))
                if lane_pos.tag != "LanePosition":
                    raise UnsupportedFeatureError(lane_pos.tag)
            elif kind.tag == "LongitudinalAction":
                target = _only_child(_one(_one(kind, "SpeedAction"), "SpeedActionTarget"))
                if target.tag != "AbsoluteTargetSpeed":
                    raise UnsupportedFeatureError(target.tag)
                speed = _num(target, "value")
            else:
                raise UnsupportedFeatureError(kind.tag, "in Init")
        if lane_pos is None or speed is None:
            raise MalformedDocumentError(f"init of {name!r} needs a TeleportAction and a SpeedAction")
        length, width, height = dims[name]
        entities.append(EntitySpec(name, _int(lane_pos, "laneId"), _num(lane_pos, "s"), _num(lane_pos, "offset"),
                                   speed, length, width, height))
    if len(entities) != len(dims):
        raise MalformedDocumentError("every entity must be initialised")
    return tuple(entities)


def parse_xosc(text: str, road: RoadSpec) -> ScenarioDocument:
    """Parse a subset .xosc; ``road`` is the parsed .xodr it references."""
    root = _parse_root(text, "OpenSCENARIO", _XOSC_TAGS)
    road_file = _attr(_one(_one(root, "RoadNetwork"), "LogicFile"), "filepath")
    sb = _one(root, "Storyboard")
    entities = _parse_entities(root, _one(sb, "Init"))

    events = []
    for story in sb.findall("Story"):
        for act in story.findall("Act"):
            for mg in act.findall("ManeuverGroup"):
                refs = _one(mg, "Actors").findall("EntityRef")
                if len(refs) != 1:
                    raise UnsupportedFeatureError("Actors", "exactly one actor per maneuver group")
                actor = _attr(refs[0], "entityRef")
                for man in mg.findall("Maneuver"):
                    for ev in man.findall("Event"):
                        groups = _one(ev, "StartTrigger").findall("ConditionGroup")
                        if len(groups) != 1 or len(groups[0].findall("Condition")) != 1:
                            raise UnsupportedFeatureError("StartTrigger", "exactly one condition per event")
                        actions = ev.findall("Action")
                        if len(actions) != 1:
                            raise UnsupportedFeatureError("Event", "exactly one action per event")
                        events.append(TriggeredEvent(_attr(ev, "name"), actor,
                                                     _parse_condition(groups[0].find("Condition")),
                                                     _parse_action(actions[0])))

    stop_groups = _one(sb, "StopTrigger").findall("ConditionGroup")
    conds = [_parse_condition(_one(g, "Condition")) for g in stop_groups]
    if len(conds) != 2 or not isinstance(conds[1], SimulationTime):
        raise UnsupportedFeatureError("StopTrigger", "expected a stop condition plus a simulation-time fallback")
    if isinstance(conds[0], RelativeLongitudinalDistance):
        raise UnsupportedFeatureError("StopTrigger", "relative-distance stop conditions")
    return ScenarioDocument(road, entities, tuple(events), StopCondition(conds[0], conds[1].value), road_file)


# --------------------------------------------------------------------------- xodr

_XODR_TAGS = {
    "OpenDRIVE", "header", "road", "link", "planView", "geometry", "line", "elevationProfile",
    "lateralProfile", "lanes", "laneSection", "center", "right", "lane", "width", "roadMark",
}


def write_xodr(road: RoadSpec) -> str:
    root = ET.Element("OpenDRIVE")
    _el(root, "header", revMajor=str(ODR_REV[0]), revMinor=str(ODR_REV[1]), name="scenkit", version="1.00",
        date=FILE_DATE, north=_f(0), south=_f(0), east=_f(0), west=_f(0))
    r = _el(root, "road", name="road0", length=_f(road.length), id=ROAD_ID, junction="-1")
    _el(r, "link")
    pv = _el(r, "planView")
    geo = _el(pv, "geometry", s=_f(0), x=_f(0), y=_f(0), hdg=_f(0), length=_f(road.length))
    _el(geo, "line")
    _el(r, "elevationProfile")
    _el(r, "lateralProfile")
    section = _el(_el(r, "lanes"), "laneSection", s=_f(0))
    centre = _el(_el(section, "center"), "lane", id="0", type="none", level="false")
    _el(centre, "roadMark", sOffset=_f(0), type="solid", weight="standard", color="standard", width=_f(0.15))
    right = _el(section, "right")
    for k in range(1, road.lane_count + 1):
        lane = _el(right, "lane", id=str(-k), type="driving", level="false")
        _el(lane, "link")
        _el(lane, "width", sOffset=_f(0), a=_f(road.lane_width), b=_f(0), c=_f(0), d=_f(0))
        mark = "solid" if k == road.lane_count else "broken"
        _el(lane, "roadMark", sOffset=_f(0), type=mark, weight="standard", color="standard", width=_f(0.15))
    return _tostring(root)


def parse_xodr(text: str) -> RoadSpec:
    root = _parse_root(text, "OpenDRIVE", _XODR_TAGS)
    roads = root.findall("road")
    if len(roads) != 1:
        raise UnsupportedFeatureError("road", f"exactly one road supported, found {len(roads)}")
    road = roads[0]
    geos = _one(road, "planView").findall("geometry")
    if len(geos) != 1:
        raise UnsupportedFeatureError("geometry", "a single straight geometry is supported")
    if [c.tag for c in geos[0]] != ["line"]:
        raise UnsupportedFeatureError(geos[0][0].tag if len(geos[0]) else "geometry")
    sections = _one(road, "lanes").findall("laneSection")
    if len(sections) != 1:
        raise UnsupportedFeatureError("laneSection", "a single lane section is supported")
    section = sections[0]
    if section.find("left") is not None:
        raise UnsupportedFeatureError("left")
    lanes = _one(section, "right").findall("lane")
    ids = sorted((_int(ln, "id") for ln in lanes), reverse=True)
    if ids != list(range(-1, -len(lanes) - 1, -1)):
        raise MalformedDocumentError(f"right lanes must be numbered -1..-{len(lanes)}, found {ids}")
    widths = set()
    for ln in lanes:
        w = _one(ln, "width")
        if any(_num(w, c) != 0.0 for c in ("b", "c", "d")):
            raise UnsupportedFeatureError("width", "only constant lane widths")
        widths.add(_num(w, "a"))
    if len(widths) != 1:
        raise UnsupportedFeatureError("width", "all lanes must share one width")
    return RoadSpec(_num(road, "length"), len(lanes), widths.pop())
