import dataclasses

import pytest

from scenkit.compiler import (
    CHALLENGER,
    EGO,
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
    compile_2pt,
    compile_4pt,
    road_for,
)
from scenkit.errors import CompileError, ValidationError
from scenkit.events import CUT_IN, CUT_OUT
from scenkit.params import LaneChangeParameters, baseline_from_4pt
from scenkit.synth import random_lane_change

FIXTURE = LaneChangeParameters(
    kind=CUT_IN, ego_v0=15.0, ego_lane0=-2, ch_v0=16.0, d0=10.0, ch_lane0=-1, ch_offset0=0.1,
    trigger_distance=25.0, cut_distance=80.0,
    v_cut_start=22.0, dist_cut_start=100.0, dur_to_cut_start=5.0,
    v_cut_end=18.0, dist_cut_end=180.0, dur_cut_start_to_end=4.0,
    v_final=20.0, dist_total=275.0, dur_cut_end_to_end=5.0,
    ch_offset_final=-0.2, ch_lane_final=-2,
)

# written out by hand from the mapping rules, default config (20 m road margin)
ROAD = RoadSpec(325.0, 3, 3.5)
EGO_INIT = EntitySpec(EGO, -2, 20.0, 0.0, 15.0)
TRIGGER = RelativeLongitudinalDistance(CHALLENGER, EGO, 25.0, GREATER_THAN)  # gap opens from 10 m
GOLDEN_4PT = ScenarioDocument(
    road=ROAD,
    entities=(EGO_INIT, EntitySpec(CHALLENGER, -1, 30.0, 0.1, 16.0)),
    events=(
        TriggeredEvent("SpeedToCutStart", CHALLENGER, TraveledDistance(CHALLENGER, 0.0), SpeedChange(22.0, 5.0)),
        TriggeredEvent("SpeedToCutEnd", CHALLENGER, TraveledDistance(CHALLENGER, 100.0), SpeedChange(18.0, 4.0)),
        TriggeredEvent("SpeedToFinal", CHALLENGER, TraveledDistance(CHALLENGER, 180.0), SpeedChange(20.0, 5.0)),
        TriggeredEvent("LaneChange", CHALLENGER, TRIGGER, LaneChange(-2, 80.0)),
        TriggeredEvent("LaneOffset", CHALLENGER, TRIGGER, LaneOffset(-0.2)),
    ),
    stop=StopCondition(TraveledDistance(CHALLENGER, 275.0), 120.0),
)
# baseline: 100 m in 5 s gives 20 m/s throughout; the speed change is a no-op
GOLDEN_2PT = ScenarioDocument(
    road=ROAD,
    entities=(EGO_INIT, EntitySpec(CHALLENGER, -1, 30.0, 0.1, 20.0)),
    events=(
        TriggeredEvent("SpeedToFinal", CHALLENGER, TRIGGER, SpeedChange(20.0, 4.0)),
        TriggeredEvent("LaneChange", CHALLENGER, TRIGGER, LaneChange(-2, 80.0)),
        TriggeredEvent("LaneOffset", CHALLENGER, TRIGGER, LaneOffset(-0.2)),
    ),
    stop=StopCondition(SimulationTime(14.0), 120.0),
)


def count(doc, kind):
    return sum(isinstance(ev.action, kind) for ev in doc.events)


def test_road_for_fixture():
    assert road_for(FIXTURE) == ROAD


def test_golden_4pt():
    assert compile_4pt(FIXTURE, ROAD) == GOLDEN_4PT


def test_golden_2pt():
    b = baseline_from_4pt(FIXTURE)
    assert compile_2pt(b, ROAD) == GOLDEN_2PT
    assert compile_2pt(b, ROAD, ego_lane=-2, stop_time=FIXTURE.duration) == GOLDEN_2PT


def test_field_mapping():
    doc = compile_4pt(FIXTURE, ROAD)
    ev = next(e for e in doc.events if e.condition == TraveledDistance(CHALLENGER, 100.0))
    assert ev.action == SpeedChange(18.0, 4.0)
    # the speed reached at the cut start is the ramp that begins the scenario
    assert doc.events[0].action == SpeedChange(FIXTURE.v_cut_start, FIXTURE.dur_to_cut_start)
    lc = next(e.action for e in doc.events if isinstance(e.action, LaneChange))
    assert lc.target_lane == FIXTURE.ego_lane0


def test_trigger_rule_follows_initial_gap():
    closing = dataclasses.replace(FIXTURE, d0=40.0)
    doc = compile_4pt(closing, road_for(closing))
    assert doc.events[3].condition.rule == LESS_THAN


def test_baseline_has_no_pre_maneuver_speed_change():
    doc = compile_2pt(baseline_from_4pt(FIXTURE), ROAD)
    assert doc.entity(CHALLENGER).speed == 20.0
    assert all(ev.condition == TRIGGER for ev in doc.events)


@pytest.mark.parametrize("seed", range(20))
def test_event_counts(seed):
    p = random_lane_change(seed).truth
    road = road_for(p)
    doc4 = compile_4pt(p, road)
    assert (count(doc4, SpeedChange), count(doc4, LaneChange), count(doc4, LaneOffset)) == (3, 1, 1)
    doc2 = compile_2pt(baseline_from_4pt(p), road, ego_lane=p.ego_lane0)
    assert (count(doc2, SpeedChange), count(doc2, LaneChange), count(doc2, LaneOffset)) == (1, 1, 1)
    # pure: compiling again gives an equal document
    assert compile_4pt(dataclasses.replace(p), road) == doc4


def test_cut_out_2pt_lanes():
    p = random_lane_change(1, kind=CUT_OUT).truth
    doc = compile_2pt(baseline_from_4pt(p), road_for(p), ego_lane=p.ego_lane0)
    assert doc.entity(CHALLENGER).lane == p.ego_lane0
    lc = next(e.action for e in doc.events if isinstance(e.action, LaneChange))
    assert lc.target_lane == p.ch_lane_final


def test_compile_error_lists_fields():
    bad = dataclasses.replace(FIXTURE, v_cut_end=-3.0, dur_to_cut_start=0.0)
    with pytest.raises(CompileError) as err:
        compile_4pt(bad, ROAD)
    assert "v_cut_end" in str(err.value) and "dur_to_cut_start" in str(err.value)
    with pytest.raises(CompileError, match="ego_lane0"):
        compile_4pt(FIXTURE, RoadSpec(325.0, 1, 3.5))
    with pytest.raises(CompileError, match="dist_total"):
        compile_4pt(FIXTURE, RoadSpec(200.0, 3, 3.5))


def test_road_for_widens_lane_count():
    p = dataclasses.replace(FIXTURE, ego_lane0=-3, ch_lane0=-4, ch_lane_final=-3)
    assert road_for(p, lane_count=2).lane_count == 4


def test_document_validation():
    with pytest.raises(ValidationError):
        RoadSpec(100.0, 5, 3.5)
    with pytest.raises(ValidationError):
        ScenarioDocument(ROAD, (EGO_INIT,), (), GOLDEN_4PT.stop)
    with pytest.raises(ValidationError):
        ScenarioDocument(ROAD, GOLDEN_4PT.entities,
                         (TriggeredEvent("x", "Nobody", SimulationTime(1.0), LaneOffset(0.0)),), GOLDEN_4PT.stop)
