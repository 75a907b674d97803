import numpy as np
import pytest

from scenkit.events import CUT_IN, CUT_OUT, LaneChangeEvent, detect_events, read_events_json, write_events_json
from scenkit.errors import ValidationError
from scenkit.geometry import ReferencePath, trajectory_from_arrays
from scenkit.synth import SpeedProfile, author_lane_change, lane_keep, random_lane_change


def detect(sc):
    ego = sc.tracks[0]
    return detect_events(ego, sc.tracks[1:], ReferencePath.from_trajectory(ego))


def authored(kind, ego_lane, ch_lane0, ch_lane_final, cut=4.0):
    speed = SpeedProfile((0.0, 20.0), (22.0, 22.0))
    return author_lane_change(kind, 20.0, ego_lane, ch_lane0, ch_lane_final, speed, 15.0, cut)


def test_cut_in_from_adjacent_lane():
    sc = authored(CUT_IN, -1, -2, -1)
    (ev,) = detect(sc)
    assert ev.kind == CUT_IN and ev.challenger_id == "challenger"
    assert not ev.truncated
    # the detected interval brackets the authored ramp
    assert ev.t_cut_start <= sc.event.t_cut_start + 1e-9
    assert ev.t_cut_end >= sc.event.t_cut_end - 1e-9
    assert ev.t_scenario_start == pytest.approx(ev.t_cut_start - 5.0)
    assert ev.t_scenario_end == pytest.approx(ev.t_cut_end + 5.0)


def test_cut_out_mirror():
    sc = authored(CUT_OUT, -1, -1, -2)
    (ev,) = detect(sc)
    assert ev.kind == CUT_OUT
    assert ev.t_cut_start <= sc.event.t_cut_start + 1e-9
    assert ev.t_cut_end >= sc.event.t_cut_end - 1e-9


def test_lane_holding_vehicle_is_ignored():
    n = 300
    times = np.arange(n) * 0.1
    ego = trajectory_from_arrays("ego", times, np.column_stack([20 * times, np.full(n, -1.75)]),
                                 np.full(n, 20.0), np.full(n, -1), True)
    other = trajectory_from_arrays("car", times, np.column_stack([10 + 21 * times, np.full(n, -5.25)]),
                                   np.full(n, 21.0), np.full(n, -2))
    assert detect_events(ego, [other]) == []


@pytest.mark.parametrize("seed", range(10))
def test_no_events_while_weaving_in_lane(seed):
    assert detect(lane_keep(seed)) == []


@pytest.mark.parametrize("seed", range(12))
def test_random_events_found_exactly(seed):
    sc = random_lane_change(seed)
    (ev,) = detect(sc)
    assert ev.kind == sc.event.kind
    assert ev.t_cut_start == pytest.approx(sc.event.t_cut_start)
    assert ev.t_cut_end == pytest.approx(sc.event.t_cut_end)


def shift(traj, dt):
    return trajectory_from_arrays(traj.object_id, traj.times + dt, traj.xy, traj.speeds, traj.lanes, traj.is_ego)


def test_time_shift_invariance():
    sc = random_lane_change(4)
    (ev,) = detect(sc)
    moved = [shift(t, 37.3) for t in sc.tracks]
    (ev2,) = detect_events(moved[0], moved[1:])
    assert ev2.kind == ev.kind
    for a, b in zip(
        (ev.t_scenario_start, ev.t_cut_start, ev.t_cut_end, ev.t_scenario_end),
        (ev2.t_scenario_start, ev2.t_cut_start, ev2.t_cut_end, ev2.t_scenario_end),
    ):
        assert b == pytest.approx(a + 37.3)


def test_event_at_log_edge_is_truncated():
    sc = authored(CUT_IN, -1, -2, -1)
    ego, ch = sc.tracks[0], sc.tracks[1]
    cut = sc.event.t_cut_end + 2.0  # log stops during the postroll

    def clip(t):
        keep = t.times <= cut + 1e-9
        return trajectory_from_arrays(t.object_id, t.times[keep], t.xy[keep], t.speeds[keep], t.lanes[keep], t.is_ego)

    (ev,) = detect_events(clip(ego), [clip(ch)])
    assert ev.truncated


def test_short_overlap_skipped():
    sc = authored(CUT_IN, -1, -2, -1)
    ego, ch = sc.tracks[0], sc.tracks[1]
    keep = ch.times < ch.start + 5.0
    short = trajectory_from_arrays("challenger", ch.times[keep], ch.xy[keep], ch.speeds[keep], ch.lanes[keep])
    assert detect_events(ego, [short]) == []


def test_event_validation_and_json(tmp_path):
    with pytest.raises(ValidationError):
        LaneChangeEvent(CUT_IN, "c", 0.0, 5.0, 4.0, 9.0)
    with pytest.raises(ValidationError):
        LaneChangeEvent("swerve", "c", 0.0, 5.0, 6.0, 9.0)
    evs = [LaneChangeEvent(CUT_IN, "c", 0.0, 5.0, 9.0, 14.0), LaneChangeEvent(CUT_OUT, "d", 1.0, 6.0, 8.5, 13.5, True)]
    write_events_json(tmp_path / "e.json", evs, {"note": "x"})
    assert read_events_json(tmp_path / "e.json") == evs
