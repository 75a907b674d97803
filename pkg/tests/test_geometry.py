import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scenkit.errors import EmptyInputError, InvalidPathError, RangeError, ValidationError
from scenkit.geometry import (
    CartesianPoint,
    FrenetPose,
    ReferencePath,
    read_tracks_csv,
    resample_1hz,
    to_cartesian,
    to_frenet,
    trajectory_from_arrays,
    write_tracks_csv,
)

STRAIGHT = ReferencePath.from_points([CartesianPoint(0, 0), CartesianPoint(100, 0)])
CORNER = ReferencePath.from_points([CartesianPoint(0, 0), CartesianPoint(10, 0), CartesianPoint(10, 10)])


def brute_force_frenet(vertices, p, n=1_000_000):
    """Nearest of n points sampled uniformly in arclength; sign from the local direction."""
    v = np.asarray(vertices, dtype=float)
    seg = np.diff(v, axis=0)
    lens = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    s = np.linspace(0.0, cum[-1], n)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    pts = v[idx] + ((s - cum[idx]) / lens[idx])[:, None] * seg[idx]
    d2 = np.sum((pts - p) ** 2, axis=1)
    k = int(np.argmin(d2))
    direction = seg[idx[k]]
    rel = np.asarray(p) - pts[k]
    sign = np.sign(direction[0] * rel[1] - direction[1] * rel[0])
    return s[k], sign * math.sqrt(d2[k])


def test_straight_projection():
    assert to_frenet(STRAIGHT, CartesianPoint(5, 2)) == pytest.approx(FrenetPose(5, 2))
    assert to_frenet(STRAIGHT, CartesianPoint(5, 0)) == pytest.approx(FrenetPose(5, 0))


def test_corner_projection_matches_brute_force():
    s_ref, t_ref = brute_force_frenet([(0, 0), (10, 0), (10, 10)], (11.0, 5.0))
    assert s_ref == pytest.approx(15.0, abs=1e-4)
    assert t_ref == pytest.approx(-1.0, abs=1e-4)
    f = to_frenet(CORNER, CartesianPoint(11, 5))
    assert f.s == pytest.approx(15.0, abs=1e-12)
    assert f.t == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize("p", [(3.0, 4.0), (12.0, 1.0), (6.0, -2.0), (9.0, 9.5), (10.5, -3.0)])
def test_projection_agrees_with_brute_force(p):
    s_ref, t_ref = brute_force_frenet([(0, 0), (10, 0), (10, 10)], p)
    f = to_frenet(CORNER, CartesianPoint(*p))
    # sampling resolution is 20 / 1e6 m
    assert f.s == pytest.approx(s_ref, abs=1e-4)
    assert f.t == pytest.approx(t_ref, abs=1e-4)


def test_projection_clamps_beyond_ends():
    before = to_frenet(STRAIGHT, CartesianPoint(-5, 3))
    assert before.s == 0.0 and before.t == pytest.approx(3.0)
    after = to_frenet(STRAIGHT, CartesianPoint(130, -2))
    assert after.s == pytest.approx(100.0) and after.t == pytest.approx(-2.0)


def test_equidistant_tie_prefers_smaller_s():
    # (5, 5) lies 5 m from both legs of the corner; the first leg wins
    f = to_frenet(CORNER, CartesianPoint(5, 5))
    assert f.s == pytest.approx(5.0)
    assert f.t == pytest.approx(5.0)


def test_degenerate_path_rejected():
    with pytest.raises(InvalidPathError):
        ReferencePath.from_points([CartesianPoint(1, 1), CartesianPoint(1, 1)])
    with pytest.raises(InvalidPathError):
        ReferencePath.from_points([])


def test_duplicate_vertices_are_dropped():
    path = ReferencePath.from_points([CartesianPoint(0, 0), CartesianPoint(0, 0), CartesianPoint(10, 0)])
    assert path.length == 10.0
    assert len(path.points) == 2


def test_to_cartesian_examples():
    assert to_cartesian(STRAIGHT, FrenetPose(5, 2)) == pytest.approx(CartesianPoint(5, 2))
    assert to_cartesian(STRAIGHT, FrenetPose(0, 0)) == pytest.approx(CartesianPoint(0, 0))
    assert to_cartesian(CORNER, FrenetPose(15, -1)) == pytest.approx(CartesianPoint(11, 5))


def test_to_cartesian_range():
    with pytest.raises(RangeError):
        to_cartesian(STRAIGHT, FrenetPose(100.5, 0))
    with pytest.raises(RangeError):
        to_cartesian(STRAIGHT, FrenetPose(-0.1, 0))


def test_reflection_negates_t():
    a = to_frenet(STRAIGHT, CartesianPoint(40, 1.3))
    b = to_frenet(STRAIGHT, CartesianPoint(40, -1.3))
    assert a.s == b.s and a.t == -b.t


def _polyline():
    # random walk with bounded turning so the round trip has room around corners
    return st.lists(st.tuples(st.floats(2.0, 20.0), st.floats(-0.6, 0.6)), min_size=1, max_size=6).map(_build_path)


def _build_path(steps):
    pts = [(0.0, 0.0)]
    heading = 0.0
    for length, turn in steps:
        heading += turn
        x, y = pts[-1]
        pts.append((x + length * math.cos(heading), y + length * math.sin(heading)))
    return ReferencePath.from_points(np.array(pts))


@settings(max_examples=200, deadline=None)
@given(path=_polyline(), u=st.floats(0.0, 1.0), t=st.floats(-0.5, 0.5))
def test_round_trip(path, u, t):
    s = u * path.length
    f = to_frenet(path, to_cartesian(path, FrenetPose(s, t)))
    if f.s == pytest.approx(s, abs=1e-6) and f.t == pytest.approx(t, abs=1e-6):
        return
    # only possible on the inside of a corner, where another leg is at least as close
    cum = path.cumulative_arclength
    assert np.min(np.abs(cum[1:-1] - s)) < 1.0
    assert abs(f.t) <= abs(t) + 1e-9
    back = to_cartesian(path, f)
    want = to_cartesian(path, FrenetPose(s, t))
    assert math.hypot(back.x - want.x, back.y - want.y) < 1e-3


@settings(max_examples=100, deadline=None)
@given(xs=st.lists(st.floats(-10.0, 110.0), min_size=2, max_size=30), y=st.floats(-5, 5))
def test_s_monotone_along_path(xs, y):
    xs = sorted(xs)
    s, _ = STRAIGHT.project(np.column_stack([xs, np.full(len(xs), y)]))
    assert np.all(np.diff(s) >= 0)


def _traj(times, xs, speeds=None):
    n = len(times)
    speeds = speeds if speeds is not None else [1.0] * n
    return trajectory_from_arrays("a", times, np.column_stack([xs, np.zeros(n)]), speeds, [-1] * n)


def test_resample_linear_data():
    out = resample_1hz(_traj([0.0, 0.5, 1.0], [0.0, 5.0, 10.0]), 0.0)
    assert [st.position.x for st in out.states] == pytest.approx([0.0, 10.0])


def test_resample_interpolates_between_samples():
    out = resample_1hz(_traj([0.0, 0.4, 1.2], [0.0, 4.0, 12.0]), 0.0)
    assert out.times.tolist() == [0.0, 1.0]
    assert out.states[1].position.x == pytest.approx(10.0)


def test_resample_errors():
    with pytest.raises(EmptyInputError):
        resample_1hz(_traj([], []), 0.0)
    with pytest.raises(ValidationError):
        resample_1hz(_traj([0.0, 0.5], [0.0, 1.0]), 0.0)


def test_trajectory_rejects_bad_input():
    with pytest.raises(ValidationError):
        _traj([0.0, 0.0], [0.0, 1.0])
    with pytest.raises(ValidationError):
        _traj([0.0, 1.0], [0.0, 1.0], speeds=[1.0, -1.0])


def test_tracks_csv_round_trip(tmp_path):
    ego = trajectory_from_arrays("ego", [0.0, 0.1, 0.2], [[0, 0], [1, 0], [2, 0]], [10, 10, 10], [-2] * 3, True)
    car = trajectory_from_arrays("car", [0.1, 0.2], [[5, 3.5], [6.25, 3.4]], [12.5, 12.5], [-1, -1])
    write_tracks_csv(tmp_path / "t.csv", [ego, car])
    back = read_tracks_csv(tmp_path / "t.csv")
    assert list(back) == ["ego", "car"]
    assert back["ego"].is_ego and not back["car"].is_ego
    np.testing.assert_allclose(back["car"].xy, car.xy)
    assert back["car"].lanes.tolist() == [-1, -1]


def test_tracks_csv_missing_column(tmp_path):
    (tmp_path / "bad.csv").write_text("time_s,object_id,x_m\n0,a,1\n")
    with pytest.raises(ValidationError):
        read_tracks_csv(tmp_path / "bad.csv")
