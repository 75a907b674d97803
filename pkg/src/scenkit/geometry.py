"""Reference paths, Frenet conversion and trajectory containers.

The reference path is the ego vehicle's own recorded path, treated as a
piecewise-linear polyline.  Lateral offsets are positive to the left of the
direction of travel.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fileio import atomic_write_text
from .errors import EmptyInputError, InsufficientInputError, InvalidPathError, RangeError, ValidationError

TRACKS_HEADER = ("time_s", "object_id", "x_m", "y_m", "speed_mps", "lane_id", "is_ego")

_CHUNK = 2048


@dataclass(frozen=True)
class CartesianPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class FrenetPose:
    s: float
    t: float


class ReferencePath:
    """Piecewise-linear reference line with cumulative arclength."""

    def __init__(self, points: Sequence[CartesianPoint] | np.ndarray):
        xy = _as_xy(points)
        if len(xy) < 2:
            raise InvalidPathError("reference path needs at least 2 points")
        seg = np.diff(xy, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lengths <= 0.0):
            raise InvalidPathError("consecutive reference points must be distinct")
        self.xy = xy
        self._seg = seg
        self._len = lengths
        self.cumulative_arclength = np.concatenate([[0.0], np.cumsum(lengths)])
        self.xy.setflags(write=False)
        self.cumulative_arclength.setflags(write=False)

    @classmethod
    def from_points(cls, points: Sequence[CartesianPoint] | np.ndarray) -> "ReferencePath":
        """Build a path, dropping consecutive duplicate points first."""
        xy = _as_xy(points)
        if len(xy) == 0:
            raise InvalidPathError("empty reference path")
        keep = np.ones(len(xy), dtype=bool)
        keep[1:] = np.any(np.diff(xy, axis=0) != 0.0, axis=1)
        xy = xy[keep]
        if len(xy) < 2:
            raise InvalidPathError("degenerate reference path: all points coincide")
        return cls(xy)

    @classmethod
    def from_trajectory(cls, traj: "Trajectory") -> "ReferencePath":
        return cls.from_points(traj.xy)

    @property
    def points(self) -> list[CartesianPoint]:
        return [CartesianPoint(float(x), float(y)) for x, y in self.xy]

    @property
    def length(self) -> float:
        return float(self.cumulative_arclength[-1])

    def project(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised Frenet projection of an (N, 2) array; returns (s, t)."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        s_out = np.empty(len(xy))
        t_out = np.empty(len(xy))
        for lo in range(0, len(xy), _CHUNK):
            s_out[lo:lo + _CHUNK], t_out[lo:lo + _CHUNK] = self._project_chunk(xy[lo:lo + _CHUNK])
        return s_out, t_out

    def _project_chunk(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self.xy[:-1]
        d = self._seg
        l2 = self._len ** 2
        rel = p[:, None, :] - a[None, :, :]
        raw_u = (rel[..., 0] * d[:, 0] + rel[..., 1] * d[:, 1]) / l2
        u = np.clip(raw_u, 0.0, 1.0)
        foot = a[None] + u[..., None] * d[None]
        dist2 = np.sum((p[:, None, :] - foot) ** 2, axis=2)
        # argmin returns the first minimum: ties resolve to the smaller s
        idx = np.argmin(dist2, axis=1)
        rows = np.arange(len(p))
        ui = raw_u[rows, idx]
        di = d[idx]
        ri = rel[rows, idx]
        cross = di[:, 0] * ri[:, 1] - di[:, 1] * ri[:, 0]
        seg_len = self._len[idx]
        last = len(d) - 1
        before = (idx == 0) & (ui < 0.0)
        beyond = (idx == last) & (ui > 1.0)
        inside = ~(before | beyond)
        s = self.cumulative_arclength[idx] + np.clip(ui, 0.0, 1.0) * seg_len
        t = np.empty(len(p))
        # off the ends: perpendicular distance to the end segment's extension
        t[~inside] = cross[~inside] / seg_len[~inside]
        t[inside] = np.sign(cross[inside]) * np.sqrt(dist2[rows, idx][inside])
        return s, t

    def __repr__(self) -> str:
        return f"ReferencePath(n={len(self.xy)}, length={self.length:.3f})"


def _as_xy(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        xy = np.array(points, dtype=float).reshape(-1, 2)
    else:
        xy = np.array([(p.x, p.y) for p in points], dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(xy)):
        raise InvalidPathError("reference path contains non-finite coordinates")
    return xy


def to_frenet(path: ReferencePath, p: CartesianPoint) -> FrenetPose:
    s, t = path.project(np.array([[p.x, p.y]]))
    return FrenetPose(float(s[0]), float(t[0]))


def to_cartesian(path: ReferencePath, f: FrenetPose) -> CartesianPoint:
    length = path.length
    if not (0.0 <= f.s <= length):
        raise RangeError(f"s={f.s} outside [0, {length}]")
    cum = path.cumulative_arclength
    i = int(np.searchsorted(cum, f.s, side="right")) - 1
    i = min(max(i, 0), len(cum) - 2)
    seg = path._seg[i]
    seg_len = path._len[i]
    u = (f.s - cum[i]) / seg_len
    base = path.xy[i] + u * seg
    normal = np.array([-seg[1], seg[0]]) / seg_len
    x, y = base + f.t * normal
    return CartesianPoint(float(x), float(y))


@dataclass(frozen=True)
class TrackedState:
    time: float
    object_id: str
    position: CartesianPoint
    speed: float
    lane_id: int
    is_ego: bool = False

    def __post_init__(self):
        if not self.speed >= 0.0:
            raise ValidationError(f"negative speed {self.speed} for {self.object_id} at t={self.time}")


@dataclass(frozen=True)
class Trajectory:
    states: tuple[TrackedState, ...]

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if states:
            ids = {st.object_id for st in states}
            if len(ids) != 1:
                raise ValidationError(f"trajectory mixes object ids {sorted(ids)}")
            times = [st.time for st in states]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValidationError(f"trajectory {states[0].object_id}: times not strictly increasing")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def object_id(self) -> str:
        if not self.states:
            raise EmptyInputError("empty trajectory")
        return self.states[0].object_id

    @property
    def is_ego(self) -> bool:
        return bool(self.states) and self.states[0].is_ego

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([st.time for st in self.states], dtype=float)

    @cached_property
    def xy(self) -> np.ndarray:
        return np.array([(st.position.x, st.position.y) for st in self.states], dtype=float).reshape(-1, 2)

    @cached_property
    def speeds(self) -> np.ndarray:
        return np.array([st.speed for st in self.states], dtype=float)

    @cached_property
    def lanes(self) -> np.ndarray:
        return np.array([st.lane_id for st in self.states], dtype=int)

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def lane_at(self, time: float | np.ndarray) -> np.ndarray | int:
        """Lane of the latest sample at or before ``time`` (first sample if earlier)."""
        idx = np.searchsorted(self.times, np.asarray(time) + 1e-9, side="right") - 1
        idx = np.clip(idx, 0, len(self.states) - 1)
        lanes = self.lanes[idx]
        return int(lanes) if np.ndim(lanes) == 0 else lanes

    def speed_at(self, time):
        return np.interp(time, self.times, self.speeds)

    def position_at(self, time) -> np.ndarray:
        return np.stack([np.interp(time, self.times, self.xy[:, 0]),
                         np.interp(time, self.times, self.xy[:, 1])], axis=-1)


def resample_1hz(traj: Trajectory, t0: float) -> Trajectory:
    """Linearly interpolate position and speed at t0, t0 + 1, ... within the trajectory."""
    if len(traj) == 0:
        raise EmptyInputError("cannot resample an empty trajectory")
    times = traj.times
    if traj.end - traj.start < 1.0 - 1e-9:
        raise InsufficientInputError("trajectory spans less than one second")
    if t0 < traj.start - 1e-9 or t0 > traj.end + 1e-9:
        raise RangeError(f"t0={t0} outside trajectory span [{traj.start}, {traj.end}]")
    n = int(math.floor(traj.end - t0 + 1e-9)) + 1
    grid = t0 + np.arange(n, dtype=float)
    xs = np.interp(grid, times, traj.xy[:, 0])
    ys = np.interp(grid, times, traj.xy[:, 1])
    vs = np.interp(grid, times, traj.speeds)
    lanes = traj.lane_at(grid)
    first = traj.states[0]
    return Trajectory(tuple(
        TrackedState(float(tk), first.object_id, CartesianPoint(float(x), float(y)), float(v), int(ln), first.is_ego)
        for tk, x, y, v, ln in zip(grid, xs, ys, vs, np.atleast_1d(lanes))
    ))


def trajectory_from_arrays(object_id: str, times, xy, speeds, lanes, is_ego: bool = False) -> Trajectory:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    return Trajectory(tuple(
        TrackedState(float(t), str(object_id), CartesianPoint(float(x), float(y)), float(v), int(ln), is_ego)
        for t, (x, y), v, ln in zip(times, xy, speeds, lanes)
    ))


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no", ""):
        return False
    raise ValidationError(f"invalid is_ego value {text!r}")


def read_tracks_csv(path: str | Path) -> dict[str, Trajectory]:
    """Read a trajectory log; returns trajectories keyed by object id (insertion order)."""
    rows: dict[str, list[TrackedState]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in TRACKS_HEADER if c not in (reader.fieldnames or ())]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, 2):
            try:
                st = TrackedState(
                    time=float(row["time_s"]),
                    object_id=row["object_id"].strip(),
                    position=CartesianPoint(float(row["x_m"]), float(row["y_m"])),
                    speed=float(row["speed_mps"]),
                    lane_id=int(row["lane_id"]),
                    is_ego=_parse_bool(row["is_ego"]),
                )
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            rows.setdefault(st.object_id, []).append(st)
    out = {}
    for oid, states in rows.items():
        states.sort(key=lambda st: st.time)
        out[oid] = Trajectory(tuple(states))
    return out


def split_ego(trajectories: dict[str, Trajectory]) -> tuple[Trajectory, list[Trajectory]]:
    egos = [tr for tr in trajectories.values() if tr.is_ego]
    if len(egos) != 1:
        raise ValidationError(f"expected exactly one ego trajectory, found {len(egos)}")
    ego = egos[0]
    return ego, [tr for tr in trajectories.values() if tr is not ego]


def write_tracks_csv(path: str | Path, trajectories: Iterable[Trajectory]) -> None:
    rows = [st for tr in trajectories for st in tr.states]
    rows.sort(key=lambda st: (st.time, not st.is_ego, st.object_id))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACKS_HEADER)
    for st in rows:
        w.writerow([f"{st.time:.6f}", st.object_id, f"{st.position.x:.6f}", f"{st.position.y:.6f}",
                    f"{st.speed:.6f}", st.lane_id, int(st.is_ego)])
    atomic_write_text(path, buf.getvalue())
