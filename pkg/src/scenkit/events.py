"""Cut-in / cut-out detection on Frenet-projected trajectories.

Candidates are found by comparing lane membership and lateral offset to the
ego path once per second.  The maneuver boundaries are then refined at the
native sample rate from the challenger's lateral velocity.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .errors import ValidationError
from .fileio import atomic_write_json
from .geometry import ReferencePath, Trajectory

log = logging.getLogger(__name__)

CUT_IN = "cut_in"
CUT_OUT = "cut_out"
KINDS = (CUT_IN, CUT_OUT)

_EPS = 1e-9


@dataclass(frozen=True)
class LaneChangeEvent:
    kind: str
    challenger_id: str
    t_scenario_start: float
    t_cut_start: float
    t_cut_end: float
    t_scenario_end: float
    truncated: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if not (self.t_scenario_start < self.t_cut_start < self.t_cut_end <= self.t_scenario_end):
            raise ValidationError(
                "event timestamps must satisfy scenario_start < cut_start < cut_end <= scenario_end"
            )

    def shifted(self, dt: float) -> "LaneChangeEvent":
        return LaneChangeEvent(self.kind, self.challenger_id, self.t_scenario_start + dt, self.t_cut_start + dt,
                               self.t_cut_end + dt, self.t_scenario_end + dt, self.truncated)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LaneChangeEvent":
        try:
            return cls(str(d["kind"]), str(d["challenger_id"]), float(d["t_scenario_start"]),
                       float(d["t_cut_start"]), float(d["t_cut_end"]), float(d["t_scenario_end"]),
                       bool(d.get("truncated", False)))
        except KeyError as exc:
            raise ValidationError(f"event record missing field {exc.args[0]!r}") from None


def lane_center_offset(lane: int, ego_lane: int, lane_width: float) -> float:
    """Lateral position of ``lane``'s centre relative to the ego lane centre (left positive)."""
    return (lane - ego_lane) * lane_width


def _first_true(mask: np.ndarray, start: int = 0) -> int | None:
    hits = np.flatnonzero(mask[start:])
    return int(hits[0]) + start if len(hits) else None


def _maneuver_bounds(times, lat, crossing: int, direction: float, target: float, cfg: Config):
    """Native-rate (start_idx, end_idx, ended) around a threshold crossing; None if no maneuver."""
    n = len(times)
    vel = np.diff(lat) / np.diff(times) * direction  # interval j spans samples j..j+1
    j = crossing - 1
    if j < 0 or vel[j] <= cfg.lat_vel_start:
        return None
    run_lo = j
    while run_lo > 0 and vel[run_lo - 1] > cfg.lat_vel_start:
        run_lo -= 1
    run_hi = j
    while run_hi + 1 < len(vel) and vel[run_hi + 1] > cfg.lat_vel_start:
        run_hi += 1
    if times[run_hi + 1] - times[run_lo] < cfg.lat_vel_hold - _EPS:
        return None

    start = run_lo
    while start > 0 and vel[start - 1] > cfg.lat_vel_floor:
        start -= 1

    # coarse settle: near the target lane centre with low lateral speed for settle_hold
    speed = np.abs(vel)
    near = np.abs(lat - target) < cfg.settle_eps
    calm = np.append(speed < cfg.lat_vel_start, True)
    ok = near & calm
    end = None
    k = run_hi + 1
    while k < n:
        if ok[k]:
            horizon = np.searchsorted(times, times[k] + cfg.settle_hold - _EPS, side="left")
            if horizon >= n:
                break
            if np.all(ok[k:horizon + 1]):
                end = k
                break
        k += 1
    if end is None:
        return start, n - 1, False
    while end < n - 1 and speed[end] > cfg.lat_vel_floor:
        end += 1
    return start, end, True


def _detect_one(ego: Trajectory, other: Trajectory, path: ReferencePath, cfg: Config) -> list[LaneChangeEvent]:
    lo = max(ego.start, other.start)
    hi = min(ego.end, other.end)
    if hi - lo < cfg.preroll + 2.0 - _EPS:
        log.debug("skipping %s: overlap %.2f s too short", other.object_id, hi - lo)
        return []
    times = other.times
    _, lat = path.project(other.xy)

    k0 = math.ceil((lo - ego.start) - _EPS)
    ticks = ego.start + np.arange(k0, math.floor(hi - ego.start + _EPS) + 1, dtype=float)
    tick_lat = np.interp(ticks, times, lat)
    tick_ego_lane = np.atleast_1d(ego.lane_at(ticks))

    events: list[LaneChangeEvent] = []
    last_end = -math.inf
    i = 1
    while i < len(ticks):
        prev, cur = i - 1, i
        kind = None
        if abs(tick_lat[prev]) >= cfg.cut_in_threshold and abs(tick_lat[cur]) < cfg.cut_in_threshold:
            kind = CUT_IN
        elif abs(tick_lat[prev]) <= cfg.cut_out_threshold and abs(tick_lat[cur]) > cfg.cut_out_threshold:
            kind = CUT_OUT
        if kind is None or ticks[prev] < last_end:
            i += 1
            continue

        window = (times > ticks[prev] + _EPS) & (times <= ticks[cur] + _EPS)
        if kind == CUT_IN:
            crossing = _first_true(window & (np.abs(lat) < cfg.cut_in_threshold))
        else:
            crossing = _first_true(window & (np.abs(lat) > cfg.cut_out_threshold))
        if crossing is None:
            i += 1
            continue

        ego_lane = int(tick_ego_lane[prev])
        if kind == CUT_IN:
            direction = -math.copysign(1.0, tick_lat[prev])
            target = 0.0
        else:
            direction = math.copysign(1.0, lat[crossing])
            target = lane_center_offset(ego_lane + (1 if direction > 0 else -1), ego_lane, cfg.lane_width)

        bounds = _maneuver_bounds(times, lat, crossing, direction, target, cfg)
        if bounds is None:
            i += 1
            continue
        start_idx, end_idx, ended = bounds
        t_cs = float(times[start_idx])
        t_ce = float(times[end_idx])
        # lane membership where the maneuver begins decides cut-in versus cut-out
        in_ego_lane = int(other.lane_at(t_cs)) == int(ego.lane_at(t_cs))
        if t_ce <= t_cs or in_ego_lane != (kind == CUT_OUT):
            i += 1
            continue
        t_ss = t_cs - cfg.preroll
        t_se = t_ce + cfg.postroll
        truncated = (not ended) or t_ss < lo - _EPS or t_se > hi + _EPS
        if events and t_cs - events[-1].t_cut_end <= cfg.postroll:
            log.info("dropping %s event of %s at %.2f s: overlaps previous maneuver",
                     kind, other.object_id, t_cs)
        else:
            events.append(LaneChangeEvent(kind, other.object_id, t_ss, t_cs, t_ce, t_se, truncated))
        last_end = t_ce
        i += 1
    return events


def detect_events(
    ego: Trajectory,
    others: Sequence[Trajectory],
    path: ReferencePath | None = None,
    cfg: Config = DEFAULT_CONFIG,
) -> list[LaneChangeEvent]:
    """Detect cut-in and cut-out events of every non-ego trajectory.

    Truncated events are reported with ``truncated=True``; callers decide
    whether to keep them.
    """
    if path is None:
        path = ReferencePath.from_trajectory(ego)
    events = []
    for other in others:
        events.extend(_detect_one(ego, other, path, cfg))
    events.sort(key=lambda e: (e.t_cut_start, e.challenger_id))
    return events


def write_events_json(path: str | Path, events: Sequence[LaneChangeEvent], metadata: dict | None = None) -> None:
    payload = {"events": [e.to_dict() for e in events]}
    if metadata:
        payload["metadata"] = metadata
    atomic_write_json(path, payload)


def read_events_json(path: str | Path) -> list[LaneChangeEvent]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    records = payload["events"] if isinstance(payload, dict) and "events" in payload else payload
    if isinstance(records, dict):
        records = [records]
    return [LaneChangeEvent.from_dict(r) for r in records]
