"""Fixed-step playback of a :class:`ScenarioDocument`.

Semantics, per step at time ``k * step``:

1. every unfired event condition is evaluated against the current state and
   fires (in document order) when it holds; an event fires at most once;
2. fired actions take effect from the current time: speed ramps start from
   the current speed, lane changes from the current lateral position;
3. the state is recorded, then the stop condition is checked;
4. speed advances along any active ramp and ``s`` is integrated with the
   trapezoid rule, lateral position follows the lane-change profile as a
   function of longitudinal progress.

Lateral position ``t`` is measured in the road frame (left positive, lane -1
centre at ``-w/2``).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .compiler import (
    GREATER_THAN,
    LaneChange,
    LaneOffset,
    RelativeLongitudinalDistance,
    ScenarioDocument,
    SimulationTime,
    SpeedChange,
    TraveledDistance,
)
from .errors import RangeError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_STEP = 0.01
TRACE_HEADER = ("time_s", "entity", "s_m", "t_m", "speed_mps", "lane_id")
_REL = 1e-9


def _reached(value: float, target: float) -> bool:
    return value >= target - _REL * max(1.0, abs(target))


def _below(value: float, target: float) -> bool:
    return value <= target + _REL * max(1.0, abs(target))


@dataclass
class EntityTrace:
    name: str
    s: np.ndarray
    t: np.ndarray
    speed: np.ndarray
    lane: np.ndarray


@dataclass
class PlaybackTrace:
    step: float
    times: np.ndarray
    entities: dict[str, EntityTrace]
    fired: dict[str, float] = field(default_factory=dict)
    unfired: tuple[str, ...] = ()
    stop_reason: str = "stop_condition"

    def __post_init__(self):
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValidationError("trace times must be strictly increasing")
        for ent in self.entities.values():
            if len(ent.s) != len(self.times):
                raise ValidationError(f"trace of {ent.name} has {len(ent.s)} rows for {len(self.times)} times")

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def sample(self, entity: str, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Linear interpolation of (s, t, speed) at the requested times."""
        times = np.asarray(times, dtype=float)
        tol = 2 * self.step
        if np.any(times < self.times[0] - tol) or np.any(times > self.times[-1] + tol):
            raise RangeError(f"sample times outside trace span [{self.times[0]}, {self.times[-1]}]")
        ent = self.entities[entity]
        return (np.interp(times, self.times, ent.s), np.interp(times, self.times, ent.t),
                np.interp(times, self.times, ent.speed))

    def lane_at(self, entity: str, time: float) -> int:
        idx = max(int(np.searchsorted(self.times, time + 1e-9, side="right")) - 1, 0)
        return int(self.entities[entity].lane[idx])

    def resample_1hz(self, entity: str, t0: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        times = t0 + np.arange(0, math.floor(self.end - t0 + 1e-9) + 1, dtype=float)
        return (times, *self.sample(entity, times))


class _Vehicle:
    def __init__(self, ent, road):
        self.name = ent.name
        self.road = road
        self.s = ent.s
        self.s0 = ent.s
        self.v = ent.speed
        self.lane = ent.lane
        self.offset = ent.offset
        self.t = road.lane_center(ent.lane) + ent.offset
        self.ramp = None  # (t_start, v_start, v_target, duration)
        self.change = None  # (s_start, t_start_lat, source_lane, target_lane, distance)

    @property
    def traveled(self) -> float:
        return self.s - self.s0

    def apply(self, action, now: float) -> None:
        if isinstance(action, SpeedChange):
            self.ramp = (now, self.v, action.target_speed, action.duration)
        elif isinstance(action, LaneChange):
            self.change = (self.s, self.t, self.lane, action.target_lane, action.distance)
        elif isinstance(action, LaneOffset):
            self.offset = action.value
            if self.change is None:
                self.t = self.road.lane_center(self.lane) + self.offset

    def speed_at(self, time: float) -> float:
        if self.ramp is None:
            return self.v
        t0, v0, v1, dur = self.ramp
        frac = min(1.0, max(0.0, (time - t0) / dur))
        return v0 + (v1 - v0) * frac

    def advance(self, next_time: float, step: float) -> None:
        v_new = self.speed_at(next_time)
        if self.ramp is not None and next_time - self.ramp[0] >= self.ramp[3] - 1e-12:
            self.ramp = None
        self.s += 0.5 * (self.v + v_new) * step
        self.v = v_new
        if self.change is not None:
            s_start, t_start, source, target, dist = self.change
            p = min(1.0, (self.s - s_start) / dist)
            t_end = self.road.lane_center(target) + self.offset
            self.t = t_start + (t_end - t_start) * 0.5 * (1.0 - math.cos(math.pi * p))
            self.lane = target if p >= 0.5 else source
            if p >= 1.0:
                self.change = None


def _holds(cond, vehicles: dict[str, _Vehicle], now: float) -> bool:
    if isinstance(cond, SimulationTime):
        return _reached(now, cond.value)
    if isinstance(cond, TraveledDistance):
        return _reached(vehicles[cond.entity].traveled, cond.value)
    if isinstance(cond, RelativeLongitudinalDistance):
        gap = vehicles[cond.entity].s - vehicles[cond.target].s
        return _reached(gap, cond.value) if cond.rule == GREATER_THAN else _below(gap, cond.value)
    raise ValidationError(f"unsupported condition {cond!r}")


def play(doc: ScenarioDocument, step: float = DEFAULT_STEP) -> PlaybackTrace:
    if not 0 < step <= 0.1:
        raise RangeError(f"step must be in (0, 0.1], got {step}")
    vehicles = {ent.name: _Vehicle(ent, doc.road) for ent in doc.entities}
    names = [ent.name for ent in doc.entities]
    rows = {n: ([], [], [], []) for n in names}
    fired: dict[str, float] = {}
    pending = list(doc.events)
    max_k = int(math.floor(doc.stop.timeout / step + 1e-9))
    reason = "timeout"
    k = 0
    while True:
        now = k * step
        still = []
        for ev in pending:
            if _holds(ev.condition, vehicles, now):
                vehicles[ev.actor].apply(ev.action, now)
                fired[ev.name] = now
            else:
                still.append(ev)
        pending = still
        for n in names:
            v = vehicles[n]
            cols = rows[n]
            cols[0].append(v.s)
            cols[1].append(v.t)
            cols[2].append(v.v)
            cols[3].append(v.lane)
        if _holds(doc.stop.condition, vehicles, now):
            reason = "stop_condition"
            break
        if k >= max_k:
            break
        k += 1
        for n in names:
            vehicles[n].advance(k * step, step)

    if reason == "timeout":
        log.warning("playback hit the %.1f s timeout; unfired events: %s",
                    doc.stop.timeout, ", ".join(ev.name for ev in pending) or "none")
    times = np.arange(k + 1, dtype=float) * step
    entities = {n: EntityTrace(n, *(np.array(c, dtype=float) for c in rows[n][:3]), np.array(rows[n][3], dtype=int))
                for n in names}
    return PlaybackTrace(step, times, entities, fired, tuple(ev.name for ev in pending), reason)


# --------------------------------------------------------------------------- files

def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def trace_meta(trace: PlaybackTrace) -> dict:
    return {"step": trace.step, "fired": trace.fired, "unfired": list(trace.unfired),
            "stop_reason": trace.stop_reason, "entities": list(trace.entities)}


def format_trace_csv(trace: PlaybackTrace) -> str:
    lines = [",".join(TRACE_HEADER)]
    for i, time in enumerate(trace.times):
        for ent in trace.entities.values():
            lines.append(f"{time:.6f},{ent.name},{ent.s[i]:.6f},{ent.t[i]:.6f},{ent.speed[i]:.6f},{int(ent.lane[i])}")
    return "\n".join(lines) + "\n"


def read_trace_csv(path: str | Path) -> PlaybackTrace:
    """Read a trace CSV and, when present, its ``.meta.json`` sidecar."""
    path = Path(path)
    per: dict[str, list] = {}
    times: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in TRACE_HEADER if c not in (reader.fieldnames or ())]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        try:
            for row in reader:
                time = float(row["time_s"])
                if not times or time != times[-1]:
                    times.append(time)
                per.setdefault(row["entity"], []).append(
                    (float(row["s_m"]), float(row["t_m"]), float(row["speed_mps"]), int(row["lane_id"])))
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    if not times:
        raise ValidationError(f"{path}: empty trace")
    entities = {}
    for name, recs in per.items():
        arr = np.array(recs, dtype=float)
        entities[name] = EntityTrace(name, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(int))
    meta = {}
    if _meta_path(path).exists():
        meta = json.loads(_meta_path(path).read_text(encoding="utf-8"))
    step = meta.get("step", float(times[1] - times[0]) if len(times) > 1 else DEFAULT_STEP)
    return PlaybackTrace(step, np.array(times), entities, {k: float(v) for k, v in meta.get("fired", {}).items()},
                         tuple(meta.get("unfired", ())), meta.get("stop_reason", "stop_condition"))
