"""Lane-change parameters at four control points, plus the two-point baseline.

All distances are longitudinal Frenet distances along the ego path.  Speeds
come from the log's speed column, not from differentiated positions.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ExtractionError, ValidationError
from .fileio import atomic_write_json
from .events import CUT_IN, CUT_OUT, KINDS, LaneChangeEvent, lane_center_offset
from .geometry import ReferencePath, Trajectory

SCHEMA_VERSION = "scenkit-params-1"

# the baseline model assumes the lane change starts 5 s into the scenario
BASELINE_LEAD_TIME = 5.0

VELOCITY_FIELDS = ("v_cut_start", "v_cut_end", "v_final")


@dataclass(frozen=True)
class LaneChangeParameters:
    kind: str
    ego_v0: float
    ego_lane0: int
    ch_v0: float
    d0: float
    ch_lane0: int
    ch_offset0: float
    trigger_distance: float
    cut_distance: float
    v_cut_start: float
    dist_cut_start: float
    dur_to_cut_start: float
    v_cut_end: float
    dist_cut_end: float
    dur_cut_start_to_end: float
    v_final: float
    dist_total: float
    dur_cut_end_to_end: float
    ch_offset_final: float
    ch_lane_final: int

    @property
    def duration(self) -> float:
        return self.dur_to_cut_start + self.dur_cut_start_to_end + self.dur_cut_end_to_end

    def problems(self, tol: float = 1e-6) -> list[str]:
        """Invariant violations, one message per offending field."""
        out = []
        if self.kind not in KINDS:
            out.append(f"kind: unknown kind {self.kind!r}")
        for name in ("ego_v0", "ch_v0", "v_cut_start", "v_cut_end", "v_final"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"{name}: velocity must be >= 0, got {v}")
        for name in ("dur_to_cut_start", "dur_cut_start_to_end", "dur_cut_end_to_end"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                out.append(f"{name}: duration must be > 0, got {v}")
        for name in ("d0", "ch_offset0", "trigger_distance", "cut_distance", "ch_offset_final"):
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name}: must be finite")
        if not (0 < self.dist_cut_start < self.dist_cut_end < self.dist_total):
            out.append(
                "dist_cut_start, dist_cut_end, dist_total: must satisfy "
                f"0 < {self.dist_cut_start} < {self.dist_cut_end} < {self.dist_total}"
            )
        if not self.cut_distance > 0:
            out.append(f"cut_distance: must be > 0, got {self.cut_distance}")
        if self.cut_distance > self.dist_cut_end - self.dist_cut_start + tol:
            out.append("cut_distance: exceeds dist_cut_end - dist_cut_start")
        for name in ("ego_lane0", "ch_lane0", "ch_lane_final"):
            if getattr(self, name) not in (-1, -2, -3, -4):
                out.append(f"{name}: lane id must be in -1..-4, got {getattr(self, name)}")
        if self.kind == CUT_IN and self.ch_lane_final != self.ego_lane0:
            out.append("ch_lane_final: cut-in must end in the ego lane")
        if self.kind == CUT_OUT and self.ch_lane_final == self.ego_lane0:
            out.append("ch_lane_final: cut-out must leave the ego lane")
        return out

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LaneChangeParameters":
        return _from_dict(cls, d)


@dataclass(frozen=True)
class BaselineParameters:
    ego_v0: float
    ch_v0: float
    d0: float
    ch_relative_lane: int
    ch_offset0: float
    trigger_distance: float
    cut_distance: float
    ch_v_final: float
    ch_offset_final: float
    kind: str = CUT_IN

    def problems(self) -> list[str]:
        out = []
        for name in ("ego_v0", "ch_v0", "ch_v_final"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"{name}: velocity must be >= 0, got {v}")
        if self.ch_relative_lane not in (-1, 1):
            out.append(f"ch_relative_lane: must be -1 or +1, got {self.ch_relative_lane}")
        if not self.cut_distance > 0:
            out.append(f"cut_distance: must be > 0, got {self.cut_distance}")
        for name in ("d0", "ch_offset0", "trigger_distance", "ch_offset_final"):
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name}: must be finite")
        if self.kind not in KINDS:
            out.append(f"kind: unknown kind {self.kind!r}")
        return out

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BaselineParameters":
        return _from_dict(cls, d)


def _from_dict(cls, d: dict[str, Any]):
    if not isinstance(d, dict):
        raise ValidationError(f"{cls.__name__}: expected an object")
    problems = []
    values = {}
    for f in fields(cls):
        if f.name not in d:
            if f.default is dataclasses.MISSING:
                problems.append(f"{f.name}: missing")
            continue
        raw = d[f.name]
        try:
            if f.type == "int":
                if isinstance(raw, bool) or float(raw) != int(raw):
                    raise ValueError
                values[f.name] = int(raw)
            elif f.type == "float":
                if isinstance(raw, bool):
                    raise ValueError
                values[f.name] = float(raw)
            else:
                values[f.name] = str(raw)
        except (TypeError, ValueError):
            problems.append(f"{f.name}: invalid value {raw!r}")
    unknown = sorted(set(d) - {f.name for f in fields(cls)})
    problems += [f"{name}: unknown field" for name in unknown]
    if problems:
        raise ValidationError(f"{cls.__name__}: " + "; ".join(problems))
    return cls(**values)


class _Sampler:
    """Frenet state of one trajectory, interpolated at arbitrary times."""

    def __init__(self, traj: Trajectory, path: ReferencePath, name: str):
        self.traj = traj
        self.name = name
        self.s, self.t = path.project(traj.xy)

    def check(self, time: float, point: str) -> None:
        if time < self.traj.start - 1e-6 or time > self.traj.end + 1e-6:
            raise ExtractionError(f"{point} at t={time:.3f} s lies outside the {self.name} data "
                                  f"[{self.traj.start:.3f}, {self.traj.end:.3f}]")

    def at(self, time: float) -> tuple[float, float, float, int]:
        times = self.traj.times
        return (float(np.interp(time, times, self.s)), float(np.interp(time, times, self.t)),
                float(np.interp(time, times, self.traj.speeds)), int(self.traj.lane_at(time)))


def _control_states(event, ego, challenger, path):
    if event.truncated:
        raise ExtractionError(f"event of {event.challenger_id} is truncated by the log boundary")
    if challenger.object_id != event.challenger_id:
        raise ExtractionError(f"challenger trajectory {challenger.object_id!r} does not match "
                              f"event challenger {event.challenger_id!r}")
    e = _Sampler(ego, path, "ego")
    c = _Sampler(challenger, path, "challenger")
    points = {
        "scenario_start": event.t_scenario_start,
        "cut_start": event.t_cut_start,
        "cut_end": event.t_cut_end,
        "scenario_end": event.t_scenario_end,
    }
    for name, time in points.items():
        e.check(time, name)
        c.check(time, name)
    return {name: (e.at(time), c.at(time)) for name, time in points.items()}


def extract_4pt(
    event: LaneChangeEvent,
    ego: Trajectory,
    challenger: Trajectory,
    path: ReferencePath | None = None,
    lane_width: float = 3.5,
) -> LaneChangeParameters:
    """Sample the 19 lane-change parameters at the event's four control points."""
    if path is None:
        path = ReferencePath.from_trajectory(ego)
    cp = _control_states(event, ego, challenger, path)
    (e_s0, _, e_v0, e_lane0), (c_s0, c_t0, c_v0, c_lane0) = cp["scenario_start"]
    (e_s1, _, _, _), (c_s1, _, c_v1, _) = cp["cut_start"]
    _, (c_s2, _, c_v2, _) = cp["cut_end"]
    (_, _, _, e_lane3), (c_s3, c_t3, c_v3, c_lane3) = cp["scenario_end"]

    params = LaneChangeParameters(
        kind=event.kind,
        ego_v0=e_v0,
        ego_lane0=e_lane0,
        ch_v0=c_v0,
        d0=c_s0 - e_s0,
        ch_lane0=c_lane0,
        ch_offset0=c_t0 - lane_center_offset(c_lane0, e_lane0, lane_width),
        trigger_distance=c_s1 - e_s1,
        cut_distance=c_s2 - c_s1,
        v_cut_start=c_v1,
        dist_cut_start=c_s1 - c_s0,
        dur_to_cut_start=event.t_cut_start - event.t_scenario_start,
        v_cut_end=c_v2,
        dist_cut_end=c_s2 - c_s0,
        dur_cut_start_to_end=event.t_cut_end - event.t_cut_start,
        v_final=c_v3,
        dist_total=c_s3 - c_s0,
        dur_cut_end_to_end=event.t_scenario_end - event.t_cut_end,
        ch_offset_final=c_t3 - lane_center_offset(c_lane3, e_lane3, lane_width),
        ch_lane_final=c_lane3,
    )
    problems = params.problems()
    if problems:
        raise ExtractionError("extracted parameters violate invariants: " + "; ".join(problems))
    return params


def baseline_from_4pt(p: LaneChangeParameters) -> BaselineParameters:
    """Project a four-point parameter set onto the two-point baseline."""
    side_lane = p.ch_lane0 if p.kind == CUT_IN else p.ch_lane_final
    return BaselineParameters(
        ego_v0=p.ego_v0,
        ch_v0=p.dist_cut_start / BASELINE_LEAD_TIME,
        d0=p.d0,
        ch_relative_lane=1 if side_lane > p.ego_lane0 else -1,
        ch_offset0=p.ch_offset0,
        trigger_distance=p.trigger_distance,
        cut_distance=p.cut_distance,
        ch_v_final=p.v_final,
        ch_offset_final=p.ch_offset_final,
        kind=p.kind,
    )


def extract_2pt(
    event: LaneChangeEvent,
    ego: Trajectory,
    challenger: Trajectory,
    path: ReferencePath | None = None,
    lane_width: float = 3.5,
) -> BaselineParameters:
    """Two-control-point baseline: constant initial speed covering the pre-maneuver distance in 5 s."""
    return baseline_from_4pt(extract_4pt(event, ego, challenger, path, lane_width))


def write_params_json(path: str | Path, records: list[dict[str, Any]], metadata: dict | None = None) -> None:
    """Write parameter records; each record holds ``params`` and optionally ``baseline``/``event``."""
    payload = {"schema": SCHEMA_VERSION, "scenarios": records}
    if metadata:
        payload["metadata"] = metadata
    atomic_write_json(path, payload)


def read_params_json(path: str | Path) -> tuple[list[dict[str, Any]], dict]:
    """Return ([{'params': LaneChangeParameters, ...}], metadata)."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(payload, dict) or payload.get("schema") != SCHEMA_VERSION:
        raise ValidationError(f"{path}: expected schema {SCHEMA_VERSION!r}")
    records = payload.get("scenarios")
    if not isinstance(records, list):
        raise ValidationError(f"{path}: 'scenarios' must be a list")
    out = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "params" not in rec:
            raise ValidationError(f"{path}: scenario {i} has no 'params' object")
        item = dict(rec)
        item["params"] = LaneChangeParameters.from_dict(rec["params"])
        if "baseline" in rec:
            item["baseline"] = BaselineParameters.from_dict(rec["baseline"])
        out.append(item)
    return out, payload.get("metadata", {})
