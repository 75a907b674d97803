"""Trajectory similarity (RMSE) and RSS longitudinal risk."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .compiler import CHALLENGER, EGO
from .config import DEFAULT_CONFIG, Config
from .errors import EmptyInputError, NotApplicableError, RangeError, ValidationError
from .events import LaneChangeEvent
from .geometry import FrenetPose, ReferencePath, Trajectory
from .player import PlaybackTrace

LONGITUDINAL = "longitudinal"
LATERAL = "lateral"
_EPS = 1e-9


@dataclass(frozen=True)
class AlignedPair:
    """Real and generated Frenet poses at matching 1 Hz instants from the cut start on."""

    real: tuple[FrenetPose, ...]
    gen: tuple[FrenetPose, ...]

    def __post_init__(self):
        object.__setattr__(self, "real", tuple(self.real))
        object.__setattr__(self, "gen", tuple(self.gen))
        if len(self.real) != len(self.gen):
            raise ValidationError(f"aligned series differ in length: {len(self.real)} vs {len(self.gen)}")
        if not self.real:
            raise EmptyInputError("empty alignment")

    @property
    def n(self) -> int:
        return len(self.real)

    @classmethod
    def from_arrays(cls, real_s, real_t, gen_s, gen_t) -> "AlignedPair":
        return cls(tuple(FrenetPose(float(s), float(t)) for s, t in zip(real_s, real_t)),
                   tuple(FrenetPose(float(s), float(t)) for s, t in zip(gen_s, gen_t)))

    def axis(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        attr = {LONGITUDINAL: "s", LATERAL: "t"}.get(name)
        if attr is None:
            raise ValidationError(f"axis must be {LONGITUDINAL!r} or {LATERAL!r}, got {name!r}")
        return (np.array([getattr(p, attr) for p in self.real]), np.array([getattr(p, attr) for p in self.gen]))


def rmse(pair: AlignedPair, axis: str = LONGITUDINAL) -> float:
    real, gen = pair.axis(axis)
    return float(np.sqrt(np.mean((real - gen) ** 2)))


@dataclass(frozen=True)
class RssParameters:
    rho: float = 1.0
    a_max_accel: float = 3.5
    a_min_brake: float = 4.0
    a_max_brake: float = 8.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (math.isfinite(value) and value > 0):
                raise RangeError(f"RSS parameter {name} must be > 0, got {value}")

    @classmethod
    def from_config(cls, cfg: Config) -> "RssParameters":
        return cls(cfg.rss_rho, cfg.rss_a_max_accel, cfg.rss_a_min_brake, cfg.rss_a_max_brake)


DEFAULT_RSS = RssParameters()


def rss_d_min(v_r: float, v_f: float, p: RssParameters = DEFAULT_RSS) -> float:
    """Minimum safe longitudinal gap between a rear car at ``v_r`` and a front car at ``v_f``."""
    if v_r < 0 or v_f < 0:
        raise RangeError(f"speeds must be >= 0, got v_r={v_r}, v_f={v_f}")
    v_resp = v_r + p.rho * p.a_max_accel
    raw = (v_r * p.rho + 0.5 * p.a_max_accel * p.rho ** 2
           + v_resp ** 2 / (2 * p.a_min_brake) - v_f ** 2 / (2 * p.a_max_brake))
    return max(0.0, raw)


@dataclass(frozen=True)
class RiskSample:
    time: float
    d_min: float
    gap: float
    violating: bool


@dataclass(frozen=True)
class RiskReport:
    records: tuple[RiskSample, ...]
    risky: bool
    violation_fraction: float

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise EmptyInputError("risk report has no samples")
        if any(r.violating != (r.gap < r.d_min) for r in self.records):
            raise ValidationError("violating flag must equal gap < d_min")
        frac = sum(r.violating for r in self.records) / len(self.records)
        if abs(frac - self.violation_fraction) > 1e-12:
            raise ValidationError("violation_fraction inconsistent with records")


def risk_from_series(times, gaps, v_rear, v_front, p: RssParameters = DEFAULT_RSS,
                     risk_fraction: float = DEFAULT_CONFIG.risk_fraction) -> RiskReport:
    records = []
    for time, gap, vr, vf in zip(times, gaps, v_rear, v_front):
        d = rss_d_min(float(vr), float(vf), p)
        records.append(RiskSample(float(time), d, float(gap), bool(gap < d)))
    if not records:
        raise EmptyInputError("risk report has no samples")
    frac = sum(r.violating for r in records) / len(records)
    return RiskReport(tuple(records), frac > risk_fraction, frac)


def risk_report(
    trace: PlaybackTrace,
    p: RssParameters = DEFAULT_RSS,
    cfg: Config = DEFAULT_CONFIG,
    fire_event: str = "LaneChange",
) -> RiskReport:
    """RSS check at 1 Hz from the lane-change trigger to the end of the trace.

    The challenger counts as the front vehicle when it is ahead or already in
    the ego lane; otherwise the ego is in front.
    """
    if fire_event not in trace.fired:
        raise NotApplicableError(f"{fire_event} never fired; risk window undefined")
    for name in (EGO, CHALLENGER):
        if name not in trace.entities:
            raise ValidationError(f"trace lacks entity {name!r}")
    t0 = trace.fired[fire_event]
    times = t0 + np.arange(0, math.floor(trace.end - t0 + _EPS) + 1, dtype=float)
    s_e, _, v_e = trace.sample(EGO, times)
    s_c, _, v_c = trace.sample(CHALLENGER, times)
    same_lane = np.array([trace.lane_at(CHALLENGER, t) == trace.lane_at(EGO, t) for t in times])
    ch_front = same_lane | (s_c >= s_e)
    clearance = cfg.vehicle_length if cfg.freespace else 0.0  # two half-lengths
    gap = np.where(ch_front, s_c - s_e, s_e - s_c) - clearance
    v_rear = np.where(ch_front, v_e, v_c)
    v_front = np.where(ch_front, v_c, v_e)
    return risk_from_series(times, gap, v_rear, v_front, p, cfg.risk_fraction)


def align(
    ego: Trajectory,
    challenger: Trajectory,
    event: LaneChangeEvent,
    trace: PlaybackTrace,
    path: ReferencePath | None = None,
) -> AlignedPair:
    """Pair real and generated challenger poses at 1 Hz from the cut start to the scenario end.

    Simulation time 0 corresponds to the event's scenario start.  Generated
    ``s`` is shifted so both egos coincide at that instant, and generated
    ``t`` is taken relative to the simulated ego.
    """
    if path is None:
        path = ReferencePath.from_trajectory(ego)
    lead = event.t_cut_start - event.t_scenario_start
    n_real = math.floor(event.t_scenario_end - event.t_cut_start + _EPS) + 1
    k = np.arange(n_real, dtype=float)
    real_times = event.t_cut_start + k
    sim_times = lead + k
    keep = ((sim_times <= trace.end + 2 * trace.step)
            & (real_times <= challenger.end + _EPS) & (real_times >= challenger.start - _EPS))
    real_times, sim_times = real_times[keep], sim_times[keep]
    if len(real_times) == 0:
        raise EmptyInputError("no overlap between real data and generated trace after the cut start")

    ch_s, ch_t = path.project(challenger.xy)
    real_s = np.interp(real_times, challenger.times, ch_s)
    real_t = np.interp(real_times, challenger.times, ch_t)
    ego_s, _ = path.project(ego.xy)
    ego_s0 = float(np.interp(event.t_scenario_start, ego.times, ego_s))

    g_s, g_t, _ = trace.sample(CHALLENGER, sim_times)
    e_s, e_t, _ = trace.sample(EGO, sim_times)
    gen_s = g_s - trace.entities[EGO].s[0] + ego_s0
    gen_t = g_t - e_t
    return AlignedPair.from_arrays(real_s, real_t, gen_s, gen_t)


def metrics_payload(pair: AlignedPair | None, risk: RiskReport | None, p: RssParameters = DEFAULT_RSS) -> dict:
    out = {
        "rmse_s": rmse(pair, LONGITUDINAL) if pair is not None else None,
        "rmse_t": rmse(pair, LATERAL) if pair is not None else None,
        "n": pair.n if pair is not None else 0,
        "risky": risk.risky if risk is not None else None,
        "violation_fraction": risk.violation_fraction if risk is not None else None,
        "per_second": [asdict(r) for r in risk.records] if risk is not None else [],
        "rss_constants": asdict(p),
    }
    return out


def series_rmse(real: Sequence[float], gen: Sequence[float]) -> float:
    """Convenience RMSE over two plain series."""
    real = list(real)
    gen = list(gen)
    return rmse(AlignedPair.from_arrays(real, [0.0] * len(real), gen, [0.0] * len(gen)))
