"""Seeded synthetic corpora: tracked-object logs with known parameters, and lidar clouds.

Lane-change logs are authored on a straight road along +x.  Scenario time
``tau`` runs from the scenario start; the challenger speed is piecewise linear
in ``tau`` and the lateral motion follows a half-cosine in longitudinal
progress, so the ground-truth parameters follow from exact integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import CUT_IN, CUT_OUT, LaneChangeEvent
from .geometry import Trajectory, trajectory_from_arrays
from .params import LaneChangeParameters

RATE_HZ = 10
PREROLL = 5.0
POSTROLL = 5.0
LANE_WIDTH = 3.5
LANE_COUNT = 3

PROFILES = ("cutin_basic", "cutout_basic", "mixed_basic", "cutin_varied", "mixed_varied", "lane_keep", "fixture")


def lane_center(lane: int, lane_width: float = LANE_WIDTH) -> float:
    return -(abs(lane) - 0.5) * lane_width


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise-linear speed over scenario time, held constant outside the knots."""

    knots_t: tuple[float, ...]
    knots_v: tuple[float, ...]

    def __post_init__(self):
        if self.knots_t[0] != 0.0 or len(self.knots_t) != len(self.knots_v) or len(self.knots_t) < 2:
            raise ValueError("speed profile needs >= 2 knots starting at tau = 0")

    def speed(self, tau) -> np.ndarray:
        return np.interp(tau, self.knots_t, self.knots_v)

    def distance(self, tau) -> np.ndarray:
        """Exact distance travelled since tau = 0 (negative before it)."""
        kt = np.asarray(self.knots_t, dtype=float)
        kv = np.asarray(self.knots_v, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (kv[1:] + kv[:-1]) * np.diff(kt))])
        tau = np.asarray(tau, dtype=float)
        inside = np.clip(tau, kt[0], kt[-1])
        idx = np.clip(np.searchsorted(kt, inside, side="right") - 1, 0, len(kt) - 2)
        v_in = np.interp(inside, kt, kv)
        d = cum[idx] + 0.5 * (kv[idx] + v_in) * (inside - kt[idx])
        return d + kv[0] * np.minimum(tau, 0.0) + kv[-1] * np.maximum(tau - kt[-1], 0.0)


@dataclass(frozen=True)
class SyntheticScenario:
    tracks: tuple[Trajectory, ...]
    truth: LaneChangeParameters | None
    event: LaneChangeEvent | None
    profile: str
    seed: int


def _grid(lo: float, hi: float) -> np.ndarray:
    """Integer tenths of a second covering [lo, hi]."""
    return np.arange(math.floor(lo * RATE_HZ + 1e-9), math.ceil(hi * RATE_HZ - 1e-9) + 1)


def author_lane_change(
    kind: str,
    ego_v: float,
    ego_lane: int,
    ch_lane0: int,
    ch_lane_final: int,
    speed: SpeedProfile,
    d0: float,
    cut_duration: float,
    offset0: float = 0.0,
    offset_final: float = 0.0,
    lane_width: float = LANE_WIDTH,
    distractor_lane: int | None = None,
    seed: int = 0,
    profile: str = "custom",
) -> SyntheticScenario:
    """Author a noise-free 10 Hz log; the cut starts PREROLL s into the scenario."""
    t_cs = PREROLL
    t_ce = round(t_cs + cut_duration, 1)
    t_end = t_ce + POSTROLL

    # challenger, one second of margin on both sides of the scenario
    ch_idx = _grid(-1.0, t_end + 1.0)
    tau = ch_idx / RATE_HZ
    dist = speed.distance(tau)
    d_cs, d_ce, d_end = (float(speed.distance(t)) for t in (t_cs, t_ce, t_end))
    cut_distance = d_ce - d_cs
    y0 = lane_center(ch_lane0, lane_width) + offset0
    y1 = lane_center(ch_lane_final, lane_width) + offset_final
    p = np.clip((dist - d_cs) / cut_distance, 0.0, 1.0)
    ch_y = y0 + (y1 - y0) * 0.5 * (1.0 - np.cos(math.pi * p))
    ch_x = d0 + dist
    ch_lanes = np.where(p >= 0.5, ch_lane_final, ch_lane0)

    # ego covers the challenger's whole longitudinal range so projections never clamp
    lo = min(-1.0, (ch_x.min() - 10.0) / ego_v)
    hi = max(t_end + 1.0, (ch_x.max() + 10.0) / ego_v)
    ego_idx = _grid(lo, hi)
    shift = -int(ego_idx[0])  # log time 0 is the first ego sample

    def times(idx):
        return (idx + shift) / RATE_HZ

    ego_tau = ego_idx / RATE_HZ
    ego_xy = np.column_stack([ego_v * ego_tau, np.full(len(ego_idx), lane_center(ego_lane, lane_width))])
    tracks = [
        trajectory_from_arrays("ego", times(ego_idx), ego_xy, np.full(len(ego_idx), ego_v),
                               np.full(len(ego_idx), ego_lane), is_ego=True),
        trajectory_from_arrays("challenger", times(ch_idx), np.column_stack([ch_x, ch_y]),
                               speed.speed(tau), ch_lanes),
    ]
    if distractor_lane is not None:
        dv = ego_v * 0.95
        d_idx = _grid(-1.0, t_end + 1.0)
        d_tau = d_idx / RATE_HZ
        xy = np.column_stack([5.0 + dv * d_tau, np.full(len(d_idx), lane_center(distractor_lane, lane_width))])
        tracks.append(trajectory_from_arrays("distractor", times(d_idx), xy, np.full(len(d_idx), dv),
                                             np.full(len(d_idx), distractor_lane)))

    def at(t):
        return float(speed.speed(t))

    truth = LaneChangeParameters(
        kind=kind,
        ego_v0=ego_v,
        ego_lane0=ego_lane,
        ch_v0=at(0.0),
        d0=d0,
        ch_lane0=ch_lane0,
        ch_offset0=offset0,
        trigger_distance=d0 + d_cs - ego_v * t_cs,
        cut_distance=cut_distance,
        v_cut_start=at(t_cs),
        dist_cut_start=d_cs,
        dur_to_cut_start=t_cs,
        v_cut_end=at(t_ce),
        dist_cut_end=d_ce,
        dur_cut_start_to_end=t_ce - t_cs,
        v_final=at(t_end),
        dist_total=d_end,
        dur_cut_end_to_end=t_end - t_ce,
        ch_offset_final=offset_final,
        ch_lane_final=ch_lane_final,
    )
    cs_i = round(t_cs * RATE_HZ)
    ce_i = round(t_ce * RATE_HZ)
    end_i = round(t_end * RATE_HZ)
    event = LaneChangeEvent(kind, "challenger", times(0), times(cs_i), times(ce_i), times(end_i))
    return SyntheticScenario(tuple(tracks), truth, event, profile, seed)


def _side_lanes(ego_lane: int) -> list[int]:
    return [lane for lane in (ego_lane + 1, ego_lane - 1) if -LANE_COUNT <= lane <= -1]


def random_lane_change(seed: int, kind: str | None = None, varied: bool = False, profile: str = "custom",
                       min_cut: float = 1.5, max_cut: float = 5.0) -> SyntheticScenario:
    rng = np.random.default_rng(seed)
    if kind is None:
        kind = CUT_IN if seed % 2 == 0 else CUT_OUT
    ego_lane = int(rng.choice([-1, -2, -3]))
    side = int(rng.choice(_side_lanes(ego_lane)))
    ch_lane0, ch_lane_final = (side, ego_lane) if kind == CUT_IN else (ego_lane, side)
    ego_v = float(rng.uniform(15.0, 28.0))

    # relative speed keeps one sign through the preroll so the trigger gap is crossed once
    sign = float(rng.choice([-1.0, 1.0]))
    if varied:
        # clearly non-constant preroll: the speed changes by 2-6 m/s before the cut
        lo = rng.uniform(1.5, 3.0)
        hi = lo + rng.uniform(2.0, 6.0)
        m0, m1 = (lo, hi) if rng.random() < 0.5 else (hi, lo)
    else:
        m0, m1 = rng.uniform(1.5, 5.0, size=2)
    v0 = ego_v + sign * m0
    v_cs = ego_v + sign * m1
    knots_t = [0.0, PREROLL]
    knots_v = [v0, v_cs]
    cut = round(float(rng.uniform(min_cut, max_cut)), 1)
    v_ce = max(3.0, v_cs + rng.uniform(-3.0, 3.0))
    v_end = max(3.0, v_ce + rng.uniform(-3.0, 3.0))
    knots_t += [PREROLL + cut, PREROLL + cut + POSTROLL]
    knots_v += [v_ce, v_end]
    speed = SpeedProfile(tuple(knots_t), tuple(float(v) for v in knots_v))

    pre = float(speed.distance(PREROLL)) - ego_v * PREROLL  # gap change over the preroll
    trigger = float(rng.uniform(10.0, 35.0))
    d0 = trigger - pre
    if kind == CUT_OUT and d0 < 10.0:
        # a cut-out challenger shares the ego lane, so keep it ahead the whole preroll
        trigger += 10.0 - d0
        d0 = 10.0
    offset0 = float(rng.uniform(-0.2, 0.2))
    offset_final = float(rng.uniform(-0.2, 0.2))
    others = [lane for lane in range(-1, -LANE_COUNT - 1, -1) if lane not in (ego_lane, side)]
    return author_lane_change(kind, ego_v, ego_lane, ch_lane0, ch_lane_final, speed, d0, cut, offset0,
                              offset_final, distractor_lane=others[0] if others else None, seed=seed,
                              profile=profile)


def lane_keep(seed: int, duration: float = 30.0, vehicles: int = 3, noise: float = 0.05) -> SyntheticScenario:
    """Log without lane changes: other vehicles weave inside their lanes."""
    rng = np.random.default_rng(seed)
    ego_lane = -2
    ego_v = float(rng.uniform(15.0, 28.0))
    idx = _grid(-5.0, duration + 5.0)
    tau = idx / RATE_HZ
    times = (idx - idx[0]) / RATE_HZ
    ego_xy = np.column_stack([ego_v * tau, np.full(len(idx), lane_center(ego_lane))])
    tracks = [trajectory_from_arrays("ego", times, ego_xy, np.full(len(idx), ego_v), np.full(len(idx), ego_lane),
                                     is_ego=True)]
    inner = (idx >= 0) & (tau <= duration)
    for k in range(vehicles):
        lane = int(rng.choice([-1, -2, -3]))
        v_a, v_b = rng.uniform(ego_v - 3.0, ego_v + 3.0, size=2)
        speed = SpeedProfile((0.0, duration), (float(v_a), float(v_b)))
        x0 = float(rng.uniform(15.0, 40.0)) if lane == ego_lane else float(rng.uniform(-20.0, 40.0))
        amp = float(rng.uniform(0.0, 0.4))
        period = float(rng.uniform(4.0, 12.0))
        phase = float(rng.uniform(0.0, 2 * math.pi))
        t_in = tau[inner]
        x = x0 + speed.distance(t_in) + rng.normal(0.0, noise, size=len(t_in))
        y = lane_center(lane) + amp * np.sin(2 * math.pi * t_in / period + phase) + rng.normal(0.0, noise, len(t_in))
        tracks.append(trajectory_from_arrays(f"car{k}", times[inner], np.column_stack([x, y]), speed.speed(t_in),
                                             np.full(len(t_in), lane)))
    return SyntheticScenario(tuple(tracks), None, None, "lane_keep", seed)


def fixture_scenario() -> SyntheticScenario:
    """Reference cut-in: a faster challenger overtakes, cuts in 25 m ahead, then slows.

    Used for the velocity-perturbation experiment; its risk grading changes
    from risky to safe as the challenger speeds are raised.
    """
    ego_v = 15.0
    speed = SpeedProfile((0.0, PREROLL, PREROLL + 4.0, PREROLL + 4.0 + POSTROLL), (16.0, 22.0, 18.0, 20.0))
    trigger = 25.0
    d0 = trigger - (float(speed.distance(PREROLL)) - ego_v * PREROLL)
    return author_lane_change(CUT_IN, ego_v, -2, -1, -2, speed, d0, 4.0, distractor_lane=-3, profile="fixture")


def make_scenario(profile: str, seed: int) -> SyntheticScenario:
    if profile == "cutin_basic":
        return random_lane_change(seed, CUT_IN, profile=profile)
    if profile == "cutout_basic":
        return random_lane_change(seed, CUT_OUT, profile=profile)
    if profile == "mixed_basic":
        return random_lane_change(seed, None, profile=profile)
    if profile == "cutin_varied":
        return random_lane_change(seed, CUT_IN, varied=True, profile=profile)
    if profile == "mixed_varied":
        return random_lane_change(seed, None, varied=True, profile=profile)
    if profile == "lane_keep":
        return lane_keep(seed)
    if profile == "fixture":
        return fixture_scenario()
    raise ValueError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")


# --------------------------------------------------------------------------- clouds

@dataclass(frozen=True)
class SyntheticCloud:
    points: np.ndarray  # (N, 4) x, y, z, intensity in scan order
    marking_y: tuple[float, ...]  # true lateral marking positions, left to right
    length: float


def synth_cloud(
    seed: int,
    sigma: float = 0.05,
    length: float = 60.0,
    lane_width: float = LANE_WIDTH,
    lanes: int = 2,
    row_spacing: float = 0.2,
    point_spacing: float = 0.1,
    marking_width: float = 0.12,
    dash: tuple[float, float] = (6.0, 3.0),
) -> SyntheticCloud:
    """Straight road along +x scanned in rows across it.

    The outer markings are solid, inner ones dashed.  A kerb-side barrier
    rises steeply beyond the left edge and a sign post stands off the right
    edge; neither belongs to the road surface.  Gaussian noise of ``sigma``
    is applied laterally to every point.
    """
    rng = np.random.default_rng(seed)
    marks = tuple(lane_width * lanes / 2 - k * lane_width for k in range(lanes + 1))
    y_lo = marks[-1] - 2.0
    y_hi = marks[0] + 1.0
    ys = np.arange(y_lo, y_hi + 1e-9, point_spacing)
    rows = []
    for x in np.arange(0.0, length + 1e-9, row_spacing):
        y_true = ys
        z = np.zeros_like(y_true)
        inten = rng.uniform(0.05, 0.3, size=len(y_true))
        for k, m in enumerate(marks):
            on = np.abs(y_true - m) <= marking_width / 2 + 1e-9
            if 0 < k < len(marks) - 1 and (x % sum(dash)) >= dash[0]:
                on[:] = False
            inten[on] = rng.uniform(0.7, 1.0, size=int(on.sum()))
        # barrier beyond the left edge: 50 degree slope, bright reflectors
        by = np.arange(0.1, 1.2, point_spacing)
        barrier_y = y_hi + by
        barrier_z = by * math.tan(math.radians(50.0))
        barrier_i = rng.uniform(0.6, 1.0, size=len(by))
        row = np.column_stack([
            np.full(len(y_true) + len(by), x),
            np.concatenate([y_true, barrier_y]),
            np.concatenate([z, barrier_z]),
            np.concatenate([inten, barrier_i]),
        ])
        rows.append(row)
        if abs(x - length / 2) < row_spacing / 2:
            # a bright sign post off the right edge, scanned top to bottom
            h = np.arange(2.5, 0.0, -0.1)
            rows.append(np.column_stack([np.full(len(h), x), np.full(len(h), y_lo - 1.0), h,
                                         np.full(len(h), 0.95)]))
    pts = np.vstack(rows)
    pts[:, 1] += rng.normal(0.0, sigma, size=len(pts))
    return SyntheticCloud(pts, marks, length)
