"""Shared builders for the test suite."""

import numpy as np

from scenkit.events import CUT_IN, CUT_OUT
from scenkit.params import LaneChangeParameters


def random_params(rng: np.random.Generator) -> LaneChangeParameters:
    """Any valid parameter set the compiler accepts; values are not rounded."""
    kind = CUT_IN if rng.random() < 0.5 else CUT_OUT
    ego_lane = int(rng.choice([-1, -2, -3]))
    side = int(rng.choice([lane for lane in (ego_lane + 1, ego_lane - 1) if -3 <= lane <= -1]))
    ch_lane0, ch_lane_final = (side, ego_lane) if kind == CUT_IN else (ego_lane, side)
    dcs = rng.uniform(1.0, 200.0)
    dce = dcs + rng.uniform(1.0, 200.0)
    return LaneChangeParameters(
        kind=kind,
        ego_v0=rng.uniform(0.0, 40.0),
        ego_lane0=ego_lane,
        ch_v0=rng.uniform(0.0, 40.0),
        d0=rng.uniform(-50.0, 80.0),
        ch_lane0=ch_lane0,
        ch_offset0=rng.uniform(-0.5, 0.5),
        trigger_distance=rng.uniform(-30.0, 80.0),
        cut_distance=rng.uniform(0.5, dce - dcs),
        v_cut_start=rng.uniform(0.0, 40.0),
        dist_cut_start=dcs,
        dur_to_cut_start=rng.uniform(0.1, 10.0),
        v_cut_end=rng.uniform(0.0, 40.0),
        dist_cut_end=dce,
        dur_cut_start_to_end=rng.uniform(0.1, 10.0),
        v_final=rng.uniform(0.0, 40.0),
        dist_total=dce + rng.uniform(1.0, 200.0),
        dur_cut_end_to_end=rng.uniform(0.1, 10.0),
        ch_offset_final=rng.uniform(-0.5, 0.5),
        ch_lane_final=ch_lane_final,
    )
