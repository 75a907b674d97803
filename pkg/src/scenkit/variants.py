"""Velocity perturbations of lane-change parameters.

Distances and durations are kept as extracted; the player resolves whatever
profile results.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Mapping, Sequence

from .errors import RangeError, ValidationError
from .params import VELOCITY_FIELDS, LaneChangeParameters

log = logging.getLogger(__name__)


def perturb_fields(p: LaneChangeParameters, deltas: Mapping[str, float]) -> LaneChangeParameters:
    """Add a per-field delta to any float fields of ``p``."""
    known = {f.name: f.type for f in dataclasses.fields(p)}
    changes = {}
    for name, delta in deltas.items():
        if known.get(name) != "float":
            raise ValidationError(f"cannot perturb field {name!r}")
        changes[name] = getattr(p, name) + float(delta)
    for name, value in changes.items():
        if (name in VELOCITY_FIELDS or name.endswith("_v0")) and value < 0:
            raise RangeError(f"{name} would become negative ({value:.3f} m/s)")
    return dataclasses.replace(p, **changes)


def perturb_velocities(p: LaneChangeParameters, delta: float) -> LaneChangeParameters:
    """Shift the challenger speeds at cut start, cut end and scenario end by ``delta``."""
    if delta == 0:
        return p
    return perturb_fields(p, {name: delta for name in VELOCITY_FIELDS})


def sweep(
    p: LaneChangeParameters,
    deltas: Sequence[float],
    skipped: list[tuple[float, str]] | None = None,
) -> list[tuple[float, LaneChangeParameters]]:
    """One variant per feasible delta, in input order; infeasible ones go to ``skipped``."""
    out = []
    for delta in deltas:
        try:
            out.append((delta, perturb_velocities(p, delta)))
        except RangeError as exc:
            log.warning("skipping delta %+g: %s", delta, exc)
            if skipped is not None:
                skipped.append((delta, str(exc)))
    return out
