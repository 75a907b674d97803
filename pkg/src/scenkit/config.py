"""Flat key/value configuration.

Every threshold used by the toolkit lives in :class:`Config`.  Files use one
``key = value`` pair per line; ``#`` starts a comment.  Precedence is
CLI flag > config file > built-in default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .errors import ValidationError


@dataclass(frozen=True)
class Config:
    # lane geometry
    lane_width: float = 3.5
    lane_count: int = 3

    # event detection
    cut_in_threshold: float = 1.75
    cut_out_threshold: float = 1.75
    lat_vel_start: float = 0.2
    lat_vel_hold: float = 0.5
    lat_vel_floor: float = 0.005
    settle_eps: float = 0.3
    settle_hold: float = 1.0
    preroll: float = 5.0
    postroll: float = 5.0
    include_truncated: bool = False

    # road surface segmentation and marking extraction
    max_height: float = 0.3
    d1_max_deg: float = 10.0
    d2_max_deg: float = 15.0
    row_break: float = 1.0
    intensity_threshold: float = 0.5
    cluster_radius: float = 1.0
    merge_distance: float = 0.5

    # compilation and playback
    step: float = 0.01
    timeout: float = 120.0
    road_margin: float = 20.0
    vehicle_length: float = 4.5
    vehicle_width: float = 1.8
    vehicle_height: float = 1.5

    # RSS risk grading
    rss_rho: float = 1.0
    rss_a_max_accel: float = 3.5
    rss_a_min_brake: float = 4.0
    rss_a_max_brake: float = 8.0
    risk_fraction: float = 0.5
    freespace: bool = True

    workers: int = 4

    def replace(self, **overrides: Any) -> "Config":
        return dataclasses.replace(self, **overrides)

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


DEFAULT_CONFIG = Config()

_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(key: str, raw: Any) -> Any:
    kind = _TYPES[key]
    if isinstance(raw, str):
        text = raw.strip()
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValidationError(f"config key {key!r}: expected boolean, got {raw!r}")
        try:
            return int(text) if kind == "int" else float(text)
        except ValueError:
            raise ValidationError(f"config key {key!r}: expected {kind}, got {raw!r}") from None
    if kind == "bool":
        return bool(raw)
    return int(raw) if kind == "int" else float(raw)


def parse_config_text(text: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> Config:
    """Build the effective config: defaults, then file, then explicit overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in _TYPES:
            raise ValidationError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return DEFAULT_CONFIG.replace(**values)


def format_config(cfg: Config) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.as_dict().items())
