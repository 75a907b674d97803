"""Glue between the stages: tracks -> events/params -> documents -> traces -> metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .compiler import RoadSpec, ScenarioDocument, compile_2pt, compile_4pt, road_for
from .config import DEFAULT_CONFIG, Config
from .errors import ExtractionError, NotApplicableError, ValidationError
from .events import LaneChangeEvent, detect_events
from .geometry import ReferencePath, Trajectory, split_ego
from .metrics import AlignedPair, RiskReport, RssParameters, align, metrics_payload, risk_report
from .params import BaselineParameters, LaneChangeParameters, baseline_from_4pt, extract_4pt
from .player import PlaybackTrace

log = logging.getLogger(__name__)

MODELS = ("4pt", "2pt")


@dataclass(frozen=True)
class ExtractedScenario:
    event: LaneChangeEvent
    params: LaneChangeParameters
    baseline: BaselineParameters

    def to_record(self) -> dict:
        return {"event": self.event.to_dict(), "params": self.params.to_dict(), "baseline": self.baseline.to_dict()}


def extract_scenarios(
    tracks: dict[str, Trajectory],
    cfg: Config = DEFAULT_CONFIG,
) -> tuple[list[LaneChangeEvent], list[ExtractedScenario]]:
    """Detect all events in a log and extract parameters for the usable ones."""
    ego, others = split_ego(tracks)
    path = ReferencePath.from_trajectory(ego)
    events = detect_events(ego, others, path, cfg)
    scenarios = []
    for ev in events:
        if ev.truncated and not cfg.include_truncated:
            log.info("skipping truncated %s event of %s at %.2f s", ev.kind, ev.challenger_id, ev.t_cut_start)
            continue
        try:
            p = extract_4pt(ev, ego, tracks[ev.challenger_id], path, cfg.lane_width)
        except ExtractionError as exc:
            log.warning("cannot extract %s event of %s: %s", ev.kind, ev.challenger_id, exc)
            continue
        scenarios.append(ExtractedScenario(ev, p, baseline_from_4pt(p)))
    return events, scenarios


def build_document(
    params: LaneChangeParameters,
    model: str = "4pt",
    cfg: Config = DEFAULT_CONFIG,
    lane_count: int | None = None,
    lane_width: float | None = None,
    baseline: BaselineParameters | None = None,
) -> ScenarioDocument:
    road: RoadSpec = road_for(params, lane_count, lane_width, cfg)
    if model == "4pt":
        return compile_4pt(params, road, cfg)
    if model == "2pt":
        b = baseline if baseline is not None else baseline_from_4pt(params)
        return compile_2pt(b, road, cfg, ego_lane=params.ego_lane0, stop_time=params.duration)
    raise ValidationError(f"model must be one of {MODELS}, got {model!r}")


def evaluate(
    tracks: dict[str, Trajectory],
    event: LaneChangeEvent,
    trace: PlaybackTrace,
    cfg: Config = DEFAULT_CONFIG,
) -> tuple[AlignedPair, RiskReport | None, dict]:
    """RMSE against the real log plus the RSS risk grading of the generated run."""
    ego, _ = split_ego(tracks)
    if event.challenger_id not in tracks:
        raise ValidationError(f"challenger {event.challenger_id!r} not present in the tracks")
    pair = align(ego, tracks[event.challenger_id], event, trace)
    rss = RssParameters.from_config(cfg)
    try:
        risk = risk_report(trace, rss, cfg)
    except NotApplicableError as exc:
        log.warning("risk grading skipped: %s", exc)
        risk = None
    return pair, risk, metrics_payload(pair, risk, rss)
