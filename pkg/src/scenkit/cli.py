"""Command-line entry point: ``scenkit <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 file-system errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import OPENDRIVE_VERSION, OPENSCENARIO_VERSION, SCHEMA_VERSION, __version__
from .config import Config, load_config
from .errors import ScenkitError, ValidationError
from .events import read_events_json, write_events_json
from .fileio import atomic_write_json, atomic_write_text
from .geometry import read_tracks_csv, write_tracks_csv
from .lanes import lanes_from_cloud, read_cloud_csv, write_cloud_csv
from .openx import parse_xodr, parse_xosc, write_xodr, write_xosc
from .params import read_params_json, write_params_json
from .pipeline import MODELS, build_document, evaluate, extract_scenarios
from .player import format_trace_csv, play, read_trace_csv, trace_meta
from .metrics import RssParameters, risk_report
from .synth import PROFILES, make_scenario, synth_cloud
from .variants import sweep

log = logging.getLogger("scenkit")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(args, **flag_overrides) -> Config:
    overrides = _parse_overrides(args.set)
    overrides.update({k: v for k, v in flag_overrides.items() if v is not None})
    return load_config(args.config, overrides)


def _metadata(cfg: Config, **extra) -> dict:
    meta = {"scenkit_version": __version__, "config": cfg.as_dict()}
    meta.update(extra)
    return meta


# --------------------------------------------------------------------------- commands

def cmd_extract(args) -> int:
    cfg = _config(args)
    tracks = read_tracks_csv(args.tracks)
    road = {"lane_count": cfg.lane_count, "lane_width": cfg.lane_width, "source": "config"}
    if args.cloud:
        model = lanes_from_cloud(read_cloud_csv(args.cloud), cfg)
        road = {"lane_count": model.lane_count, "lane_width": round(model.lane_width, 6), "source": str(args.cloud)}
        cfg = cfg.replace(lane_width=road["lane_width"])
    events, scenarios = extract_scenarios(tracks, cfg)
    out = Path(args.out)
    meta = _metadata(cfg, tracks=str(args.tracks), road=road)
    write_events_json(out / "events.json", events, meta)
    write_params_json(out / "params.json", [s.to_record() for s in scenarios], meta)
    print(f"{len(events)} events, {len(scenarios)} scenarios extracted -> {out}")
    return EXIT_OK


def _road_hint(meta: dict) -> tuple[int | None, float | None]:
    road = meta.get("road", {}) if isinstance(meta, dict) else {}
    return road.get("lane_count"), road.get("lane_width")


def cmd_generate(args) -> int:
    cfg = _config(args)
    records, meta = read_params_json(args.params)
    lane_count, lane_width = _road_hint(meta)
    out = Path(args.out)
    written = []
    for k, rec in enumerate(records):
        doc = build_document(rec["params"], args.model, cfg, lane_count, lane_width, rec.get("baseline"))
        stem = f"scenario_{k:03d}_{args.model}"
        doc = dataclasses.replace(doc, road_file=f"{stem}.xodr")
        atomic_write_text(out / f"{stem}.xosc", write_xosc(doc))
        atomic_write_text(out / f"{stem}.xodr", write_xodr(doc.road))
        written.append(stem)
    atomic_write_json(out / "generate.meta.json", _metadata(cfg, params=str(args.params), model=args.model,
                                                            scenarios=written))
    print(f"{len(written)} {args.model} scenario(s) written to {out}")
    return EXIT_OK


def _load_document(xosc: str, xodr: str):
    road = parse_xodr(Path(xodr).read_text(encoding="utf-8"))
    return parse_xosc(Path(xosc).read_text(encoding="utf-8"), road)


def cmd_play(args) -> int:
    cfg = _config(args, step=args.step)
    doc = _load_document(args.xosc, args.xodr)
    trace = play(doc, cfg.step)
    out = Path(args.out)
    atomic_write_text(out, format_trace_csv(trace))
    atomic_write_json(out.with_name(out.name + ".meta.json"), {**trace_meta(trace), **_metadata(cfg)})
    if trace.unfired:
        print(f"warning: events never fired: {', '.join(trace.unfired)}", file=sys.stderr)
    print(f"{len(trace.times)} steps ({trace.stop_reason}) -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    tracks = read_tracks_csv(args.real)
    events = read_events_json(args.event)
    if not 0 <= args.index < len(events):
        raise ValidationError(f"event index {args.index} out of range ({len(events)} events)")
    trace = read_trace_csv(args.trace)
    _, _, payload = evaluate(tracks, events[args.index], trace, cfg)
    payload["metadata"] = _metadata(cfg, real=str(args.real), trace=str(args.trace), event=str(args.event))
    atomic_write_json(args.out, payload)
    print(f"rmse_s={payload['rmse_s']:.3f} m rmse_t={payload['rmse_t']:.3f} m risky={payload['risky']}")
    return EXIT_OK


def _delta_tag(delta: float) -> str:
    return f"{delta:+g}".replace("+", "p").replace("-", "m").replace(".", "_")


def cmd_perturb(args) -> int:
    cfg = _config(args)
    records, meta = read_params_json(args.params)
    if not 0 <= args.index < len(records):
        raise ValidationError(f"scenario index {args.index} out of range ({len(records)} scenarios)")
    try:
        deltas = [float(x) for x in args.deltas.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"--deltas must be comma-separated numbers, got {args.deltas!r}") from None
    base = records[args.index]["params"]
    lane_count, lane_width = _road_hint(meta)
    skipped: list[tuple[float, str]] = []
    variants = sweep(base, deltas, skipped)
    rss = RssParameters.from_config(cfg)

    def run(item):
        delta, p = item
        doc = build_document(p, "4pt", cfg, lane_count, lane_width)
        trace = play(doc, cfg.step)
        try:
            risk = risk_report(trace, rss, cfg)
            verdict = {"risky": risk.risky, "violation_fraction": risk.violation_fraction}
        except ScenkitError as exc:
            verdict = {"risky": None, "violation_fraction": None, "note": str(exc)}
        return delta, p, doc, {"delta": delta, "lane_change_fire_time": trace.fired.get("LaneChange"), **verdict}

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        results = list(pool.map(run, variants))

    out = Path(args.out)
    summary = []
    for delta, p, doc, row in results:
        stem = f"variant_{_delta_tag(delta)}"
        doc = dataclasses.replace(doc, road_file=f"{stem}.xodr")
        write_params_json(out / f"{stem}.json", [{"params": p.to_dict(), "delta": delta}],
                          _metadata(cfg, source=str(args.params), index=args.index, road=meta.get("road")))
        atomic_write_text(out / f"{stem}.xosc", write_xosc(doc))
        atomic_write_text(out / f"{stem}.xodr", write_xodr(doc.road))
        summary.append(row)
    atomic_write_json(out / "summary.json", {"variants": summary,
                                             "skipped": [{"delta": d, "reason": r} for d, r in skipped],
                                             "metadata": _metadata(cfg, source=str(args.params))})
    for row in summary:
        print(f"delta {row['delta']:+g}: lane change at {row['lane_change_fire_time']} s, "
              f"violation fraction {row['violation_fraction']}, risky={row['risky']}")
    for d, reason in skipped:
        print(f"delta {d:+g} skipped: {reason}", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    log.info("synthetic corpus: profile=%s seed=%d count=%d", args.profile, args.seed, args.count)
    for k in range(args.count):
        seed = args.seed + k
        sc = make_scenario(args.profile, seed)
        stem = "" if args.count == 1 else f"_{seed:04d}"
        write_tracks_csv(out / f"tracks{stem}.csv", sc.tracks)
        records = []
        if sc.truth is not None:
            records.append({"params": sc.truth.to_dict(), "event": sc.event.to_dict()})
        write_params_json(out / f"truth{stem}.json", records, {"profile": args.profile, "seed": seed,
                                                                "scenkit_version": __version__})
    print(f"{args.count} synthetic log(s) ({args.profile}, seed {args.seed}) -> {out}")
    return EXIT_OK


def cmd_synth_cloud(args) -> int:
    log.info("synthetic cloud: seed=%d sigma=%g", args.seed, args.sigma)
    cloud = synth_cloud(args.seed, sigma=args.sigma, length=args.length)
    out = Path(args.out)
    write_cloud_csv(out, cloud.points)
    atomic_write_json(out.with_name(out.name + ".truth.json"),
                      {"marking_y": list(cloud.marking_y), "seed": args.seed, "sigma": args.sigma})
    print(f"{len(cloud.points)} points -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"scenkit {__version__} (params {SCHEMA_VERSION}, OpenSCENARIO {OPENSCENARIO_VERSION},"
                                f" OpenDRIVE {OPENDRIVE_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable; beats --config)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="detect events and extract parameters from a tracks CSV")
    p.add_argument("--tracks", required=True)
    p.add_argument("--cloud", help="point cloud CSV used to derive the lane model")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("generate", parents=[common], help="compile parameters to .xosc/.xodr")
    p.add_argument("--params", required=True)
    p.add_argument("--model", choices=MODELS, default="4pt")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("play", parents=[common], help="run a scenario with the fixed-step player")
    p.add_argument("--xosc", required=True)
    p.add_argument("--xodr", required=True)
    p.add_argument("--step", type=float, help="integration step in seconds (default from config)")
    p.add_argument("--out", required=True, help="trace CSV path")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("evaluate", parents=[common], help="RMSE against the real log and RSS risk grading")
    p.add_argument("--real", required=True, help="tracks CSV the scenario was extracted from")
    p.add_argument("--trace", required=True)
    p.add_argument("--event", required=True, help="events JSON")
    p.add_argument("--index", type=int, default=0, help="which event in the file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("perturb", parents=[common], help="velocity variants of one scenario")
    p.add_argument("--params", required=True)
    p.add_argument("--deltas", default="-2,0,2,4", help="comma-separated m/s offsets")
    p.add_argument("--index", type=int, default=0, help="which scenario in the params file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("synth", help="write a seeded synthetic tracks corpus with ground truth")
    p.add_argument("--profile", choices=PROFILES, default="cutin_basic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("synth-cloud", help="write a seeded synthetic lidar cloud")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--length", type=float, default=60.0)
    p.add_argument("--out", required=True, help="cloud CSV path")
    p.set_defaults(func=cmd_synth_cloud)
    return parser


def _join_option_values(argv: list[str]) -> list[str]:
    # "--deltas -2,0,2" would otherwise be read as an unknown option
    out = []
    it = iter(argv)
    for arg in it:
        if arg == "--deltas":
            value = next(it, None)
            out.append(arg if value is None else f"--deltas={value}")
        else:
            out.append(arg)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_option_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenkitError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
