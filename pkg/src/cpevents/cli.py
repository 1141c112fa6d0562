"""Command line interface.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical error.
"""
import argparse
import json
import logging
import os
import sys

from . import aberration, changepoint, pipeline, reachability, ubc
from .errors import ConfigError, CPEventsError
from .fixtures import FixtureSpec, generate_fixture
from .ingest import read_snapshot

log = logging.getLogger("cpevents")

CONFIG_FLAGS = {
    "snapshot_dir": str,
    "snapshot_pattern": str,
    "snapshot_format": str,
    "delegation_file": str,
    "country": str,
    "x_threshold": float,
    "smoothing_window": int,
    "max_segments": int,
    "k_policy": str,
    "min_gain": float,
    "long_term_threshold": float,
    "segment_series": str,
    "min_segment_length": int,
    "warmup": int,
    "max_lag": int,
    "output_dir": str,
    "workers": int,
}


def _add_config_flags(p, names=None):
    for name in names or CONFIG_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=CONFIG_FLAGS[name], default=None)


def _config(args, check_paths=True):
    cfg = pipeline.PipelineConfig.load(args.config) if getattr(args, "config", None) else pipeline.PipelineConfig()
    for name in CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    return cfg.validate(check_paths=check_paths)


def _out(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_run(args):
    result = pipeline.run_pipeline(_config(args))
    rep = result.report
    print(f"{len(rep.long_term_events())} long-term event(s), {len(rep.stochastic)} stochastic event(s); "
          f"outputs in {result.output_dir}")


def cmd_ingest(args):
    cfg = _config(args)
    found = pipeline.discover_snapshots(cfg.snapshot_dir, cfg.snapshot_pattern)
    asns = pipeline.load_country_asns(cfg.delegation_file, cfg.country)
    pipeline.export_filtered_snapshots(found, cfg.snapshot_format, asns, _out(cfg.output_dir))
    print(f"wrote {len(found)} filtered snapshot(s) to {cfg.output_dir}")


def cmd_measure(args):
    cfg = _config(args)
    out = _out(cfg.output_dir)
    found = pipeline.discover_snapshots(cfg.snapshot_dir, cfg.snapshot_pattern)
    asns = pipeline.load_country_asns(cfg.delegation_file, cfg.country)
    ingested = pipeline.ingest_peer_sets(found, cfg.snapshot_format, asns, cfg.workers)
    pipeline.write_ingest_summary(found, ingested, os.path.join(out, "ingest_summary.csv"))
    m = pipeline.compute_measures([ps for ps, _, _ in ingested], cfg.x_threshold, cfg.smoothing_window)
    pipeline.write_measures(m, out)
    pipeline.write_plot_data([m.measure, m.measure_smoothed, m.unique, m.unique_smoothed, m.peer_count],
                             os.path.join(out, "plot_data.csv"))
    print(f"measure over {len(m.measure)} day(s) written to {out}")


def _series_pair(args, cfg):
    measure = reachability.read_series_csv(args.measure, "measure")
    reference = reachability.read_series_csv(args.reference, "unique")
    if measure.dates != reference.dates:
        raise CPEventsError("measure and reference series cover different dates")
    if cfg.segment_series == "smoothed":
        measure = reachability.smooth(measure, cfg.smoothing_window)
        reference = reachability.smooth(reference, cfg.smoothing_window)
    return measure, reference


def cmd_segment(args):
    cfg = _config(args, check_paths=False)
    measure, reference = _series_pair(args, cfg)
    stage = pipeline.segment_stage(measure.values, reference.values, cfg.max_segments, cfg.k_policy, cfg.min_gain,
                                   cfg.long_term_threshold, cfg.min_segment_length)
    pipeline.write_segment_outputs(stage, measure.dates, measure.values, _out(cfg.output_dir))
    n_events = sum(r.is_event for r in stage.long_term)
    print(f"k={stage.segmentation.k}: {n_events} long-term event(s)")


def cmd_detect(args):
    cfg = _config(args, check_paths=False)
    measure = reachability.read_series_csv(args.measure, "measure")
    bounds = changepoint.read_segment_bounds(args.segments, measure.dates)
    seg = changepoint.segmentation_from_bounds(measure.values, bounds)
    out = _out(cfg.output_dir)
    results = pipeline.detect_stage(measure.values, measure.dates, seg, cfg.warmup, cfg.max_lag)
    pipeline.write_orders_csv(results, seg, measure.dates, os.path.join(out, "orders.csv"))
    events = [e for r in results for e in r.events]
    aberration.write_events_csv(events, os.path.join(out, "events.csv"))
    print(f"{len(events)} stochastic event(s)")


def cmd_report(args):
    cfg = _config(args, check_paths=False)
    measure, reference = _series_pair(args, cfg)
    bounds = changepoint.read_segment_bounds(args.segments, measure.dates)
    seg = changepoint.segmentation_from_bounds(measure.values, bounds)
    long_term = changepoint.classify_long_term(seg, changepoint.segment_means(reference.values, seg),
                                               cfg.long_term_threshold)
    events = aberration.read_events_csv(args.events, measure.dates)
    rep = aberration.assemble_report(long_term, events, measure.dates,
                                     {"x_threshold": cfg.x_threshold, "segment_series": cfg.segment_series})
    out = _out(cfg.output_dir)
    aberration.write_events_csv(rep, os.path.join(out, "report.csv"))
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(rep.to_json())
    for row in rep.rows():
        flag = "yes" if row["long_term_event"] else "no"
        print(f"{row['start_date']} - {row['end_date']}  {row['reference_mean']:.0f}  {row['measure_mean']:.0f}  "
              f"{row['diff_percent']}%  long-term={flag}  stochastic={row['stochastic_events']}")


def cmd_ubc(args):
    cfg = _config(args)
    found = pipeline.discover_snapshots(cfg.snapshot_dir, cfg.snapshot_pattern)
    stats = []
    for day, path in found:
        snap = read_snapshot(path, format=cfg.snapshot_format, date=day)
        stats.append(ubc.compute_ubc(snap, args.target_as, origin_only=args.origin_only))
    rows = ubc.rank_upstreams(stats, args.top_n)
    out = _out(cfg.output_dir)
    ubc.write_ubc_csv(rows, os.path.join(out, "ubc.csv"))
    ubc.write_rank_changes_csv(rows, os.path.join(out, "ubc_rank_changes.csv"))
    for row in rows:
        mark = "  <- order changed" if row.changed else ""
        print(row.date.isoformat(), " ".join(f"{a}:{u}" for a, u in row.ranking) + mark)


def _parse_event(text):
    # start:duration:magnitude[:kind[:direction]]
    parts = text.split(":")
    if len(parts) < 3:
        raise argparse.ArgumentTypeError("event must be start:duration:magnitude[:kind[:direction]]")
    try:
        kw = {"start": int(parts[0]), "duration": int(parts[1]), "magnitude": float(parts[2])}
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if len(parts) > 3:
        kw["kind"] = parts[3]
    if len(parts) > 4:
        kw["direction"] = parts[4]
    return kw


def cmd_fixture(args):
    data = {}
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            data = json.load(fh)
    for name in ("days", "peers", "base", "trend", "sigma", "noise", "seed", "start_date", "country",
                 "foreign_prefixes", "pattern"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    if args.event:
        data["events"] = list(data.get("events", [])) + args.event
    try:
        spec = FixtureSpec.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"bad fixture spec: {exc}") from exc
    paths = generate_fixture(spec, args.output_dir)
    print(f"wrote {len(paths)} snapshot(s) to {args.output_dir}")


def build_parser():
    parser = argparse.ArgumentParser(prog="cpevents", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--config")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ingest", help="parse and country-filter snapshots into canonical TSV")
    p.add_argument("--config")
    _add_config_flags(p, ["snapshot_dir", "snapshot_pattern", "snapshot_format", "delegation_file", "country",
                          "output_dir"])
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("measure", help="reachability measures from snapshots")
    p.add_argument("--config")
    _add_config_flags(p, ["snapshot_dir", "snapshot_pattern", "snapshot_format", "delegation_file", "country",
                          "x_threshold", "smoothing_window", "output_dir", "workers"])
    p.set_defaults(func=cmd_measure)

    seg_flags = ["max_segments", "k_policy", "min_gain", "long_term_threshold", "segment_series",
                 "min_segment_length", "smoothing_window", "output_dir"]
    p = sub.add_parser("segment", help="change-point segmentation and long-term classification")
    p.add_argument("--config")
    p.add_argument("--measure", required=True, help="measure CSV (date,value)")
    p.add_argument("--reference", required=True, help="unique-prefix CSV (date,value)")
    _add_config_flags(p, seg_flags)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("detect", help="stochastic aberration detection per segment")
    p.add_argument("--config")
    p.add_argument("--measure", required=True)
    p.add_argument("--segments", required=True)
    _add_config_flags(p, ["warmup", "max_lag", "output_dir"])
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("report", help="merge segments and stochastic events into a report")
    p.add_argument("--config")
    p.add_argument("--measure", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--events", required=True)
    _add_config_flags(p, ["long_term_threshold", "segment_series", "smoothing_window", "x_threshold", "output_dir"])
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("ubc", help="upstream betweenness centrality for a target AS")
    p.add_argument("--config")
    p.add_argument("--target-as", type=int, required=True)
    p.add_argument("--top-n", type=int, default=4)
    p.add_argument("--origin-only", action="store_true")
    _add_config_flags(p, ["snapshot_dir", "snapshot_pattern", "snapshot_format", "output_dir"])
    p.set_defaults(func=cmd_ubc)

    p = sub.add_parser("fixture", help="generate synthetic snapshots")
    p.add_argument("--spec", help="fixture spec JSON")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--days", type=int)
    p.add_argument("--peers", type=int)
    p.add_argument("--base", type=float)
    p.add_argument("--trend", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--noise", choices=["normal", "sign"])
    p.add_argument("--seed", type=int)
    p.add_argument("--start-date")
    p.add_argument("--country")
    p.add_argument("--foreign-prefixes", type=int)
    p.add_argument("--pattern")
    p.add_argument("--event", action="append", type=_parse_event,
                   help="start:duration:magnitude[:kind[:direction]], repeatable")
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CPEventsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
