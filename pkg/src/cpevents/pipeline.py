"""End-to-end pipeline: snapshots in, event report and intermediate series out."""
import csv
import datetime as dt
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import aberration, changepoint, reachability
from .errors import ConfigError, CPEventsError, DataError, StageError
from .ingest import FORMATS, extract_country_asns, gc_paused, read_delegation, read_snapshot, write_snapshot

log = logging.getLogger(__name__)

MIN_SNAPSHOTS = 30


@dataclass
class PipelineConfig:
    snapshot_dir: str = "snapshots"
    snapshot_pattern: str = "rib.%Y%m%d.tsv"
    snapshot_format: str = "canonical_tsv"
    delegation_file: str | None = None
    country: str = "IN"
    x_threshold: float = reachability.DEFAULT_X
    smoothing_window: int = reachability.DEFAULT_WINDOW
    max_segments: int = 8
    k_policy: str = "auto"  # auto: elbow rule up to max_segments; fixed: exactly max_segments
    min_gain: float = changepoint.DEFAULT_MIN_GAIN
    long_term_threshold: float = changepoint.DEFAULT_LONG_TERM_THRESHOLD
    segment_series: str = "raw"  # raw | smoothed
    min_segment_length: int = 2
    warmup: int = aberration.DEFAULT_WARMUP
    max_lag: int | None = None
    output_dir: str = "out"
    workers: int = 1

    def validate(self, check_paths=True):
        if not 0 < self.x_threshold <= 1:
            raise ConfigError("x_threshold must be in (0, 1]")
        if not 0 < self.long_term_threshold < 1:
            raise ConfigError("long_term_threshold must be in (0, 1)")
        if not 0 < self.min_gain < 1:
            raise ConfigError("min_gain must be in (0, 1)")
        if self.smoothing_window < 1 or self.max_segments < 1 or self.warmup < 1 or self.workers < 1:
            raise ConfigError("smoothing_window, max_segments, warmup and workers must be >= 1")
        if self.min_segment_length < 1:
            raise ConfigError("min_segment_length must be >= 1")
        if self.k_policy not in ("auto", "fixed"):
            raise ConfigError("k_policy must be 'auto' or 'fixed'")
        if self.segment_series not in ("raw", "smoothed"):
            raise ConfigError("segment_series must be 'raw' or 'smoothed'")
        if self.snapshot_format not in FORMATS:
            raise ConfigError(f"snapshot_format must be one of {FORMATS}")
        if check_paths:
            if not os.path.isdir(self.snapshot_dir):
                raise ConfigError(f"snapshot_dir {self.snapshot_dir!r} does not exist")
            if self.delegation_file is not None and not os.path.isfile(self.delegation_file):
                raise ConfigError(f"delegation_file {self.delegation_file!r} does not exist")
        return self

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path!r} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
        base = os.path.dirname(os.path.abspath(path))
        for key in ("snapshot_dir", "delegation_file", "output_dir"):
            if data.get(key) and not os.path.isabs(data[key]):
                data[key] = os.path.join(base, data[key])
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)


def discover_snapshots(directory, pattern):
    """Files in ``directory`` whose names parse with the strftime ``pattern``,
    sorted by date."""
    found = []
    for name in os.listdir(directory):
        try:
            day = dt.datetime.strptime(name, pattern).date()
        except ValueError:
            continue
        found.append((day, os.path.join(directory, name)))
    found.sort()
    for (a, pa), (b, pb) in zip(found, found[1:]):
        if a == b:
            raise DataError(f"two snapshots for {a}: {pa}, {pb}")
    if not found:
        raise DataError(f"no files in {directory!r} match pattern {pattern!r}")
    return found


def load_country_asns(delegation_file, country):
    if delegation_file is None:
        return reachability.ALL
    try:
        records = read_delegation(delegation_file)
    except OSError as exc:
        raise StageError("ingest", exc) from exc
    asns = extract_country_asns(records, country)
    if not asns:
        raise StageError("ingest", DataError(f"no {country} AS numbers in {delegation_file}"))
    return asns


def _ingest_one(args):
    day, path, fmt, country_asns = args
    try:
        snap = read_snapshot(path, format=fmt, date=day)
    except (CPEventsError, OSError, UnicodeDecodeError) as exc:
        raise StageError("ingest", exc, day) from exc
    try:
        ps = reachability.build_peer_set(snap, country_asns)
    except CPEventsError as exc:
        raise StageError("reachability", exc, day) from exc
    return ps, snap.summary, snap.contiguous


def ingest_peer_sets(found, fmt, country_asns, workers=1):
    jobs = [(day, path, fmt, country_asns) for day, path in found]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_ingest_one, jobs, chunksize=8))
    with gc_paused():
        return [_ingest_one(job) for job in jobs]


@dataclass
class Measures:
    peer_sets: list
    measure: reachability.MeasureSeries
    unique: reachability.MeasureSeries
    peer_count: reachability.MeasureSeries
    measure_smoothed: reachability.MeasureSeries
    unique_smoothed: reachability.MeasureSeries


def compute_measures(peer_sets, x, window):
    try:
        measure = reachability.x_percent_measure(peer_sets, x)
        unique = reachability.unique_counts(peer_sets)
        return Measures(
            peer_sets, measure, unique, reachability.peer_counts(peer_sets),
            reachability.smooth(measure, window), reachability.smooth(unique, window),
        )
    except CPEventsError as exc:
        raise StageError("measure", exc) from exc


def write_measures(m, out):
    reachability.write_series_csv(m.measure, os.path.join(out, "measure.csv"))
    reachability.write_series_csv(m.unique, os.path.join(out, "unique.csv"))
    reachability.write_series_csv(m.peer_count, os.path.join(out, "peer_counts.csv"))
    reachability.write_series_csv(m.measure_smoothed, os.path.join(out, "measure_smoothed.csv"))
    reachability.write_series_csv(m.unique_smoothed, os.path.join(out, "unique_smoothed.csv"))
    reachability.write_histogram_csv(
        [(ps.date, reachability.peer_bin_histogram(ps)) for ps in m.peer_sets], os.path.join(out, "histogram.csv")
    )
    dates, per_peer = reachability.per_peer_series(m.peer_sets)
    reachability.write_per_peer_csv(dates, per_peer, os.path.join(out, "per_peer.csv"))


def write_plot_data(series_list, path):
    """Tidy long-format table for external plotting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "series", "value"])
        for s in series_list:
            for d, v in zip(s.dates, s.values):
                w.writerow([d.isoformat(), s.name, repr(float(v))])


@dataclass
class SegmentStage:
    segmentations: list
    k: int
    segmentation: changepoint.Segmentation
    long_term: list


def segment_stage(values, reference, max_segments, k_policy="auto", min_gain=changepoint.DEFAULT_MIN_GAIN,
                  threshold=changepoint.DEFAULT_LONG_TERM_THRESHOLD, min_length=2):
    try:
        values = np.asarray(values, dtype=float)
        kmax = min(max_segments, values.size)
        segs = changepoint.segneigh_mean(values, kmax)
        k = kmax if k_policy == "fixed" else changepoint.choose_k(segs, min_gain)
        chosen = segs[k - 1]
        if min_length > 1:
            chosen = changepoint.merge_short_segments(values, chosen, min_length, min_gain)
        ref_means = changepoint.segment_means(reference, chosen)
        long_term = changepoint.classify_long_term(chosen, ref_means, threshold)
    except CPEventsError as exc:
        raise StageError("segment", exc) from exc
    return SegmentStage(segs, k, chosen, long_term)


def write_segment_outputs(stage, dates, values, out):
    changepoint.write_segments_csv(dates, stage.long_term, os.path.join(out, "segments.csv"))
    with open(os.path.join(out, "segmentation_costs.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "total_cost", "chosen"])
        for s in stage.segmentations:
            w.writerow([s.k, repr(s.total_cost), "yes" if s.k == stage.k else "no"])
    cs = changepoint.cusum(values)
    reachability.write_series_csv(reachability.MeasureSeries(dates, cs, name="cusum"), os.path.join(out, "cusum.csv"))


def detect_stage(values, dates, segmentation, warmup, max_lag=None):
    try:
        results = aberration.detect_segments(values, dates, segmentation, warmup=warmup, max_lag=max_lag)
    except CPEventsError as exc:
        raise StageError("detect", exc) from exc
    for r in results:
        if r.events.diagnostic:
            log.warning("segment %d: %s", r.segment_index + 1, r.events.diagnostic)
    return results


def write_orders_csv(results, segmentation, dates, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment", "start_date", "end_date", "p", "d", "q", "drift", "events", "diagnostic"])
        for r in results:
            s = segmentation.segments[r.segment_index]
            o = r.order
            w.writerow([r.segment_index + 1, dates[s.start].isoformat(), dates[s.end].isoformat(),
                        *(("", "", "", "") if o is None else (o.p, o.d, o.q, "yes" if o.drift else "no")),
                        len(r.events), r.events.diagnostic or ""])


@dataclass
class PipelineResult:
    report: aberration.EventReport
    measures: Measures
    segments: SegmentStage
    detections: list
    output_dir: str


def run_pipeline(config):
    config.validate()
    out = config.output_dir
    os.makedirs(out, exist_ok=True)

    found = discover_snapshots(config.snapshot_dir, config.snapshot_pattern)
    if len(found) < MIN_SNAPSHOTS:
        log.warning("only %d snapshots; segmentation needs about %d to be meaningful", len(found), MIN_SNAPSHOTS)
    country_asns = load_country_asns(config.delegation_file, config.country)
    ingested = ingest_peer_sets(found, config.snapshot_format, country_asns, config.workers)
    write_ingest_summary(found, ingested, os.path.join(out, "ingest_summary.csv"))

    m = compute_measures([ps for ps, _, _ in ingested], config.x_threshold, config.smoothing_window)
    write_measures(m, out)
    dates = m.measure.dates
    if config.segment_series == "smoothed":
        seg_values, ref_values = m.measure_smoothed.values, m.unique_smoothed.values
    else:
        seg_values, ref_values = m.measure.values, m.unique.values
    write_plot_data([m.measure, m.measure_smoothed, m.unique, m.unique_smoothed, m.peer_count],
                    os.path.join(out, "plot_data.csv"))

    stage = segment_stage(seg_values, ref_values, config.max_segments, config.k_policy, config.min_gain,
                          config.long_term_threshold, config.min_segment_length)
    write_segment_outputs(stage, dates, seg_values, out)

    detections = detect_stage(m.measure.values, dates, stage.segmentation, config.warmup, config.max_lag)
    write_orders_csv(detections, stage.segmentation, dates, os.path.join(out, "orders.csv"))
    events = [e for r in detections for e in r.events]

    meta = {
        "country": config.country if config.delegation_file else "ALL",
        "x_threshold": config.x_threshold,
        "segment_series": config.segment_series,
        "k": stage.segmentation.k,
        "snapshots": len(found),
    }
    report = aberration.assemble_report(stage.long_term, events, dates, meta)
    aberration.write_events_csv(events, os.path.join(out, "events.csv"))
    aberration.write_events_csv(report, os.path.join(out, "report.csv"))
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    return PipelineResult(report, m, stage, detections, out)


def write_ingest_summary(found, ingested, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "file", "route_lines", "valid", "skipped", "contiguous", "peers", "unique_prefixes"])
        for (day, fpath), (ps, summary, contiguous) in zip(found, ingested):
            w.writerow([day.isoformat(), os.path.basename(fpath), summary.route_lines, summary.valid,
                        summary.skipped, "yes" if contiguous else "no", ps.n_t, len(ps.y_max)])


def export_filtered_snapshots(found, fmt, country_asns, out):
    """Re-write snapshots as canonical TSV keeping only country-origin routes."""
    os.makedirs(out, exist_ok=True)
    rows = []
    for day, path in found:
        try:
            snap = read_snapshot(path, format=fmt, date=day)
        except (CPEventsError, OSError) as exc:
            raise StageError("ingest", exc, day) from exc
        if country_asns is not reachability.ALL:
            kept = tuple(e for e in snap.entries if e.as_path[-1] in country_asns)
            if not kept:
                raise StageError("ingest", DataError("no routes left after country filtering"), day)
            snap = type(snap)(snap.date, kept, snap.contiguous, snap.summary)
        with open(os.path.join(out, day.strftime("rib.%Y%m%d.tsv")), "w", encoding="utf-8", newline="\n") as fh:
            write_snapshot(snap, fh)
        rows.append((day, os.path.basename(path), snap.summary, snap.contiguous, len(snap.entries)))
    with open(os.path.join(out, "ingest_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "file", "route_lines", "valid", "skipped", "contiguous", "kept"])
        for day, name, s, contiguous, kept in rows:
            w.writerow([day.isoformat(), name, s.route_lines, s.valid, s.skipped, "yes" if contiguous else "no", kept])
