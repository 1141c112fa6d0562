"""Temporal aberration detection on ARIMA one-step forecasts."""
import csv
import datetime as dt
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .arima import ArimaOrder, default_max_lag, fit, forecast, select_order
from .errors import CPEventsError, DataError, ZeroVarianceError

log = logging.getLogger(__name__)

DEFAULT_WARMUP = 21
BASELINE_WINDOW = 8
DROP = "drop"
RAISE = "raise"


@dataclass(frozen=True)
class AberrationEvent:
    date: dt.date | None
    index: int
    observed: float
    expected: float
    lo95: float
    hi95: float
    direction: str
    impact_percent: float
    baseline: float
    model: object = field(default=None, compare=False, repr=False)

    @property
    def interval(self):
        return (self.lo95, self.hi95)

    @property
    def violated_bound(self):
        return self.lo95 if self.direction == DROP else self.hi95


class EventList(list):
    """Detected events plus a diagnostic when detection stopped early."""

    def __init__(self, events=(), diagnostic=None):
        super().__init__(events)
        self.diagnostic = diagnostic


def quantify_impact(event, baseline):
    """Absolute deviation from ``baseline`` as a percentage of it."""
    observed = event.observed if isinstance(event, AberrationEvent) else float(event)
    if baseline <= 0:
        raise DataError(f"impact baseline must be positive, got {baseline}")
    return 100.0 * abs(observed - baseline) / baseline


def detect_stochastic(values, order, dates=None, warmup=DEFAULT_WARMUP, offset=0, backend=None):
    """Rolling one-step-ahead check of a segment against its ARIMA forecast.

    For every position t after ``warmup`` the model is refitted on everything
    before t and t is flagged when it leaves the 95% prediction interval.
    Flagged observations are replaced by their point forecast in later fitting
    windows. ``offset`` shifts the reported indices, for segments cut from a
    longer series.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n <= warmup:
        raise DataError(f"segment length {n} must exceed warmup {warmup}")
    work = v.copy()
    events = EventList()
    for t in range(warmup + 1, n):
        try:
            model = fit(work[:t], order, backend=backend)
        except CPEventsError as exc:
            events.diagnostic = f"fit failed at index {offset + t}: {exc}"
            log.warning(events.diagnostic)
            return events
        f = forecast(model, 1)[0]
        lo, hi = f.pi95
        obs = float(v[t])
        if lo <= obs <= hi:
            continue
        direction = DROP if obs < lo else RAISE
        baseline = float(work[max(0, t - BASELINE_WINDOW):t].mean())
        impact = quantify_impact(obs, baseline) if baseline > 0 else float("nan")
        events.append(AberrationEvent(
            date=dates[t] if dates is not None else None,
            index=offset + t,
            observed=obs,
            expected=f.point,
            lo95=lo,
            hi95=hi,
            direction=direction,
            impact_percent=impact,
            baseline=baseline,
            model=model,
        ))
        work[t] = f.point
    return events


def segment_order(values, max_lag=None):
    v = np.asarray(values, dtype=float)
    if max_lag is None:
        max_lag = default_max_lag(v.size)
    try:
        return select_order(v, max_lag=min(max_lag, v.size // 2))
    except ZeroVarianceError:
        return ArimaOrder(0, 0, 0)


@dataclass
class SegmentDetection:
    segment_index: int
    order: ArimaOrder | None
    events: EventList


def detect_segments(values, dates, segmentation, warmup=DEFAULT_WARMUP, max_lag=None, backend=None):
    """Run :func:`detect_stochastic` on every segment long enough for it."""
    v = np.asarray(values, dtype=float)
    out = []
    for pos, seg in enumerate(segmentation.segments):
        part = v[seg.start:seg.end + 1]
        if part.size <= warmup + 1:
            out.append(SegmentDetection(pos, None, EventList()))
            continue
        order = segment_order(part, max_lag)
        events = detect_stochastic(part, order, dates=dates[seg.start:seg.end + 1], warmup=warmup,
                                   offset=seg.start, backend=backend)
        out.append(SegmentDetection(pos, order, events))
    return out


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EventReport:
    dates: tuple
    long_term: list  # LongTermResult per segment
    stochastic: list  # AberrationEvent, date ordered
    metadata: dict = field(default_factory=dict)

    def stochastic_by_segment(self):
        groups = [[] for _ in self.long_term]
        for ev in self.stochastic:
            for pos, r in enumerate(self.long_term):
                if r.segment.start <= ev.index <= r.segment.end:
                    groups[pos].append(ev)
                    break
        return groups

    def long_term_events(self):
        return [r for r in self.long_term if r.is_event]

    def rows(self):
        """One summary row per segment: period, means, diff, long-term flag,
        stochastic count and peak impacts."""
        out = []
        for r, evs in zip(self.long_term, self.stochastic_by_segment()):
            s = r.segment
            out.append({
                "start_date": self.dates[s.start].isoformat(),
                "end_date": self.dates[s.end].isoformat(),
                "reference_mean": r.reference_mean,
                "measure_mean": s.mean,
                "diff_percent": r.diff_percent_rounded,
                "long_term_event": r.is_event,
                "stochastic_events": len(evs),
                "peak_impact_percent": [round(e.impact_percent, 2) for e in evs],
            })
        return out

    def to_dict(self):
        return {
            "metadata": self.metadata,
            "segments": self.rows(),
            "long_term": [
                {
                    "start_date": self.dates[r.segment.start].isoformat(),
                    "end_date": self.dates[r.segment.end].isoformat(),
                    "days": r.segment.length,
                    "measure_mean": r.segment.mean,
                    "reference_mean": r.reference_mean,
                    "diff_percent": r.diff_percent,
                    "impact_percent": 100.0 - r.diff_percent,
                }
                for r in self.long_term_events()
            ],
            "stochastic": [_event_dict(e) for e in self.stochastic],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _event_dict(e):
    return {
        "date": e.date.isoformat() if e.date else None,
        "index": e.index,
        "observed": e.observed,
        "expected": e.expected,
        "lo95": e.lo95,
        "hi95": e.hi95,
        "direction": e.direction,
        "impact_percent": e.impact_percent,
        "baseline": e.baseline,
    }


def assemble_report(long_term, stochastic, dates, metadata=None):
    dates = tuple(dates)
    if not long_term:
        raise DataError("no segments to report")
    if long_term[0].segment.start != 0 or long_term[-1].segment.end != len(dates) - 1:
        raise DataError("segments do not span the dated series")
    for a, b in zip(long_term, long_term[1:]):
        if b.segment.start != a.segment.end + 1:
            raise DataError("segments are not contiguous")
    events = sorted(stochastic, key=lambda e: e.index)
    for e in events:
        if not 0 <= e.index < len(dates) or (e.date is not None and e.date != dates[e.index]):
            raise DataError(f"stochastic event {e.date} does not fall on the series dates")
    meta = {"date_span": [dates[0].isoformat(), dates[-1].isoformat()]}
    meta.update(metadata or {})
    return EventReport(dates, list(long_term), events, meta)


EVENT_FIELDS = ["date", "type", "observed", "expected", "lo95", "hi95", "direction", "impact_percent"]


def write_events_csv(report_or_events, path):
    """Event CSV. Long-term rows carry the segment start date, the segment and
    reference means as observed/expected, and empty interval columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_FIELDS)
        if isinstance(report_or_events, EventReport):
            rep = report_or_events
            rows = []
            for r in rep.long_term_events():
                rows.append((r.segment.start, [rep.dates[r.segment.start].isoformat(), "long_term", repr(r.segment.mean),
                                               repr(r.reference_mean), "", "", DROP, repr(100.0 - r.diff_percent)]))
            for e in rep.stochastic:
                rows.append((e.index, _event_row(e)))
            rows.sort(key=lambda item: item[0])
            w.writerows(row for _, row in rows)
        else:
            w.writerows(_event_row(e) for e in report_or_events)


def _event_row(e):
    return [e.date.isoformat() if e.date else "", "stochastic", repr(e.observed), repr(e.expected), repr(e.lo95),
            repr(e.hi95), e.direction, repr(e.impact_percent)]


def read_events_csv(path, dates):
    index = {d: i for i, d in enumerate(dates)}
    events = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != EVENT_FIELDS:
            raise DataError(f"{path}: expected header {','.join(EVENT_FIELDS)}")
        for row in reader:
            if row["type"] != "stochastic":
                continue
            d = dt.date.fromisoformat(row["date"])
            if d not in index:
                raise DataError(f"{path}: event date {d} not in the series")
            events.append(AberrationEvent(
                date=d, index=index[d], observed=float(row["observed"]), expected=float(row["expected"]),
                lo95=float(row["lo95"]), hi95=float(row["hi95"]), direction=row["direction"],
                impact_percent=float(row["impact_percent"]), baseline=float("nan"),
            ))
    return events
