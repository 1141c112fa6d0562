"""Mean change-point segmentation and long-term event classification."""
import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DataError, NumericalError

DEFAULT_MIN_GAIN = 0.05
DEFAULT_LONG_TERM_THRESHOLD = 0.15


@dataclass(frozen=True)
class Segment:
    start: int  # inclusive
    end: int  # inclusive
    mean: float
    cost: float

    @property
    def length(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class Segmentation:
    segments: tuple
    total_cost: float

    @property
    def k(self):
        return len(self.segments)

    @property
    def changepoints(self):
        """Indices at which a new segment starts."""
        return [s.start for s in self.segments[1:]]

    def segment_of(self, index):
        for pos, s in enumerate(self.segments):
            if s.start <= index <= s.end:
                return pos
        raise IndexError(index)


def cusum(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DataError("cusum of an empty series")
    return np.cumsum(v - v.mean())


def _prefix_sums(values):
    v = np.asarray(values, dtype=float)
    v = v - v.mean()  # centring limits cancellation in c2 - s^2/m
    c1 = np.concatenate(([0.0], np.cumsum(v)))
    c2 = np.concatenate(([0.0], np.cumsum(v * v)))
    return c1, c2


def segment_cost(c1, c2, i, j):
    """SSE of values[i:j] from prefix sums, same arithmetic as the DP kernel."""
    m = j - i
    s = c1[j] - c1[i]
    return (c2[j] - c2[i]) - s * s / m


def _make_segment(values, c1, c2, i, j):
    return Segment(i, j - 1, float(np.mean(values[i:j])), float(segment_cost(c1, c2, i, j)))


def segmentation_from_bounds(values, bounds):
    """Build a :class:`Segmentation` from exclusive segment ends, e.g. ``[3, 6]``
    for two segments over six values."""
    v = np.asarray(values, dtype=float)
    c1, c2 = _prefix_sums(v)
    segs = []
    start = 0
    for end in bounds:
        segs.append(_make_segment(v, c1, c2, start, end))
        start = end
    total = 0.0
    for s in reversed(segs):  # right fold, as the DP accumulates
        total = s.cost + total
    return Segmentation(tuple(segs), total)


def segneigh_mean(values, max_segments, backend=None):
    """Exact least-squares segmentation into k = 1..max_segments mean-constant
    pieces. Returns one :class:`Segmentation` per k.

    Among equally good partitions the one with the earliest change points
    (lexicographically) is returned.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        raise DataError("cannot segment an empty series")
    if not 1 <= max_segments <= n:
        raise DataError(f"max_segments must be in [1, {n}], got {max_segments}")
    c1, c2 = _prefix_sums(v)
    kernel = {
        None: _kernels.segneigh_table,
        "numba": _kernels.segneigh_loops,
        "numpy": _kernels.segneigh_numpy,
    }[backend]
    D, A = kernel(c1, c2, max_segments)
    out = []
    for k in range(max_segments):
        bounds = []
        i = 0
        for level in range(k, -1, -1):
            j = int(A[level, i])
            bounds.append(j)
            i = j
        segs = tuple(_make_segment(v, c1, c2, a, b) for a, b in zip([0, *bounds[:-1]], bounds))
        out.append(Segmentation(segs, float(D[k, 0])))
    return out


def choose_k(segmentations, min_gain=DEFAULT_MIN_GAIN):
    """Smallest k whose next split explains less than ``min_gain`` of the
    single-segment cost."""
    costs = [s.total_cost for s in segmentations]
    total = costs[0]
    if total <= 0:
        return 1
    for k in range(1, len(costs)):
        if (costs[k - 1] - costs[k]) / total < min_gain:
            return k
    return len(costs)


def merge_short_segments(values, segmentation, min_length=2, min_gain=DEFAULT_MIN_GAIN):
    """Remove segments shorter than ``min_length``.

    A short segment between two others is treated as a transient when the
    boundary between its two neighbours, with the short segment left out,
    would not pass the :func:`choose_k` test (explaining at least
    ``min_gain`` of the single-segment cost); all three then merge. Otherwise
    it folds into the neighbour whose merge adds the least cost, the earlier
    one on ties.
    """
    v = np.asarray(values, dtype=float)
    c1, c2 = _prefix_sums(v)
    total = float(segment_cost(c1, c2, 0, v.size))

    def cost(i, j):
        return float(segment_cost(c1, c2, i, j))

    bounds = [s.end + 1 for s in segmentation.segments]
    while len(bounds) > 1:
        starts = [0, *bounds[:-1]]
        lengths = [b - a for a, b in zip(starts, bounds)]
        short = [i for i, n in enumerate(lengths) if n < min_length]
        if not short:
            break
        i = min(short, key=lambda idx: (lengths[idx], idx))
        if i == 0:
            del bounds[0]
            continue
        if i == len(bounds) - 1:
            del bounds[i - 1]
            continue
        a, b, c, d = starts[i - 1], starts[i], bounds[i], bounds[i + 1]
        n1, n2 = b - a, d - c
        gap = (c1[b] - c1[a]) / n1 - (c1[d] - c1[c]) / n2
        # SSE added by pooling the two neighbours into one level
        between = n1 * n2 / (n1 + n2) * gap * gap
        if between < min_gain * total:
            del bounds[i - 1:i + 1]
        elif cost(a, c) + cost(c, d) <= cost(a, b) + cost(b, d):
            del bounds[i - 1]
        else:
            del bounds[i]
    return segmentation_from_bounds(v, bounds)


def segment_means(values, segmentation):
    v = np.asarray(values, dtype=float)
    if segmentation.segments[-1].end != v.size - 1:
        raise DataError("segmentation does not span the reference series")
    return [float(v[s.start:s.end + 1].mean()) for s in segmentation.segments]


@dataclass(frozen=True)
class LongTermResult:
    segment: Segment
    reference_mean: float
    diff_percent: float
    is_event: bool

    @property
    def diff_percent_rounded(self):
        return int(math.floor(self.diff_percent + 0.5))


def classify_long_term(segmentation, reference_means, threshold=DEFAULT_LONG_TERM_THRESHOLD):
    """Compare each segment's mean with the reference mean over the same span.

    A segment is a long-term event when its mean falls below
    ``1 - threshold`` of the reference.
    """
    segments = segmentation.segments if isinstance(segmentation, Segmentation) else tuple(segmentation)
    if len(segments) != len(reference_means):
        raise DataError("reference means are not aligned with the segments")
    cutoff = 100.0 * (1.0 - threshold)
    out = []
    for seg, ref in zip(segments, reference_means):
        if ref == 0:
            raise NumericalError(f"reference mean is zero for segment {seg.start}-{seg.end}")
        diff = 100.0 * seg.mean / ref
        out.append(LongTermResult(seg, float(ref), diff, diff < cutoff))
    return out


SEGMENT_FIELDS = ["k", "start_date", "end_date", "mean", "cost", "diff_percent", "is_event"]


def write_segments_csv(dates, results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEGMENT_FIELDS)
        for k, r in enumerate(results, 1):
            s = r.segment
            w.writerow([k, dates[s.start].isoformat(), dates[s.end].isoformat(), repr(s.mean), repr(s.cost),
                        r.diff_percent_rounded, "yes" if r.is_event else "no"])


def read_segment_bounds(path, dates):
    """Read a segments CSV back into exclusive end indices over ``dates``."""
    index = {d: i for i, d in enumerate(dates)}
    bounds = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                bounds.append(index[dt.date.fromisoformat(row["end_date"])] + 1)
            except KeyError as exc:
                raise DataError(f"{path}: segment end {row['end_date']} not in the series") from exc
    if not bounds or bounds[-1] != len(dates) or bounds != sorted(bounds):
        raise DataError(f"{path}: segments do not cover the series")
    return bounds
