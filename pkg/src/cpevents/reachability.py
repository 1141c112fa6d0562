"""Peer identification and prefix-reachability measures."""
import csv
import datetime as dt
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from itertools import chain, compress
from operator import itemgetter

import numpy as np

from .errors import DataError, DegenerateRangeError, EmptyPeerSetError

ALL = None  # country filter sentinel: keep every route
DEFAULT_X = 0.88
DEFAULT_WINDOW = 8


@dataclass(frozen=True)
class PeerId:
    """A collector feed. Identity is the next-hop address alone."""

    next_hop: str
    peer_as: int = field(default=0, compare=False)

    def __str__(self):
        return f"{self.next_hop}(AS{self.peer_as})"


@dataclass(frozen=True)
class PeerSet:
    date: dt.date | None
    announced: dict  # PeerId -> frozenset of prefixes

    def __post_init__(self):
        if not self.announced:
            raise EmptyPeerSetError("peer set has no peers")

    @property
    def peers(self):
        return frozenset(self.announced)

    @property
    def n_t(self):
        return len(self.announced)

    @cached_property
    def y_max(self):
        return frozenset(self.announce_counts())

    def announce_counts(self):
        """Number of peers announcing each prefix in ``y_max``. Cached; do not
        mutate the returned Counter."""
        return self._counts

    @cached_property
    def _counts(self):
        return Counter(chain.from_iterable(self.announced.values()))

    @cached_property
    def count_histogram(self):
        """Number of prefixes announced by exactly k peers, keyed by k."""
        return Counter(self._counts.values())


def build_peer_set(snapshot, country_asns=ALL):
    """Group a snapshot's routes by peer, optionally keeping only routes whose
    origin AS is in ``country_asns``.

    Duplicate (peer, prefix) pairs collapse because announced sets are sets.
    """
    entries = snapshot.entries
    if country_asns is not ALL:
        origins = np.fromiter(map(itemgetter(-1), map(itemgetter(2), entries)), dtype=np.int64, count=len(entries))
        allowed = np.fromiter(country_asns, dtype=np.int64, count=len(country_asns))
        entries = list(compress(entries, np.isin(origins, allowed).tolist()))
    if not entries:
        raise EmptyPeerSetError(
            f"no routes left after country filtering on {snapshot.date}"
        )
    # group prefixes by next hop with a stable sort on integer hop codes
    hops = list(map(itemgetter(1), entries))
    index = {h: i for i, h in enumerate(dict.fromkeys(hops))}
    codes = np.fromiter(map(index.__getitem__, hops), dtype=np.int64, count=len(hops))
    prefixes = np.fromiter(map(itemgetter(0), entries), dtype=object, count=len(entries))
    order = np.argsort(codes, kind="stable")
    bounds = np.searchsorted(codes[order], np.arange(len(index) + 1))
    announced = {}
    for hop, code in index.items():
        rows = order[bounds[code]:bounds[code + 1]]
        announced[PeerId(hop, entries[rows[0]].as_path[0])] = frozenset(prefixes[rows])
    return PeerSet(date=snapshot.date, announced=announced)


def _check_dates(dates):
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise DataError(f"dates not strictly increasing: {a} then {b}")


@dataclass(frozen=True)
class MeasureSeries:
    dates: tuple
    values: np.ndarray
    threshold_x: float | None = None
    name: str = "measure"

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", np.asarray(self.values))
        if len(self.dates) != len(self.values):
            raise DataError("dates and values differ in length")
        _check_dates(self.dates)

    def __len__(self):
        return len(self.dates)

    def replace(self, values, name=None):
        return MeasureSeries(self.dates, values, self.threshold_x, name or self.name)


def peer_counts(peer_sets):
    _check_dates([ps.date for ps in peer_sets])
    return MeasureSeries([ps.date for ps in peer_sets], np.array([ps.n_t for ps in peer_sets], dtype=np.int64), name="peer_count")


def unique_counts(peer_sets):
    """|y_max| per date, the reference series for long-term classification."""
    _check_dates([ps.date for ps in peer_sets])
    return MeasureSeries([ps.date for ps in peer_sets], np.array([len(ps.y_max) for ps in peer_sets], dtype=np.int64), name="unique")


@dataclass(frozen=True)
class Bin:
    low: float  # exclusive
    high: float  # inclusive
    label: str

    def __contains__(self, ratio):
        return self.low < ratio <= self.high


class BinConfig(tuple):
    """Disjoint half-open percentage ranges ``(low, high]`` covering (0, 100],
    ordered from the highest range down."""

    def __new__(cls, bins):
        bins = tuple(bins)
        if not bins:
            raise ValueError("empty bin configuration")
        if bins[0].high != 100 or bins[-1].low != 0:
            raise ValueError("bins must cover (0, 100]")
        for upper, lower in zip(bins, bins[1:]):
            if upper.low != lower.high:
                raise ValueError(f"bins {upper.label} and {lower.label} are not adjacent")
        for b in bins:
            if not b.low < b.high:
                raise ValueError(f"empty bin {b.label}")
        return super().__new__(cls, bins)

    @classmethod
    def from_edges(cls, edges, labels=None):
        """Build from descending edges, e.g. ``[100, 90, 80, 0]``."""
        edges = list(edges)
        pairs = list(zip(edges[1:], edges[:-1]))
        if labels is None:
            labels = [f"{lo:g}-{hi:g}" for lo, hi in pairs]
        return cls(Bin(lo, hi, lab) for (lo, hi), lab in zip(pairs, labels))

    @property
    def labels(self):
        return [b.label for b in self]

    def index(self, ratio):
        for i, b in enumerate(self):
            if ratio in b:
                return i
        raise ValueError(f"ratio {ratio} outside (0, 100]")


# The seven initial ranges, read as (90,100], (80,90], (50,80], (27,50],
# (13,27], (5,13], (0,5] so that integer percentages land where the labels say.
DEFAULT_BINS = BinConfig.from_edges(
    [100, 90, 80, 50, 27, 13, 5, 0],
    [">90%", "81-90%", "51-80%", "28-50%", "14-27%", "6-13%", "<=5%"],
)


def peer_bin_histogram(peer_set, bins=DEFAULT_BINS):
    """Prefix count per peer-percentage bin; sums to ``len(peer_set.y_max)``."""
    n = peer_set.n_t
    hist = dict.fromkeys(bins.labels, 0)
    labels = bins.labels
    for k, npref in peer_set.count_histogram.items():
        hist[labels[bins.index(100.0 * k / n)]] += npref
    return hist


def x_percent_value(peer_set, x):
    # k / n rather than k > x * n: 0.29 * 100 rounds below 29
    n = peer_set.n_t
    return sum(npref for k, npref in peer_set.count_histogram.items() if k / n > x)


def x_percent_measure(peer_sets, x=DEFAULT_X):
    """Count of prefixes announced by strictly more than a fraction ``x`` of peers."""
    if not 0 < x <= 1:
        raise ValueError(f"x must be in (0, 1], got {x}")
    dates = [ps.date for ps in peer_sets]
    values = np.array([x_percent_value(ps, x) for ps in peer_sets], dtype=np.int64)
    return MeasureSeries(dates, values, threshold_x=x, name=f"x{100 * x:g}")


def smooth(series, window=DEFAULT_WINDOW):
    """Trailing mean over up to ``window`` values (fewer at the start)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    v = np.asarray(series.values, dtype=float)
    if v.size == 0:
        raise DataError("cannot smooth an empty series")
    out = np.array([v[max(0, t - window + 1): t + 1].mean() for t in range(v.size)])
    return series.replace(out, name=f"{series.name}_smooth{window}")


def normalize(series):
    v = np.asarray(series.values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi <= lo:
        raise DegenerateRangeError("series is constant; min-max range is zero")
    return series.replace((v - lo) / (hi - lo), name=f"{series.name}_norm")


GAP = None


def per_peer_series(peer_sets):
    """Announced-prefix count per peer and date; ``GAP`` (None) where the peer
    is absent from that day's snapshot."""
    dates = [ps.date for ps in peer_sets]
    _check_dates(dates)
    peers = {}
    for ps in peer_sets:
        for peer in ps.announced:
            peers.setdefault(peer, peer)
    out = {}
    for peer in sorted(peers, key=lambda p: _ip_key(p.next_hop)):
        out[peer] = [len(ps.announced[peer]) if peer in ps.announced else GAP for ps in peer_sets]
    return dates, out


def _ip_key(address):
    return tuple(int(x) for x in address.split("."))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_series_csv(series, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "value"])
        for d, v in zip(series.dates, series.values):
            w.writerow([d.isoformat(), _fmt(v)])


def read_series_csv(path, name=None):
    dates, values = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "value"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected header 'date,value'")
        for row in reader:
            dates.append(dt.date.fromisoformat(row["date"]))
            values.append(float(row["value"]))
    arr = np.array(values)
    if np.all(arr == np.round(arr)):
        arr = arr.astype(np.int64)
    return MeasureSeries(dates, arr, name=name or str(path))


def write_histogram_csv(dated_hists, path, bins=DEFAULT_BINS):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "unique", *bins.labels])
        for d, hist in dated_hists:
            w.writerow([d.isoformat(), sum(hist.values()), *(hist[lab] for lab in bins.labels)])


def write_per_peer_csv(dates, series, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "next_hop", "peer_as", "prefixes"])
        for peer, values in series.items():
            for d, v in zip(dates, values):
                w.writerow([d.isoformat(), peer.next_hop, peer.peer_as, "" if v is GAP else v])
