"""Routing-table snapshot and RIR delegation parsing."""
import datetime as dt
import gc
import logging
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import lru_cache
from operator import itemgetter
from typing import NamedTuple

import numpy as np

from .errors import EmptySnapshotError, FormatError

log = logging.getLogger(__name__)

CANONICAL_TSV = "canonical_tsv"
SHOW_IP_BGP = "show_ip_bgp"
FORMATS = (CANONICAL_TSV, SHOW_IP_BGP)

ORIGIN_CODES = frozenset({"i", "e", "?"})
MAX_ASN = 2**32 - 1

_AS_SET = re.compile(r"\{([^}]*)\}")
_STATUS_CHARS = set("*>sdhrSRi=bxacfmu ")


class RouteEntry(NamedTuple):
    prefix: str
    next_hop: str
    as_path: tuple
    contains_as_set: bool = False

    @property
    def origin_as(self):
        return self.as_path[-1]

    @property
    def peer_as(self):
        return self.as_path[0]


@dataclass
class ParseSummary:
    route_lines: int = 0
    valid: int = 0
    skipped: int = 0
    reasons: dict = field(default_factory=dict)

    def skip(self, reason):
        self.skipped += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1


@dataclass(frozen=True)
class Snapshot:
    date: dt.date | None
    entries: tuple
    contiguous: bool = True
    summary: ParseSummary = field(default_factory=ParseSummary, compare=False)

    def __len__(self):
        return len(self.entries)


@lru_cache(maxsize=None)
def _ipv4_to_int(text):
    parts = text.split(".")
    if len(parts) != 4:
        raise ValueError(f"not an IPv4 address: {text!r}")
    value = 0
    for part in parts:
        if not part.isdigit() or len(part) > 3:
            raise ValueError(f"not an IPv4 address: {text!r}")
        octet = int(part)
        if octet > 255:
            raise ValueError(f"octet out of range in {text!r}")
        value = (value << 8) | octet
    return value


def _int_to_ipv4(value):
    return f"{value >> 24 & 255}.{value >> 16 & 255}.{value >> 8 & 255}.{value & 255}"


def _classful_length(address):
    first = address >> 24
    if first < 128:
        return 8
    if first < 192:
        return 16
    return 24


@lru_cache(maxsize=None)
def parse_prefix(text):
    """Validate an IPv4 CIDR and return it in canonical ``a.b.c.d/len`` form.

    Host bits are cleared. A bare address takes its classful length, as old
    table dumps print classful networks without a mask.
    """
    addr, sep, length = text.partition("/")
    address = _ipv4_to_int(addr)
    if sep:
        if not length.isdigit():
            raise ValueError(f"bad mask length in {text!r}")
        masklen = int(length)
        if masklen > 32:
            raise ValueError(f"mask length {masklen} out of range")
    else:
        masklen = _classful_length(address)
    mask = (0xFFFFFFFF << (32 - masklen)) & 0xFFFFFFFF
    return f"{_int_to_ipv4(address & mask)}/{masklen}"


@lru_cache(maxsize=None)
def parse_next_hop(text):
    _ipv4_to_int(text)
    return text


def _asn(token):
    if "." in token:  # asdot notation
        hi, _, lo = token.partition(".")
        value = int(hi) * 65536 + int(lo)
    else:
        value = int(token)
    if not 0 < value <= MAX_ASN:
        raise ValueError(f"AS number out of range: {token}")
    return value


@lru_cache(maxsize=1 << 16)
def parse_as_path(text):
    """Return ``(path, contains_as_set)`` for a textual AS path.

    AS_SET groups are flattened in listed order; a trailing origin code is
    dropped.
    """
    has_set = "{" in text
    if has_set:
        text = _AS_SET.sub(lambda m: " " + m.group(1).replace(",", " ") + " ", text)
    tokens = text.split()
    if tokens and tokens[-1] in ORIGIN_CODES:
        tokens.pop()
    if not tokens:
        raise ValueError("empty AS path")
    return tuple(_asn(tok) for tok in tokens), has_set


def _finish(entries, summary, date):
    if not entries:
        raise EmptySnapshotError(
            f"no valid route lines ({summary.route_lines} route lines, {summary.skipped} skipped)"
        )
    # contiguous when every prefix forms exactly one run of consecutive lines
    prefixes = np.fromiter(map(itemgetter(0), entries), dtype=object, count=len(entries))
    runs = 1 + int(np.count_nonzero(prefixes[1:] != prefixes[:-1]))
    contiguous = runs == len(set(prefixes))
    if summary.skipped:
        log.warning("skipped %d malformed route lines: %s", summary.skipped, summary.reasons)
    return Snapshot(date=date, entries=tuple(entries), contiguous=contiguous, summary=summary)


def _canonical_route(line):
    # Returns a RouteEntry, None for lines that are not routes, or a skip
    # reason string.
    if not line or line[0] == "#" or line.isspace():
        return None
    fields = line.split("\t")
    if len(fields) != 3:
        return "field count"
    try:
        path, has_set = parse_as_path(fields[2])
        return RouteEntry(parse_prefix(fields[0].strip()), parse_next_hop(fields[1].strip()), path, has_set)
    except ValueError as exc:
        return type(exc).__name__ if not str(exc) else str(exc).split(":")[0]


class _RouteCache(dict):
    """Parsed canonical lines. Daily dumps repeat most lines verbatim, so the
    cache is shared across snapshots and cleared when it grows too large."""

    limit = 1 << 21

    def __missing__(self, line):
        value = self[line] = _canonical_route(line)
        return value

    def trim(self):
        if len(self) > self.limit:
            self.clear()


_ROUTES = _RouteCache()


def _parse_canonical(stream):
    summary = ParseSummary()
    lines = stream.read().replace("\r\n", "\n").split("\n")
    _ROUTES.trim()
    parsed = list(map(_ROUTES.__getitem__, lines))
    for pos, item in enumerate(parsed):
        if item is not None:
            if lines[pos].startswith("prefix\t"):  # optional header row
                parsed[pos] = None
            break
    entries = [item for item in parsed if item.__class__ is RouteEntry]
    summary.route_lines = len(parsed) - parsed.count(None)
    summary.valid = len(entries)
    if summary.valid < summary.route_lines:
        for item in parsed:
            if item.__class__ is str:
                summary.skip(item)
    return entries, summary


class _Columns(NamedTuple):
    network: int
    next_hop: int
    path: int


def _columns(title):
    return _Columns(title.index("Network"), title.index("Next Hop") if "Next Hop" in title else title.index("Next"), title.index("Path"))


def _parse_show_ip_bgp(stream):
    summary = ParseSummary()
    entries = []
    cols = None
    prev_prefix = None
    pending = None  # [prefix, next_hop, path_text] of the route being assembled

    def flush():
        nonlocal pending
        if pending is None:
            return
        prefix, next_hop, path_text = pending
        pending = None
        if next_hop is None:
            summary.skip("missing next hop")
            return
        try:
            path, has_set = parse_as_path(path_text)
            entries.append(RouteEntry(prefix, parse_next_hop(next_hop), path, has_set))
        except ValueError as exc:
            summary.skip(str(exc).split(":")[0])

    for line in stream:
        line = line.rstrip("\r\n")
        if cols is None:
            if "Network" in line and "Path" in line:
                cols = _columns(line)
            continue
        if not line.strip():
            continue
        if line[0] in " \t":
            # continuation of the previous route
            if pending is None:
                continue
            if pending[1] is None:
                tokens = line[: cols.path].split()
                if not tokens:
                    pending[1] = None
                    flush()
                    continue
                pending[1] = tokens[0]
                pending[2] = line[cols.path:]
            else:
                pending[2] = pending[2] + " " + line.strip()
            continue
        status = line[: cols.network]
        if line[0] not in "*sdhrSR" or not set(status) <= _STATUS_CHARS:
            continue  # trailer text such as "Displayed N routes"
        flush()
        summary.route_lines += 1
        net_field = line[cols.network: cols.next_hop]
        tokens = line[cols.network: cols.path].split()
        try:
            if net_field.strip():
                prefix = parse_prefix(tokens.pop(0))
            elif prev_prefix is None:
                raise ValueError("route without network")
            else:
                prefix = prev_prefix
        except ValueError as exc:
            summary.skip(str(exc).split(":")[0])
            continue
        prev_prefix = prefix
        next_hop = tokens[0] if tokens else None
        pending = [prefix, next_hop, line[cols.path:] if next_hop else ""]
    if cols is None:
        raise FormatError("no column-title line with 'Network' and 'Path' found")
    flush()
    summary.valid = len(entries)
    return entries, summary


@contextmanager
def gc_paused():
    """Suspend the cyclic collector while building large acyclic structures.

    Parsing allocates hundreds of thousands of tuples per snapshot, which
    would otherwise trigger full collections over every live object.
    """
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def parse_snapshot(stream, format=CANONICAL_TSV, date=None):
    """Parse a routing-table text dump into a :class:`Snapshot`.

    Malformed route lines are skipped and tallied in ``snapshot.summary``.
    """
    if format not in FORMATS:
        raise FormatError(f"unknown snapshot format {format!r}; expected one of {FORMATS}")
    with gc_paused():
        if format == CANONICAL_TSV:
            entries, summary = _parse_canonical(stream)
        else:
            entries, summary = _parse_show_ip_bgp(stream)
        return _finish(entries, summary, date)


def read_snapshot(path, format=CANONICAL_TSV, date=None):
    with open(path, encoding="utf-8") as fh:
        return parse_snapshot(fh, format=format, date=date)


def write_snapshot(snapshot, fh):
    """Write entries in canonical TSV form."""
    for e in snapshot.entries:
        fh.write(f"{e.prefix}\t{e.next_hop}\t{' '.join(map(str, e.as_path))}\n")


# ---------------------------------------------------------------------------
# Delegated statistics
# ---------------------------------------------------------------------------

RESOURCE_TYPES = ("asn", "ipv4", "ipv6")
WILDCARD_CC = "*"


@dataclass(frozen=True)
class DelegationRecord:
    registry: str
    country_code: str
    resource_type: str
    start: object
    count: int
    status: str


class DelegationList(list):
    """List of records that also carries the parse summary."""

    def __init__(self, records=(), summary=None):
        super().__init__(records)
        self.summary = summary or ParseSummary()


def _delegation_record(fields):
    registry, cc, rtype, start, count, _date, status = fields[:7]
    cc = cc.strip().upper() or WILDCARD_CC
    if cc != WILDCARD_CC and not (len(cc) == 2 and cc.isalpha()):
        raise ValueError("bad country code")
    rtype = rtype.strip().lower()
    if rtype not in RESOURCE_TYPES:
        raise ValueError("bad resource type")
    count = int(count)
    if count < 1:
        raise ValueError("bad count")
    if rtype == "asn":
        start = _asn(start.strip())
    elif rtype == "ipv4":
        _ipv4_to_int(start.strip())
        start = start.strip()
    status = status.strip().lower()
    if status not in ("allocated", "assigned"):
        status = "other"
    return DelegationRecord(registry.strip(), cc, rtype, start, count, status)


def parse_delegation(stream):
    """Parse pipe-delimited delegated-stats lines.

    Comment, version and summary lines are ignored; short or invalid lines
    are skipped and counted in ``result.summary``.
    """
    summary = ParseSummary()
    records = []
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("|")
        if "summary" in (f.strip() for f in fields):
            continue
        if fields[0].strip()[:1].isdigit():  # version header
            continue
        summary.route_lines += 1
        if len(fields) < 7:
            summary.skip("field count")
            continue
        try:
            records.append(_delegation_record(fields))
        except ValueError as exc:
            summary.skip(str(exc).split(":")[0])
    summary.valid = len(records)
    if summary.skipped:
        log.warning("skipped %d malformed delegation lines", summary.skipped)
    return DelegationList(records, summary)


def read_delegation(path):
    with open(path, encoding="utf-8") as fh:
        return parse_delegation(fh)


def extract_country_asns(records, country):
    country = country.upper()
    asns = set()
    for r in records:
        if r.resource_type == "asn" and r.country_code == country and r.status != "other":
            asns.update(range(r.start, r.start + r.count))
    return asns
