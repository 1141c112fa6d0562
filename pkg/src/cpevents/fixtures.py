"""Synthetic routing-table fixtures with injected reachability events."""
import datetime as dt
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError

TRANSIT_AS = 9498
UPSTREAMS = (3561, 174, 3549, 3257)
COUNTRY_ASN_BASE = 45000
COUNTRY_ASN_COUNT = 64
FOREIGN_ORIGIN = 15169
PEER_AS_BASE = 64600


@dataclass(frozen=True)
class InjectedEvent:
    start: int  # 0-based day index
    duration: int = 1
    magnitude: float = 0.3  # fraction of the common pool
    kind: str = "step"  # step | spike
    direction: str = "drop"  # drop | raise

    def __post_init__(self):
        if self.kind not in ("step", "spike"):
            raise ConfigError(f"unknown event kind {self.kind!r}")
        if self.direction not in ("drop", "raise"):
            raise ConfigError(f"unknown event direction {self.direction!r}")
        if not 0 <= self.magnitude <= 1:
            raise ConfigError("event magnitude must be a fraction in [0, 1]")
        if self.kind == "spike" and self.duration != 1:
            raise ConfigError("spike events last exactly one day")
        if self.duration < 1 or self.start < 0:
            raise ConfigError("event start must be >= 0 and duration >= 1")

    def active(self, day):
        return self.start <= day < self.start + self.duration


@dataclass(frozen=True)
class FixtureSpec:
    days: int = 365
    peers: int = 10
    base: float = 1000
    trend: float = 0.0
    sigma: float = 0.0
    noise: str = "normal"  # normal | sign (+-sigma with equal odds)
    events: tuple = ()
    seed: int = 0
    start_date: dt.date = dt.date(2012, 1, 1)
    country: str = "IN"
    foreign_prefixes: int = 0
    pattern: str = "rib.%Y%m%d.tsv"

    def __post_init__(self):
        if self.days < 1 or self.peers < 1 or self.base < 0:
            raise ConfigError("days and peers must be >= 1 and base >= 0")
        if self.noise not in ("normal", "sign"):
            raise ConfigError(f"unknown noise kind {self.noise!r}")
        events = tuple(e if isinstance(e, InjectedEvent) else InjectedEvent(**e) for e in self.events)
        object.__setattr__(self, "events", events)
        if isinstance(self.start_date, str):
            object.__setattr__(self, "start_date", dt.date.fromisoformat(self.start_date))

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def to_dict(self):
        d = asdict(self)
        d["start_date"] = self.start_date.isoformat()
        d["events"] = [asdict(e) for e in self.events]
        return d


def _prefix(index, region=16):
    return f"{region + (index >> 16)}.{(index >> 8) & 255}.{index & 255}.0/24"


def _next_hop(peer):
    return f"198.51.{peer // 250}.{peer % 250 + 1}"


@dataclass
class _LineCache:
    peers: int
    cache: dict = field(default_factory=dict)

    def lines(self, key, prefix, origin):
        hit = self.cache.get(key)
        if hit is None:
            hit = []
            for p in range(self.peers):
                up = UPSTREAMS[(p + key[1]) % len(UPSTREAMS)]
                hit.append(f"{prefix}\t{_next_hop(p)}\t{PEER_AS_BASE + p} {up} {TRANSIT_AS} {origin}\n")
            self.cache[key] = hit
        return hit


def day_plan(spec, noise):
    """Per-day (core, degraded, extra) prefix counts."""
    plan = []
    for t in range(spec.days):
        core = max(0, int(round(spec.base + spec.trend * t + noise[t])))
        drop = sum(e.magnitude for e in spec.events if e.direction == "drop" and e.active(t))
        rise = sum(e.magnitude for e in spec.events if e.direction == "raise" and e.active(t))
        degraded = min(core, int(round(drop * core)))
        extra = int(round(rise * core))
        plan.append((core, degraded, extra))
    return plan


def _noise(spec):
    rng = np.random.default_rng(spec.seed)
    if spec.noise == "normal":
        return spec.sigma * rng.standard_normal(spec.days)
    return spec.sigma * np.where(rng.random(spec.days) < 0.5, -1.0, 1.0)


def generate_fixture(spec, output_dir):
    """Write one canonical-TSV snapshot per day plus a delegation file.

    Every peer announces the common pool. Drop events leave a fraction of the
    pool announced by only ``peers // 2`` peers; raise events add prefixes
    announced by all peers. Returns the snapshot paths in date order.
    """
    os.makedirs(output_dir, exist_ok=True)
    noise = _noise(spec)
    minority = spec.peers // 2
    cache = _LineCache(spec.peers)
    paths = []
    for t, (core, degraded, extra) in enumerate(day_plan(spec, noise)):
        chunks = []
        for i in range(core):
            lines = cache.lines(("c", i), _prefix(i), COUNTRY_ASN_BASE + i % COUNTRY_ASN_COUNT)
            chunks.extend(lines if i < core - degraded else lines[:minority])
        for i in range(extra):
            chunks.extend(cache.lines(("x", i), _prefix(i, region=100), COUNTRY_ASN_BASE + i % COUNTRY_ASN_COUNT))
        for i in range(spec.foreign_prefixes):
            chunks.extend(cache.lines(("f", i), _prefix(i, region=200), FOREIGN_ORIGIN))
        day = spec.start_date + dt.timedelta(days=t)
        path = os.path.join(output_dir, day.strftime(spec.pattern))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("".join(chunks))
        paths.append(path)
    with open(os.path.join(output_dir, "delegated-fixture.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(delegation_text(spec))
    with open(os.path.join(output_dir, "fixture.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def delegation_text(spec):
    day = spec.start_date.strftime("%Y%m%d")
    lines = [
        f"2|fixture|{day}|2|19830705|{day}|+0000",
        f"fixture|*|asn|*|2|summary",
        f"fixture|{spec.country}|asn|{COUNTRY_ASN_BASE}|{COUNTRY_ASN_COUNT}|{day}|allocated",
        f"fixture|US|asn|{FOREIGN_ORIGIN}|1|{day}|allocated",
    ]
    return "\n".join(lines) + "\n"
