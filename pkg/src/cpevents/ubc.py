"""Upstream betweenness centrality toward a target AS."""
import csv
from collections import Counter
from dataclasses import dataclass, field


@dataclass(frozen=True)
class UpstreamStat:
    date: object
    target_as: int
    per_upstream: dict
    direct: int = 0
    qualifying: int = field(default=0)

    @property
    def total_paths(self):
        return sum(self.per_upstream.values())

    def ranking(self):
        """Upstreams by descending UBC, ties by ascending AS number."""
        return sorted(self.per_upstream.items(), key=lambda kv: (-kv[1], kv[0]))


def collapse_prepending(path):
    out = []
    for asn in path:
        if not out or out[-1] != asn:
            out.append(asn)
    return out


def compute_ubc(snapshot, target_as, origin_only=False):
    """Credit, for every path reaching ``target_as``, the AS just before its
    first occurrence (collector side). Paths that start at the target count
    in ``direct``.
    """
    if target_as <= 0:
        raise ValueError("target AS must be positive")
    credit = Counter()
    direct = 0
    qualifying = 0
    for entry in snapshot.entries:
        path = entry.as_path
        if target_as not in path:
            continue
        if origin_only and path[-1] != target_as:
            continue
        qualifying += 1
        path = collapse_prepending(path)
        pos = path.index(target_as)
        if pos == 0:
            direct += 1
        else:
            credit[path[pos - 1]] += 1
    return UpstreamStat(snapshot.date, target_as, dict(credit), direct, qualifying)


@dataclass(frozen=True)
class RankRow:
    date: object
    ranking: tuple  # ((asn, ubc), ...) best first
    changed: bool

    @property
    def order(self):
        return tuple(asn for asn, _ in self.ranking)


def rank_upstreams(stats, top_n=4):
    if not stats:
        raise ValueError("no upstream statistics to rank")
    rows = []
    prev = None
    for s in stats:
        ranking = tuple(s.ranking()[:top_n])
        order = tuple(asn for asn, _ in ranking)
        rows.append(RankRow(s.date, ranking, prev is not None and order != prev))
        prev = order
    return rows


def write_ubc_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "upstream_as", "ubc", "rank"])
        for row in rows:
            for rank, (asn, ubc) in enumerate(row.ranking, 1):
                w.writerow([row.date.isoformat(), asn, ubc, rank])


def write_rank_changes_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "previous_order", "order"])
        prev = None
        for row in rows:
            if row.changed:
                w.writerow([row.date.isoformat(), " ".join(map(str, prev)), " ".join(map(str, row.order))])
            prev = row.order
