"""Control-plane event detection from daily routing-table snapshots."""
from .aberration import assemble_report, detect_stochastic, quantify_impact
from .arima import ArimaModel, ArimaOrder, acf, fit, forecast, pacf, select_order
from .changepoint import choose_k, classify_long_term, cusum, segneigh_mean
from .ingest import extract_country_asns, parse_delegation, parse_snapshot
from .reachability import (
    build_peer_set,
    normalize,
    peer_bin_histogram,
    peer_counts,
    per_peer_series,
    smooth,
    x_percent_measure,
)
from .ubc import compute_ubc, rank_upstreams

__version__ = "0.1.0"
