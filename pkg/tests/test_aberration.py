import datetime as dt
import json

import numpy as np
import pytest

from cpevents.aberration import (
    DROP,
    RAISE,
    AberrationEvent,
    assemble_report,
    detect_segments,
    detect_stochastic,
    quantify_impact,
    read_events_csv,
    segment_order,
    write_events_csv,
)
from cpevents.arima import ArimaOrder
from cpevents.changepoint import classify_long_term, segment_means, segmentation_from_bounds
from cpevents.errors import DataError

D0 = dt.date(2012, 1, 1)


def days(n):
    return [D0 + dt.timedelta(i) for i in range(n)]


def sign_noise(n, seed, level=1000.0, sigma=5.0):
    rng = np.random.default_rng(seed)
    return level + sigma * np.where(rng.random(n) < 0.5, -1.0, 1.0)


class TestDetect:
    def test_single_spike(self):
        v = sign_noise(60, 0)
        v[40] = 700.0
        ev = detect_stochastic(v, ArimaOrder(0, 0, 0), dates=days(60))
        assert [e.index for e in ev] == [40]
        e = ev[0]
        assert e.direction == DROP
        assert e.date == D0 + dt.timedelta(40)
        assert e.violated_bound == e.lo95
        assert e.impact_percent == pytest.approx(100 * abs(700 - e.baseline) / e.baseline)

    def test_masking_prevention(self):
        v = sign_noise(60, 1)
        v[40] = v[43] = 700.0
        ev = detect_stochastic(v, ArimaOrder(0, 0, 0))
        assert [e.index for e in ev] == [40, 43]
        # the flagged value is replaced, so the second baseline is clean
        assert ev[1].baseline > 990

    def test_raise(self):
        v = sign_noise(40, 2)
        v[30] = 1300.0
        ev = detect_stochastic(v, ArimaOrder(0, 0, 0), offset=100)
        assert [(e.index, e.direction) for e in ev] == [(130, RAISE)]
        assert ev[0].date is None

    def test_no_flags_on_clean_series(self):
        assert detect_stochastic(sign_noise(80, 3), ArimaOrder(0, 0, 0)) == []

    def test_first_checked_index_is_after_warmup(self):
        v = sign_noise(30, 4)
        v[21] = 500.0  # inside the fitting window for warmup 21
        v[22] = 500.0
        ev = detect_stochastic(v, ArimaOrder(0, 0, 0), warmup=21)
        assert [e.index for e in ev] == [22]

    def test_too_short(self):
        with pytest.raises(DataError):
            detect_stochastic(np.ones(21), ArimaOrder(0, 0, 0), warmup=21)


def test_quantify_impact():
    assert quantify_impact(700.0, 1000.0) == pytest.approx(30.0)
    assert quantify_impact(1300.0, 1000.0) == pytest.approx(30.0)
    with pytest.raises(DataError):
        quantify_impact(1.0, 0.0)


def test_segment_order_constant_segment():
    assert segment_order(np.full(40, 5.0)) == ArimaOrder(0, 0, 0)


def test_detect_segments_skips_short():
    v = np.r_[sign_noise(50, 5), sign_noise(10, 6, level=500.0)]
    seg = segmentation_from_bounds(v, [50, 60])
    out = detect_segments(v, days(60), seg)
    assert out[1].order is None and out[1].events == []
    assert out[0].order is not None


def make_report():
    v = np.r_[np.full(30, 100.0), np.full(30, 70.0)]
    ref = np.full(60, 100.0)
    seg = segmentation_from_bounds(v, [30, 60])
    lt = classify_long_term(seg, segment_means(ref, seg))
    ev = AberrationEvent(D0 + dt.timedelta(25), 25, 60.0, 100.0, 95.0, 105.0, DROP, 40.0, 100.0)
    return assemble_report(lt, [ev], days(60), {"x_threshold": 0.88})


class TestReport:
    def test_rows(self):
        rows = make_report().rows()
        assert [r["diff_percent"] for r in rows] == [100, 70]
        assert [r["long_term_event"] for r in rows] == [False, True]
        assert [r["stochastic_events"] for r in rows] == [1, 0]

    def test_json(self):
        d = json.loads(make_report().to_json())
        assert d["metadata"]["date_span"] == ["2012-01-01", "2012-02-29"]
        assert d["long_term"][0]["impact_percent"] == pytest.approx(30.0)
        assert d["stochastic"][0]["date"] == "2012-01-26"

    def test_rejects_gaps(self):
        v = np.ones(10)
        seg = segmentation_from_bounds(v, [5, 10])
        lt = classify_long_term(seg, [1.0, 1.0])
        with pytest.raises(DataError):
            assemble_report(lt[:1], [], days(10))

    def test_rejects_misdated_event(self):
        rep = make_report()
        bad = AberrationEvent(D0, 5, 1.0, 1.0, 0.0, 2.0, DROP, 0.0, 1.0)
        with pytest.raises(DataError):
            assemble_report(rep.long_term, [bad], rep.dates)

    def test_csv_round_trip(self, tmp_path):
        rep = make_report()
        write_events_csv(rep, tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "date,type,observed,expected,lo95,hi95,direction,impact_percent"
        assert [ln.split(",")[1] for ln in lines[1:]] == ["stochastic", "long_term"]
        back = read_events_csv(tmp_path / "r.csv", rep.dates)
        assert len(back) == 1 and back[0].index == 25 and back[0].impact_percent == 40.0
