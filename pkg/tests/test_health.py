import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epimob.health import (
    HealthError,
    HealthProfile,
    Reading,
    Status,
    alert_events,
    alerts_to_json,
    check_status,
    profile_from_csv,
    readings_from_csv,
)

PROFILE = HealthProfile(
    ranges={
        "body_temperature": (97.0, 99.0),
        "systolic": (90.0, 130.0),
        "diastolic": (60.0, 85.0),
        "pulse": (55.0, 100.0),
        "spo2": (94.0, 100.0),
    }
)


def readings(**values):
    defaults = {
        "body_temperature": 98.6,
        "systolic": 115.0,
        "diastolic": 75.0,
        "pulse": 70.0,
        "spo2": 98.0,
    }
    defaults.update(values)
    return [Reading(parameter=k, value=v) for k, v in defaults.items()]


class TestCheckStatus:
    def test_all_in_range_normal(self):
        report = check_status(readings(), PROFILE)
        assert report.status is Status.NORMAL
        assert report.violations == ()

    def test_upper_bound_inclusive(self):
        report = check_status(readings(body_temperature=99.0), PROFILE)
        assert report.status is Status.NORMAL

    def test_lower_bound_inclusive(self):
        report = check_status(readings(spo2=94.0), PROFILE)
        assert report.status is Status.NORMAL

    def test_low_spo2_flagged(self):
        report = check_status(readings(spo2=91.0), PROFILE)
        assert report.status is Status.ABNORMAL
        assert report.violations == ("spo2",)

    def test_missing_parameter_named(self):
        partial = [r for r in readings() if r.parameter != "pulse"]
        with pytest.raises(HealthError, match="pulse"):
            check_status(partial, PROFILE)

    def test_unknown_parameter_rejected(self):
        with pytest.raises(HealthError, match="height"):
            check_status(readings() + [Reading(parameter="height", value=180.0)], PROFILE)

    def test_inverted_range_rejected(self):
        with pytest.raises(HealthError):
            HealthProfile(ranges={"pulse": (100.0, 50.0)})

    @given(
        temp=st.floats(min_value=90.0, max_value=105.0),
        spo2=st.floats(min_value=80.0, max_value=100.0),
        pulse=st.floats(min_value=30.0, max_value=180.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_violations_equal_naive_scan(self, temp, spo2, pulse):
        batch = readings(body_temperature=temp, spo2=spo2, pulse=pulse)
        report = check_status(batch, PROFILE)
        naive = sorted(
            r.parameter
            for r in batch
            if not (PROFILE.ranges[r.parameter][0] <= r.value <= PROFILE.ranges[r.parameter][1])
        )
        assert list(report.violations) == naive
        assert (report.status is Status.NORMAL) == (not naive)

    @given(
        value=st.floats(min_value=50.0, max_value=150.0),
        lo=st.floats(min_value=60.0, max_value=100.0),
        shrink=st.floats(min_value=0.0, max_value=30.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_under_range_shrinking(self, value, lo, shrink):
        hi = lo + 40.0
        if lo + shrink > hi - shrink:
            return
        wide = HealthProfile(ranges={"pulse": (lo, hi)})
        narrow = HealthProfile(ranges={"pulse": (lo + shrink, hi - shrink)})
        batch = [Reading(parameter="pulse", value=value)]
        if check_status(batch, wide).status is Status.ABNORMAL:
            assert check_status(batch, narrow).status is Status.ABNORMAL


class TestSerialization:
    def test_profile_csv(self):
        text = "parameter,low,high\npulse,55,100\nspo2,94,100\n"
        profile = profile_from_csv(text)
        assert profile.ranges == {"pulse": (55.0, 100.0), "spo2": (94.0, 100.0)}

    def test_readings_csv(self):
        got = readings_from_csv("parameter,value,timestamp\npulse,72,1000\n")
        assert got == [Reading(parameter="pulse", value=72.0, timestamp=1000.0)]

    def test_alert_payload(self):
        profile = HealthProfile(ranges={"spo2": (94.0, 100.0)})
        events = alert_events([Reading(parameter="spo2", value=90.0, timestamp=5.0)], profile)
        assert events == [{"parameter": "spo2", "value": 90.0, "range": [94.0, 100.0], "timestamp": 5.0}]
        parsed = json.loads(alerts_to_json(events))
        assert parsed[0]["parameter"] == "spo2"

    def test_no_alerts_when_normal(self):
        profile = HealthProfile(ranges={"spo2": (94.0, 100.0)})
        assert alert_events([Reading(parameter="spo2", value=96.0)], profile) == []
