"""Preliminary at-home health-status check against per-user parameter ranges.

A profile maps each monitored parameter to an inclusive [low, high] range;
a reading batch is Normal exactly when every profile parameter has at least
one reading and all readings fall inside their ranges. Context (location,
ambient temperature, humidity) selects which profile applies; it never
adjusts the bounds themselves.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

DEFAULT_PARAMETERS = ("body_temperature", "systolic", "diastolic", "pulse", "spo2")


class HealthError(ValueError):
    """Malformed profile or reading set."""


class Status(Enum):
    NORMAL = "Normal"
    ABNORMAL = "Abnormal"


@dataclass(frozen=True)
class HealthProfile:
    ranges: Mapping[str, tuple[float, float]]

    def __post_init__(self) -> None:
        if not self.ranges:
            raise HealthError("profile must define at least one parameter")
        for name, (low, high) in self.ranges.items():
            if low > high:
                raise HealthError(f"{name}: lower bound {low} exceeds upper bound {high}")


@dataclass(frozen=True)
class Reading:
    parameter: str
    value: float
    timestamp: float = 0.0
    location: Optional[tuple[float, float]] = None
    env_temperature: Optional[float] = None
    humidity: Optional[float] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise HealthError(f"{self.parameter}: reading must be finite")


@dataclass(frozen=True)
class StatusReport:
    status: Status
    violations: tuple[str, ...]


def check_status(readings: Sequence[Reading], profile: HealthProfile) -> StatusReport:
    """Normal iff every parameter's readings sit inside its inclusive range."""
    seen: dict[str, bool] = {}
    for r in readings:
        if r.parameter not in profile.ranges:
            raise HealthError(f"reading for unknown parameter {r.parameter!r}")
        low, high = profile.ranges[r.parameter]
        in_range = low <= r.value <= high
        seen[r.parameter] = seen.get(r.parameter, True) and in_range
    missing = sorted(set(profile.ranges) - set(seen))
    if missing:
        raise HealthError(f"no reading for parameters: {', '.join(missing)}")
    violations = tuple(sorted(p for p, ok in seen.items() if not ok))
    return StatusReport(
        status=Status.ABNORMAL if violations else Status.NORMAL,
        violations=violations,
    )


def profile_from_csv(text: str) -> HealthProfile:
    """Rows of `parameter,low,high` (header optional)."""
    ranges = {}
    for k, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or row[0].startswith("#"):
            continue
        if row[0].strip().lower() == "parameter":
            continue
        if len(row) != 3:
            raise HealthError(f"profile line {k}: expected 3 fields")
        ranges[row[0].strip()] = (float(row[1]), float(row[2]))
    return HealthProfile(ranges=ranges)


def readings_from_csv(text: str) -> list[Reading]:
    """Rows of `parameter,value,timestamp` (header optional)."""
    readings = []
    for k, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or row[0].startswith("#"):
            continue
        if row[0].strip().lower() == "parameter":
            continue
        if len(row) < 2:
            raise HealthError(f"readings line {k}: expected at least 2 fields")
        ts = float(row[2]) if len(row) > 2 and row[2] else 0.0
        readings.append(Reading(parameter=row[0].strip(), value=float(row[1]), timestamp=ts))
    return readings


def alert_events(readings: Sequence[Reading], profile: HealthProfile) -> list[dict]:
    """JSON-serializable alert per out-of-range reading, for forwarding."""
    report = check_status(readings, profile)
    events = []
    if report.status is Status.NORMAL:
        return events
    for r in readings:
        low, high = profile.ranges[r.parameter]
        if not (low <= r.value <= high):
            events.append(
                {
                    "parameter": r.parameter,
                    "value": r.value,
                    "range": [low, high],
                    "timestamp": r.timestamp,
                }
            )
    return events


def alerts_to_json(events: Sequence[dict]) -> str:
    return json.dumps(events, indent=2, sort_keys=True)
