"""Case-density classes for regions.

Four graded classes plus NONE. Classes are evaluated in priority order C1,
C2, C3, C4 and the first matching rule wins; counts that fit no rule map to
NONE. C1 and C2 are the hotspot classes.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Protocol

from .geo import Region, haversine_m


class HotspotClass(Enum):
    C1 = "C1"  # more than 20 cases within 500 m
    C2 = "C2"  # more than 50 cases within 1 km
    C3 = "C3"  # fewer than 5 cases within 1 km
    C4 = "C4"  # fewer than 10 cases within 2 km
    NONE = "NONE"

    @property
    def is_hotspot(self) -> bool:
        return self in (HotspotClass.C1, HotspotClass.C2)


CLASS_ORDER = (HotspotClass.C1, HotspotClass.C2, HotspotClass.C3, HotspotClass.C4, HotspotClass.NONE)


class GeocodedCase(Protocol):
    lat: float
    lon: float
    count: float


def label_region(cases: Iterable[GeocodedCase], center: Region) -> HotspotClass:
    """Classify a region by case counts within 500 m / 1 km / 2 km of its centroid."""
    clat, clon = center.center
    within_500 = within_1k = within_2k = 0.0
    for case in cases:
        d = haversine_m(clat, clon, case.lat, case.lon)
        if d <= 500.0:
            within_500 += case.count
        if d <= 1000.0:
            within_1k += case.count
        if d <= 2000.0:
            within_2k += case.count
    if within_500 > 20:
        return HotspotClass.C1
    if within_1k > 50:
        return HotspotClass.C2
    if within_1k < 5:
        return HotspotClass.C3
    if within_2k < 10:
        return HotspotClass.C4
    return HotspotClass.NONE
