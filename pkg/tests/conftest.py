import math

import pytest

from epimob.geo import BBox, M_PER_DEG_LAT


def metric_bbox(width_m: float, height_m: float, lat0: float = 0.0, lon0: float = 0.0) -> BBox:
    """Bounding box that is exactly width_m x height_m at its centroid latitude."""
    dlat = height_m / M_PER_DEG_LAT
    dlon = width_m / (M_PER_DEG_LAT * math.cos(math.radians(lat0 + dlat / 2)))
    return BBox(lat0, lon0, lat0 + dlat, lon0 + dlon)


@pytest.fixture
def bbox_2x3_km() -> BBox:
    return metric_bbox(2000.0, 3000.0)
