"""Spatial universe: grid construction, region attributes, adjacency, connectivity.

Regions are axis-aligned lat/lon rectangles. Metric cell sizes are converted
to degrees at the bounding box's centroid latitude, which is adequate at city
scale. Six adjacency metrics are supported: two topological (shared border,
direct route) and four rank-based ones that connect each region to its
predecessor and successor in the ordering induced by a numeric attribute.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

M_PER_DEG_LAT = 111_320.0
_EDGE_TOL = 1e-9


class GeoError(ValueError):
    """Invalid spatial input (degenerate bbox, missing attribute, ...)."""


class BBox(NamedTuple):
    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    @property
    def center(self) -> tuple[float, float]:
        return ((self.min_lat + self.max_lat) / 2.0, (self.min_lon + self.max_lon) / 2.0)

    def contains(self, lat: float, lon: float) -> bool:
        return self.min_lat <= lat <= self.max_lat and self.min_lon <= lon <= self.max_lon

    def validate(self) -> None:
        if not (self.min_lat < self.max_lat and self.min_lon < self.max_lon):
            raise GeoError(f"degenerate bbox {self}")

    @staticmethod
    def union(boxes: Sequence["BBox"]) -> "BBox":
        return BBox(
            min(b.min_lat for b in boxes),
            min(b.min_lon for b in boxes),
            max(b.max_lat for b in boxes),
            max(b.max_lon for b in boxes),
        )


class PoiType(Enum):
    AIRPORT = "airport"
    RAIL_JUNCTION = "rail_junction"
    HOSPITAL = "hospital"
    COMMERCIAL = "commercial"
    PARK = "park"
    RESIDENCE = "residence"
    OTHER = "other"


class AdjacencyMetric(Enum):
    SHARED_BORDER = "shared_border"
    DIRECT_ROUTE = "direct_route"
    RANK_DENSITY = "rank_density"
    RANK_LITERACY = "rank_literacy"
    RANK_MEDICAL = "rank_medical"
    RANK_FLOW = "rank_flow"


RANK_ATTRIBUTES = {
    AdjacencyMetric.RANK_DENSITY: "population_density",
    AdjacencyMetric.RANK_LITERACY: "literacy_rate",
    AdjacencyMetric.RANK_MEDICAL: "medical_facilities",
    AdjacencyMetric.RANK_FLOW: "aggregate_flow",
}


@dataclass(frozen=True)
class Region:
    """A grid cell or administrative zone with demographic attributes."""

    id: str
    bbox: BBox
    population_density: Optional[float] = None
    literacy_rate: Optional[float] = None
    medical_facilities: Optional[float] = None
    aggregate_flow: Optional[float] = None

    def __post_init__(self) -> None:
        self.bbox.validate()
        for name in ("population_density", "medical_facilities", "aggregate_flow"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise GeoError(f"region {self.id}: {name} must be non-negative, got {v}")
        if self.literacy_rate is not None and not (0.0 <= self.literacy_rate <= 1.0):
            raise GeoError(f"region {self.id}: literacy_rate must be in [0,1]")

    @property
    def center(self) -> tuple[float, float]:
        return self.bbox.center


@dataclass(frozen=True)
class Place:
    """A point of interest."""

    id: str
    poi_type: PoiType
    lat: float
    lon: float
    area_m2: float = 0.0
    opening_hours: Optional[tuple[float, float]] = None  # seconds since midnight
    region_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.area_m2 < 0:
            raise GeoError(f"place {self.id}: area_m2 must be >= 0")


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Binary symmetric adjacency over an ordered set of regions."""

    metric: AdjacencyMetric
    ids: tuple[str, ...]
    weights: np.ndarray  # (n, n), non-negative, zero diagonal

    def index_of(self, region_id: str) -> int:
        return self.ids.index(region_id)


@dataclass(frozen=True)
class ConnectivityIndex:
    place_id: str
    window: tuple[float, Optional[float]]
    routes: float
    inflow: float
    outflow: float
    ci: float


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * 6_371_000.0 * math.asin(math.sqrt(a))


def build_grid(bbox: BBox, cell_size_m: float) -> list[Region]:
    """Tile a bounding box with square-ish cells of roughly `cell_size_m`.

    Cell ids are `r{row}c{col}`, zero-padded, row 0 at min_lat and col 0 at
    min_lon. Cells on the top/right edge are clipped to the bbox so the cells
    partition it exactly; `cell_index` maps any point of the bbox to exactly
    one cell.
    """
    bbox.validate()
    if cell_size_m <= 0:
        raise GeoError(f"cell_size_m must be > 0, got {cell_size_m}")
    dlat, dlon = _cell_steps_deg(bbox, cell_size_m)
    n_rows = _n_cells(bbox.max_lat - bbox.min_lat, dlat)
    n_cols = _n_cells(bbox.max_lon - bbox.min_lon, dlon)
    width = max(len(str(n_rows - 1)), len(str(n_cols - 1)), 2)
    regions = []
    for r in range(n_rows):
        lat0 = bbox.min_lat + r * dlat
        lat1 = min(bbox.min_lat + (r + 1) * dlat, bbox.max_lat)
        for c in range(n_cols):
            lon0 = bbox.min_lon + c * dlon
            lon1 = min(bbox.min_lon + (c + 1) * dlon, bbox.max_lon)
            regions.append(Region(id=f"r{r:0{width}d}c{c:0{width}d}", bbox=BBox(lat0, lon0, lat1, lon1)))
    return regions


def cell_index(bbox: BBox, cell_size_m: float, lat: float, lon: float) -> tuple[int, int]:
    """(row, col) of the unique grid cell containing a point of the bbox.

    Points on interior cell edges belong to the higher-index cell; points on
    the bbox's max edges belong to the last cell.
    """
    if not bbox.contains(lat, lon):
        raise GeoError(f"point ({lat}, {lon}) outside bbox {bbox}")
    dlat, dlon = _cell_steps_deg(bbox, cell_size_m)
    n_rows = _n_cells(bbox.max_lat - bbox.min_lat, dlat)
    n_cols = _n_cells(bbox.max_lon - bbox.min_lon, dlon)
    r = min(int((lat - bbox.min_lat) / dlat), n_rows - 1)
    c = min(int((lon - bbox.min_lon) / dlon), n_cols - 1)
    return r, c


def _cell_steps_deg(bbox: BBox, cell_size_m: float) -> tuple[float, float]:
    centroid_lat = (bbox.min_lat + bbox.max_lat) / 2.0
    dlat = cell_size_m / M_PER_DEG_LAT
    dlon = cell_size_m / (M_PER_DEG_LAT * math.cos(math.radians(centroid_lat)))
    return dlat, dlon


def _n_cells(extent_deg: float, step_deg: float) -> int:
    # Tolerance keeps exact multiples from gaining a sliver cell.
    return max(1, math.ceil(extent_deg / step_deg - 1e-9))


def adjacency_matrix(
    regions: Sequence[Region],
    metric: AdjacencyMetric,
    routes: Optional[Iterable[tuple[str, str]]] = None,
) -> AdjacencyMatrix:
    """Binary adjacency matrix under one of the six supported metrics.

    Rank metrics sort regions by the ranking attribute (ties broken by region
    id, ascending) and connect each region to its predecessor and successor,
    yielding a path graph. `routes` is only consulted for DIRECT_ROUTE and may
    list pairs in either order.
    """
    if len(regions) < 2:
        raise GeoError("adjacency needs at least 2 regions")
    ids = tuple(r.id for r in regions)
    if len(set(ids)) != len(ids):
        raise GeoError("duplicate region ids")
    n = len(ids)
    w = np.zeros((n, n))
    if metric is AdjacencyMetric.SHARED_BORDER:
        for i in range(n):
            for j in range(i + 1, n):
                if _shares_border(regions[i].bbox, regions[j].bbox):
                    w[i, j] = w[j, i] = 1.0
    elif metric is AdjacencyMetric.DIRECT_ROUTE:
        index = {rid: k for k, rid in enumerate(ids)}
        for a, b in routes or ():
            if a in index and b in index and a != b:
                w[index[a], index[b]] = w[index[b], index[a]] = 1.0
    else:
        attr = RANK_ATTRIBUTES[metric]
        for r in regions:
            if getattr(r, attr) is None:
                raise GeoError(f"region {r.id} has no {attr}; required for {metric.value}")
        order = sorted(range(n), key=lambda k: (getattr(regions[k], attr), ids[k]))
        for a, b in zip(order, order[1:]):
            w[a, b] = w[b, a] = 1.0
    return AdjacencyMatrix(metric=metric, ids=ids, weights=w)


def _shares_border(a: BBox, b: BBox) -> bool:
    """True when two rectangles touch along a segment of positive length."""
    lat_overlap = min(a.max_lat, b.max_lat) - max(a.min_lat, b.min_lat)
    lon_overlap = min(a.max_lon, b.max_lon) - max(a.min_lon, b.min_lon)
    touch_lat = abs(lat_overlap) <= _EDGE_TOL and lon_overlap > _EDGE_TOL
    touch_lon = abs(lon_overlap) <= _EDGE_TOL and lat_overlap > _EDGE_TOL
    return touch_lat or touch_lon


def connectivity_index(
    place_id: str,
    route_counts: Mapping[str, float],
    inflows: Mapping[str, float],
    outflows: Mapping[str, float],
    window: tuple[float, Optional[float]],
) -> ConnectivityIndex:
    """Normalized route-availability x traffic measure for one place.

    The raw index is routes * (inflow + outflow); it is divided by the
    maximum raw index over all places observed in the same window, so values
    lie in [0, 1] and the busiest place scores exactly 1. All-zero windows
    normalize to 0.
    """
    products = {}
    for pid in set(route_counts) | set(inflows) | set(outflows):
        products[pid] = route_counts.get(pid, 0.0) * (inflows.get(pid, 0.0) + outflows.get(pid, 0.0))
    peak = max(products.values(), default=0.0)
    raw = products.get(place_id, 0.0)
    ci = raw / peak if peak > 0 else 0.0
    return ConnectivityIndex(
        place_id=place_id,
        window=window,
        routes=route_counts.get(place_id, 0.0),
        inflow=inflows.get(place_id, 0.0),
        outflow=outflows.get(place_id, 0.0),
        ci=ci,
    )


def regions_from_geojson(text: str) -> list[Region]:
    """Parse regions from a GeoJSON FeatureCollection.

    Features must carry polygon geometry; the region bbox is the polygon's
    envelope. Demographic attributes are read from the feature properties
    (population_density, literacy_rate, medical_facilities, aggregate_flow).
    """
    doc = json.loads(text)
    if doc.get("type") != "FeatureCollection":
        raise GeoError("expected a GeoJSON FeatureCollection")
    regions = []
    for k, feature in enumerate(doc.get("features", [])):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise GeoError(f"feature {k}: only Polygon geometry is supported")
        ring = geom["coordinates"][0]
        lons = [pt[0] for pt in ring]
        lats = [pt[1] for pt in ring]
        props = feature.get("properties") or {}
        rid = str(props.get("id", feature.get("id", f"region{k}")))
        regions.append(
            Region(
                id=rid,
                bbox=BBox(min(lats), min(lons), max(lats), max(lons)),
                population_density=_opt_float(props.get("population_density")),
                literacy_rate=_opt_float(props.get("literacy_rate")),
                medical_facilities=_opt_float(props.get("medical_facilities")),
                aggregate_flow=_opt_float(props.get("aggregate_flow")),
            )
        )
    return regions


def _opt_float(v) -> Optional[float]:
    return None if v is None else float(v)


def routes_from_csv(text: str) -> list[tuple[str, str, float]]:
    """Parse `src_id,dst_id,route_count` rows (header optional)."""
    routes = []
    for k, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or row[0].startswith("#"):
            continue
        if row[0].strip().lower() == "src_id":
            continue
        if len(row) != 3:
            raise GeoError(f"routes line {k}: expected 3 fields, got {len(row)}")
        try:
            count = float(row[2])
        except ValueError as exc:
            raise GeoError(f"routes line {k}: bad route_count {row[2]!r}") from exc
        routes.append((row[0].strip(), row[1].strip(), count))
    return routes
