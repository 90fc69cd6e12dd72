"""Dataset ingestion, synthetic scenario generation, and persistence.

All tabular formats are versioned with a leading header line. Loaders report
malformed rows by file and line number and enforce referential integrity
between places/cases/users and the region table. The scenario generator
plants recoverable structure: hotspots that satisfy their class rules by
construction, a co-visiting group, an over-threshold flow, and a cascading
visit pattern with full participation.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .geo import BBox, GeoError, M_PER_DEG_LAT, Place, PoiType, Region, _shares_border, build_grid
from .hotspotnet import CONTEXT_WIDTH, PATTERN_SLICE, SC_SLICE, RegionSample
from .kgraph import CaseEvent, FactStore, Relation, TemporalFact, User, canonical_entity, parse_entity
from .labels import HotspotClass

FORMAT_HEADERS = {
    "pkg": "# epimob-pkg v1",
    "trajectories": "# epimob-trajectories v1",
    "cases": "# epimob-cases v1",
    "places": "# epimob-places v1",
    "routes": "# epimob-routes v1",
    "users": "# epimob-users v1",
    "samples": "# epimob-samples v1",
}


class DataError(ValueError):
    """Malformed or inconsistent input data."""


# ---------------------------------------------------------------------------
# Fact persistence

def pkg_to_text(store_or_facts) -> str:
    """One fact per line: subject,relation,object,t1,t2,feature (t2 '-' if open)."""
    facts = store_or_facts.facts() if isinstance(store_or_facts, FactStore) else sorted(
        store_or_facts, key=lambda f: (f.t1, f.id)
    )
    out = io.StringIO()
    out.write(FORMAT_HEADERS["pkg"] + "\n")
    for f in facts:
        subject = canonical_entity(f.subject)
        obj = canonical_entity(f.object)
        for name, value in (("subject", subject), ("object", obj)):
            if "," in value or "\n" in value:
                raise DataError(f"{name} {value!r} contains a reserved character")
        t2 = "-" if f.t2 is None else repr(f.t2)
        out.write(f"{subject},{f.relation.value},{obj},{f.t1!r},{t2},{f.feature!r}\n")
    return out.getvalue()


def pkg_from_text(text: str, filename: str = "<pkg>") -> FactStore:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADERS["pkg"]:
        raise DataError(f"{filename}: missing or wrong header; expected {FORMAT_HEADERS['pkg']!r}")
    store = FactStore()
    relations = {r.value: r for r in Relation}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise DataError(f"{filename} line {ln}: expected 6 fields, got {len(parts)}")
        subject, relation, obj, t1, t2, feature = parts
        if relation not in relations:
            raise DataError(f"{filename} line {ln}: unknown relation {relation!r}")
        try:
            fact = TemporalFact(
                subject=parse_entity(subject),
                relation=relations[relation],
                object=parse_entity(obj),
                t1=float(t1),
                t2=None if t2 == "-" else float(t2),
                feature=float(feature),
            )
        except ValueError as exc:
            raise DataError(f"{filename} line {ln}: {exc}") from exc
        store.assert_fact(fact)
    return store


def save_pkg(store: FactStore, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(pkg_to_text(store))


def load_pkg(path: str) -> FactStore:
    with open(path) as fh:
        return pkg_from_text(fh.read(), filename=os.path.basename(path))


# ---------------------------------------------------------------------------
# Tabular loaders

_COLUMN_HEADER_NAMES = ("user_id", "region_id", "id", "src_id", "parameter")


def _parse_rows(text: str, kind: str, filename: str, n_fields):
    allowed = (n_fields,) if isinstance(n_fields, int) else tuple(n_fields)
    lines = text.splitlines()
    start = 0
    if lines and lines[0].strip() == FORMAT_HEADERS[kind]:
        start = 1
    elif lines and lines[0].startswith("# epimob-"):
        raise DataError(f"{filename}: wrong format header {lines[0]!r}; expected {FORMAT_HEADERS[kind]!r}")
    rows = []
    first_data = True
    for ln, line in enumerate(lines[start:], start=start + 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split(",")
        if first_data and parts[0] in _COLUMN_HEADER_NAMES:
            first_data = False
            continue
        first_data = False
        if len(parts) not in allowed:
            raise DataError(
                f"{filename} line {ln}: expected {' or '.join(map(str, allowed))} fields, got {len(parts)}"
            )
        rows.append((ln, parts))
    return rows


def trajectories_from_csv(text: str, filename: str = "trajectories.csv") -> list[User]:
    """Users with time-ordered trajectories from `user_id,timestamp,lat,lon` rows."""
    samples: dict[str, list[tuple[float, float, float]]] = {}
    for ln, (uid, ts, lat, lon) in _numeric_rows(text, "trajectories", filename, 4, skip=1):
        samples.setdefault(uid, []).append((ts, lat, lon))
    users = []
    for uid in sorted(samples):
        traj = tuple(sorted(samples[uid]))
        users.append(User(id=uid, trajectory=traj))
    return users


def cases_from_csv(text: str, filename: str = "cases.csv") -> list[CaseEvent]:
    """Case events from `region_id,timestamp,count[,lat,lon]` rows.

    The two trailing coordinate fields are optional; events without them are
    geocoded at their region's centroid downstream.
    """
    cases = []
    for ln, parts in _parse_rows(text, "cases", filename, (3, 5)):
        try:
            rid = parts[0]
            ts, count = float(parts[1]), float(parts[2])
            lat = float(parts[3]) if len(parts) == 5 and parts[3] else None
            lon = float(parts[4]) if len(parts) == 5 and parts[4] else None
        except ValueError as exc:
            raise DataError(f"{filename} line {ln}: non-numeric field ({exc})") from exc
        cases.append(CaseEvent(region_id=rid, t=ts, count=count, lat=lat, lon=lon))
    cases.sort(key=lambda c: (c.t, c.region_id))
    return cases


def places_from_csv(text: str, filename: str = "places.csv") -> list[Place]:
    places = []
    for ln, parts in _parse_rows(text, "places", filename, 6):
        pid, poi_type, lat, lon, area, region_id = parts
        try:
            places.append(
                Place(
                    id=pid,
                    poi_type=PoiType(poi_type),
                    lat=float(lat),
                    lon=float(lon),
                    area_m2=float(area),
                    region_id=region_id or None,
                )
            )
        except ValueError as exc:
            raise DataError(f"{filename} line {ln}: {exc}") from exc
    return places


def users_from_csv(text: str, filename: str = "users.csv") -> list[User]:
    users = []
    for ln, parts in _parse_rows(text, "users", filename, 4):
        uid, age, gender, residence = parts
        try:
            users.append(
                User(
                    id=uid,
                    age=int(age) if age else None,
                    gender=gender or None,
                    residence_region=residence or None,
                )
            )
        except ValueError as exc:
            raise DataError(f"{filename} line {ln}: {exc}") from exc
    return users


def _numeric_rows(text: str, kind: str, filename: str, n_fields: int, skip: int):
    """Rows with the first `skip` fields kept as strings, the rest parsed as floats."""
    for ln, parts in _parse_rows(text, kind, filename, n_fields):
        try:
            values = tuple(parts[:skip]) + tuple(float(x) for x in parts[skip:])
        except ValueError as exc:
            raise DataError(f"{filename} line {ln}: non-numeric field ({exc})") from exc
        yield ln, values


@dataclass
class Dataset:
    regions: list[Region] = field(default_factory=list)
    places: list[Place] = field(default_factory=list)
    users: list[User] = field(default_factory=list)
    cases: list[CaseEvent] = field(default_factory=list)
    routes: list[tuple[str, str, float]] = field(default_factory=list)


@dataclass(frozen=True)
class DatasetPaths:
    regions: Optional[str] = None  # GeoJSON
    places: Optional[str] = None
    trajectories: Optional[str] = None
    users: Optional[str] = None
    cases: Optional[str] = None
    routes: Optional[str] = None


def load_dataset(paths: DatasetPaths) -> Dataset:
    """Load and cross-validate all provided files."""
    from .geo import regions_from_geojson, routes_from_csv

    ds = Dataset()
    if paths.regions:
        ds.regions = regions_from_geojson(_read(paths.regions))
    if paths.places:
        ds.places = places_from_csv(_read(paths.places), os.path.basename(paths.places))
    if paths.trajectories:
        ds.users = trajectories_from_csv(_read(paths.trajectories), os.path.basename(paths.trajectories))
    if paths.users:
        profiles = {u.id: u for u in users_from_csv(_read(paths.users), os.path.basename(paths.users))}
        merged = []
        for u in ds.users:
            p = profiles.pop(u.id, None)
            if p is not None:
                merged.append(replace(u, age=p.age, gender=p.gender, residence_region=p.residence_region))
            else:
                merged.append(u)
        merged.extend(profiles.values())
        ds.users = sorted(merged, key=lambda u: u.id)
    if paths.cases:
        ds.cases = cases_from_csv(_read(paths.cases), os.path.basename(paths.cases))
    if paths.routes:
        ds.routes = routes_from_csv(_read(paths.routes))
    _check_integrity(ds)
    return ds


def _read(path: str) -> str:
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path) as fh:
        return fh.read()


def _check_integrity(ds: Dataset) -> None:
    if not ds.regions:
        return
    region_ids = {r.id for r in ds.regions}
    dangling = sorted({p.region_id for p in ds.places if p.region_id and p.region_id not in region_ids})
    dangling += sorted({c.region_id for c in ds.cases if c.region_id not in region_ids})
    dangling += sorted(
        {u.residence_region for u in ds.users if u.residence_region and u.residence_region not in region_ids}
    )
    if dangling:
        raise DataError(f"dangling region references: {sorted(set(dangling))}")


# ---------------------------------------------------------------------------
# Deterministic writers

def trajectories_to_csv(users: Sequence[User]) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADERS["trajectories"] + "\nuser_id,timestamp,lat,lon\n")
    for u in sorted(users, key=lambda u: u.id):
        for ts, lat, lon in u.trajectory:
            out.write(f"{u.id},{ts!r},{lat!r},{lon!r}\n")
    return out.getvalue()


def cases_to_csv(cases: Sequence[CaseEvent]) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADERS["cases"] + "\nregion_id,timestamp,count,lat,lon\n")
    for c in sorted(cases, key=lambda c: (c.t, c.region_id, c.lat if c.lat is not None else 0.0)):
        lat = "" if c.lat is None else repr(c.lat)
        lon = "" if c.lon is None else repr(c.lon)
        out.write(f"{c.region_id},{c.t!r},{c.count!r},{lat},{lon}\n")
    return out.getvalue()


def places_to_csv(places: Sequence[Place]) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADERS["places"] + "\nid,poi_type,lat,lon,area_m2,region_id\n")
    for p in sorted(places, key=lambda p: p.id):
        out.write(f"{p.id},{p.poi_type.value},{p.lat!r},{p.lon!r},{p.area_m2!r},{p.region_id or ''}\n")
    return out.getvalue()


def users_to_csv(users: Sequence[User]) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADERS["users"] + "\nid,age,gender,residence_region\n")
    for u in sorted(users, key=lambda u: u.id):
        out.write(f"{u.id},{u.age if u.age is not None else ''},{u.gender or ''},{u.residence_region or ''}\n")
    return out.getvalue()


def routes_to_csv(routes: Sequence[tuple[str, str, float]]) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADERS["routes"] + "\nsrc_id,dst_id,route_count\n")
    for src, dst, count in sorted(routes):
        out.write(f"{src},{dst},{count!r}\n")
    return out.getvalue()


def regions_to_geojson(regions: Sequence[Region]) -> str:
    features = []
    for r in sorted(regions, key=lambda r: r.id):
        b = r.bbox
        ring = [
            [b.min_lon, b.min_lat],
            [b.max_lon, b.min_lat],
            [b.max_lon, b.max_lat],
            [b.min_lon, b.max_lat],
            [b.min_lon, b.min_lat],
        ]
        props = {"id": r.id}
        for name in ("population_density", "literacy_rate", "medical_facilities", "aggregate_flow"):
            value = getattr(r, name)
            if value is not None:
                props[name] = value
        features.append(
            {"type": "Feature", "properties": props, "geometry": {"type": "Polygon", "coordinates": [ring]}}
        )
    return json.dumps({"type": "FeatureCollection", "features": features}, sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# Metadata catalog

@dataclass(frozen=True)
class CatalogEntry:
    dataset_id: str
    provider: str
    schema: str
    coverage_bbox: tuple[float, float, float, float]
    time_span: tuple[float, float]
    uri: str


def catalog_to_json(entries: Sequence[CatalogEntry]) -> str:
    return json.dumps(
        [
            {
                "dataset_id": e.dataset_id,
                "provider": e.provider,
                "schema": e.schema,
                "coverage_bbox": list(e.coverage_bbox),
                "time_span": list(e.time_span),
                "uri": e.uri,
            }
            for e in sorted(entries, key=lambda e: e.dataset_id)
        ],
        indent=1,
        sort_keys=True,
    )


def catalog_from_json(text: str, base_dir: Optional[str] = None) -> list[CatalogEntry]:
    entries = []
    for item in json.loads(text):
        entry = CatalogEntry(
            dataset_id=item["dataset_id"],
            provider=item["provider"],
            schema=item["schema"],
            coverage_bbox=tuple(item["coverage_bbox"]),
            time_span=tuple(item["time_span"]),
            uri=item["uri"],
        )
        if base_dir is not None and not os.path.exists(os.path.join(base_dir, entry.uri)):
            raise DataError(f"catalog entry {entry.dataset_id}: unresolvable uri {entry.uri!r}")
        entries.append(entry)
    return entries


# ---------------------------------------------------------------------------
# Synthetic scenario with planted ground truth

@dataclass(frozen=True)
class HotspotPlant:
    region_index: int
    klass: HotspotClass
    case_count: int


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    grid_n: int = 5
    cell_m: float = 2500.0
    origin_lat: float = 22.5
    origin_lon: float = 88.3
    n_background_users: int = 12
    n_days: int = 14
    group_users: int = 3
    flow_users: int = 4
    flow_nu: int = 3
    cascade_users: int = 4
    cascade_repeats: int = 3
    hotspot_plants: tuple[HotspotPlant, ...] = (
        HotspotPlant(0, HotspotClass.C1, 25),
        HotspotPlant(24, HotspotClass.C2, 60),
    )
    stay_radius_m: float = 150.0
    stay_min_s: float = 600.0

    def validate(self) -> None:
        n_regions = self.grid_n * self.grid_n
        if self.grid_n < 3:
            raise DataError("grid_n must be >= 3 so planted structures have room")
        for plant in self.hotspot_plants:
            if not (0 <= plant.region_index < n_regions):
                raise DataError(f"hotspot plant region index {plant.region_index} out of range")
            if plant.klass is HotspotClass.C1 and plant.case_count <= 20:
                raise DataError(f"C1 plant needs more than 20 cases, got {plant.case_count}")
            if plant.klass is HotspotClass.C2 and plant.case_count <= 50:
                raise DataError(f"C2 plant needs more than 50 cases, got {plant.case_count}")
            if plant.klass not in (HotspotClass.C1, HotspotClass.C2):
                raise DataError("only hotspot classes C1/C2 can be planted as hotspots")
        if self.group_users < 2 or self.flow_users < self.flow_nu:
            raise DataError("group needs >= 2 users and flow plant must reach the flow threshold")


@dataclass
class Scenario:
    config: ScenarioConfig
    regions: list[Region]
    places: list[Place]
    users: list[User]
    cases: list[CaseEvent]
    routes: list[tuple[str, str, float]]
    ground_truth: dict


DAY_S = 86400.0


def synthesize_scenario(cfg: ScenarioConfig) -> Scenario:
    """Deterministic scenario; every planted structure is recoverable."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    side = cfg.grid_n * cfg.cell_m
    dlat = side / M_PER_DEG_LAT
    dlon = side / (M_PER_DEG_LAT * math.cos(math.radians(cfg.origin_lat + dlat / 2)))
    bbox = BBox(cfg.origin_lat, cfg.origin_lon, cfg.origin_lat + dlat, cfg.origin_lon + dlon)
    bare = build_grid(bbox, cfg.cell_m)
    regions = [
        replace(
            r,
            population_density=float(round(rng.uniform(200, 8000), 3)),
            literacy_rate=float(round(rng.uniform(0.55, 0.98), 4)),
            medical_facilities=float(int(rng.integers(0, 41))),
            aggregate_flow=float(round(rng.uniform(100, 4000), 3)),
        )
        for r in bare
    ]
    poi_cycle = (PoiType.COMMERCIAL, PoiType.HOSPITAL, PoiType.PARK, PoiType.RESIDENCE, PoiType.RAIL_JUNCTION, PoiType.OTHER)
    places = []
    for k, r in enumerate(regions):
        lat, lon = r.center
        places.append(
            Place(id=f"poi_{r.id}", poi_type=poi_cycle[k % len(poi_cycle)], lat=lat, lon=lon,
                  area_m2=2000.0, region_id=r.id)
        )
    # dedicated cascading-pattern places: 600 m apart, well clear of the grid POIs
    base = regions[2].center
    px_origin = Place(id="px_origin", poi_type=PoiType.AIRPORT, lat=base[0] - 1000.0 / M_PER_DEG_LAT,
                      lon=base[1], area_m2=5000.0, region_id=regions[2].id)
    px_dest = Place(id="px_dest", poi_type=PoiType.RAIL_JUNCTION, lat=base[0] - 400.0 / M_PER_DEG_LAT,
                    lon=base[1], area_m2=5000.0, region_id=regions[2].id)
    places.extend([px_origin, px_dest])

    place_by_region = {p.region_id: p for p in places if p.id.startswith("poi_")}
    users: list[User] = []

    def stay_samples(place: Place, t_start: float, duration: float, step: float = 300.0):
        points = []
        t = t_start
        while t <= t_start + duration:
            jitter = rng.uniform(-30.0, 30.0, size=2) / M_PER_DEG_LAT
            points.append((t, place.lat + float(jitter[0]), place.lon + float(jitter[1])))
            t += step
        return points

    # background users: home stays plus one excursion per day
    background_regions = [r for k, r in enumerate(regions) if k not in {p.region_index for p in cfg.hotspot_plants}]
    for k in range(cfg.n_background_users):
        home = place_by_region[background_regions[k % len(background_regions)].id]
        traj = []
        for day in range(cfg.n_days):
            t0 = day * DAY_S + 7 * 3600.0
            traj.extend(stay_samples(home, t0, 1800.0))
            other = place_by_region[str(rng.choice(sorted(r.id for r in background_regions)))]
            traj.extend(stay_samples(other, day * DAY_S + 11 * 3600.0 + float(rng.integers(0, 4)) * 900.0, 1200.0))
        users.append(User(id=f"bg{k:03d}", trajectory=tuple(sorted(traj))))

    # planted group: identical 3-place sequence on day 2
    group_idx = (cfg.grid_n + 1, cfg.grid_n + 2, cfg.grid_n + 3)
    group_places = [place_by_region[regions[i].id] for i in group_idx]
    group_day = 2 * DAY_S
    group_user_ids = []
    for k in range(cfg.group_users):
        jitter = float(rng.integers(0, 61))
        traj = []
        for step_k, gp in enumerate(group_places):
            traj.extend(stay_samples(gp, group_day + 9 * 3600.0 + step_k * 3600.0 + jitter, 1200.0))
        uid = f"grp{k:02d}"
        group_user_ids.append(uid)
        users.append(User(id=uid, trajectory=tuple(sorted(traj))))

    # planted flow: src -> dst inside one hour-aligned slot on day 3
    flow_idx = min(2 * cfg.grid_n, cfg.grid_n * cfg.grid_n - 2)
    flow_src = place_by_region[regions[flow_idx].id]
    flow_dst = place_by_region[regions[flow_idx + 1].id]
    flow_t0 = 3 * DAY_S + 2 * 3600.0 + 300.0
    flow_user_ids = []
    for k in range(cfg.flow_users):
        traj = stay_samples(flow_src, flow_t0, 650.0) + stay_samples(flow_dst, flow_t0 + 1100.0, 700.0)
        uid = f"flw{k:02d}"
        flow_user_ids.append(uid)
        users.append(User(id=uid, trajectory=tuple(sorted(traj))))

    # planted cascade: every origin visit followed by a destination visit
    cascade_user_ids = []
    for k in range(cfg.cascade_users):
        traj = []
        for rep in range(cfg.cascade_repeats):
            t0 = (5 + rep) * DAY_S + 10 * 3600.0 + k * 1800.0
            traj.extend(stay_samples(px_origin, t0, 900.0))
            traj.extend(stay_samples(px_dest, t0 + 1800.0, 900.0))
        uid = f"cas{k:02d}"
        cascade_user_ids.append(uid)
        users.append(User(id=uid, trajectory=tuple(sorted(traj))))

    # cases: planted hotspots by construction, light background elsewhere
    cases: list[CaseEvent] = []
    planted_hotspots = {}
    for plant in cfg.hotspot_plants:
        region = regions[plant.region_index]
        clat, clon = region.center
        planted_hotspots[region.id] = plant.klass.value
        if plant.klass is HotspotClass.C1:
            radius_lo, radius_hi = 0.0, 100.0
        else:
            radius_lo, radius_hi = 600.0, 900.0
        for k in range(plant.case_count):
            r_m = float(rng.uniform(radius_lo, radius_hi))
            theta = float(rng.uniform(0, 2 * math.pi))
            lat = clat + (r_m * math.cos(theta)) / M_PER_DEG_LAT
            lon = clon + (r_m * math.sin(theta)) / (M_PER_DEG_LAT * math.cos(math.radians(clat)))
            cases.append(
                CaseEvent(region_id=region.id, t=float(rng.integers(0, 7 * 24)) * 3600.0,
                          count=1.0, lat=lat, lon=lon)
            )
    plant_indexes = {p.region_index for p in cfg.hotspot_plants}
    for k, region in enumerate(regions):
        if k in plant_indexes:
            continue
        for _ in range(int(rng.integers(0, 4))):
            cases.append(
                CaseEvent(region_id=region.id, t=float(rng.integers(0, cfg.n_days)) * DAY_S + float(rng.integers(0, 24)) * 3600.0,
                          count=1.0)
            )
    cases.sort(key=lambda c: (c.t, c.region_id, c.lat if c.lat is not None else 0.0))

    # routes between rook-adjacent regions
    routes = []
    for i, a in enumerate(regions):
        for b in regions[i + 1 :]:
            if _shares_border(a.bbox, b.bbox):
                routes.append((a.id, b.id, float(int(rng.integers(1, 6)))))

    ground_truth = {
        "planted_hotspots": planted_hotspots,
        "planted_group": {"users": group_user_ids, "places": [p.id for p in group_places]},
        "planted_flow": {
            "src": flow_src.id,
            "dst": flow_dst.id,
            "users": flow_user_ids,
            "min_count": cfg.flow_nu,
        },
        "planted_cascade": {
            "members": [f"visit@{px_origin.id}", f"visit@{px_dest.id}"],
            "users": cascade_user_ids,
        },
    }
    return Scenario(
        config=cfg,
        regions=regions,
        places=places,
        users=sorted(users, key=lambda u: u.id),
        cases=cases,
        routes=routes,
        ground_truth=ground_truth,
    )


SCENARIO_FILES = {
    "regions": "regions.geojson",
    "places": "places.csv",
    "trajectories": "trajectories.csv",
    "cases": "cases.csv",
    "routes": "routes.csv",
    "ground_truth": "ground_truth.json",
    "catalog": "catalog.json",
}


def scenario_to_files(scenario: Scenario, out_dir: str) -> list[str]:
    """Write all scenario files; byte-identical for identical configs."""
    os.makedirs(out_dir, exist_ok=True)
    cfg = scenario.config
    all_lat = [r.bbox.min_lat for r in scenario.regions] + [r.bbox.max_lat for r in scenario.regions]
    all_lon = [r.bbox.min_lon for r in scenario.regions] + [r.bbox.max_lon for r in scenario.regions]
    coverage = (min(all_lat), min(all_lon), max(all_lat), max(all_lon))
    span = (0.0, cfg.n_days * DAY_S)
    contents = {
        SCENARIO_FILES["regions"]: regions_to_geojson(scenario.regions),
        SCENARIO_FILES["places"]: places_to_csv(scenario.places),
        SCENARIO_FILES["trajectories"]: trajectories_to_csv(scenario.users),
        SCENARIO_FILES["cases"]: cases_to_csv(scenario.cases),
        SCENARIO_FILES["routes"]: routes_to_csv(scenario.routes),
        SCENARIO_FILES["ground_truth"]: json.dumps(scenario.ground_truth, indent=1, sort_keys=True),
    }
    entries = [
        CatalogEntry(
            dataset_id=name.split(".")[0],
            provider="epimob-synth",
            schema=name.split(".")[-1],
            coverage_bbox=coverage,
            time_span=span,
            uri=name,
        )
        for name in sorted(contents)
    ]
    contents[SCENARIO_FILES["catalog"]] = catalog_to_json(entries)
    written = []
    for name in sorted(contents):
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(contents[name])
        written.append(path)
    return written


def load_scenario_dir(path: str) -> Dataset:
    return load_dataset(
        DatasetPaths(
            regions=os.path.join(path, SCENARIO_FILES["regions"]),
            places=os.path.join(path, SCENARIO_FILES["places"]),
            trajectories=os.path.join(path, SCENARIO_FILES["trajectories"]),
            cases=os.path.join(path, SCENARIO_FILES["cases"]),
            routes=os.path.join(path, SCENARIO_FILES["routes"]),
        )
    )


# ---------------------------------------------------------------------------
# Planted-feature classifier dataset

CLS_VOCAB = tuple(f"c{k:02d}" for k in range(12))
CLS_HIGH_RISK = frozenset(CLS_VOCAB[:4])
CLS_SEQ_LEN = 6
CLS_AIR_BIAS = 4.0
_SCORE_TO_LABEL = {
    0: HotspotClass.NONE,
    1: HotspotClass.C4,
    2: HotspotClass.C3,
    3: HotspotClass.C2,
}


def make_classifier_dataset(n: int, seed: int) -> list[RegionSample]:
    """Samples whose label is a deterministic function of planted features.

    The class score sums four independent bits: a pattern-membership flag and
    a high spatial-correlation level (both context entries), a containment
    flag, and a high-risk cell pair at the air-marked step of the location
    sequence. The last bit is only reachable through attention (the marked
    step is identified solely by the air-connectivity bias) plus the backward
    LSTM stream (the pair spans the marked step and its successor), which is
    what makes the ablation comparisons meaningful.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        b1 = int(rng.random() < 0.5)
        b2 = int(rng.random() < 0.5)
        b4 = int(rng.random() < 0.5)
        pos = int(rng.integers(0, CLS_SEQ_LEN - 1))
        locations = [str(rng.choice(CLS_VOCAB)) for _ in range(CLS_SEQ_LEN)]
        if rng.random() < 0.45:
            locations[pos] = str(rng.choice(sorted(CLS_HIGH_RISK)))
            locations[pos + 1] = str(rng.choice(sorted(CLS_HIGH_RISK)))
        b3 = int(locations[pos] in CLS_HIGH_RISK and locations[pos + 1] in CLS_HIGH_RISK)
        score = 2 * b1 + b2 + 2 * b3 + b4
        ctx = np.zeros(CONTEXT_WIDTH)
        ctx[SC_SLICE] = rng.uniform(0.4, 0.9, 6) if b2 else rng.uniform(-0.2, 0.2, 6)
        ctx[6] = rng.uniform(0, 1)
        ctx[7:10] = rng.uniform(0, 1, 3)
        ctx[10:14] = rng.uniform(0, 1, 4)
        ctx[PATTERN_SLICE] = [float(b1), float(rng.random() < 0.5)]
        ctx[16] = rng.uniform(0, 1)
        ctx[17:19] = rng.uniform(-1, 1, 2)
        ctx[19] = float(b4)
        air = np.zeros(CLS_SEQ_LEN)
        air[pos] = CLS_AIR_BIAS
        samples.append(
            RegionSample(
                region_id=f"s{len(samples):05d}",
                locations=tuple(locations),
                step_days=tuple(int(x) for x in rng.integers(0, 7, CLS_SEQ_LEN)),
                step_timestamps=tuple(float(x) for x in rng.uniform(0, 86400, CLS_SEQ_LEN)),
                step_durations=tuple(float(x) for x in rng.uniform(0, 90000, CLS_SEQ_LEN)),
                step_air_ci=tuple(air),
                context=tuple(float(x) for x in ctx),
                label=_SCORE_TO_LABEL.get(score, HotspotClass.C1),
            )
        )
    return samples


# ---------------------------------------------------------------------------
# Region samples assembled from a loaded scenario

def build_region_samples(
    dataset: Dataset,
    visits: Sequence[TemporalFact],
    patterns: Sequence,
    sc_results: Sequence,
    seq_len: int = CLS_SEQ_LEN,
) -> list[RegionSample]:
    """One classifier sample per region from derived pipeline artifacts.

    The location sequence is the region ids of the most recent visits whose
    place lies in the region (padded with the region's own id); context
    entries carry the latest weekly autocorrelation values, demographic and
    POI features, mined-pattern membership flags, route connectivity, the
    weekly case delta, and a neighbor-hotspot flag for the last 14 days.
    """
    from .geo import AdjacencyMetric
    from .kgraph import geocode_cases
    from .labels import label_region

    place_by_id = {p.id: p for p in dataset.places}
    region_places = {r.id: [p.id for p in dataset.places if p.region_id == r.id] for r in dataset.regions}
    geocoded = geocode_cases(dataset.cases, dataset.regions)
    latest_sc = {}
    for res in sc_results:
        key = res.metric
        if key not in latest_sc or res.week_index > latest_sc[key].week_index:
            latest_sc[key] = res
    sc_vec = [latest_sc[m].sc if m in latest_sc else 0.0 for m in AdjacencyMetric]

    pattern_places: dict[str, set] = {"cascading": set(), "co_occurrence": set()}
    for p in patterns:
        for member in p.members:
            if "@" in member:
                pattern_places[p.kind].add(member.split("@", 1)[1])

    route_degree = {}
    for src, dst, count in dataset.routes:
        route_degree[src] = route_degree.get(src, 0.0) + count
        route_degree[dst] = route_degree.get(dst, 0.0) + count
    max_degree = max(route_degree.values(), default=1.0)

    horizon = max((c.t for c in dataset.cases), default=0.0)
    labels = {r.id: label_region(geocoded, r) for r in dataset.regions}
    recent_hot = {
        r.id
        for r in dataset.regions
        if labels[r.id].is_hotspot
        and any(c.region_id == r.id and c.t >= horizon - 14 * DAY_S for c in dataset.cases)
    }

    max_density = max((r.population_density or 0.0) for r in dataset.regions) or 1.0
    max_flow = max((r.aggregate_flow or 0.0) for r in dataset.regions) or 1.0
    weekly: dict[str, list[float]] = {r.id: [0.0, 0.0] for r in dataset.regions}
    for c in dataset.cases:
        weekly[c.region_id][min(int(c.t // (7 * DAY_S)), 1)] += c.count

    samples = []
    for r in dataset.regions:
        own_places = set(region_places[r.id])
        region_visits = sorted(
            (v for v in visits if str(v.object) in own_places),
            key=lambda v: (v.t1, v.id),
        )[-seq_len:]
        locations, days, stamps, durations = [], [], [], []
        for v in region_visits:
            locations.append(r.id)
            days.append(int((v.t1 // DAY_S) % 7))
            stamps.append(v.t1)
            durations.append((v.t2 - v.t1) if v.t2 is not None else 0.0)
        while len(locations) < seq_len:
            locations.append(r.id)
            days.append(0)
            stamps.append(0.0)
            durations.append(0.0)
        poi_types = [place_by_id[pid].poi_type for pid in own_places]
        from .geo import PoiType as PT

        poi_counts = [
            sum(t in (PT.COMMERCIAL, PT.OTHER) for t in poi_types),
            sum(t is PT.HOSPITAL for t in poi_types),
            sum(t in (PT.PARK, PT.RESIDENCE) for t in poi_types),
            sum(t in (PT.AIRPORT, PT.RAIL_JUNCTION) for t in poi_types),
        ]
        neighbors_hot = any(
            other.id in recent_hot
            for other in dataset.regions
            if other.id == r.id or _shares_border(r.bbox, other.bbox)
        )
        ctx = np.zeros(CONTEXT_WIDTH)
        ctx[SC_SLICE] = sc_vec
        ctx[6] = (r.population_density or 0.0) / max_density
        ctx[7:10] = [
            r.literacy_rate or 0.0,
            (r.medical_facilities or 0.0) / 50.0,
            (r.aggregate_flow or 0.0) / max_flow,
        ]
        ctx[10:14] = poi_counts
        ctx[PATTERN_SLICE] = [
            float(bool(own_places & pattern_places["cascading"])),
            float(bool(own_places & pattern_places["co_occurrence"])),
        ]
        ctx[16] = route_degree.get(r.id, 0.0) / max_degree
        total = weekly[r.id][0] + weekly[r.id][1] or 1.0
        ctx[17:19] = [weekly[r.id][1] - weekly[r.id][0], (weekly[r.id][1] - weekly[r.id][0]) / total]
        ctx[19] = float(neighbors_hot)
        samples.append(
            RegionSample(
                region_id=r.id,
                locations=tuple(locations),
                step_days=tuple(days),
                step_timestamps=tuple(stamps),
                step_durations=tuple(durations),
                step_air_ci=tuple(0.0 for _ in range(seq_len)),
                context=tuple(float(x) for x in ctx),
                label=labels[r.id],
            )
        )
    return samples


# ---------------------------------------------------------------------------
# RegionSample persistence (JSON lines)

def samples_to_jsonl(samples: Sequence[RegionSample]) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADERS["samples"] + "\n")
    for s in samples:
        out.write(
            json.dumps(
                {
                    "region_id": s.region_id,
                    "locations": list(s.locations),
                    "step_days": list(s.step_days),
                    "step_timestamps": list(s.step_timestamps),
                    "step_durations": list(s.step_durations),
                    "step_air_ci": list(s.step_air_ci),
                    "context": list(s.context),
                    "label": s.label.value,
                },
                sort_keys=True,
            )
        )
        out.write("\n")
    return out.getvalue()


def samples_from_jsonl(text: str, filename: str = "samples.jsonl") -> list[RegionSample]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADERS["samples"]:
        raise DataError(f"{filename}: missing header {FORMAT_HEADERS['samples']!r}")
    samples = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            samples.append(
                RegionSample(
                    region_id=obj["region_id"],
                    locations=tuple(obj["locations"]),
                    step_days=tuple(int(x) for x in obj["step_days"]),
                    step_timestamps=tuple(float(x) for x in obj["step_timestamps"]),
                    step_durations=tuple(float(x) for x in obj["step_durations"]),
                    step_air_ci=tuple(float(x) for x in obj["step_air_ci"]),
                    context=tuple(float(x) for x in obj["context"]),
                    label=HotspotClass(obj["label"]),
                )
            )
        except (KeyError, ValueError) as exc:
            raise DataError(f"{filename} line {ln}: {exc}") from exc
    return samples
