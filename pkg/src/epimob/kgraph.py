"""Temporal knowledge graph of mobility facts.

Facts are interval-stamped edges ``(subject, relation, object, [t1, t2], f)``
with an optional open end (``t2 = None``). The store upserts on the
(subject, relation, object, interval) key, indexes subject/object/relation,
and answers conjunctive queries with interval-overlap window semantics.

Derivation rules turn raw trajectories and case events into visit, group,
flow, and hotspot facts; `contact_trace` finds users co-present with an
infected user's visits.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence, Union

import networkx as nx

from .geo import BBox, GeoError, Place, Region, _shares_border, connectivity_index, haversine_m
from .labels import HotspotClass, label_region

EntityRef = Union[str, frozenset]


class FactError(ValueError):
    """A fact or query violates the store's invariants."""


class Relation(Enum):
    VISIT = "visit"
    GROUP = "group"
    FLOW = "flow"
    HOTSPOT = "hotspot"
    CONNECTIVITY = "connectivity"
    CONNECTED_BY = "connectedBy"
    BOUNDING_BOX = "boundingBox"
    INFECTED = "infected"


def canonical_entity(obj: EntityRef) -> str:
    """Stable string form of an entity reference; sets render as ``{a|b|c}``."""
    if isinstance(obj, frozenset):
        return "{" + "|".join(sorted(obj)) + "}"
    return obj


def parse_entity(text: str) -> EntityRef:
    if text.startswith("{") and text.endswith("}"):
        inner = text[1:-1]
        return frozenset(inner.split("|")) if inner else frozenset()
    return text


def intervals_overlap(
    a1: float, a2: Optional[float], b1: float, b2: Optional[float]
) -> bool:
    """Closed-interval overlap; a ``None`` end point means unbounded."""
    if a2 is not None and a2 < b1:
        return False
    if b2 is not None and b2 < a1:
        return False
    return True


@dataclass(frozen=True)
class TemporalFact:
    subject: EntityRef
    relation: Relation
    object: EntityRef
    t1: float
    t2: Optional[float]  # None = open-ended
    feature: float

    def __post_init__(self) -> None:
        if self.t2 is not None and self.t1 > self.t2:
            raise FactError(f"interval start {self.t1} exceeds end {self.t2}")
        if not math.isfinite(self.feature):
            raise FactError("feature must be finite")
        if self.relation is Relation.GROUP and not (0.0 <= self.feature < 1.0):
            raise FactError(f"group feature must be in [0,1), got {self.feature}")
        if self.relation is Relation.HOTSPOT and self.feature < 0:
            raise FactError("hotspot feature (infected count) must be >= 0")

    @property
    def key(self) -> tuple:
        return (canonical_entity(self.subject), self.relation.value, canonical_entity(self.object), self.t1, self.t2)

    @property
    def id(self) -> str:
        raw = "\x1f".join(
            [canonical_entity(self.subject), self.relation.value, canonical_entity(self.object), repr(self.t1), repr(self.t2)]
        )
        return hashlib.sha256(raw.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class User:
    id: str
    age: Optional[int] = None
    gender: Optional[str] = None
    residence_region: Optional[str] = None
    health_profile: Optional[str] = None
    trajectory: tuple = ()  # time-ordered (timestamp, lat, lon)

    def __post_init__(self) -> None:
        ts = [p[0] for p in self.trajectory]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise FactError(f"user {self.id}: trajectory timestamps must be strictly increasing")


@dataclass(frozen=True)
class CaseEvent:
    """One reported case batch, geocoded or region-tagged."""

    region_id: str
    t: float
    count: float = 1.0
    lat: Optional[float] = None
    lon: Optional[float] = None


@dataclass(frozen=True)
class PkgQuery:
    subject: Optional[str] = None
    relation: Optional[Relation] = None
    object: Optional[str] = None
    window: Optional[tuple[float, Optional[float]]] = None

    def __post_init__(self) -> None:
        if self.subject is None and self.relation is None and self.object is None and self.window is None:
            raise FactError("query must bind at least one field")


def fact_matches(fact: TemporalFact, q: PkgQuery) -> bool:
    """Whether a fact satisfies every bound query field.

    A single-id subject/object constraint matches set-valued endpoints when
    the id is a member of the set (or equals the set's canonical form).
    """
    if q.subject is not None and not _entity_matches(fact.subject, q.subject):
        return False
    if q.relation is not None and fact.relation is not q.relation:
        return False
    if q.object is not None and not _entity_matches(fact.object, q.object):
        return False
    if q.window is not None and not intervals_overlap(fact.t1, fact.t2, q.window[0], q.window[1]):
        return False
    return True


def _entity_matches(entity: EntityRef, wanted: str) -> bool:
    if isinstance(entity, frozenset):
        return wanted in entity or wanted == canonical_entity(entity)
    return entity == wanted


class FactStore:
    """Upsert-keyed fact set plus entity tables, with field indexes.

    Reads are safe from many threads once writing stops; derivations operate
    on snapshots (plain lists of facts) and hand back new facts for the caller
    to commit.
    """

    def __init__(self) -> None:
        self._facts: dict[tuple, TemporalFact] = {}
        self._by_subject: dict[str, set] = {}
        self._by_object: dict[str, set] = {}
        self._by_relation: dict[Relation, set] = {}
        self.users: dict[str, User] = {}
        self.places: dict[str, Place] = {}
        self.regions: dict[str, Region] = {}

    def __len__(self) -> int:
        return len(self._facts)

    def __iter__(self):
        return iter(self._facts.values())

    def add_user(self, user: User) -> None:
        self.users[user.id] = user

    def add_place(self, place: Place) -> None:
        self.places[place.id] = place

    def add_region(self, region: Region) -> None:
        self.regions[region.id] = region

    def assert_fact(self, fact: TemporalFact) -> str:
        """Insert or overwrite the fact with the same key; returns its id."""
        key = fact.key
        prior = self._facts.get(key)
        self._facts[key] = fact
        if prior is None:
            for ent in _index_entities(fact.subject):
                self._by_subject.setdefault(ent, set()).add(key)
            for ent in _index_entities(fact.object):
                self._by_object.setdefault(ent, set()).add(key)
            self._by_relation.setdefault(fact.relation, set()).add(key)
        return fact.id

    def assert_all(self, facts: Iterable[TemporalFact]) -> list[str]:
        return [self.assert_fact(f) for f in facts]

    def query(self, q: PkgQuery) -> list[TemporalFact]:
        """Facts matching all bound fields, ordered by (t1, id)."""
        candidates = self._candidate_keys(q)
        hits = [self._facts[k] for k in candidates]
        hits = [f for f in hits if fact_matches(f, q)]
        hits.sort(key=lambda f: (f.t1, f.id))
        return hits

    def _candidate_keys(self, q: PkgQuery) -> Iterable[tuple]:
        pools = []
        if q.subject is not None:
            pools.append(self._by_subject.get(q.subject, set()))
        if q.object is not None:
            pools.append(self._by_object.get(q.object, set()))
        if q.relation is not None:
            pools.append(self._by_relation.get(q.relation, set()))
        if not pools:
            return list(self._facts.keys())
        smallest = min(pools, key=len)
        return smallest

    def facts(self) -> list[TemporalFact]:
        return sorted(self._facts.values(), key=lambda f: (f.t1, f.id))

    def connectivity_for(
        self, place_id: str, window: tuple[float, Optional[float]]
    ):
        """Connectivity index of one place from the store's connectivity and flow facts.

        Route counts come from `connectivity` facts touching the place; inflow
        and outflow from `flow` facts with the place as object and subject.
        Only facts overlapping the window count.
        """
        routes: dict[str, float] = {}
        inflows: dict[str, float] = {}
        outflows: dict[str, float] = {}
        for f in self.query(PkgQuery(relation=Relation.CONNECTIVITY, window=window)):
            for end in (f.subject, f.object):
                if isinstance(end, str):
                    routes[end] = routes.get(end, 0.0) + f.feature
        for f in self.query(PkgQuery(relation=Relation.FLOW, window=window)):
            if isinstance(f.subject, str):
                outflows[f.subject] = outflows.get(f.subject, 0.0) + f.feature
            if isinstance(f.object, str):
                inflows[f.object] = inflows.get(f.object, 0.0) + f.feature
        return connectivity_index(place_id, routes, inflows, outflows, window)


def _index_entities(ref: EntityRef) -> list[str]:
    if isinstance(ref, frozenset):
        return sorted(ref) + [canonical_entity(ref)]
    return [ref]


# ---------------------------------------------------------------------------
# Derivations


def derive_visits(
    user: User,
    places: Sequence[Place],
    stay_radius_m: float,
    stay_min_s: float,
) -> list[TemporalFact]:
    """Visit facts from one user's trajectory.

    A visit is a maximal run of consecutive samples within `stay_radius_m` of
    a place's location spanning at least `stay_min_s`. The feature is the
    visit duration normalized by the longest visit at the same place among
    the facts produced by this call.
    """
    if stay_radius_m <= 0 or stay_min_s <= 0:
        raise FactError("stay_radius_m and stay_min_s must be > 0")
    stays = _stay_runs(user, places, stay_radius_m, stay_min_s)
    return _visits_from_stays(stays)


def derive_visits_for_users(
    users: Sequence[User],
    places: Sequence[Place],
    stay_radius_m: float,
    stay_min_s: float,
) -> list[TemporalFact]:
    """Visit facts for a user population, normalized per place across users."""
    if stay_radius_m <= 0 or stay_min_s <= 0:
        raise FactError("stay_radius_m and stay_min_s must be > 0")
    stays = []
    for user in users:
        stays.extend(_stay_runs(user, places, stay_radius_m, stay_min_s))
    return _visits_from_stays(stays)


def _stay_runs(
    user: User, places: Sequence[Place], radius_m: float, min_s: float
) -> list[tuple[str, str, float, float]]:
    runs = []
    traj = user.trajectory
    for place in places:
        inside = [haversine_m(lat, lon, place.lat, place.lon) <= radius_m for _, lat, lon in traj]
        i = 0
        while i < len(traj):
            if not inside[i]:
                i += 1
                continue
            j = i
            while j + 1 < len(traj) and inside[j + 1]:
                j += 1
            t_start, t_end = traj[i][0], traj[j][0]
            if t_end - t_start >= min_s:
                runs.append((user.id, place.id, t_start, t_end))
            i = j + 1
    return runs


def _visits_from_stays(stays: Sequence[tuple[str, str, float, float]]) -> list[TemporalFact]:
    max_by_place: dict[str, float] = {}
    for _, pid, t1, t2 in stays:
        max_by_place[pid] = max(max_by_place.get(pid, 0.0), t2 - t1)
    facts = []
    for uid, pid, t1, t2 in sorted(stays):
        peak = max_by_place[pid]
        f = min((t2 - t1) / peak, 1.0) if peak > 0 else 0.0
        facts.append(TemporalFact(uid, Relation.VISIT, pid, t1, t2, f))
    return facts


def derive_groups(visits: Sequence[TemporalFact], time_tol_s: float) -> list[TemporalFact]:
    """Group facts: maximal user sets co-visiting an identical place sequence.

    Candidate sequences are contiguous windows (length >= 3) of some user's
    time-ordered visit sequence; a user set qualifies when every member pair
    has windows over the same place tuple whose intervals overlap step by
    step within `time_tol_s`. One fact is emitted per maximal (user set,
    sequence) pair, with the lexicographically smallest member as subject and
    the rest as the object set; the interval spans the members' matching
    windows.
    """
    per_user = _visit_sequences(visits)
    by_places: dict[tuple, dict[str, list]] = {}
    for uid, seq in per_user.items():
        n = len(seq)
        for i in range(n):
            for j in range(i + 3, n + 1):
                places = tuple(v.object for v in seq[i:j])
                by_places.setdefault(places, {}).setdefault(uid, []).append(seq[i:j])
    candidates = {}
    for places, user_windows in by_places.items():
        if len(user_windows) < 2:
            continue
        users = sorted(user_windows)
        g = nx.Graph()
        g.add_nodes_from(users)
        for a_i, ua in enumerate(users):
            for ub in users[a_i + 1 :]:
                if any(
                    _windows_compatible(wa, wb, time_tol_s)
                    for wa in user_windows[ua]
                    for wb in user_windows[ub]
                ):
                    g.add_edge(ua, ub)
        for clique in nx.find_cliques(g):
            if len(clique) < 2:
                continue
            members = frozenset(clique)
            span = _window_span(members, user_windows)
            candidates[(members, places)] = span
    kept = _drop_dominated(list(candidates.keys()))
    facts = []
    for members, places in sorted(kept, key=lambda c: (sorted(c[0]), c[1])):
        t1, t2 = candidates[(members, places)]
        subject = min(members)
        rest = frozenset(members - {subject})
        feature = len(members) / (len(members) + 1.0)
        facts.append(TemporalFact(subject, Relation.GROUP, rest, t1, t2, feature))
    return facts


def _window_span(members, user_windows) -> tuple[float, float]:
    t1 = math.inf
    t2 = -math.inf
    for uid in members:
        for window in user_windows[uid]:
            t1 = min(t1, min(v.t1 for v in window))
            t2 = max(t2, max(v.t2 for v in window if v.t2 is not None))
    return t1, t2


def _visit_sequences(visits: Sequence[TemporalFact]) -> dict[str, list[TemporalFact]]:
    per_user: dict[str, list[TemporalFact]] = {}
    for v in visits:
        if v.relation is not Relation.VISIT:
            raise FactError(f"derive_groups expects visit facts, got {v.relation.value}")
        per_user.setdefault(str(v.subject), []).append(v)
    for seq in per_user.values():
        seq.sort(key=lambda v: (v.t1, v.id))
    return per_user


def _windows_compatible(wa, wb, tol: float) -> bool:
    return all(
        intervals_overlap(a.t1 - tol, None if a.t2 is None else a.t2 + tol, b.t1, b.t2)
        for a, b in zip(wa, wb)
    )


def _drop_dominated(candidates):
    kept = []
    for members, places in set(candidates):
        dominated = False
        for other_members, other_places in set(candidates):
            if (members, places) == (other_members, other_places):
                continue
            same_places = places == other_places
            sub_places = _contiguous_subsequence(places, other_places)
            if same_places and members < other_members:
                dominated = True
            elif members == other_members and sub_places and len(places) < len(other_places):
                dominated = True
            if dominated:
                break
        if not dominated:
            kept.append((members, places))
    return kept


def _contiguous_subsequence(short: tuple, long: tuple) -> bool:
    n, m = len(short), len(long)
    return any(long[i : i + n] == short for i in range(m - n + 1))


def derive_flows(
    visits: Sequence[TemporalFact], nu: int, slot_s: float = 3600.0
) -> list[TemporalFact]:
    """Flow facts between place pairs with at least `nu` movers per time slot.

    A transition is a visit immediately followed by the user's next visit;
    it lands in the epoch-aligned slot containing the destination visit's
    start time. The feature is the distinct-user count.
    """
    if nu < 1:
        raise FactError("nu must be >= 1")
    per_user = _visit_sequences(visits)
    movers: dict[tuple[str, str, int], set] = {}
    for uid, seq in per_user.items():
        for a, b in zip(seq, seq[1:]):
            slot = int(b.t1 // slot_s)
            movers.setdefault((str(a.object), str(b.object), slot), set()).add(uid)
    facts = []
    for (src, dst, slot), users in sorted(movers.items()):
        if len(users) >= nu:
            facts.append(
                TemporalFact(src, Relation.FLOW, dst, slot * slot_s, (slot + 1) * slot_s, float(len(users)))
            )
    return facts


def derive_hotspot_facts(
    cases: Sequence[CaseEvent], regions: Sequence[Region]
) -> list[TemporalFact]:
    """Hotspot facts for connected sets of hotspot-class regions.

    Each region is labeled from the geocoded case events (region-tagged cases
    are placed at the region centroid); regions in class C1 or C2 are grouped
    into connected components under shared-border adjacency. One fact per
    component: subject is the component's bounding box, object the region id
    set, feature the total case count inside the component, interval open
    from the first case time.
    """
    if not cases:
        return []
    geocoded = geocode_cases(cases, regions)
    by_region = {r.id: r for r in regions}
    hot = [r for r in regions if label_region(geocoded, r).is_hotspot]
    if not hot:
        return []
    g = nx.Graph()
    g.add_nodes_from(r.id for r in hot)
    for i, a in enumerate(hot):
        for b in hot[i + 1 :]:
            if _shares_border(a.bbox, b.bbox):
                g.add_edge(a.id, b.id)
    facts = []
    for component in nx.connected_components(g):
        ids = frozenset(component)
        boxes = [by_region[rid].bbox for rid in ids]
        bbox = BBox.union(boxes)
        inside = [c for c in geocoded if any(by_region[rid].bbox.contains(c.lat, c.lon) for rid in ids)]
        count = sum(c.count for c in inside)
        t0 = min((c.t for c in inside), default=min(c.t for c in geocoded))
        subject = f"bbox({bbox.min_lat:.6f};{bbox.min_lon:.6f};{bbox.max_lat:.6f};{bbox.max_lon:.6f})"
        facts.append(TemporalFact(subject, Relation.HOTSPOT, ids, t0, None, count))
    facts.sort(key=lambda f: (f.t1, f.id))
    return facts


def geocode_cases(cases: Sequence[CaseEvent], regions: Sequence[Region]) -> list[CaseEvent]:
    """Fill missing case coordinates with the tagged region's centroid."""
    by_region = {r.id: r for r in regions}
    out = []
    for c in cases:
        if c.lat is not None and c.lon is not None:
            out.append(c)
            continue
        region = by_region.get(c.region_id)
        if region is None:
            raise FactError(f"case references unknown region {c.region_id!r}")
        lat, lon = region.center
        out.append(replace(c, lat=lat, lon=lon))
    return out


def contact_trace(
    infected: str,
    store: FactStore,
    spatial_tol_m: float = 0.0,
    time_tol_s: float = 0.0,
) -> list[str]:
    """Users co-present with any of the infected user's visits.

    Co-presence means a visit at the same place (or a place within
    `spatial_tol_m`, when both places have known coordinates) whose interval
    overlaps an infected visit expanded by `time_tol_s`. Results are
    deduplicated and ordered by earliest co-presence, ties by user id.
    """
    if infected not in store.users:
        raise FactError(f"unknown user id {infected!r}")
    infected_visits = store.query(PkgQuery(subject=infected, relation=Relation.VISIT))
    earliest: dict[str, float] = {}
    all_visits = store.query(PkgQuery(relation=Relation.VISIT))
    for iv in infected_visits:
        lo = iv.t1 - time_tol_s
        hi = None if iv.t2 is None else iv.t2 + time_tol_s
        for ov in all_visits:
            uid = str(ov.subject)
            if uid == infected:
                continue
            if not _places_close(store, str(iv.object), str(ov.object), spatial_tol_m):
                continue
            if not intervals_overlap(lo, hi, ov.t1, ov.t2):
                continue
            start = max(iv.t1, ov.t1)
            if uid not in earliest or start < earliest[uid]:
                earliest[uid] = start
    return [uid for uid, _ in sorted(earliest.items(), key=lambda kv: (kv[1], kv[0]))]


def _places_close(store: FactStore, a: str, b: str, tol_m: float) -> bool:
    if a == b:
        return True
    if tol_m <= 0:
        return False
    pa, pb = store.places.get(a), store.places.get(b)
    if pa is None or pb is None:
        return False
    return haversine_m(pa.lat, pa.lon, pb.lat, pb.lon) <= tol_m
