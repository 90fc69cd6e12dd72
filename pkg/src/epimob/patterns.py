"""Cascading and co-occurrence pattern mining over mobility facts.

Both miners operate on spatially anchored events. A fact becomes an event
typed by ``relation@object`` (e.g. ``visit@P3``) and located at its object
entity; region-context predicates (density above a threshold, a festival,
hotspot presence, ...) enter as context events typed by their predicate
name. Patterns are sets or sequences of *distinct* event types.

Cascading pattern instance: a time-ordered event chain where each
consecutive pair lies within the spatial buffer and temporal span.
Co-occurrence pattern instance: an order-free event set, pairwise within the
buffer and span.

A pattern is emitted when its participation index — the minimum over member
types of (events of that type participating in some instance) / (events of
that type in the pool) — reaches the configured threshold. The level-wise
miners grow surviving patterns one type at a time; participation is
anti-monotone over cascade prefixes and co-occurrence subsets, so growing
only survivors loses nothing. `mine_bruteforce` enumerates everything and is
the miners' reference answer on small pools.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Optional, Sequence

from .geo import BBox, haversine_m
from .kgraph import FactStore, Relation, TemporalFact, canonical_entity

BRUTE_FORCE_CAP = 12


class PatternError(ValueError):
    """Invalid miner input."""


@dataclass(frozen=True)
class Event:
    id: str
    etype: str
    lat: float
    lon: float
    t: float


@dataclass(frozen=True)
class NeighborRelation:
    spatial_buffer_m: float = 2000.0
    temporal_span_s: float = 7 * 86400.0

    def __post_init__(self) -> None:
        if self.spatial_buffer_m <= 0 or self.temporal_span_s <= 0:
            raise PatternError("neighbor relation buffer and span must be > 0")


@dataclass(frozen=True)
class MinerConfig:
    pi1: float = 0.3
    pi2: float = 0.3
    max_size: int = 3

    def __post_init__(self) -> None:
        if not (0.0 < self.pi1 <= 1.0 and 0.0 < self.pi2 <= 1.0):
            raise PatternError("participation thresholds must be in (0, 1]")
        if self.max_size < 2:
            raise PatternError("max_size must be >= 2")


@dataclass(frozen=True)
class PatternInstance:
    kind: str  # "cascading" | "co_occurrence"
    members: tuple[str, ...]
    pi: float
    support: tuple[tuple[str, tuple[str, ...]], ...]  # (type, sorted event ids)

    def support_map(self) -> dict[str, tuple[str, ...]]:
        return dict(self.support)


def events_from_store(store: FactStore) -> list[Event]:
    """Events for all facts with a resolvable spatial anchor.

    The anchor is the object entity: a place's coordinates, a region's
    centroid, or the union-bbox center of a region set. Facts whose object
    cannot be located (user sets, unknown ids) are skipped.
    """
    events = []
    for fact in store.facts():
        loc = _locate(store, fact)
        if loc is None:
            continue
        etype = f"{fact.relation.value}@{canonical_entity(fact.object)}"
        events.append(Event(id=fact.id, etype=etype, lat=loc[0], lon=loc[1], t=fact.t1))
    return events


def _locate(store: FactStore, fact: TemporalFact) -> Optional[tuple[float, float]]:
    obj = fact.object
    if isinstance(obj, frozenset):
        boxes = [store.regions[rid].bbox for rid in obj if rid in store.regions]
        if len(boxes) != len(obj) or not boxes:
            return None
        return BBox.union(boxes).center
    if obj in store.places:
        p = store.places[obj]
        return (p.lat, p.lon)
    if obj in store.regions:
        return store.regions[obj].center
    return None


def context_event(kind: str, region, t: float, suffix: str = "") -> Event:
    """A region-level context predicate as a minable event."""
    lat, lon = region.center
    return Event(id=f"ctx:{kind}:{region.id}{suffix}", etype=kind, lat=lat, lon=lon, t=t)


def participation_index(
    members: Sequence[str],
    instances: Sequence[tuple[Event, ...]],
    pool: Sequence[Event],
) -> float:
    """min over member types of participating/total events of that type."""
    if not members:
        raise PatternError("pattern has no member types")
    totals: dict[str, int] = {}
    for e in pool:
        totals[e.etype] = totals.get(e.etype, 0) + 1
    participating: dict[str, set] = {m: set() for m in members}
    for inst in instances:
        for e in inst:
            participating[e.etype].add(e.id)
    pi = 1.0
    for m in members:
        if totals.get(m, 0) == 0:
            raise PatternError(f"event type {m!r} absent from the pool")
        pi = min(pi, len(participating[m]) / totals[m])
    return pi


def _before(a: Event, b: Event) -> bool:
    return (a.t, a.id) < (b.t, b.id)


def _pair_ok_cascade(a: Event, b: Event, nr: NeighborRelation) -> bool:
    return (
        _before(a, b)
        and (b.t - a.t) <= nr.temporal_span_s
        and haversine_m(a.lat, a.lon, b.lat, b.lon) <= nr.spatial_buffer_m
    )


def _pair_ok_cooc(a: Event, b: Event, nr: NeighborRelation) -> bool:
    return (
        abs(b.t - a.t) <= nr.temporal_span_s
        and haversine_m(a.lat, a.lon, b.lat, b.lon) <= nr.spatial_buffer_m
    )


def mine_cascading(
    store_or_events: FactStore | Sequence[Event],
    nr: NeighborRelation,
    cfg: MinerConfig,
) -> list[PatternInstance]:
    """Level-wise cascading pattern mining with participation pruning."""
    events = _as_events(store_or_events)
    by_type = _group_by_type(events)
    # size-2 seed level
    level: dict[tuple[str, ...], list[tuple[Event, ...]]] = {}
    ordered = sorted(events, key=lambda e: (e.t, e.id))
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if b.t - a.t > nr.temporal_span_s:
                break
            if a.etype != b.etype and _pair_ok_cascade(a, b, nr):
                level.setdefault((a.etype, b.etype), []).append((a, b))
    results: list[PatternInstance] = []
    survivors = _filter_level("cascading", level, events, cfg.pi1, results)
    size = 2
    while size < cfg.max_size and survivors:
        size += 1
        level = {}
        for members, instances in survivors.items():
            for etype, candidates in by_type.items():
                if etype in members:
                    continue
                extended = [
                    inst + (e,)
                    for inst in instances
                    for e in candidates
                    if _pair_ok_cascade(inst[-1], e, nr)
                ]
                if extended:
                    level[members + (etype,)] = extended
        survivors = _filter_level("cascading", level, events, cfg.pi1, results)
    return _sorted_patterns(results)


def mine_cooccurrence(
    store_or_events: FactStore | Sequence[Event],
    contexts: Sequence[Event],
    nr: NeighborRelation,
    cfg: MinerConfig,
) -> list[PatternInstance]:
    """Sweep-line co-occurrence mining over facts plus region-context events."""
    events = _as_events(store_or_events) + list(contexts)
    by_type = _group_by_type(events)
    level: dict[tuple[str, ...], list[tuple[Event, ...]]] = {}
    ordered = sorted(events, key=lambda e: (e.t, e.id))
    active: list[Event] = []
    for e in ordered:
        active = [a for a in active if e.t - a.t <= nr.temporal_span_s]
        for a in active:
            if a.etype != e.etype and _pair_ok_cooc(a, e, nr):
                members = tuple(sorted((a.etype, e.etype)))
                inst = (a, e) if members == (a.etype, e.etype) else (e, a)
                level.setdefault(members, []).append(inst)
        active.append(e)
    results: list[PatternInstance] = []
    survivors = _filter_level("co_occurrence", level, events, cfg.pi2, results)
    size = 2
    while size < cfg.max_size and survivors:
        size += 1
        level = {}
        for members, instances in survivors.items():
            top = members[-1]
            for etype, candidates in by_type.items():
                if etype <= top:
                    continue
                extended = [
                    inst + (e,)
                    for inst in instances
                    for e in candidates
                    if all(_pair_ok_cooc(prev, e, nr) for prev in inst)
                ]
                if extended:
                    level[members + (etype,)] = extended
        survivors = _filter_level("co_occurrence", level, events, cfg.pi2, results)
    return _sorted_patterns(results)


def mine_bruteforce(
    store_or_events: FactStore | Sequence[Event],
    nr: NeighborRelation,
    cfg: MinerConfig,
    kind: str,
    contexts: Sequence[Event] = (),
) -> list[PatternInstance]:
    """Exhaustive reference miner for pools of at most 12 events."""
    if kind not in ("cascading", "co_occurrence"):
        raise PatternError(f"unknown pattern kind {kind!r}")
    events = _as_events(store_or_events) + list(contexts)
    if len(events) > BRUTE_FORCE_CAP:
        raise PatternError(f"brute force capped at {BRUTE_FORCE_CAP} events, got {len(events)}")
    by_type = _group_by_type(events)
    types = sorted(by_type)
    threshold = cfg.pi1 if kind == "cascading" else cfg.pi2
    results: list[PatternInstance] = []
    for size in range(2, cfg.max_size + 1):
        if kind == "cascading":
            member_tuples = list(permutations(types, size))
        else:
            member_tuples = list(_combinations_sorted(types, size))
        for members in member_tuples:
            instances = _enumerate_instances(members, by_type, nr, kind)
            if not instances:
                continue
            pi = participation_index(members, instances, events)
            if pi >= threshold:
                results.append(_pattern(kind, members, instances, pi))
    return _sorted_patterns(results)


def _combinations_sorted(types: Sequence[str], size: int):
    from itertools import combinations

    return combinations(types, size)


def _enumerate_instances(members, by_type, nr, kind) -> list[tuple[Event, ...]]:
    instances: list[tuple[Event, ...]] = []

    def extend(partial: tuple[Event, ...], depth: int) -> None:
        if depth == len(members):
            instances.append(partial)
            return
        for e in by_type[members[depth]]:
            if kind == "cascading":
                ok = not partial or _pair_ok_cascade(partial[-1], e, nr)
            else:
                ok = all(_pair_ok_cooc(prev, e, nr) for prev in partial)
            if ok:
                extend(partial + (e,), depth + 1)

    extend((), 0)
    return instances


def _as_events(store_or_events) -> list[Event]:
    if isinstance(store_or_events, FactStore):
        return events_from_store(store_or_events)
    return list(store_or_events)


def _group_by_type(events: Sequence[Event]) -> dict[str, list[Event]]:
    by_type: dict[str, list[Event]] = {}
    for e in sorted(events, key=lambda e: (e.t, e.id)):
        by_type.setdefault(e.etype, []).append(e)
    return by_type


def _filter_level(kind, level, pool, threshold, results) -> dict:
    survivors = {}
    for members, instances in level.items():
        pi = participation_index(members, instances, pool)
        if pi >= threshold:
            survivors[members] = instances
            results.append(_pattern(kind, members, instances, pi))
    return survivors


def _pattern(kind, members, instances, pi) -> PatternInstance:
    support: dict[str, set] = {m: set() for m in members}
    for inst in instances:
        for e in inst:
            support[e.etype].add(e.id)
    return PatternInstance(
        kind=kind,
        members=tuple(members),
        pi=pi,
        support=tuple((m, tuple(sorted(support[m]))) for m in members),
    )


def _sorted_patterns(results: list[PatternInstance]) -> list[PatternInstance]:
    return sorted(results, key=lambda p: (len(p.members), -p.pi, p.members))


def patterns_from_jsonl(text: str) -> list[PatternInstance]:
    patterns = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        patterns.append(
            PatternInstance(
                kind=obj["kind"],
                members=tuple(obj["members"]),
                pi=float(obj["pi"]),
                support=tuple((m, tuple(obj["support"][m])) for m in obj["members"]),
            )
        )
    return patterns


def patterns_to_jsonl(patterns: Sequence[PatternInstance]) -> str:
    out = io.StringIO()
    for p in patterns:
        out.write(
            json.dumps(
                {
                    "kind": p.kind,
                    "members": list(p.members),
                    "pi": p.pi,
                    "support": {m: list(ids) for m, ids in p.support},
                },
                sort_keys=True,
            )
        )
        out.write("\n")
    return out.getvalue()
