import itertools

import numpy as np
import pytest

from epimob.geo import Place, PoiType, haversine_m
from epimob.kgraph import (
    CaseEvent,
    FactError,
    FactStore,
    PkgQuery,
    Relation,
    TemporalFact,
    User,
    contact_trace,
    derive_flows,
    derive_groups,
    derive_hotspot_facts,
    derive_visits,
    derive_visits_for_users,
    geocode_cases,
    intervals_overlap,
)
from epimob.dataio import ScenarioConfig, synthesize_scenario

from conftest import metric_bbox


def visit(uid, pid, t1, t2, f=0.5):
    return TemporalFact(uid, Relation.VISIT, pid, t1, t2, f)


def place(pid, lat=0.0, lon=0.0):
    return Place(id=pid, poi_type=PoiType.OTHER, lat=lat, lon=lon)


class TestFactInvariants:
    def test_upsert_overwrites_feature(self):
        store = FactStore()
        store.assert_fact(visit("u", "p", 0, 10, 0.3))
        store.assert_fact(visit("u", "p", 0, 10, 0.5))
        assert len(store) == 1
        assert store.facts()[0].feature == 0.5

    def test_inverted_interval_rejected(self):
        with pytest.raises(FactError):
            visit("u", "p", 10, 5)

    def test_distinct_facts_counted(self):
        store = FactStore()
        for k in range(25):
            store.assert_fact(visit(f"u{k}", "p", k, k + 1))
        assert len(store) == 25

    def test_group_feature_range(self):
        with pytest.raises(FactError):
            TemporalFact("a", Relation.GROUP, frozenset({"b"}), 0, 1, 1.0)

    def test_hotspot_feature_nonnegative(self):
        with pytest.raises(FactError):
            TemporalFact("bbox(0;0;1;1)", Relation.HOTSPOT, frozenset({"r"}), 0, None, -1.0)

    def test_trajectory_must_increase(self):
        with pytest.raises(FactError):
            User(id="u", trajectory=((5.0, 0, 0), (5.0, 0, 0)))

    def test_fact_ids_content_addressed(self):
        a = visit("u", "p", 0, 10, 0.3)
        b = visit("u", "p", 0, 10, 0.9)
        c = visit("u", "p", 0, 11, 0.3)
        assert a.id == b.id
        assert a.id != c.id


class TestQuery:
    def test_window_overlap(self):
        store = FactStore()
        store.assert_fact(visit("u", "p", 8, 12))
        assert store.query(PkgQuery(window=(5, 10)))

    def test_window_disjoint(self):
        store = FactStore()
        store.assert_fact(visit("u", "p", 11, 12))
        assert not store.query(PkgQuery(window=(5, 10)))

    def test_open_interval_matches_any_later_window(self):
        store = FactStore()
        store.assert_fact(visit("u", "p", 100.0, None))
        assert store.query(PkgQuery(window=(200.0, 300.0)))

    def test_query_requires_bound_field(self):
        with pytest.raises(FactError):
            PkgQuery()

    def test_matches_linear_scan_oracle(self):
        rng = np.random.default_rng(11)
        store = FactStore()
        relations = list(Relation)
        subjects = [f"u{k}" for k in range(8)]
        objects = [f"p{k}" for k in range(8)]
        facts = []
        for _ in range(400):
            t1 = float(rng.integers(0, 500))
            t2 = None if rng.random() < 0.1 else t1 + float(rng.integers(0, 100))
            f = TemporalFact(
                subjects[rng.integers(0, 8)],
                relations[rng.integers(0, len(relations))],
                objects[rng.integers(0, 8)],
                t1,
                t2,
                float(rng.random()),
            )
            if f.relation is Relation.GROUP:
                f = TemporalFact(f.subject, f.relation, f.object, f.t1, f.t2, 0.5)
            facts.append(f)
            store.assert_fact(f)
        for _ in range(1000):
            try:
                q = PkgQuery(
                    subject=subjects[rng.integers(0, 8)] if rng.random() < 0.5 else None,
                    relation=relations[rng.integers(0, len(relations))] if rng.random() < 0.5 else None,
                    object=objects[rng.integers(0, 8)] if rng.random() < 0.4 else None,
                    window=(float(rng.integers(0, 500)), float(rng.integers(500, 700)))
                    if rng.random() < 0.5
                    else None,
                )
            except FactError:
                continue
            got = store.query(q)
            # independent linear scan over the live fact set
            want = []
            for fact in {f.key: f for f in facts}.values():
                ok = True
                if q.subject is not None and fact.subject != q.subject:
                    ok = False
                if q.relation is not None and fact.relation is not q.relation:
                    ok = False
                if q.object is not None and fact.object != q.object:
                    ok = False
                if q.window is not None and not intervals_overlap(fact.t1, fact.t2, *q.window):
                    ok = False
                if ok:
                    want.append(fact)
            want.sort(key=lambda f: (f.t1, f.id))
            assert got == want


class TestDeriveVisits:
    def test_empty_trajectory(self):
        user = User(id="u", trajectory=())
        assert derive_visits(user, [place("P")], 100.0, 600.0) == []

    def test_single_stay_matches_bruteforce(self):
        # 15 samples over 15 minutes, all within 50 m of P
        traj = tuple((60.0 * k, 0.0003, 0.0) for k in range(15))
        user = User(id="u", trajectory=traj)
        facts = derive_visits(user, [place("P")], 100.0, 600.0)
        assert len(facts) == 1
        fact = facts[0]
        assert (fact.t1, fact.t2) == (0.0, 840.0)
        assert fact.feature == 1.0
        # brute-force oracle: every maximal within-radius run of >= stay_min
        oracle = brute_force_stays(traj, place("P"), 100.0, 600.0)
        assert [(fact.t1, fact.t2)] == oracle

    def test_alternating_places_no_stay(self):
        pa, pb = place("A", 0.0, 0.0), place("B", 0.045, 0.0)  # ~5 km apart
        traj = []
        t = 0.0
        for k in range(10):
            lat = 0.0 if k % 2 == 0 else 0.045
            traj.append((t, lat, 0.0))
            traj.append((t + 60.0, lat, 0.0))
            t += 120.0
        user = User(id="u", trajectory=tuple(traj))
        facts = derive_visits(user, [pa, pb], 100.0, 600.0)
        assert facts == []
        assert brute_force_stays(tuple(traj), pa, 100.0, 600.0) == []

    def test_invalid_thresholds(self):
        user = User(id="u", trajectory=())
        with pytest.raises(FactError):
            derive_visits(user, [], 0.0, 600.0)

    def test_deterministic(self):
        traj = tuple((30.0 * k, 0.0001 * (k % 3), 0.0) for k in range(40))
        user = User(id="u", trajectory=traj)
        a = derive_visits(user, [place("P")], 80.0, 300.0)
        b = derive_visits(user, [place("P")], 80.0, 300.0)
        assert [f.id for f in a] == [f.id for f in b]


def brute_force_stays(traj, poi, radius_m, min_s):
    """Independent stay scan: all maximal runs of in-radius samples."""
    inside = [haversine_m(lat, lon, poi.lat, poi.lon) <= radius_m for _, lat, lon in traj]
    runs = []
    k = 0
    while k < len(traj):
        if inside[k]:
            j = k
            while j + 1 < len(traj) and inside[j + 1]:
                j += 1
            if traj[j][0] - traj[k][0] >= min_s:
                runs.append((traj[k][0], traj[j][0]))
            k = j + 1
        else:
            k += 1
    return runs


class TestDeriveGroups:
    def test_three_users_three_places(self):
        vs = []
        for uid in ("u1", "u2", "u3"):
            for k, pid in enumerate(("A", "B", "C")):
                vs.append(visit(uid, pid, 1000.0 * k, 1000.0 * k + 400))
        groups = derive_groups(vs, time_tol_s=0.0)
        assert len(groups) == 1
        g = groups[0]
        assert {str(g.subject)} | set(g.object) == {"u1", "u2", "u3"}
        assert g.feature == pytest.approx(3 / 4)
        # brute-force: enumerate all user subsets and shared sequences
        assert brute_force_groups(vs, 0.0) == {(frozenset({"u1", "u2", "u3"}), ("A", "B", "C"))}

    def test_two_shared_places_insufficient(self):
        vs = []
        for uid in ("u1", "u2"):
            for k, pid in enumerate(("A", "B")):
                vs.append(visit(uid, pid, 1000.0 * k, 1000.0 * k + 400))
        assert derive_groups(vs, 0.0) == []

    def test_single_user_no_group(self):
        vs = [visit("u1", p, 1000.0 * k, 1000.0 * k + 400) for k, p in enumerate("ABC")]
        assert derive_groups(vs, 0.0) == []

    def test_matches_bruteforce_on_random_visits(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            vs = []
            for uid in ("u1", "u2", "u3"):
                t = 0.0
                for _ in range(int(rng.integers(3, 6))):
                    pid = str(rng.choice(["A", "B", "C", "D"]))
                    start = t + float(rng.integers(0, 3)) * 100.0
                    vs.append(visit(uid, pid, start, start + 400.0))
                    t = start + 500.0
            got = {
                (frozenset({str(g.subject)} | set(g.object)),)
                for g in derive_groups(vs, time_tol_s=50.0)
            }
            want = {(m,) for m, _ in brute_force_groups(vs, 50.0)}
            assert got == want


def brute_force_groups(visits, tol):
    """All maximal (user set, contiguous shared place sequence >= 3) pairs."""
    per_user = {}
    for v in visits:
        per_user.setdefault(str(v.subject), []).append(v)
    for seq in per_user.values():
        seq.sort(key=lambda v: (v.t1, v.id))
    windows = {}
    for uid, seq in per_user.items():
        for i in range(len(seq)):
            for j in range(i + 3, len(seq) + 1):
                places = tuple(str(v.object) for v in seq[i:j])
                windows.setdefault(places, {}).setdefault(uid, []).append(seq[i:j])
    raw = set()
    for places, users in windows.items():
        ids = sorted(users)
        for size in range(2, len(ids) + 1):
            for combo in itertools.combinations(ids, size):
                ok = all(
                    any(
                        all(
                            intervals_overlap(a.t1 - tol, a.t2 + tol, b.t1, b.t2)
                            for a, b in zip(wa, wb)
                        )
                        for wa in users[ua]
                        for wb in users[ub]
                    )
                    for ua, ub in itertools.combinations(combo, 2)
                )
                if ok:
                    raw.add((frozenset(combo), places))
    kept = set()
    for members, places in raw:
        dominated = any(
            (members < om and places == op)
            or (members == om and len(places) < len(op) and _is_contig_sub(places, op))
            for om, op in raw
            if (om, op) != (members, places)
        )
        if not dominated:
            kept.add((members, places))
    return kept


def _is_contig_sub(short, long):
    n = len(short)
    return any(long[i : i + n] == short for i in range(len(long) - n + 1))


class TestDeriveFlows:
    def test_threshold_met_exactly(self):
        vs = []
        for uid in ("u1", "u2", "u3"):
            vs.append(visit(uid, "A", 100.0, 200.0))
            vs.append(visit(uid, "B", 300.0, 400.0))
        flows = derive_flows(vs, nu=3)
        assert len(flows) == 1
        assert (str(flows[0].subject), str(flows[0].object), flows[0].feature) == ("A", "B", 3.0)

    def test_below_threshold(self):
        vs = []
        for uid in ("u1", "u2"):
            vs.append(visit(uid, "A", 100.0, 200.0))
            vs.append(visit(uid, "B", 300.0, 400.0))
        assert derive_flows(vs, nu=3) == []

    def test_threshold_one(self):
        vs = [visit("u", "A", 0.0, 50.0), visit("u", "B", 100.0, 150.0)]
        flows = derive_flows(vs, nu=1)
        assert len(flows) == 1

    def test_slots_separate_transitions(self):
        vs = [
            visit("u1", "A", 0.0, 50.0),
            visit("u1", "B", 100.0, 150.0),
            visit("u2", "A", 4000.0, 4050.0),
            visit("u2", "B", 4100.0, 4150.0),
        ]
        # transitions land in different hour slots -> neither reaches nu=2
        assert derive_flows(vs, nu=2) == []
        assert len(derive_flows(vs, nu=1)) == 2


class TestDeriveHotspots:
    def test_no_cases(self):
        assert derive_hotspot_facts([], []) == []

    def test_single_cluster(self):
        from epimob.geo import build_grid

        regions = build_grid(metric_bbox(7500, 7500, lat0=10.0), 2500.0)
        center = regions[4]
        clat, clon = center.center
        cases = [CaseEvent(region_id=center.id, t=3600.0 * k, count=1.0, lat=clat, lon=clon) for k in range(25)]
        facts = derive_hotspot_facts(cases, regions)
        assert len(facts) == 1
        assert facts[0].feature == 25.0
        assert facts[0].object == frozenset({center.id})
        assert facts[0].t2 is None

    def test_two_disjoint_clusters(self):
        from epimob.geo import build_grid

        regions = build_grid(metric_bbox(12500, 12500, lat0=10.0), 2500.0)
        a, b = regions[0], regions[-1]
        cases = []
        for region in (a, b):
            clat, clon = region.center
            cases += [
                CaseEvent(region_id=region.id, t=7200.0, count=1.0, lat=clat, lon=clon)
                for _ in range(25)
            ]
        facts = derive_hotspot_facts(cases, regions)
        assert len(facts) == 2
        assert {f.object for f in facts} == {frozenset({a.id}), frozenset({b.id})}
        assert {str(f.subject) for f in facts} == {
            f"bbox({r.bbox.min_lat:.6f};{r.bbox.min_lon:.6f};{r.bbox.max_lat:.6f};{r.bbox.max_lon:.6f})"
            for r in (a, b)
        }


class TestContactTrace:
    def build(self):
        store = FactStore()
        store.add_place(place("P", 0.0, 0.0))
        store.add_place(place("Q", 0.01, 0.0))
        for uid in ("sick", "b", "c", "far"):
            store.add_user(User(id=uid))
        return store

    def test_alone_everywhere(self):
        store = self.build()
        store.assert_fact(visit("sick", "P", 0, 600))
        assert contact_trace("sick", store) == []

    def test_overlapping_user_found(self):
        store = self.build()
        store.assert_fact(visit("sick", "P", 0, 600))
        store.assert_fact(visit("b", "P", 300, 900))
        assert contact_trace("sick", store) == ["b"]

    def test_disjoint_beyond_tolerance_excluded(self):
        store = self.build()
        store.assert_fact(visit("sick", "P", 0, 600))
        store.assert_fact(visit("c", "P", 2000, 2600))
        assert contact_trace("sick", store, time_tol_s=100.0) == []
        assert contact_trace("sick", store, time_tol_s=1500.0) == ["c"]

    def test_unknown_user(self):
        store = self.build()
        with pytest.raises(FactError):
            contact_trace("nobody", store)

    def test_symmetry_at_zero_tolerance(self):
        rng = np.random.default_rng(4)
        store = FactStore()
        store.add_place(place("P"))
        users = [f"u{k}" for k in range(6)]
        for uid in users:
            store.add_user(User(id=uid))
            for _ in range(3):
                t = float(rng.integers(0, 50)) * 100.0
                store.assert_fact(visit(uid, "P", t, t + 250.0))
        for a in users:
            for b in users:
                if a == b:
                    continue
                assert (b in contact_trace(a, store)) == (a in contact_trace(b, store))

    def test_sorted_by_earliest_overlap(self):
        store = self.build()
        store.assert_fact(visit("sick", "P", 0, 1000))
        store.assert_fact(visit("c", "P", 500, 700))
        store.assert_fact(visit("b", "P", 100, 300))
        assert contact_trace("sick", store) == ["b", "c"]

    def test_spatial_tolerance_includes_nearby_place(self):
        store = self.build()
        store.assert_fact(visit("sick", "P", 0, 600))
        store.assert_fact(visit("b", "Q", 100, 500))  # ~1.1 km away
        assert contact_trace("sick", store) == []
        assert contact_trace("sick", store, spatial_tol_m=2000.0) == ["b"]


class TestConnectivityFromFacts:
    def test_hand_derived_normalization(self):
        store = FactStore()
        # routes: A has 2, B has 1; inflow: A gets 10, B gets 40
        store.assert_fact(TemporalFact("A", Relation.CONNECTIVITY, "Z1", 0.0, 100.0, 2.0))
        store.assert_fact(TemporalFact("B", Relation.CONNECTIVITY, "Z2", 0.0, 100.0, 1.0))
        store.assert_fact(TemporalFact("Q", Relation.FLOW, "A", 10.0, 20.0, 10.0))
        store.assert_fact(TemporalFact("Q", Relation.FLOW, "B", 10.0, 20.0, 40.0))
        window = (0.0, 100.0)
        assert store.connectivity_for("A", window).ci == pytest.approx(0.5)
        assert store.connectivity_for("B", window).ci == pytest.approx(1.0)

    def test_empty_window_zero(self):
        store = FactStore()
        assert store.connectivity_for("A", (0.0, 1.0)).ci == 0.0

    def test_facts_outside_window_ignored(self):
        store = FactStore()
        store.assert_fact(TemporalFact("A", Relation.CONNECTIVITY, "Z", 0.0, 10.0, 3.0))
        store.assert_fact(TemporalFact("Q", Relation.FLOW, "A", 5.0, 6.0, 10.0))
        assert store.connectivity_for("A", (0.0, 10.0)).ci == 1.0
        assert store.connectivity_for("A", (100.0, 200.0)).ci == 0.0


class TestReferentialIntegrity:
    def test_derived_fact_entities_exist(self):
        cfg = ScenarioConfig(seed=3)
        scenario = synthesize_scenario(cfg)
        users = {u.id for u in scenario.users}
        places = {p.id for p in scenario.places}
        visits = derive_visits_for_users(scenario.users, scenario.places, 150.0, 600.0)
        for v in visits:
            assert str(v.subject) in users
            assert str(v.object) in places
