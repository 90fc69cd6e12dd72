"""Command-line front end for the analytics pipeline.

Subcommands: ingest, synth, derive, mine, sc-panel, train, predict, trace,
fogsim, bench-pkg. Every invocation writes its artifacts into the directory
given by --out plus a machine-readable manifest.json; all randomness flows
from --seed, so identical inputs produce byte-identical outputs. Exit codes:
0 on success, 1 on a validation or data error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__, dataio, fog, kgraph, moran, patterns
from .geo import GeoError
from .hotspotnet import (
    Ablations,
    NetError,
    TrainConfig,
    accuracy,
    params_from_text,
    params_to_text,
    predict as net_predict,
    train as net_train,
)
from .kgraph import FactError, FactStore, PkgQuery, Relation

PACKAGE_ERRORS = (
    GeoError,
    FactError,
    NetError,
    fog.FogError,
    moran.ScError,
    patterns.PatternError,
    dataio.DataError,
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        outputs = args.func(args)
    except PACKAGE_ERRORS as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    _write_manifest(args, outputs)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epimob", description=__doc__)
    parser.add_argument("--version", action="version", version=f"epimob {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize dataset files")
    p.add_argument("--regions")
    p.add_argument("--places")
    p.add_argument("--trajectories")
    p.add_argument("--users")
    p.add_argument("--cases")
    p.add_argument("--routes")
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic scenario with planted ground truth")
    p.add_argument("--grid-n", type=int, default=5)
    p.add_argument("--users", type=int, default=12, dest="n_users")
    p.add_argument("--days", type=int, default=14)
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("derive", help="derive visit/group/flow/hotspot facts from a scenario dir")
    p.add_argument("--data", required=True)
    p.add_argument("--stay-radius-m", type=float, default=150.0)
    p.add_argument("--stay-min-s", type=float, default=600.0)
    p.add_argument("--nu", type=int, default=3)
    p.add_argument("--time-tol-s", type=float, default=300.0)
    _common(p)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("mine", help="mine cascading or co-occurrence patterns from a fact file")
    p.add_argument("--pkg", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=("cascading", "cooccurrence"), default="cascading")
    p.add_argument("--pi", type=float, default=0.3)
    p.add_argument("--buffer-m", type=float, default=2000.0)
    p.add_argument("--span-s", type=float, default=7 * 86400.0)
    p.add_argument("--max-size", type=int, default=3)
    _common(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("sc-panel", help="weekly spatial-autocorrelation panel over six adjacency metrics")
    p.add_argument("--data", required=True)
    _common(p)
    p.set_defaults(func=cmd_sc_panel)

    p = sub.add_parser("train", help="train the hotspot classifier")
    p.add_argument("--samples", help="JSON-lines sample file")
    p.add_argument("--data", help="scenario dir (samples are assembled from pipeline artifacts)")
    p.add_argument("--pkg")
    p.add_argument("--patterns")
    p.add_argument("--sc-panel", dest="sc_panel")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--cell-size", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--no-attention", action="store_true")
    p.add_argument("--no-bilstm", action="store_true")
    p.add_argument("--no-pkg-features", action="store_true")
    p.add_argument("--no-two-phase", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify regions with trained parameters")
    p.add_argument("--params", required=True)
    p.add_argument("--samples")
    p.add_argument("--data")
    p.add_argument("--pkg")
    p.add_argument("--patterns")
    p.add_argument("--sc-panel", dest="sc_panel")
    p.add_argument("--no-attention", action="store_true")
    p.add_argument("--no-bilstm", action="store_true")
    p.add_argument("--no-pkg-features", action="store_true")
    p.add_argument("--no-two-phase", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("trace", help="contact-trace a user against the visit facts")
    p.add_argument("--user", required=True)
    p.add_argument("--pkg", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--spatial-tol-m", type=float, default=0.0)
    p.add_argument("--time-tol-s", type=float, default=0.0)
    _common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("fogsim", help="evaluate fog/cloud cost scenarios")
    p.add_argument("--scenario", help="scenario file to evaluate")
    p.add_argument("--cloud-scenario", help="optional cloud-only scenario for a comparison")
    p.add_argument("--sweep", action="store_true", help="run the reference payload sweep")
    _common(p)
    p.set_defaults(func=cmd_fogsim)

    p = sub.add_parser("bench-pkg", help="query-time scaling benchmark of the fact store")
    p.add_argument("--entities", default="1000,5000,10000,20000,40000,50000")
    p.add_argument("--queries", type=int, default=300)
    _common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=0)


def _write(args, name: str, content: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, name)
    with open(path, "w") as fh:
        fh.write(content)
    return name


def _write_manifest(args, outputs: list[str]) -> None:
    os.makedirs(args.out, exist_ok=True)
    record = {
        "command": args.command,
        "args": {
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("func", "command", "out") and v is not None
        },
        "outputs": sorted(outputs),
        "version": __version__,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands

def cmd_ingest(args) -> list[str]:
    ds = dataio.load_dataset(
        dataio.DatasetPaths(
            regions=args.regions,
            places=args.places,
            trajectories=args.trajectories,
            users=args.users,
            cases=args.cases,
            routes=args.routes,
        )
    )
    outputs = []
    if ds.regions:
        outputs.append(_write(args, "regions.geojson", dataio.regions_to_geojson(ds.regions)))
    if ds.places:
        outputs.append(_write(args, "places.csv", dataio.places_to_csv(ds.places)))
    if ds.users:
        outputs.append(_write(args, "trajectories.csv", dataio.trajectories_to_csv(ds.users)))
    if ds.cases:
        outputs.append(_write(args, "cases.csv", dataio.cases_to_csv(ds.cases)))
    if ds.routes:
        outputs.append(_write(args, "routes.csv", dataio.routes_to_csv(ds.routes)))
    return outputs


def cmd_synth(args) -> list[str]:
    cfg = dataio.ScenarioConfig(
        seed=args.seed,
        grid_n=args.grid_n,
        n_background_users=args.n_users,
        n_days=args.days,
    )
    scenario = dataio.synthesize_scenario(cfg)
    written = dataio.scenario_to_files(scenario, args.out)
    return [os.path.basename(p) for p in written]


def _load_store(args) -> tuple[FactStore, dataio.Dataset]:
    ds = dataio.load_scenario_dir(args.data)
    store = FactStore()
    for r in ds.regions:
        store.add_region(r)
    for p in ds.places:
        store.add_place(p)
    for u in ds.users:
        store.add_user(u)
    return store, ds


def cmd_derive(args) -> list[str]:
    store, ds = _load_store(args)
    visits = kgraph.derive_visits_for_users(ds.users, ds.places, args.stay_radius_m, args.stay_min_s)
    groups = kgraph.derive_groups(visits, args.time_tol_s)
    flows = kgraph.derive_flows(visits, args.nu)
    hotspots = kgraph.derive_hotspot_facts(ds.cases, ds.regions)
    store.assert_all(visits)
    store.assert_all(groups)
    store.assert_all(flows)
    store.assert_all(hotspots)
    summary = {
        "visits": len(visits),
        "groups": len(groups),
        "flows": len(flows),
        "hotspots": len(hotspots),
    }
    return [
        _write(args, "pkg.txt", dataio.pkg_to_text(store)),
        _write(args, "derive_summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n"),
    ]


def _region_contexts(ds: dataio.Dataset) -> list:
    densities = sorted((r.population_density or 0.0) for r in ds.regions)
    flows = sorted((r.aggregate_flow or 0.0) for r in ds.regions)
    if not densities:
        return []
    density_cut = densities[len(densities) // 2]
    flow_cut = flows[len(flows) // 2]
    events = []
    for r in ds.regions:
        if (r.population_density or 0.0) > density_cut:
            events.append(patterns.context_event("population_density_high", r, 0.0))
        if (r.aggregate_flow or 0.0) > flow_cut:
            events.append(patterns.context_event("aggregate_movement_high", r, 0.0))
    return events


def cmd_mine(args) -> list[str]:
    store, ds = _load_store(args)
    facts = dataio.load_pkg(args.pkg)
    for f in facts:
        store.assert_fact(f)
    nr = patterns.NeighborRelation(spatial_buffer_m=args.buffer_m, temporal_span_s=args.span_s)
    if args.kind == "cascading":
        cfg = patterns.MinerConfig(pi1=args.pi, pi2=args.pi, max_size=args.max_size)
        found = patterns.mine_cascading(store, nr, cfg)
    else:
        cfg = patterns.MinerConfig(pi1=args.pi, pi2=args.pi, max_size=args.max_size)
        found = patterns.mine_cooccurrence(store, _region_contexts(ds), nr, cfg)
    return [_write(args, "patterns.jsonl", patterns.patterns_to_jsonl(found))]


def cmd_sc_panel(args) -> list[str]:
    _, ds = _load_store(args)
    weekly, anchor = moran.weekly_case_matrix(ds.cases, ds.regions)
    results = moran.sc_panel(weekly, ds.regions, routes=[(a, b) for a, b, _ in ds.routes], anchor_t=anchor)
    return [_write(args, "sc_panel.csv", moran.panel_to_csv(results))]


def _assemble_samples(args):
    if args.samples:
        with open(args.samples) as fh:
            return dataio.samples_from_jsonl(fh.read(), os.path.basename(args.samples))
    if not args.data:
        raise dataio.DataError("either --samples or --data is required")
    _, ds = _load_store(args)
    visits = []
    if args.pkg:
        visits = [f for f in dataio.load_pkg(args.pkg) if f.relation is Relation.VISIT]
    mined = []
    if args.patterns:
        with open(args.patterns) as fh:
            mined = patterns.patterns_from_jsonl(fh.read())
    sc_results = []
    if args.sc_panel:
        with open(args.sc_panel) as fh:
            sc_results = moran.panel_from_csv(fh.read())
    return dataio.build_region_samples(ds, visits, mined, sc_results)


def cmd_train(args) -> list[str]:
    samples = _assemble_samples(args)
    cfg = TrainConfig(
        cell_size=args.cell_size,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        learning_rate=args.learning_rate,
        ablations=Ablations(
            no_pkg_features=args.no_pkg_features,
            no_attention=args.no_attention,
            no_bilstm=args.no_bilstm,
            no_two_phase=args.no_two_phase,
        ),
    )
    params, curve = net_train(samples, cfg)
    curve_csv = "epoch,loss\n" + "".join(f"{k},{loss!r}\n" for k, loss in enumerate(curve))
    train_acc = accuracy(samples, params, cfg.ablations)
    summary = {"train_accuracy": train_acc, "final_loss": curve[-1], "samples": len(samples)}
    return [
        _write(args, "params.txt", params_to_text(params)),
        _write(args, "loss_curve.csv", curve_csv),
        _write(args, "train_summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n"),
    ]


def cmd_predict(args) -> list[str]:
    samples = _assemble_samples(args)
    with open(args.params) as fh:
        params = params_from_text(fh.read())
    flags = Ablations(
        no_pkg_features=args.no_pkg_features,
        no_attention=args.no_attention,
        no_bilstm=args.no_bilstm,
        no_two_phase=args.no_two_phase,
    )
    preds = net_predict(samples, params, flags)
    rows = "region_id,predicted\n" + "".join(
        f"{s.region_id},{p.value}\n" for s, p in zip(samples, preds)
    )
    return [_write(args, "predictions.csv", rows)]


def cmd_trace(args) -> list[str]:
    store, _ = _load_store(args)
    for f in dataio.load_pkg(args.pkg):
        store.assert_fact(f)
    contacts = kgraph.contact_trace(args.user, store, args.spatial_tol_m, args.time_tol_s)
    payload = {"user": args.user, "suspected": contacts}
    return [_write(args, "contacts.json", json.dumps(payload, indent=1, sort_keys=True) + "\n")]


def cmd_fogsim(args) -> list[str]:
    outputs = []
    if args.sweep:
        rows = fog.sweep_payloads([mb * fog.MB_BITS for mb in fog.DEFAULT_SWEEP_MB])
        outputs.append(_write(args, "fog_sweep.csv", fog.sweep_to_csv(rows)))
    if args.scenario:
        with open(args.scenario) as fh:
            scenario = fog.load_scenario(fh.read())
        delay = fog.delay_total(scenario)
        power = fog.power_total(scenario)
        result = {
            "delay_s": {"ca": delay.ca, "com": delay.com, "pro": delay.pro, "total": delay.total},
            "energy_j": {"ca": power.ca, "com": power.com, "pro": power.pro, "total": power.total},
        }
        if args.cloud_scenario:
            with open(args.cloud_scenario) as fh:
                cloud = fog.load_scenario(fh.read())
            cmp = fog.compare_architectures(scenario, cloud)
            result["delay_reduction_pct"] = cmp.delay_reduction_pct
            result["power_reduction_pct"] = cmp.power_reduction_pct
        outputs.append(_write(args, "fogsim.json", json.dumps(result, indent=1, sort_keys=True) + "\n"))
    if not outputs:
        raise fog.FogError("fogsim needs --scenario and/or --sweep")
    return outputs


def cmd_bench(args) -> list[str]:
    # Timing columns are measurements and vary run to run; the data columns
    # (entities, n_facts, hits) are seed-deterministic.
    sizes = [int(x) for x in str(args.entities).split(",") if x]
    rows = ["entities,n_facts,build_s,query_s,hits"]
    for n in sizes:
        built = _bench_store(n, args.seed)
        t0 = time.perf_counter()
        hits = _bench_queries(built, args.queries, args.seed)
        query_s = time.perf_counter() - t0
        rows.append(f"{n},{len(built[0])},{built[2]!r},{query_s!r},{hits}")
    return [_write(args, "bench.csv", "\n".join(rows) + "\n")]


def _bench_store(n_entities: int, seed: int):
    rng = np.random.default_rng(seed)
    n_users = n_entities // 2
    n_places = n_entities - n_users
    store = FactStore()
    t0 = time.perf_counter()
    for k in range(n_users * 2):
        uid = f"u{k % n_users}"
        pid = f"p{int(rng.integers(0, n_places))}"
        t1 = float(rng.integers(0, 10_000_000))
        store.assert_fact(
            kgraph.TemporalFact(uid, Relation.VISIT, pid, t1, t1 + float(rng.integers(300, 7200)), 1.0)
        )
    build_s = time.perf_counter() - t0
    return store, (n_users, n_places), build_s


def _bench_queries(built, n_queries: int, seed: int) -> int:
    store, (n_users, n_places), _ = built
    rng = np.random.default_rng(seed + 1)
    hits = 0
    for k in range(n_queries):
        mode = k % 3
        if mode == 0:
            q = PkgQuery(subject=f"u{int(rng.integers(0, n_users))}")
        elif mode == 1:
            q = PkgQuery(object=f"p{int(rng.integers(0, n_places))}", relation=Relation.VISIT)
        else:
            t = float(rng.integers(0, 10_000_000))
            q = PkgQuery(subject=f"u{int(rng.integers(0, n_users))}", window=(t, t + 100_000.0))
        hits += len(store.query(q))
    return hits


if __name__ == "__main__":
    sys.exit(main())
