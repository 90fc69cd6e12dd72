"""End-to-end demo: synthesize a scenario, derive facts, mine patterns,
compute the weekly autocorrelation panel, train the classifier, and check
that every planted hotspot region is predicted as a hotspot class.

Usage: python scripts/run_pipeline.py [workdir] [--seed N]
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from epimob.cli import main as cli


def sh(*argv):
    code = cli(list(argv))
    if code != 0:
        raise SystemExit(f"step failed ({code}): {' '.join(argv)}")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("workdir", nargs="?", default="pipeline_out")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    w = args.workdir
    scenario, derived = os.path.join(w, "scenario"), os.path.join(w, "derived")
    mined, panel = os.path.join(w, "mined"), os.path.join(w, "panel")
    model, preds = os.path.join(w, "model"), os.path.join(w, "preds")

    sh("synth", "--seed", str(args.seed), "--out", scenario)
    sh("derive", "--data", scenario, "--out", derived)
    pkg = os.path.join(derived, "pkg.txt")
    sh("mine", "--pkg", pkg, "--data", scenario, "--kind", "cascading", "--pi", "0.8", "--out", mined)
    sh("sc-panel", "--data", scenario, "--out", panel)
    common = [
        "--data", scenario,
        "--pkg", pkg,
        "--patterns", os.path.join(mined, "patterns.jsonl"),
        "--sc-panel", os.path.join(panel, "sc_panel.csv"),
    ]
    sh("train", *common, "--epochs", "60", "--seed", "3", "--out", model)
    sh("predict", *common, "--params", os.path.join(model, "params.txt"), "--out", preds)

    rows = open(os.path.join(preds, "predictions.csv")).read().splitlines()[1:]
    predicted_hot = {r.split(",")[0] for r in rows if r.split(",")[1] in ("C1", "C2")}
    planted = json.load(open(os.path.join(scenario, "ground_truth.json")))["planted_hotspots"]
    print("planted hotspots:  ", dict(sorted(planted.items())))
    print("predicted hotspots:", sorted(predicted_hot))
    ok = set(planted) <= predicted_hot
    print("planted set recovered:", ok)
    raise SystemExit(0 if ok else 1)


if __name__ == "__main__":
    main()
