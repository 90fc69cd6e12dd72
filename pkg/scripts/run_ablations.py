"""Ablation experiment on the planted-feature classification task.

Trains the full network and the three ablated variants on the same seed and
prints held-out accuracy for each. This is the experiment behind the
hotspot-prediction acceptance criterion; expect roughly five minutes of CPU
time with the default sizes.

Usage: python scripts/run_ablations.py [--samples N] [--epochs N] [--seed N]
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from epimob.dataio import make_classifier_dataset
from epimob.hotspotnet import Ablations, TrainConfig, accuracy, train

VARIANTS = (
    ("full", Ablations()),
    ("no_attention", Ablations(no_attention=True)),
    ("no_bilstm", Ablations(no_bilstm=True)),
    ("no_pkg_features", Ablations(no_pkg_features=True)),
    ("no_two_phase", Ablations(no_two_phase=True)),
)


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--data-seed", type=int, default=20260809)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    data = make_classifier_dataset(args.samples, seed=args.data_seed)
    split = int(0.8 * len(data))
    train_set, test_set = data[:split], data[split:]
    print(f"{len(train_set)} train / {len(test_set)} held-out samples\n")
    results = {}
    for name, flags in VARIANTS:
        cfg = TrainConfig(
            cell_size=64,
            batch_size=10,
            epochs=args.epochs,
            seed=args.seed,
            loc_dim=12,
            time_dim=8,
            ablations=flags,
        )
        t0 = time.perf_counter()
        params, curve = train(train_set, cfg)
        acc = accuracy(test_set, params, flags)
        results[name] = acc
        print(
            f"{name:16s} held-out {acc * 100:6.2f}%   "
            f"loss {curve[0]:.3f} -> {curve[-1]:.4f}   [{time.perf_counter() - t0:.0f}s]"
        )
    full = results["full"]
    print("\ndrop vs full:")
    for name, acc in results.items():
        if name != "full":
            print(f"  {name:16s} {100 * (full - acc):+.2f} points")


if __name__ == "__main__":
    main()
