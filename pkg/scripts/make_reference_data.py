"""Regenerate the committed fog reference artifacts.

Writes the golden payload sweep (data/fog_reference_sweep.csv) and a pair of
example scenario files for the CLI (data/fog_scenario_1mb.txt,
data/fog_cloud_scenario_1mb.txt). Run from the repository root after any
change to the reference pipeline parameters.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from epimob.fog import (
    DEFAULT_SWEEP_MB,
    MB_BITS,
    reference_scenarios,
    save_scenario,
    sweep_payloads,
    sweep_to_csv,
)


def main() -> None:
    data_dir = os.path.join(os.path.dirname(__file__), "..", "data")
    os.makedirs(data_dir, exist_ok=True)
    rows = sweep_payloads([mb * MB_BITS for mb in DEFAULT_SWEEP_MB])
    with open(os.path.join(data_dir, "fog_reference_sweep.csv"), "w") as fh:
        fh.write(sweep_to_csv(rows))
    fog, cloud = reference_scenarios(MB_BITS)
    with open(os.path.join(data_dir, "fog_scenario_1mb.txt"), "w") as fh:
        fh.write(save_scenario(fog))
    with open(os.path.join(data_dir, "fog_cloud_scenario_1mb.txt"), "w") as fh:
        fh.write(save_scenario(cloud))
    for row in rows:
        print(
            "payload %6.0f kbit  delay -%5.2f%%  power -%5.2f%%"
            % (row["payload_bits"] / 1000, row["delay_reduction_pct"], row["power_reduction_pct"])
        )


if __name__ == "__main__":
    main()
