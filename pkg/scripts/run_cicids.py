#!/usr/bin/env python3
"""Run the full experiment on a CICIDS-2017 flow CSV.

Point this at one of the MachineLearningCVE day files (or any comma-separated
flow export with a text label column). Rows with null/infinite feature cells
are dropped, labels are binarized against the benign token, features are
min-max scaled on the training split, and the three-phase evaluation runs
with the default attack set.

Usage: python scripts/run_cicids.py <csv_path> [output_dir] [max_rows]
"""

import json
import pathlib
import sys
import tempfile

from ids_adv import cli


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    csv_path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else "out_cicids"
    max_rows = int(sys.argv[3]) if len(sys.argv) > 3 else None

    config = {
        "seed": 1,
        "output_dir": out,
        "data": {
            "source": "csv",
            "path": csv_path,
            "label_column": "Label",
            "benign_token": "BENIGN",
            "max_rows": max_rows,
        },
        "split": {"train_fraction": 0.6, "validation_fraction": 0.2, "test_fraction": 0.2},
        "train": {"learning_rate": 0.001, "epochs": 50, "batch_size": 256},
        "phase3_mode": "replay",
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        cfg_path = fh.name
    rc = cli.main(["run", "--config", cfg_path])
    if rc == 0:
        print((pathlib.Path(out) / "table.txt").read_text())
    return rc


if __name__ == "__main__":
    sys.exit(main())
