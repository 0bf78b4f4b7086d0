#!/usr/bin/env python3
"""Run the synthetic quickstart experiment end to end.

Trains the detector on seeded two-cluster data, attacks it with all four
algorithms, hardens it by adversarial training, and writes the full artifact
set (report.json, table.txt, ROC CSVs, checkpoints, adversarial batches).

Usage: python scripts/run_synth_quickstart.py [output_dir]
"""

import pathlib
import sys

from ids_adv import cli

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main() -> int:
    out = sys.argv[1] if len(sys.argv) > 1 else "out_quickstart"
    rc = cli.main(
        ["run", "--config", str(ROOT / "configs" / "synth_quickstart.json"), "--output-dir", out]
    )
    if rc == 0:
        print((pathlib.Path(out) / "table.txt").read_text())
    return rc


if __name__ == "__main__":
    sys.exit(main())
