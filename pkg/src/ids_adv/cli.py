"""Command-line front end.

    ids-adv run|ingest|train|attack|defend|evaluate|report --config <file>
            [--seed N] [--threads N] [--attacks fgsm,jsma,pgd,cw]
            [--malicious-only] [--phase3-mode regen|replay] [--output-dir DIR]

Flags win over config-file values. Exit code is 0 on success and 1 on the
first fatal error, which is reported with its stage and error type.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiment
from .errors import IdsAdvError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ids-adv",
        description="Train, attack, defend and evaluate a binary intrusion detector.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ["run", *experiment.STAGE_ORDER]:
        p = sub.add_parser(name, help=f"{name} stage" if name != "run" else "full pipeline")
        p.add_argument("--config", required=True, help="JSON experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override the experiment seed")
        p.add_argument("--threads", type=int, default=None, help="attack worker threads")
        p.add_argument("--attacks", default=None, help="comma-separated attack subset")
        p.add_argument(
            "--malicious-only",
            action="store_true",
            default=None,
            help="perturb only attack-class test rows",
        )
        p.add_argument(
            "--phase3-mode",
            choices=["regen", "replay"],
            default=None,
            help="regenerate attacks against the hardened model or replay phase-2 batches",
        )
        p.add_argument("--output-dir", default=None, help="override the artifact directory")
    return parser


def _load_config(args) -> experiment.ExperimentConfig:
    path = Path(args.config)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IdsAdvError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IdsAdvError(f"config {path} is not valid JSON: {exc}") from exc
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "attack_filter": args.attacks,
        "malicious_only": args.malicious_only,
        "phase3_mode": args.phase3_mode,
        "output_dir": args.output_dir,
    }
    return experiment.config_from_dict(raw, overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    stage = args.command
    try:
        cfg = _load_config(args)
        if stage == "run":
            experiment.run(cfg)
        else:
            experiment.STAGES[stage](cfg)
    except IdsAdvError as exc:
        print(f"ids-adv: {stage}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
