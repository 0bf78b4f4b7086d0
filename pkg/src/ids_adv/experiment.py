"""End-to-end experiment orchestration: ingest, train, attack, defend,
evaluate, report.

Each stage consumes the previous stage's on-disk artifacts and emits its own,
so long experiments are resumable and running the stages separately is
byte-identical to the one-shot ``run``. Every random choice is seeded from
the single experiment seed via ``seeding.derive_seed``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import artifacts, attacks, data, defense, mlp
from .errors import InvalidConfig, InvalidReport
from .seeding import derive_seed

DEFAULT_LAYER_DIMS = [50, 30, 10, 1]  # hidden widths + output; input prepended at runtime


@dataclass
class DataConfig:
    source: str = "synth"  # "synth" or "csv"
    # csv source
    path: str | None = None
    label_column: str = "Label"
    benign_token: str = "BENIGN"
    max_rows: int | None = None
    # synth source
    n_per_class: int = 1000
    n_features: int = 10
    separation: float = 4.0

    def __post_init__(self):
        if self.source not in ("synth", "csv"):
            raise InvalidConfig(f"data.source must be 'synth' or 'csv', got {self.source!r}")
        if self.source == "csv" and not self.path:
            raise InvalidConfig("data.path is required for a csv source")
        if self.max_rows is not None and self.max_rows < 1:
            raise InvalidConfig("data.max_rows must be positive")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "path": self.path,
            "label_column": self.label_column,
            "benign_token": self.benign_token,
            "max_rows": self.max_rows,
            "n_per_class": self.n_per_class,
            "n_features": self.n_features,
            "separation": self.separation,
        }


@dataclass
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "out"
    data: DataConfig = field(default_factory=DataConfig)
    split: data.SplitSpec = field(default_factory=lambda: data.SplitSpec(0.6, 0.2, 0.2))
    train: mlp.TrainConfig = field(default_factory=mlp.TrainConfig)
    attacks: list[attacks.AttackConfig] = field(default_factory=list)
    defense: defense.DefenseConfig = field(default_factory=defense.DefenseConfig)
    immutable_features: list[str] = field(default_factory=list)
    malicious_only: bool = False
    phase3_mode: str = "regen"
    threads: int | None = None
    average: str = "weighted"

    def __post_init__(self):
        if not self.attacks:
            self.attacks = [
                attacks.FgsmConfig(),
                attacks.JsmaConfig(),
                attacks.PgdConfig(),
                attacks.CwConfig(),
            ]
        if self.phase3_mode not in defense.PHASE3_MODES:
            raise InvalidConfig(f"phase3_mode must be one of {defense.PHASE3_MODES}")
        if self.average not in ("weighted", "macro", "binary"):
            raise InvalidConfig("average must be weighted, macro or binary")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "data": self.data.to_dict(),
            "split": {
                "train_fraction": self.split.train_fraction,
                "validation_fraction": self.split.validation_fraction,
                "test_fraction": self.split.test_fraction,
                "seed": self.split.seed,
            },
            "train": {
                "learning_rate": self.train.learning_rate,
                "epochs": self.train.epochs,
                "validation_split": self.train.validation_split,
                "batch_size": self.train.batch_size,
                "optimizer": self.train.optimizer,
                "seed": self.train.seed,
            },
            "attacks": [a.to_dict() for a in self.attacks],
            "defense": self.defense.to_dict(),
            "immutable_features": list(self.immutable_features),
            "malicious_only": self.malicious_only,
            "phase3_mode": self.phase3_mode,
            "threads": self.threads,
            "average": self.average,
        }


def _train_config_from_dict(d: dict, seed: int, label: str) -> mlp.TrainConfig:
    d = dict(d or {})
    d.setdefault("seed", derive_seed(seed, label))
    try:
        return mlp.TrainConfig(**d)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad train config: {exc}") from exc


def config_from_dict(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated ExperimentConfig from a plain dict plus overrides.

    Overrides (command-line flags) win over file values. Unspecified component
    seeds are derived from the experiment seed so one integer reproduces the
    whole run.
    """
    raw = dict(raw or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    seed = int(raw.get("seed", 0))

    try:
        data_cfg = DataConfig(**raw.get("data", {}))
    except TypeError as exc:
        raise InvalidConfig(f"bad data config: {exc}") from exc

    split_raw = dict(raw.get("split", {}))
    split_raw.setdefault("train_fraction", 0.6)
    split_raw.setdefault("validation_fraction", 0.2)
    split_raw.setdefault("test_fraction", 0.2)
    split_raw.setdefault("seed", derive_seed(seed, "split"))
    try:
        split_cfg = data.SplitSpec(**split_raw)
    except TypeError as exc:
        raise InvalidConfig(f"bad split config: {exc}") from exc

    train_cfg = _train_config_from_dict(raw.get("train"), seed, "train")

    attack_list = []
    wanted = raw.get("attack_filter")
    for i, entry in enumerate(raw.get("attacks", [])):
        try:
            cfg = attacks.attack_config_from_dict(entry)
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad attack config {entry!r}: {exc}") from exc
        if isinstance(cfg, attacks.PgdConfig) and "seed" not in entry:
            cfg = replace(cfg, seed=derive_seed(seed, f"attack.pgd.{i}"))
        attack_list.append(cfg)
    if not attack_list:
        attack_list = [
            attacks.FgsmConfig(),
            attacks.JsmaConfig(),
            attacks.PgdConfig(seed=derive_seed(seed, "attack.pgd.2")),
            attacks.CwConfig(),
        ]
    if wanted is not None:
        wanted = [w.strip() for w in wanted.split(",") if w.strip()]
        unknown = set(wanted) - {a.kind for a in attack_list}
        if unknown:
            raise InvalidConfig(f"unknown attacks requested: {sorted(unknown)}")
        attack_list = [a for a in attack_list if a.kind in wanted]

    defense_raw = dict(raw.get("defense", {}))
    retrain_raw = defense_raw.pop("retrain", None)
    if retrain_raw is None:
        retrain = replace(train_cfg, seed=derive_seed(seed, "defense.retrain"))
    else:
        retrain = _train_config_from_dict(retrain_raw, seed, "defense.retrain")
    defense_raw.setdefault("seed", derive_seed(seed, "defense"))
    try:
        defense_cfg = defense.DefenseConfig(retrain=retrain, **defense_raw)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad defense config: {exc}") from exc

    try:
        return ExperimentConfig(
            seed=seed,
            output_dir=raw.get("output_dir", "out"),
            data=data_cfg,
            split=split_cfg,
            train=train_cfg,
            attacks=attack_list,
            defense=defense_cfg,
            immutable_features=list(raw.get("immutable_features", [])),
            malicious_only=bool(raw.get("malicious_only", False)),
            phase3_mode=raw.get("phase3_mode", "regen"),
            threads=raw.get("threads"),
            average=raw.get("average", "weighted"),
        )
    except TypeError as exc:
        raise InvalidConfig(f"bad experiment config: {exc}") from exc


# ---------------------------------------------------------------------------
# stages


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(cfg: ExperimentConfig) -> dict:
    return {"seed": cfg.seed, "config": cfg.to_dict()}


def _threads(cfg: ExperimentConfig) -> int:
    return cfg.threads if cfg.threads else (os.cpu_count() or 1)


def _feature_mask(cfg: ExperimentConfig, feature_names: list[str]):
    if not cfg.immutable_features:
        return None
    unknown = set(cfg.immutable_features) - set(feature_names)
    if unknown:
        raise InvalidConfig(f"immutable features not in data: {sorted(unknown)}")
    mask = np.array([name not in cfg.immutable_features for name in feature_names])
    return mask


def stage_ingest(cfg: ExperimentConfig) -> None:
    """Load or generate the dataset, scale it, and write the three splits."""
    out = _outdir(cfg)
    if cfg.data.source == "synth":
        ds = data.synth_generate(
            cfg.data.n_per_class,
            cfg.data.n_features,
            cfg.data.separation,
            seed=derive_seed(cfg.seed, "data.synth"),
        )
    else:
        table = data.load_csv(cfg.data.path, cfg.data.label_column)
        table = data.clean(table)
        ds = data.build_dataset(table, cfg.data.benign_token)
        if cfg.data.max_rows is not None and ds.n > cfg.data.max_rows:
            rng = np.random.default_rng(derive_seed(cfg.seed, "data.subset"))
            keep = np.sort(rng.permutation(ds.n)[: cfg.data.max_rows])
            ds = data.Dataset(ds.X[keep], ds.y[keep], ds.feature_names, None)
    train_ds, val_ds, test_ds = data.split(ds, cfg.split)
    if cfg.data.source == "csv":
        # fit scaling on the training split only; transform the others with it
        x_tr, scaler = data.scale_minmax(train_ds.X)
        train_ds = data.Dataset(x_tr, train_ds.y, train_ds.feature_names, scaler)
        x_val, _ = data.scale_minmax(val_ds.X, scaler)
        val_ds = data.Dataset(x_val, val_ds.y, val_ds.feature_names, scaler)
        x_te, _ = data.scale_minmax(test_ds.X, scaler)
        test_ds = data.Dataset(x_te, test_ds.y, test_ds.feature_names, scaler)
    meta = _meta(cfg)
    artifacts.save_dataset(out / "data_train.bin", train_ds, meta)
    artifacts.save_dataset(out / "data_validation.bin", val_ds, meta)
    artifacts.save_dataset(out / "data_test.bin", test_ds, meta)


def stage_train(cfg: ExperimentConfig) -> None:
    """Train the detector on the train split and checkpoint it."""
    out = _outdir(cfg)
    train_ds = artifacts.load_dataset(artifacts.require(out / "data_train.bin"))
    val_ds = artifacts.load_dataset(artifacts.require(out / "data_validation.bin"))
    dims = [train_ds.n_features] + DEFAULT_LAYER_DIMS
    model = mlp.init(dims, seed=derive_seed(cfg.seed, "init"))
    trained, history = mlp.train(model, train_ds, cfg.train, validation=val_ds)
    mlp.save_model(trained, out / "model_original.ckpt")
    artifacts.write_json(
        out / "model_original.json", {**_meta(cfg), "history": history.to_dict()}
    )


def _attack_batches(cfg, model, test_ds, mask):
    """Attack the test split; optionally leave benign rows untouched."""
    batches = []
    for acfg in cfg.attacks:
        if cfg.malicious_only:
            rows = np.flatnonzero(test_ds.y == 1)
            sub = attacks.run_attack(
                model, test_ds.X[rows], test_ds.y[rows], acfg, mask=mask, threads=_threads(cfg)
            )
            x_adv = test_ds.X.copy()
            x_adv[rows] = sub.x_adv
            success = mlp.predict(model, x_adv) != test_ds.y
            if acfg.kind == "cw":
                success = np.zeros(test_ds.n, dtype=bool)
                success[rows] = sub.success
            l0, l2, linf = attacks.perturbation_stats(test_ds.X, x_adv)
            batches.append(
                attacks.AdversarialBatch(
                    x_adv=x_adv, success=success, l0=l0, l2=l2, linf=linf,
                    attack_tag=sub.attack_tag, config=acfg,
                )
            )
        else:
            batches.append(
                attacks.run_attack(
                    model, test_ds.X, test_ds.y, acfg, mask=mask, threads=_threads(cfg)
                )
            )
    return batches


def stage_attack(cfg: ExperimentConfig) -> None:
    """Generate adversarial batches against the trained model and export them."""
    out = _outdir(cfg)
    model = mlp.load_model(artifacts.require(out / "model_original.ckpt"))
    test_ds = artifacts.load_dataset(artifacts.require(out / "data_test.bin"))
    mask = _feature_mask(cfg, test_ds.feature_names)
    batches = _attack_batches(cfg, model, test_ds, mask)
    for tag, batch in zip(defense.attack_tags(cfg.attacks), batches):
        artifacts.save_adv_batch(out / f"adv_{tag}.bin", batch, _meta(cfg))


def stage_defend(cfg: ExperimentConfig) -> None:
    """Adversarially retrain on the train split and checkpoint the hardened model."""
    out = _outdir(cfg)
    model = mlp.load_model(artifacts.require(out / "model_original.ckpt"))
    train_ds = artifacts.load_dataset(artifacts.require(out / "data_train.bin"))
    val_ds = artifacts.load_dataset(artifacts.require(out / "data_validation.bin"))
    mask = _feature_mask(cfg, train_ds.feature_names)
    hardened = defense.adversarial_train(
        model,
        train_ds,
        cfg.attacks,
        cfg.defense,
        mask=mask,
        threads=_threads(cfg),
        validation=val_ds,
    )
    mlp.save_model(hardened, out / "model_hardened.ckpt")
    artifacts.write_json(out / "model_hardened.json", _meta(cfg))


def stage_evaluate(cfg: ExperimentConfig) -> defense.PhaseReport:
    """Replay the exported phase-2 batches, run phase 3, and write report.json."""
    out = _outdir(cfg)
    original = mlp.load_model(artifacts.require(out / "model_original.ckpt"))
    hardened = mlp.load_model(artifacts.require(out / "model_hardened.ckpt"))
    test_ds = artifacts.load_dataset(artifacts.require(out / "data_test.bin"))
    mask = _feature_mask(cfg, test_ds.feature_names)
    batches = [
        artifacts.load_adv_batch(artifacts.require(out / f"adv_{tag}.bin"))
        for tag in defense.attack_tags(cfg.attacks)
    ]
    phase3_batches = None
    if cfg.phase3_mode == "regen" and cfg.malicious_only:
        # keep the benign-rows-untouched restriction when regenerating
        phase3_batches = _attack_batches(cfg, hardened, test_ds, mask)
    report = defense.evaluate_phases(
        original,
        hardened,
        test_ds,
        cfg.attacks,
        phase2_batches=batches,
        phase3_batches=phase3_batches,
        phase3_mode=cfg.phase3_mode,
        mask=mask,
        threads=_threads(cfg),
        average=cfg.average,
        meta=_meta(cfg),
    )
    artifacts.write_json(out / "report.json", report.to_dict())
    return report


def validate_report_dict(doc: dict) -> None:
    """Schema check used before rendering tables from a report document."""
    if not isinstance(doc, dict) or doc.get("schema_version") != 1:
        raise InvalidReport("report.json: missing or unsupported schema_version")
    for key in ("before_attack", "after_defence_clean", "attacks"):
        if key not in doc:
            raise InvalidReport(f"report.json: missing {key!r}")
    for phase_key in ("before_attack", "after_defence_clean"):
        for metric in ("accuracy", "precision", "recall", "f1", "auc", "roc"):
            if metric not in doc[phase_key]:
                raise InvalidReport(f"report.json: {phase_key} is missing {metric!r}")
    if not doc["attacks"]:
        raise InvalidReport("report.json: no attacks recorded")
    for tag, entry in doc["attacks"].items():
        for phase in ("after_attack", "after_defence"):
            if phase not in entry:
                raise InvalidReport(f"report.json: attack {tag!r} is missing {phase!r}")
            for metric in ("accuracy", "precision", "recall", "f1", "roc"):
                if metric not in entry[phase]:
                    raise InvalidReport(
                        f"report.json: attack {tag!r} {phase} is missing {metric!r}"
                    )


def render_table(doc: dict) -> str:
    """Aligned text table of ACC/P/R/F percentages per attack and phase."""
    rows = []
    seed = doc.get("meta", {}).get("seed")
    rows.append(f"# three-phase evaluation (percentages, seed={seed})")
    header = f"{'':14s} {'Before Attack':>14s} {'After Attack':>14s} {'After Defence':>14s}"
    before = doc["before_attack"]
    for tag, entry in doc["attacks"].items():
        rows.append("")
        rows.append(f"[{tag}]")
        rows.append(header)
        for label, key in (("ACC", "accuracy"), ("P", "precision"), ("R", "recall"), ("F", "f1")):
            rows.append(
                f"{label:14s} {100 * before[key]:>14.2f} "
                f"{100 * entry['after_attack'][key]:>14.2f} "
                f"{100 * entry['after_defence'][key]:>14.2f}"
            )
    rows.append("")
    return "\n".join(rows)


def stage_report(cfg: ExperimentConfig) -> None:
    """Render table.txt and per-phase ROC CSVs from an existing report.json."""
    out = _outdir(cfg)
    doc = artifacts.read_json(artifacts.require(out / "report.json"))
    validate_report_dict(doc)
    (out / "table.txt").write_text(render_table(doc), encoding="utf-8")

    def _write_roc(name: str, summary: dict) -> None:
        lines = ["fpr,tpr"]
        lines += [f"{pt[0]!r},{pt[1]!r}" for pt in summary["roc"]]
        (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")

    _write_roc("roc_before_attack_clean.csv", doc["before_attack"])
    for tag, entry in doc["attacks"].items():
        _write_roc(f"roc_after_attack_{tag}.csv", entry["after_attack"])
        _write_roc(f"roc_after_defence_{tag}.csv", entry["after_defence"])


STAGES = {
    "ingest": stage_ingest,
    "train": stage_train,
    "attack": stage_attack,
    "defend": stage_defend,
    "evaluate": stage_evaluate,
    "report": stage_report,
}

STAGE_ORDER = ["ingest", "train", "attack", "defend", "evaluate", "report"]


def run(cfg: ExperimentConfig) -> defense.PhaseReport:
    """Execute the whole pipeline; identical, stage for stage, to running
    the subcommands in order."""
    report = None
    for name in STAGE_ORDER:
        result = STAGES[name](cfg)
        if name == "evaluate":
            report = result
    return report
