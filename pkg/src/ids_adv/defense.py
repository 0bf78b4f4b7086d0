"""Adversarial-training hardening and the three-phase evaluation protocol.

Phase 1 evaluates the original model on clean test data, phase 2 evaluates it
on adversarial batches generated against it, and phase 3 evaluates the
hardened model either on freshly regenerated batches (white-box reading) or
on the phase-2 batches replayed (transfer reading).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import attacks, metrics, mlp
from .attacks import AdversarialBatch, AttackConfig
from .data import Dataset
from .errors import EmptyConfigSet
from .seeding import derive_seed

PHASE3_MODES = ("regen", "replay")


@dataclass
class DefenseConfig:
    retrain: mlp.TrainConfig = field(default_factory=mlp.TrainConfig)
    mix_ratio: float | None = None  # None: one full adversarial copy per attack
    regenerate_each_epoch: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.mix_ratio is not None and self.mix_ratio <= 0:
            raise ValueError("mix_ratio must be positive")

    def to_dict(self) -> dict:
        return {
            "retrain": {
                "learning_rate": self.retrain.learning_rate,
                "epochs": self.retrain.epochs,
                "validation_split": self.retrain.validation_split,
                "batch_size": self.retrain.batch_size,
                "optimizer": self.retrain.optimizer,
                "seed": self.retrain.seed,
            },
            "mix_ratio": self.mix_ratio,
            "regenerate_each_epoch": self.regenerate_each_epoch,
            "seed": self.seed,
        }


@dataclass
class AttackPhaseResult:
    attack_config: AttackConfig
    after_attack: metrics.EvalSummary
    after_defence: metrics.EvalSummary
    attack_success_rate: float
    mean_l2: float

    def to_dict(self) -> dict:
        return {
            "attack_config": self.attack_config.to_dict(),
            "after_attack": self.after_attack.to_dict(),
            "after_defence": self.after_defence.to_dict(),
            "attack_success_rate": float(self.attack_success_rate),
            "mean_l2": float(self.mean_l2),
        }


@dataclass
class PhaseReport:
    before_attack: metrics.EvalSummary
    after_defence_clean: metrics.EvalSummary
    attacks: dict[str, AttackPhaseResult]
    phase3_mode: str
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "phase3_mode": self.phase3_mode,
            "before_attack": self.before_attack.to_dict(),
            "after_defence_clean": self.after_defence_clean.to_dict(),
            "attacks": {tag: res.to_dict() for tag, res in self.attacks.items()},
            "meta": self.meta,
        }


def attack_tags(configs: list[AttackConfig]) -> list[str]:
    """Stable per-config tags; repeated kinds get a numeric suffix."""
    tags, seen = [], {}
    for cfg in configs:
        k = seen.get(cfg.kind, 0)
        seen[cfg.kind] = k + 1
        tags.append(cfg.kind if k == 0 else f"{cfg.kind}_{k + 1}")
    return tags


def generate_adv_suite(
    model: mlp.MlpModel,
    data: Dataset,
    configs: list[AttackConfig],
    mask=None,
    threads: int | None = None,
) -> list[AdversarialBatch]:
    """One adversarial batch per config, in config order."""
    if not configs:
        raise EmptyConfigSet("no attack configs given")
    return [
        attacks.run_attack(model, data.X, data.y, cfg, mask=mask, threads=threads)
        for cfg in configs
    ]


def build_augmented(
    clean: Dataset,
    batches: list[AdversarialBatch],
    mix_ratio: float | None = None,
    seed: int = 0,
) -> Dataset:
    """Stack clean rows with adversarial rows labeled by their original class.

    With mix_ratio None every batch contributes all its rows (adversarial-to-
    clean ratio = number of attacks). Otherwise round(mix_ratio * n / k) rows
    are drawn per batch by a seeded shuffle, cycling if more are requested
    than exist.
    """
    if not batches:
        raise EmptyConfigSet("no adversarial batches to mix in")
    n = clean.n
    parts_x, parts_y = [clean.X], [clean.y]
    if mix_ratio is None:
        for b in batches:
            parts_x.append(b.x_adv)
            parts_y.append(clean.y)
    else:
        quota = int(round(mix_ratio * n / len(batches)))
        rng = np.random.default_rng(seed)
        for b in batches:
            order = rng.permutation(n)
            take = np.resize(order, quota)  # cycles when quota > n
            parts_x.append(b.x_adv[take])
            parts_y.append(clean.y[take])
    return Dataset(
        X=np.vstack(parts_x),
        y=np.concatenate(parts_y),
        feature_names=list(clean.feature_names),
        scaler=clean.scaler,
    )


def adversarial_train(
    model: mlp.MlpModel,
    train_data: Dataset,
    configs: list[AttackConfig],
    defense: DefenseConfig,
    mask=None,
    threads: int | None = None,
    validation: Dataset | None = None,
) -> mlp.MlpModel:
    """Harden the model by retraining on clean plus adversarial samples.

    Adversarial examples are generated from train_data against the model with
    every config, keep their original true labels, and are mixed with the
    clean rows. The input model is never mutated; retraining warm-starts from
    a copy of it. With regenerate_each_epoch the batches are rebuilt against
    the evolving model before every epoch.
    """
    if not configs:
        raise EmptyConfigSet("no attack configs given")
    if not defense.regenerate_each_epoch:
        batches = generate_adv_suite(model, train_data, configs, mask=mask, threads=threads)
        augmented = build_augmented(
            train_data, batches, defense.mix_ratio, seed=derive_seed(defense.seed, "mix")
        )
        hardened, _ = mlp.train(model, augmented, defense.retrain, validation=validation)
        return hardened

    hardened = model.copy()
    for epoch in range(defense.retrain.epochs):
        batches = generate_adv_suite(hardened, train_data, configs, mask=mask, threads=threads)
        augmented = build_augmented(
            train_data,
            batches,
            defense.mix_ratio,
            seed=derive_seed(defense.seed, f"mix.{epoch}"),
        )
        one_epoch = replace(
            defense.retrain, epochs=1, seed=derive_seed(defense.retrain.seed, f"epoch.{epoch}")
        )
        hardened, _ = mlp.train(hardened, augmented, one_epoch, validation=validation)
    return hardened


def _summary(model: mlp.MlpModel, X, y, average: str) -> metrics.EvalSummary:
    return metrics.evaluate_scores(y, mlp.forward(model, X), average=average)


def evaluate_phases(
    original: mlp.MlpModel,
    hardened: mlp.MlpModel,
    test: Dataset,
    configs: list[AttackConfig],
    phase2_batches: list[AdversarialBatch] | None = None,
    phase3_batches: list[AdversarialBatch] | None = None,
    phase3_mode: str = "regen",
    mask=None,
    threads: int | None = None,
    average: str = "weighted",
    meta: dict | None = None,
) -> PhaseReport:
    """Three-phase evaluation over every attack config.

    Phase 2 batches may be passed in (for replaying previously exported
    batches); otherwise they are generated here against the original model.
    Pre-built phase-3 batches likewise take precedence over the mode's own
    generation, which lets callers apply sample restrictions uniformly.
    """
    if not configs:
        raise EmptyConfigSet("no attack configs given")
    if phase3_mode not in PHASE3_MODES:
        raise ValueError(f"phase3_mode must be one of {PHASE3_MODES}, got {phase3_mode!r}")
    if phase2_batches is None:
        phase2_batches = generate_adv_suite(original, test, configs, mask=mask, threads=threads)
    if len(phase2_batches) != len(configs):
        raise ValueError("one phase-2 batch per attack config is required")
    if phase3_batches is not None and len(phase3_batches) != len(configs):
        raise ValueError("one phase-3 batch per attack config is required")

    before = _summary(original, test.X, test.y, average)
    after_clean = _summary(hardened, test.X, test.y, average)
    results: dict[str, AttackPhaseResult] = {}
    for i, (tag, cfg, batch) in enumerate(zip(attack_tags(configs), configs, phase2_batches)):
        after_attack = _summary(original, batch.x_adv, test.y, average)
        if phase3_batches is not None:
            phase3_batch = phase3_batches[i]
        elif phase3_mode == "regen":
            phase3_batch = attacks.run_attack(
                hardened, test.X, test.y, cfg, mask=mask, threads=threads
            )
        else:
            phase3_batch = batch
        after_defence = _summary(hardened, phase3_batch.x_adv, test.y, average)
        results[tag] = AttackPhaseResult(
            attack_config=cfg,
            after_attack=after_attack,
            after_defence=after_defence,
            attack_success_rate=float(np.mean(batch.success)),
            mean_l2=float(np.mean(batch.l2)),
        )
    return PhaseReport(
        before_attack=before,
        after_defence_clean=after_clean,
        attacks=results,
        phase3_mode=phase3_mode,
        meta=meta or {},
    )
