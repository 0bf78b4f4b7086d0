"""White-box evasion attacks against the trained detector.

All four attacks operate on min-max-scaled features, honor the [0, 1] box,
and respect an optional per-feature immutability mask. Perturbed batches
carry per-sample success flags and L0/L2/Linf perturbation norms.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import mlp
from .errors import ShapeMismatch

L0_TOLERANCE = 1e-12
_TANH_CLIP = 1.0 - 1e-7
_CW_UPPER_INIT = 1e10


@dataclass(frozen=True)
class FgsmConfig:
    epsilon: float = 0.1

    kind = "fgsm"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "epsilon": self.epsilon}


@dataclass(frozen=True)
class JsmaConfig:
    theta: float = 0.2
    gamma: float = 0.1
    max_iters: int = 100

    kind = "jsma"

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "theta": self.theta,
            "gamma": self.gamma,
            "max_iters": self.max_iters,
        }


@dataclass(frozen=True)
class PgdConfig:
    epsilon: float = 0.1
    alpha: float | None = None  # defaults to epsilon / 4
    iters: int = 10
    random_start: bool = False
    seed: int = 0

    kind = "pgd"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.iters < 1:
            raise ValueError("iters must be at least 1")

    @property
    def step_size(self) -> float:
        return self.alpha if self.alpha is not None else self.epsilon / 4.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "iters": self.iters,
            "random_start": self.random_start,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CwConfig:
    kappa: float = 0.0
    c_init: float = 0.01
    binary_search_steps: int = 9
    max_iters: int = 100
    step_size: float = 0.05

    kind = "cw"

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.c_init <= 0:
            raise ValueError("c_init must be positive")
        if self.binary_search_steps < 1:
            raise ValueError("binary_search_steps must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "kappa": self.kappa,
            "c_init": self.c_init,
            "binary_search_steps": self.binary_search_steps,
            "max_iters": self.max_iters,
            "step_size": self.step_size,
        }


AttackConfig = FgsmConfig | JsmaConfig | PgdConfig | CwConfig

_CONFIG_TYPES = {"fgsm": FgsmConfig, "jsma": JsmaConfig, "pgd": PgdConfig, "cw": CwConfig}


def attack_config_from_dict(d: dict) -> AttackConfig:
    """Build an attack config from a plain dict with a "kind" tag."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _CONFIG_TYPES:
        raise ValueError(f"unknown attack kind {kind!r}")
    return _CONFIG_TYPES[kind](**d)


@dataclass
class AdversarialBatch:
    x_adv: np.ndarray
    success: np.ndarray  # attack succeeded per sample
    l0: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    attack_tag: str
    config: AttackConfig


def perturbation_stats(X, X_adv) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sample L0, L2 and Linf norms of X_adv - X."""
    X = np.asarray(X, dtype=np.float64)
    X_adv = np.asarray(X_adv, dtype=np.float64)
    if X.shape != X_adv.shape:
        raise ShapeMismatch(f"shapes differ: {X.shape} vs {X_adv.shape}")
    delta = X_adv - X
    l0 = np.sum(np.abs(delta) > L0_TOLERANCE, axis=1).astype(np.int64)
    l2 = np.sqrt(np.sum(delta * delta, axis=1))
    linf = np.max(np.abs(delta), axis=1) if X.shape[1] else np.zeros(X.shape[0])
    return l0, l2, linf


def _check_attack_inputs(model, X, y, mask):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeMismatch(f"expected input of shape (n, {model.n_features}), got {X.shape}")
    y = np.asarray(y).ravel().astype(np.int64)
    if y.shape[0] != X.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows, y has {y.shape[0]}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.shape[0] != X.shape[1]:
            raise ShapeMismatch(f"mask has {mask.shape[0]} entries, X has {X.shape[1]} features")
        if not mask.any():
            raise ValueError("feature mask leaves no mutable features")
    return X, y, mask


def _finish(model, X, x_adv, y, tag, config, success=None) -> AdversarialBatch:
    if success is None:
        success = mlp.predict(model, x_adv) != y
    l0, l2, linf = perturbation_stats(X, x_adv)
    return AdversarialBatch(
        x_adv=x_adv, success=success, l0=l0, l2=l2, linf=linf, attack_tag=tag, config=config
    )


def fgsm(model, X, y, config: FgsmConfig, mask=None) -> AdversarialBatch:
    """One signed-gradient step of size epsilon, clipped into the box."""
    X, y, mask = _check_attack_inputs(model, X, y, mask)
    step = np.sign(mlp.grad_input(model, X, y)) * config.epsilon
    if mask is not None:
        step[:, ~mask] = 0.0
    x_adv = np.clip(X + step, 0.0, 1.0)
    if mask is not None:
        x_adv[:, ~mask] = X[:, ~mask]
    return _finish(model, X, x_adv, y, "fgsm", config)


def pgd(model, X, y, config: PgdConfig, mask=None) -> AdversarialBatch:
    """Iterated signed-gradient ascent projected onto the epsilon ball and box.

    With iters=1, alpha=epsilon and no random start this reduces exactly to
    fgsm(), bit for bit.
    """
    X, y, mask = _check_attack_inputs(model, X, y, mask)
    eps, alpha = config.epsilon, config.step_size
    lo, hi = X - eps, X + eps
    x = X.copy()
    if config.random_start:
        noise = np.random.default_rng(config.seed).uniform(-eps, eps, size=X.shape)
        if mask is not None:
            noise[:, ~mask] = 0.0
        x = np.clip(np.clip(X + noise, lo, hi), 0.0, 1.0)
        if mask is not None:
            x[:, ~mask] = X[:, ~mask]
    for _ in range(config.iters):
        step = np.sign(mlp.grad_input(model, x, y)) * alpha
        if mask is not None:
            step[:, ~mask] = 0.0
        x = np.clip(np.clip(x + step, lo, hi), 0.0, 1.0)
        if mask is not None:
            x[:, ~mask] = X[:, ~mask]
    return _finish(model, X, x, y, "pgd", config)


def jsma(model, X, y, config: JsmaConfig, mask=None) -> AdversarialBatch:
    """Saliency-guided single-feature steps toward the opposite class.

    Each iteration perturbs, per still-unflipped sample, the mutable
    unsaturated feature with the largest forward derivative toward the target
    class by theta in the direction of that derivative. At most
    floor(gamma * n_features) distinct features may be touched per sample.
    """
    X, y, mask = _check_attack_inputs(model, X, y, mask)
    n, d = X.shape
    budget = int(np.floor(config.gamma * d))
    mutable = np.ones(d, dtype=bool) if mask is None else mask

    x = X.copy()
    modified = np.zeros((n, d), dtype=bool)
    active = mlp.predict(model, x) == y  # already-misclassified rows need no work
    for _ in range(config.max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        jac = mlp.jacobian(model, x[idx])
        targets = 1 - y[idx]
        sal = jac[np.arange(idx.size), targets, :]
        direction = np.sign(sal)
        xa = x[idx]
        blocked = (
            ((xa >= 1.0) & (direction > 0))
            | ((xa <= 0.0) & (direction < 0))
            | (direction == 0)
        )
        count = modified[idx].sum(axis=1)
        eligible = ~blocked & mutable[None, :] & (modified[idx] | (count < budget)[:, None])
        score = np.abs(sal)
        score[~eligible] = -1.0
        best = np.argmax(score, axis=1)
        movable = score[np.arange(idx.size), best] > 0
        # rows with no usable feature are done, unsuccessfully
        active[idx[~movable]] = False
        rows, cols = idx[movable], best[movable]
        if rows.size == 0:
            break
        x[rows, cols] = np.clip(
            x[rows, cols] + config.theta * direction[movable, cols], 0.0, 1.0
        )
        modified[rows, cols] = True
        active[rows] = mlp.predict(model, x[rows]) == y[rows]
    return _finish(model, X, x, y, "jsma", config)


def cw_l2(model, X, y, config: CwConfig, mask=None) -> AdversarialBatch:
    """L2-minimal misclassification via tanh-space descent and c binary search.

    Per sample with target t = 1 - y, minimizes ||x' - x||^2 + c * f(x') with
    f(x') = max(Z_other(x') - Z_t(x'), -kappa) over x' parameterized as
    (tanh(w) + 1) / 2, which keeps x' inside the box. The trade-off constant
    c starts at c_init, grows tenfold until the attack first succeeds, then
    binary-searches toward the smallest successful value. The returned row is
    the successful x' of smallest L2 across all rounds; rows that never
    succeed come back unperturbed with success False.
    """
    X, y, mask = _check_attack_inputs(model, X, y, mask)
    n, d = X.shape
    target_sign = (1.0 - 2.0 * (1 - y)).astype(np.float64)  # margin = sign * z
    mutable = np.ones(d, dtype=bool) if mask is None else mask

    w0 = np.arctanh(np.clip(2.0 * X - 1.0, -_TANH_CLIP, _TANH_CLIP))
    lower = np.zeros(n)
    upper = np.full(n, _CW_UPPER_INIT)
    c = np.full(n, config.c_init)
    best_l2 = np.full(n, np.inf)
    best_adv = X.copy()
    ever_success = np.zeros(n, dtype=bool)

    for _ in range(config.binary_search_steps):
        w = w0.copy()
        m_state = np.zeros_like(w)
        v_state = np.zeros_like(w)
        round_success = np.zeros(n, dtype=bool)
        for it in range(config.max_iters):
            th = np.tanh(w)
            x_prime = np.where(mutable[None, :], (th + 1.0) / 2.0, X)
            z = mlp.logits(model, x_prime)
            margin = target_sign * z
            delta = x_prime - X
            l2sq = np.sum(delta * delta, axis=1)

            succ = margin < -config.kappa
            improved = succ & (l2sq < best_l2)
            best_l2[improved] = l2sq[improved]
            best_adv[improved] = x_prime[improved]
            round_success |= succ
            ever_success |= succ

            dz = mlp.logit_input_grad(model, x_prime)
            df = np.where((margin > -config.kappa)[:, None], target_sign[:, None] * dz, 0.0)
            dx = 2.0 * delta + c[:, None] * df
            dw = np.where(mutable[None, :], dx * (1.0 - th * th) / 2.0, 0.0)
            # Adam keeps the step scale meaningful across many orders of c
            t = it + 1
            m_state = 0.9 * m_state + 0.1 * dw
            v_state = 0.999 * v_state + 0.001 * dw * dw
            m_hat = m_state / (1.0 - 0.9**t)
            v_hat = v_state / (1.0 - 0.999**t)
            w = w - config.step_size * m_hat / (np.sqrt(v_hat) + 1e-8)

        upper = np.where(round_success, np.minimum(upper, c), upper)
        lower = np.where(round_success, lower, np.maximum(lower, c))
        bracketed = upper < _CW_UPPER_INIT * 0.1
        c = np.where(bracketed, (lower + upper) / 2.0, np.where(round_success, c, c * 10.0))

    return _finish(model, X, best_adv, y, "cw", config, success=ever_success)


_ATTACK_FNS = {"fgsm": fgsm, "jsma": jsma, "pgd": pgd, "cw": cw_l2}
_CHUNKABLE = ("jsma", "cw")


def _merge_batches(parts: list[AdversarialBatch]) -> AdversarialBatch:
    return AdversarialBatch(
        x_adv=np.vstack([p.x_adv for p in parts]),
        success=np.concatenate([p.success for p in parts]),
        l0=np.concatenate([p.l0 for p in parts]),
        l2=np.concatenate([p.l2 for p in parts]),
        linf=np.concatenate([p.linf for p in parts]),
        attack_tag=parts[0].attack_tag,
        config=parts[0].config,
    )


def run_attack(model, X, y, config: AttackConfig, mask=None, threads: int | None = None) -> AdversarialBatch:
    """Dispatch to the configured attack, optionally chunking rows over threads.

    Per-sample work is independent, so chunks are reassembled in input order
    and results are deterministic for a fixed thread count.
    """
    fn = _ATTACK_FNS[config.kind]
    n = np.asarray(X).shape[0]
    if threads and threads > 1 and config.kind in _CHUNKABLE and n >= 2 * threads:
        bounds = np.linspace(0, n, threads + 1, dtype=int)
        slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y).ravel()
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: fn(model, X[s], y[s], config, mask), slices))
        return _merge_batches(parts)
    return fn(model, X, y, config, mask)
