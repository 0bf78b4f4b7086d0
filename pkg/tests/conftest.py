import numpy as np
import pytest

from ids_adv import attacks, data, defense, mlp

# One seeded "accurate but attackable" detector shared across the suite: the
# short schedule stops before the loss saturates, which is the regime where
# gradient attacks bite (mirrors the behaviour of the real-data detector).
SYNTH_SEED = 7
SPLIT_SEED = 11
INIT_SEED = 2
TRAIN = mlp.TrainConfig(learning_rate=0.003, epochs=6, batch_size=256, seed=12)
RETRAIN = mlp.TrainConfig(learning_rate=0.003, epochs=30, batch_size=256, seed=21)

DEFAULT_ATTACKS = [
    attacks.FgsmConfig(),
    attacks.JsmaConfig(),
    attacks.PgdConfig(),
    attacks.CwConfig(),
]


def logistic_model(w, b=0.0) -> mlp.MlpModel:
    """Single-layer sigmoid model with the given weights, for closed forms."""
    w = np.asarray(w, dtype=np.float64).reshape(-1, 1)
    model = mlp.init([w.shape[0], 1], seed=0)
    model.weights[0] = w
    model.biases[0] = np.asarray([b], dtype=np.float64)
    return model


def zero_model(n_features: int, dims=(5,)) -> mlp.MlpModel:
    model = mlp.init([n_features, *dims, 1], seed=0)
    for i in range(model.n_layers):
        model.weights[i][:] = 0.0
        model.biases[i][:] = 0.0
    return model


@pytest.fixture(scope="session")
def synth_splits():
    ds = data.synth_generate(1000, 10, 4.0, seed=SYNTH_SEED)
    return data.split(ds, data.SplitSpec(0.6, 0.2, 0.2, seed=SPLIT_SEED))


@pytest.fixture(scope="session")
def trained_model(synth_splits):
    train, val, _ = synth_splits
    model, _ = mlp.train(
        mlp.init([10, 50, 30, 10, 1], seed=INIT_SEED), train, TRAIN, validation=val
    )
    return model


@pytest.fixture(scope="session")
def hardened_model(synth_splits, trained_model):
    train, val, _ = synth_splits
    return defense.adversarial_train(
        trained_model,
        train,
        DEFAULT_ATTACKS,
        defense.DefenseConfig(retrain=RETRAIN),
        validation=val,
    )


def accuracy(model, X, y) -> float:
    return float(np.mean(mlp.predict(model, X) == y))
