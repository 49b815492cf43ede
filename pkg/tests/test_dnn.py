"""Latent classifier: softmax contract, stratified folding, separable-data
training, and loss descent."""

import numpy as np
import pytest

from cavenet import dnn as D
from cavenet.rng import Rng
from cavenet.tensor import Tape, cross_entropy


def _toy_config(**overrides):
    base = dict(latent_dim=8, num_classes=3, hidden=(16, 8), dropout=0.2,
                epochs=5, batch_size=16, lr=1e-3, folds=3)
    base.update(overrides)
    return D.DnnConfig(**base)


def test_config_validation():
    with pytest.raises(D.ConfigError):
        _toy_config(dropout=1.0)
    with pytest.raises(D.ConfigError):
        _toy_config(num_classes=1)
    with pytest.raises(D.ConfigError):
        _toy_config(folds=1)


def test_zero_final_layer_gives_uniform_rows():
    cfg = _toy_config()
    model = D.DnnModel(cfg, D._init_params(cfg, Rng(1)))
    last = len(cfg.hidden)
    model.params[f"w{last}"].data[...] = 0.0
    model.params[f"b{last}"].data[...] = 0.0
    probs = model.predict_proba(Rng(2).normal((6, 8)).astype(np.float32))
    assert np.allclose(probs, 1 / 3, atol=1e-7)


def test_eval_mode_deterministic_and_rows_sum_to_one():
    cfg = _toy_config()
    model = D.DnnModel(cfg, D._init_params(cfg, Rng(3)))
    x = Rng(4).normal((10, 8)).astype(np.float32)
    p1 = model.predict_proba(x)
    p2 = model.predict_proba(x)
    assert np.array_equal(p1, p2)
    assert np.allclose(p1.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(p1 >= 0)


def test_forward_width_mismatch():
    cfg = _toy_config()
    model = D.DnnModel(cfg, D._init_params(cfg, Rng(3)))
    with pytest.raises(ValueError):
        model.forward(np.zeros((4, 9), dtype=np.float32))


def test_dropout_only_when_training():
    cfg = _toy_config(dropout=0.5)
    model = D.DnnModel(cfg, D._init_params(cfg, Rng(5)))
    x = Rng(6).normal((8, 8)).astype(np.float32)
    eval_out = model.forward(x, training=False).data
    train_out = model.forward(x, training=True, rng=Rng(7)).data
    assert not np.array_equal(eval_out, train_out)


def test_stratified_folds_proportions_and_count():
    rng = Rng(8)
    labels = np.repeat([0, 1, 2], [30, 21, 12])
    folds = D.stratified_folds(labels, 3, rng)
    assert len(folds) == 3
    assert sorted(np.concatenate(folds).tolist()) == list(range(63))
    global_share = np.bincount(labels, minlength=3) / 3
    for fold in folds:
        counts = np.bincount(labels[fold], minlength=3)
        assert np.all(np.abs(counts - global_share) <= 1.0)


def test_too_few_samples_per_class_suggests_fewer_folds():
    with pytest.raises(D.ConfigError, match="fewer folds"):
        D.stratified_folds(np.array([0, 0, 0, 1, 1]), 3, Rng(1))


def _separable_latents(n_per_class, dim, classes, seed):
    rng = Rng(seed)
    centers = rng.normal((classes, dim), 0.0, 4.0)
    X = np.concatenate([centers[c] + rng.normal((n_per_class, dim), 0.0, 0.4)
                        for c in range(classes)]).astype(np.float32)
    y = np.repeat(np.arange(classes), n_per_class)
    return X, y


def test_separable_data_trains_above_95():
    X, y = _separable_latents(40, 8, 3, seed=11)
    cfg = _toy_config(epochs=25, folds=3)
    model = D.train_dnn(cfg, X, y, seed=12)
    acc = float((model.predict_proba(X).argmax(1) == y).mean())
    assert acc > 0.95, acc
    assert len(model.fold_accuracies) == 3
    assert all(0.0 <= a <= 1.0 for a in model.fold_accuracies)


def test_loss_decreases_over_training(train_latents):
    latents, labels = train_latents
    cfg = D.DnnConfig(latent_dim=latents.shape[1], num_classes=4,
                      hidden=(64, 32), dropout=0.2, epochs=1, batch_size=32,
                      lr=1e-3, folds=5)

    def mean_loss(model):
        with Tape():
            pass
        probs = model.forward(latents, training=False)
        return cross_entropy(probs, labels).item()

    root = Rng(13)
    model = D.DnnModel(cfg, D._init_params(cfg, root.fork(0)))
    losses = [mean_loss(model)]
    from cavenet.tensor import Adam
    adam = Adam(model.parameters(), cfg.lr)
    for epoch in range(1, 6):
        erng = root.fork(epoch)
        perm = erng.permutation(len(latents))
        for i in range(0, len(latents), cfg.batch_size):
            idx = perm[i:i + cfg.batch_size]
            with Tape() as tape:
                probs = model.forward(latents[idx], training=True, rng=erng)
                loss = cross_entropy(probs, labels[idx])
            tape.backward(loss)
            adam.step()
            adam.zero_grad()
        losses.append(mean_loss(model))
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def test_predict_proba_delegates_to_eval_forward():
    cfg = _toy_config()
    model = D.DnnModel(cfg, D._init_params(cfg, Rng(14)))
    x = Rng(15).normal((5, 8)).astype(np.float32)
    assert np.array_equal(D.dnn_predict_proba(model, x),
                          model.forward(x, training=False).data.astype(np.float64))
