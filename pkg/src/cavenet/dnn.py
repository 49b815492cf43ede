"""Fully connected classifier over latent vectors.

ReLU hidden layers with inverted dropout after the first two, a softmax
output head, cross-entropy training with Adam, and stratified k-fold
cross-validation.  The deliverable model is retrained on all data after the
folds are scored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng
from .tensor import (Adam, Tape, Tensor, add, cross_entropy, dropout,
                     he_normal, matmul, relu, softmax, zeros)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DnnConfig:
    latent_dim: int
    num_classes: int
    hidden: tuple = (512, 256, 128)
    dropout: float = 0.3
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    folds: int = 5

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0,1), got {self.dropout}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")

    @property
    def widths(self) -> tuple:
        return (self.latent_dim,) + tuple(self.hidden) + (self.num_classes,)


class DnnModel:
    KIND = "dnn"

    def __init__(self, config: DnnConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params
        self.fold_accuracies: list[float] = []

    def parameters(self) -> list[Tensor]:
        return [self.params[k] for k in sorted(self.params)]

    def forward(self, latents: np.ndarray, training: bool = False,
                rng: Rng | None = None) -> Tensor:
        cfg = self.config
        latents = np.asarray(latents, dtype=np.float32)
        if latents.ndim != 2 or latents.shape[1] != cfg.latent_dim:
            raise ValueError(f"expected [n,{cfg.latent_dim}] latents, "
                             f"got {latents.shape}")
        h = Tensor(latents)
        n_hidden = len(cfg.hidden)
        for i in range(n_hidden):
            h = relu(add(matmul(h, self.params[f"w{i}"]), self.params[f"b{i}"]))
            if i < 2:  # dropout after the first two hidden layers
                h = dropout(h, cfg.dropout, training, rng)
        logits = add(matmul(h, self.params[f"w{n_hidden}"]),
                     self.params[f"b{n_hidden}"])
        return softmax(logits, axis=1)

    def predict_proba(self, latents: np.ndarray) -> np.ndarray:
        """Eval-mode class probabilities, float64 rows summing to 1."""
        return self.forward(latents, training=False).data.astype(np.float64)

    def to_param_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    @classmethod
    def from_param_arrays(cls, config: DnnConfig,
                          arrays: dict[str, np.ndarray]) -> "DnnModel":
        return cls(config, {k: Tensor(v, requires_grad=True)
                            for k, v in arrays.items()})


def _init_params(cfg: DnnConfig, rng: Rng) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    widths = cfg.widths
    for i in range(len(widths) - 1):
        params[f"w{i}"] = he_normal(rng, (widths[i], widths[i + 1]), widths[i])
        params[f"b{i}"] = zeros((1, widths[i + 1]))
    return params


def stratified_folds(labels: np.ndarray, folds: int, rng: Rng) -> list[np.ndarray]:
    """Deal each class's shuffled indices round-robin across folds, keeping
    every fold's class proportions within one sample of the global ones."""
    labels = np.asarray(labels, dtype=np.int64)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    for c in np.unique(labels):
        idx = np.nonzero(labels == c)[0]
        if len(idx) < folds:
            raise ConfigError(
                f"class {int(c)} has only {len(idx)} samples for {folds} folds; "
                f"use fewer folds")
        idx = idx[rng.fork(int(c)).permutation(len(idx))]
        for j, sample in enumerate(idx):
            buckets[j % folds].append(int(sample))
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def _train_one(cfg: DnnConfig, latents: np.ndarray, labels: np.ndarray,
               rng: Rng) -> DnnModel:
    model = DnnModel(cfg, _init_params(cfg, rng.fork(0)))
    adam = Adam(model.parameters(), cfg.lr)
    n = len(latents)
    for epoch in range(1, cfg.epochs + 1):
        erng = rng.fork(epoch)
        perm = erng.permutation(n)
        for i in range(0, n, cfg.batch_size):
            idx = perm[i:i + cfg.batch_size]
            with Tape() as tape:
                probs = model.forward(latents[idx], training=True, rng=erng)
                loss = cross_entropy(probs, labels[idx])
            tape.backward(loss)
            adam.step()
            adam.zero_grad()
    return model


def train_dnn(config: DnnConfig, latents: np.ndarray, labels: np.ndarray,
              seed: int) -> DnnModel:
    """Stratified k-fold scoring, then a full-data retrain with the same
    budget.  Per-fold validation accuracies land on the returned model."""
    latents = np.asarray(latents, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if len(latents) != len(labels):
        raise ValueError("latents and labels length mismatch")
    root = Rng(seed)
    folds = stratified_folds(labels, config.folds, root.fork(10**6))
    accuracies = []
    for f, held in enumerate(folds):
        mask = np.ones(len(labels), dtype=bool)
        mask[held] = False
        fold_model = _train_one(config, latents[mask], labels[mask],
                                root.fork(f + 1))
        preds = fold_model.predict_proba(latents[held]).argmax(axis=1)
        accuracies.append(float((preds == labels[held]).mean()))
    final = _train_one(config, latents, labels, root.fork(0))
    final.fold_accuracies = accuracies
    return final


def dnn_predict_proba(model: DnnModel, latents: np.ndarray) -> np.ndarray:
    return model.predict_proba(latents)
