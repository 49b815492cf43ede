"""Convolutional residual autoencoder: latent extraction, reconstruction,
training with early stopping, and reconstruction merge-back.

The encoder is a stack of stride-2 downsampling convolutions, each followed
by identity-skip residual blocks, closed by a linear map to the latent
vector.  The decoder mirrors it with stride-2 transposed convolutions and a
final sigmoid so reconstructions stay in (0,1).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, make_record
from .rng import Rng
from .tensor import (Adam, Tape, Tensor, add, conv2d, conv2d_transpose,
                     he_normal, matmul, mse_loss, relu, reshape, sigmoid, zeros)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AutoencoderConfig:
    side: int
    widths: tuple = (8, 16, 32)
    blocks_per_stage: int = 1
    latent_dim: int = 1024
    max_epochs: int = 40
    patience: int = 5
    min_delta: float = 1e-5
    lr: float = 1e-3
    batch_size: int = 32

    def __post_init__(self):
        if not self.widths:
            raise ConfigError("widths must be nonempty")
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.side % (2 ** len(self.widths)) != 0:
            raise ConfigError(f"side {self.side} not divisible by "
                              f"2^{len(self.widths)} stages")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def feature_side(self) -> int:
        return self.side // (2 ** len(self.widths))

    @property
    def feature_size(self) -> int:
        return self.widths[-1] * self.feature_side ** 2


def _init_params(cfg: AutoencoderConfig, rng: Rng) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    prev = 3
    for i, width in enumerate(cfg.widths):
        params[f"enc/down{i}_w"] = he_normal(rng, (width, prev, 4, 4), prev * 16)
        params[f"enc/down{i}_b"] = zeros((width,))
        for b in range(cfg.blocks_per_stage):
            for leg in ("c1", "c2"):
                params[f"enc/stage{i}/block{b}/{leg}_w"] = he_normal(
                    rng, (width, width, 3, 3), width * 9)
                params[f"enc/stage{i}/block{b}/{leg}_b"] = zeros((width,))
        prev = width
    params["enc/fc_w"] = he_normal(rng, (cfg.feature_size, cfg.latent_dim),
                                   cfg.feature_size)
    params["enc/fc_b"] = zeros((1, cfg.latent_dim))
    params["dec/fc_w"] = he_normal(rng, (cfg.latent_dim, cfg.feature_size),
                                   cfg.latent_dim)
    params["dec/fc_b"] = zeros((1, cfg.feature_size))
    chain = list(reversed(cfg.widths)) + [cfg.widths[0]]
    for i in range(len(cfg.widths)):
        ci, co = chain[i], chain[i + 1]
        params[f"dec/up{i}_w"] = he_normal(rng, (ci, co, 4, 4), ci * 16)
        params[f"dec/up{i}_b"] = zeros((co,))
    params["dec/out_w"] = he_normal(rng, (3, cfg.widths[0], 3, 3), cfg.widths[0] * 9)
    params["dec/out_b"] = zeros((3,))
    return params


def _bias4(b: Tensor) -> Tensor:
    return reshape(b, (1, b.shape[0], 1, 1))


class AutoencoderModel:
    """Encoder/decoder parameter bundle plus the training history."""

    KIND = "autoencoder"

    def __init__(self, config: AutoencoderConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params
        self.history: list[tuple[int, float, float]] = []

    def parameters(self) -> list[Tensor]:
        return [self.params[k] for k in sorted(self.params)]

    # -- graphs -------------------------------------------------------------

    def encode_graph(self, x: Tensor) -> Tensor:
        cfg, p = self.config, self.params
        h = x
        for i in range(len(cfg.widths)):
            h = relu(add(conv2d(h, p[f"enc/down{i}_w"], 2, 1),
                         _bias4(p[f"enc/down{i}_b"])))
            for b in range(cfg.blocks_per_stage):
                skip = h
                h = relu(add(conv2d(h, p[f"enc/stage{i}/block{b}/c1_w"], 1, 1),
                             _bias4(p[f"enc/stage{i}/block{b}/c1_b"])))
                h = add(conv2d(h, p[f"enc/stage{i}/block{b}/c2_w"], 1, 1),
                        _bias4(p[f"enc/stage{i}/block{b}/c2_b"]))
                h = relu(add(h, skip))
        flat = reshape(h, (x.shape[0], cfg.feature_size))
        return add(matmul(flat, p["enc/fc_w"]), p["enc/fc_b"])

    def decode_graph(self, z: Tensor) -> Tensor:
        cfg, p = self.config, self.params
        h = relu(add(matmul(z, p["dec/fc_w"]), p["dec/fc_b"]))
        h = reshape(h, (z.shape[0], cfg.widths[-1], cfg.feature_side, cfg.feature_side))
        for i in range(len(cfg.widths)):
            h = relu(add(conv2d_transpose(h, p[f"dec/up{i}_w"], 2, 1),
                         _bias4(p[f"dec/up{i}_b"])))
        out = add(conv2d(h, p["dec/out_w"], 1, 1), _bias4(p["dec/out_b"]))
        return sigmoid(out)

    # -- eval-mode array API --------------------------------------------------

    def encode_batch(self, images: np.ndarray) -> np.ndarray:
        if images.ndim != 4 or images.shape[1:] != (3, self.config.side, self.config.side):
            raise ValueError(f"expected [N,3,{self.config.side},{self.config.side}], "
                             f"got {images.shape}")
        return self.encode_graph(Tensor(images)).data

    def decode_batch(self, latents: np.ndarray) -> np.ndarray:
        latents = np.asarray(latents, dtype=np.float32)
        if latents.ndim != 2 or latents.shape[1] != self.config.latent_dim:
            raise ValueError(f"expected [N,{self.config.latent_dim}] latents, "
                             f"got {latents.shape}")
        return self.decode_graph(Tensor(latents)).data

    # -- checkpoint interop ---------------------------------------------------

    def to_param_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    @classmethod
    def from_param_arrays(cls, config: AutoencoderConfig,
                          arrays: dict[str, np.ndarray]) -> "AutoencoderModel":
        params = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
        return cls(config, params)


def encode(model: AutoencoderModel, record_pixels: np.ndarray) -> np.ndarray:
    """Latent vector of one [3,side,side] image."""
    pixels = np.asarray(record_pixels, dtype=np.float32)
    return model.encode_batch(pixels[None])[0]


def decode(model: AutoencoderModel, z: np.ndarray) -> np.ndarray:
    """Image [3,side,side] reconstructed from one latent vector."""
    z = np.asarray(z, dtype=np.float32)
    if z.ndim != 1 or z.shape[0] != model.config.latent_dim:
        raise ValueError(f"expected latent of length {model.config.latent_dim}, "
                         f"got shape {z.shape}")
    return model.decode_batch(z[None])[0]


def _epoch_batches(n: int, batch_size: int, rng: Rng):
    perm = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield perm[i:i + batch_size]


def _dataset_loss(model: AutoencoderModel, images: np.ndarray, batch_size: int) -> float:
    """Reconstruction MSE over a whole image array (per-element mean)."""
    total = 0.0
    for i in range(0, len(images), batch_size):
        xb = images[i:i + batch_size]
        recon = model.decode_batch(model.encode_batch(xb))
        diff = recon.astype(np.float64) - xb.astype(np.float64)
        total += float((diff * diff).sum())
    return total / images.size


def train_autoencoder(config: AutoencoderConfig, train: LabeledDataset,
                      val: LabeledDataset, seed: int) -> AutoencoderModel:
    """Adam on reconstruction MSE with early stopping on validation loss.

    Stops after `patience` epochs without improvement beyond `min_delta` and
    returns the best-validation-loss parameters.
    """
    root = Rng(seed)
    model = AutoencoderModel(config, _init_params(config, root.fork(0)))
    adam = Adam(model.parameters(), config.lr)
    images = train.pixel_batch()
    val_images = val.pixel_batch()
    best_loss = float("inf")
    best_params: dict[str, np.ndarray] | None = None
    wait = 0
    for epoch in range(1, config.max_epochs + 1):
        erng = root.fork(epoch)
        loss_sum = 0.0
        for idx in _epoch_batches(len(images), config.batch_size, erng):
            xb = Tensor(images[idx])
            with Tape() as tape:
                recon = model.decode_graph(model.encode_graph(xb))
                loss = mse_loss(recon, xb)
            tape.backward(loss)
            adam.step()
            adam.zero_grad()
            loss_sum += loss.item() * len(idx)
        train_loss = loss_sum / len(images)
        val_loss = _dataset_loss(model, val_images, config.batch_size)
        model.history.append((epoch, train_loss, val_loss))
        if val_loss < best_loss - config.min_delta:
            best_loss = val_loss
            best_params = model.to_param_arrays()
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                break
    if best_params is not None:
        for name, arr in best_params.items():
            model.params[name].data[...] = arr
    return model


def extract_latents(model: AutoencoderModel, ds: LabeledDataset,
                    batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Row i is the latent of record i, paired with its label."""
    images = ds.pixel_batch()
    rows = [model.encode_batch(images[i:i + batch_size])
            for i in range(0, len(images), batch_size)]
    return np.concatenate(rows, axis=0), ds.labels()


def merge_reconstructions(model: AutoencoderModel, ds: LabeledDataset,
                          fraction: float, rng: Rng) -> LabeledDataset:
    """Append decode(encode(img)) for floor(fraction*N) uniformly chosen
    records; reconstructions keep the source label, provenance
    'reconstructed'.  Default pipeline fraction is 0.05."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0,1], got {fraction}")
    count = int(fraction * len(ds))
    if count == 0:
        return ds
    chosen = np.sort(rng.permutation(len(ds))[:count])
    records = list(ds.records)
    images = np.stack([ds.records[i].pixels.data for i in chosen])
    recon = model.decode_batch(model.encode_batch(images))
    for row, i in enumerate(chosen):
        src = ds.records[i]
        records.append(make_record(recon[row], src.label, "reconstructed",
                                   f"{src.source_id}#recon"))
    return LabeledDataset(records)


# ---------------------------------------------------------------------------
# latent export formats


LATENT_MAGIC = b"CAVELAT1"


def write_latents_csv(path: str, latents: np.ndarray, labels: np.ndarray) -> None:
    """Header label,z0..z{d-1}; values round-trip exactly through repr."""
    latents = np.asarray(latents, dtype=np.float32)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"z{i}" for i in range(latents.shape[1])])
        for label, row in zip(labels, latents):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def read_latents_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "label":
            raise ValueError(f"{path}: bad latents header")
        labels, rows = [], []
        for row in reader:
            labels.append(int(row[0]))
            rows.append([np.float32(v) for v in row[1:]])
    return np.array(rows, dtype=np.float32), np.array(labels, dtype=np.int64)


def write_latents_bin(path: str, latents: np.ndarray, labels: np.ndarray) -> None:
    """Binary variant: magic, u32 n, u32 d, i32 labels, f32 rows (LE)."""
    latents = np.ascontiguousarray(latents, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<i4")
    with open(path, "wb") as fh:
        fh.write(LATENT_MAGIC)
        fh.write(struct.pack("<II", latents.shape[0], latents.shape[1]))
        fh.write(labels.tobytes())
        fh.write(latents.tobytes())


def read_latents_bin(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != LATENT_MAGIC:
        raise ValueError(f"{path}: not a latent dump")
    n, d = struct.unpack("<II", blob[8:16])
    labels = np.frombuffer(blob, dtype="<i4", count=n, offset=16).astype(np.int64)
    latents = np.frombuffer(blob, dtype="<f4", count=n * d,
                            offset=16 + 4 * n).reshape(n, d)
    return latents.copy(), labels
