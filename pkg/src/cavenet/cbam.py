"""CBAM attention on a small residual classification backbone.

The attention block combines two gates, applied in sequence:

* spatial: channel-wise max and average maps, concatenated, convolved with a
  single 7x7 kernel and squashed to (0,1), multiplied onto the feature map
* channel: global average pooling through a bottleneck MLP (reduction r)
  and a sigmoid, broadcast-multiplied over channels

Spatial attention runs first; the channel gate is computed from the
spatially refined map.  CBAM is mounted once, after the last residual stage
and before global pooling and the linear head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .rng import Rng
from .tensor import (Adam, Tape, Tensor, add, channel_pool, concat, conv2d,
                     cross_entropy, global_pool, he_normal, matmul, mul,
                     pad_reflect, relu, reshape, sigmoid, softmax, zeros)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CbamConfig:
    side: int
    num_classes: int
    widths: tuple = (8, 16, 32)
    blocks_per_stage: int = 2
    reduction: int = 4
    spatial_kernel: int = 7
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    patience: int | None = None
    use_cbam: bool = True

    def __post_init__(self):
        if not self.widths:
            raise ConfigError("widths must be nonempty")
        if self.side % (2 ** len(self.widths)) != 0:
            raise ConfigError(f"side {self.side} not divisible by "
                              f"2^{len(self.widths)} stages")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.reduction < 1:
            raise ConfigError(f"reduction must be >= 1, got {self.reduction}")
        if self.spatial_kernel % 2 != 1:
            raise ConfigError(f"spatial_kernel must be odd, got {self.spatial_kernel}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be >= 1 or None, got {self.patience}")

    @classmethod
    def resnet18_layout(cls, side: int, num_classes: int, **overrides) -> "CbamConfig":
        """Full-scale layout: four stages of two residual blocks at widths
        64/128/256/512, the reference geometry for this backbone family."""
        defaults = dict(side=side, num_classes=num_classes,
                        widths=(64, 128, 256, 512), blocks_per_stage=2,
                        reduction=16)
        defaults.update(overrides)
        return cls(**defaults)


def _bias4(b: Tensor) -> Tensor:
    return reshape(b, (1, b.shape[0], 1, 1))


class SpatialAttention:
    """7x7 convolution over the 2-channel [max, avg] pooled map."""

    def __init__(self, params: dict[str, Tensor], prefix: str = "cbam/spatial"):
        self.w = params[f"{prefix}_w"]
        self.b = params[f"{prefix}_b"]
        self.padding = self.w.shape[2] // 2

    def gate(self, f: Tensor) -> Tensor:
        pooled = concat([channel_pool(f, "max"), channel_pool(f, "avg")],
                        axis=1 if f.ndim == 4 else 0)
        # mirror-pad so a spatially constant map keeps a constant gate;
        # the single output-channel bias broadcasts over both layouts
        conv = add(conv2d(pad_reflect(pooled, self.padding), self.w, 1, 0), self.b)
        return sigmoid(conv)

    def refine(self, f: Tensor) -> Tensor:
        return mul(self.gate(f), f)


class ChannelAttention:
    """Bottleneck MLP over globally averaged channels, sigmoid output."""

    def __init__(self, params: dict[str, Tensor], prefix: str = "cbam/channel"):
        self.w1 = params[f"{prefix}_w1"]
        self.b1 = params[f"{prefix}_b1"]
        self.w2 = params[f"{prefix}_w2"]
        self.b2 = params[f"{prefix}_b2"]

    def vector(self, f: Tensor) -> Tensor:
        """Attention vector: [N,C] for batched input, [C] for [C,H,W]."""
        squeeze = f.ndim == 3
        pooled = global_pool(f, "avg")
        n = 1 if squeeze else f.shape[0]
        c = f.shape[0] if squeeze else f.shape[1]
        flat = reshape(pooled, (n, c))
        hidden = relu(add(matmul(flat, self.w1), self.b1))
        out = sigmoid(add(matmul(hidden, self.w2), self.b2))
        return reshape(out, (c,)) if squeeze else out

    def refine(self, f: Tensor) -> Tensor:
        v = self.vector(f)
        if f.ndim == 3:
            gate = reshape(v, (f.shape[0], 1, 1))
        else:
            gate = reshape(v, (f.shape[0], f.shape[1], 1, 1))
        return mul(f, gate)


class Cbam:
    def __init__(self, params: dict[str, Tensor], prefix: str = "cbam"):
        self.spatial = SpatialAttention(params, f"{prefix}/spatial")
        self.channel = ChannelAttention(params, f"{prefix}/channel")

    def refine(self, f: Tensor) -> Tensor:
        """Spatial gate first, then the channel gate of the refined map."""
        spatially = self.spatial.refine(f)
        return self.channel.refine(spatially)


def spatial_attention(module: SpatialAttention, f: Tensor) -> Tensor:
    """Spatially refined map (gate times input)."""
    return module.refine(f)


def channel_attention(module: ChannelAttention, f: Tensor) -> Tensor:
    """Channel attention vector with entries in (0,1)."""
    return module.vector(f)


def cbam_refine(module: Cbam, f: Tensor) -> Tensor:
    return module.refine(f)


def init_cbam_params(channels: int, reduction: int, spatial_kernel: int,
                     rng: Rng, prefix: str = "cbam") -> dict[str, Tensor]:
    hidden = max(1, channels // reduction)
    k = spatial_kernel
    return {
        f"{prefix}/spatial_w": he_normal(rng, (1, 2, k, k), 2 * k * k),
        f"{prefix}/spatial_b": zeros((1,)),
        f"{prefix}/channel_w1": he_normal(rng, (channels, hidden), channels),
        f"{prefix}/channel_b1": zeros((1, hidden)),
        f"{prefix}/channel_w2": he_normal(rng, (hidden, channels), hidden),
        f"{prefix}/channel_b2": zeros((1, channels)),
    }


# ---------------------------------------------------------------------------
# backbone


def _init_backbone_params(cfg: CbamConfig, rng: Rng) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    params["stem_w"] = he_normal(rng, (cfg.widths[0], 3, 3, 3), 27)
    params["stem_b"] = zeros((cfg.widths[0],))
    prev = cfg.widths[0]
    for i, width in enumerate(cfg.widths):
        params[f"stage{i}/down_w"] = he_normal(rng, (width, prev, 4, 4), prev * 16)
        params[f"stage{i}/down_b"] = zeros((width,))
        for b in range(cfg.blocks_per_stage):
            for leg in ("c1", "c2"):
                params[f"stage{i}/block{b}/{leg}_w"] = he_normal(
                    rng, (width, width, 3, 3), width * 9)
                params[f"stage{i}/block{b}/{leg}_b"] = zeros((width,))
        prev = width
    params.update(init_cbam_params(cfg.widths[-1], cfg.reduction,
                                   cfg.spatial_kernel, rng))
    params["head_w"] = he_normal(rng, (cfg.widths[-1], cfg.num_classes),
                                 cfg.widths[-1])
    params["head_b"] = zeros((1, cfg.num_classes))
    return params


class CbamBackbone:
    """Residual stages, one CBAM block on the final map, linear head."""

    KIND = "cbam"

    def __init__(self, config: CbamConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params
        self.cbam = Cbam(params)
        self.history: list[tuple[int, float, float]] = []

    def parameters(self) -> list[Tensor]:
        return [self.params[k] for k in sorted(self.params)]

    def features(self, x: Tensor) -> Tensor:
        """Final feature map, before attention."""
        cfg, p = self.config, self.params
        h = relu(add(conv2d(x, p["stem_w"], 1, 1), _bias4(p["stem_b"])))
        for i in range(len(cfg.widths)):
            h = relu(add(conv2d(h, p[f"stage{i}/down_w"], 2, 1),
                         _bias4(p[f"stage{i}/down_b"])))
            for b in range(cfg.blocks_per_stage):
                skip = h
                h = relu(add(conv2d(h, p[f"stage{i}/block{b}/c1_w"], 1, 1),
                             _bias4(p[f"stage{i}/block{b}/c1_b"])))
                h = add(conv2d(h, p[f"stage{i}/block{b}/c2_w"], 1, 1),
                        _bias4(p[f"stage{i}/block{b}/c2_b"]))
                h = relu(add(h, skip))
        return h

    def forward(self, x: Tensor) -> Tensor:
        cfg, p = self.config, self.params
        h = self.features(x)
        if cfg.use_cbam:
            h = self.cbam.refine(h)
        pooled = global_pool(h, "avg")
        flat = reshape(pooled, (x.shape[0], cfg.widths[-1]))
        logits = add(matmul(flat, p["head_w"]), p["head_b"])
        return softmax(logits, axis=1)

    def predict_proba(self, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
        images = np.asarray(images, dtype=np.float32)
        if images.ndim != 4 or images.shape[1:] != (3, self.config.side, self.config.side):
            raise ValueError(f"expected [N,3,{self.config.side},{self.config.side}], "
                             f"got {images.shape}")
        rows = [self.forward(Tensor(images[i:i + batch_size])).data
                for i in range(0, len(images), batch_size)]
        return np.concatenate(rows, axis=0).astype(np.float64)

    def spatial_gate_map(self, pixels: np.ndarray) -> np.ndarray:
        """The [1,h,w] spatial attention gate of one [3,side,side] image,
        at final-feature resolution."""
        feats = self.features(Tensor(np.asarray(pixels, dtype=np.float32)[None]))
        return self.cbam.spatial.gate(feats).data[0]

    def to_param_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    @classmethod
    def from_param_arrays(cls, config: CbamConfig,
                          arrays: dict[str, np.ndarray]) -> "CbamBackbone":
        return cls(config, {k: Tensor(v, requires_grad=True)
                            for k, v in arrays.items()})


def cbam_train(config: CbamConfig, train: LabeledDataset, val: LabeledDataset,
               seed: int) -> CbamBackbone:
    """Cross-entropy training with Adam; returns the parameters of the best
    validation-accuracy epoch (ties keep the earliest)."""
    if len(train) == 0 or len(val) == 0:
        raise ValueError("train and validation datasets must be nonempty")
    root = Rng(seed)
    model = CbamBackbone(config, _init_backbone_params(config, root.fork(0)))
    adam = Adam(model.parameters(), config.lr)
    images = train.pixel_batch()
    labels = train.labels()
    val_images = val.pixel_batch()
    val_labels = val.labels()
    best_acc = -1.0
    best_params: dict[str, np.ndarray] | None = None
    wait = 0
    for epoch in range(1, config.epochs + 1):
        erng = root.fork(epoch)
        perm = erng.permutation(len(images))
        loss_sum = 0.0
        for i in range(0, len(images), config.batch_size):
            idx = perm[i:i + config.batch_size]
            xb = Tensor(images[idx])
            with Tape() as tape:
                probs = model.forward(xb)
                loss = cross_entropy(probs, labels[idx])
            tape.backward(loss)
            adam.step()
            adam.zero_grad()
            loss_sum += loss.item() * len(idx)
        preds = model.predict_proba(val_images).argmax(axis=1)
        val_acc = float((preds == val_labels).mean())
        model.history.append((epoch, loss_sum / len(images), val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = model.to_param_arrays()
            wait = 0
        else:
            wait += 1
            if config.patience is not None and wait >= config.patience:
                break
    if best_params is not None:
        for name, arr in best_params.items():
            model.params[name].data[...] = arr
    return model


def cbam_predict_proba(model: CbamBackbone, images: np.ndarray) -> np.ndarray:
    return model.predict_proba(images)


def export_attention_map(model: CbamBackbone, pixels: np.ndarray,
                         pgm_path: str, csv_path: str | None = None) -> np.ndarray:
    """Write one image's spatial gate as PGM (and CSV floats)."""
    from .data import io as _io
    gate = model.spatial_gate_map(pixels)
    _io.write_pgm(pgm_path, gate[0])
    if csv_path:
        import csv as _csv
        with open(csv_path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            for row in gate[0]:
                writer.writerow([repr(float(v)) for v in row])
    return gate
