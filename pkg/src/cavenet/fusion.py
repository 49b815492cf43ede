"""CAVE-Net: soft-vote fusion of the CBAM backbone, the DNN, and Syn-XRF.

The CBAM member consumes raw images; the DNN and Syn-XRF members consume
autoencoder latents of the same images.  The fused row is the weighted mean
of the three member rows; members can be evaluated concurrently with results
bit-identical to sequential evaluation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .autoencoder import (AutoencoderConfig, AutoencoderModel, extract_latents,
                          merge_reconstructions, train_autoencoder)
from .cbam import CbamBackbone, CbamConfig, cbam_train
from .dnn import DnnConfig, DnnModel, train_dnn
from .rng import Rng
from .synxrf import (SynXrfConfig, SynXrfModel, synxrf_fit,
                     synxrf_predict_proba, vote_labels)

MEMBER_NAMES = ("cbam", "dnn", "synxrf")


class FusionError(ValueError):
    pass


@dataclass
class CaveNet:
    """The three trained members plus the latent router."""

    cbam: CbamBackbone
    dnn: DnnModel
    synxrf: SynXrfModel
    encoder: AutoencoderModel
    weights: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.weights) != 3:
            raise FusionError(f"exactly three member weights required, "
                              f"got {self.weights}")
        if any(w <= 0 for w in self.weights):
            raise FusionError(f"member weights must be positive, got {self.weights}")
        for name in MEMBER_NAMES:
            if getattr(self, name) is None:
                raise FusionError(f"member {name!r} is missing")


def fuse_rows(member_rows: dict[str, np.ndarray], weights=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Weighted mean of member probability rows in fixed member order."""
    total = float(sum(weights))
    stacked = np.stack([np.asarray(member_rows[name], dtype=np.float64) * w
                        for name, w in zip(MEMBER_NAMES, weights)])
    return stacked.sum(axis=0) / total


def member_probas(net: CaveNet, images: np.ndarray,
                  parallel: bool = True) -> dict[str, np.ndarray]:
    """Each member's probability rows for a [N,3,side,side] image batch.

    The members run on independent read-only state, so the concurrent path
    returns exactly the sequential result.
    """
    images = np.asarray(images, dtype=np.float32)

    def run_cbam():
        return net.cbam.predict_proba(images)

    def run_latent_members():
        latents = net.encoder.encode_batch(images)
        return (net.dnn.predict_proba(latents),
                synxrf_predict_proba(net.synxrf, latents))

    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            cbam_future = pool.submit(run_cbam)
            latent_future = pool.submit(run_latent_members)
            cbam_rows = cbam_future.result()
            dnn_rows, synxrf_rows = latent_future.result()
    else:
        cbam_rows = run_cbam()
        dnn_rows, synxrf_rows = run_latent_members()
    return {"cbam": cbam_rows, "dnn": dnn_rows, "synxrf": synxrf_rows}


def cavenet_predict(net: CaveNet, images: np.ndarray,
                    parallel: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Fused probability rows and hard labels (argmax, ties to the lowest
    class index)."""
    rows = member_probas(net, images, parallel=parallel)
    fused = fuse_rows(rows, net.weights)
    return fused, vote_labels(fused)


# ---------------------------------------------------------------------------
# end-to-end training


@dataclass(frozen=True)
class TrainAllConfig:
    autoencoder: AutoencoderConfig
    dnn: DnnConfig
    synxrf: SynXrfConfig
    cbam: CbamConfig
    weights: tuple = (1.0, 1.0, 1.0)
    merge_fraction: float = 0.05   # reconstructed images added to training
    latent_source: str = "train"   # "val" reproduces the leaky legacy protocol
    parallel: bool = True

    def __post_init__(self):
        if self.latent_source not in ("train", "val"):
            raise FusionError(f"latent_source must be 'train' or 'val', "
                              f"got {self.latent_source!r}")
        if not 0.0 <= self.merge_fraction <= 1.0:
            raise FusionError(f"merge_fraction must be in [0,1], "
                              f"got {self.merge_fraction}")


def cavenet_train_all(config: TrainAllConfig, train, val,
                      seed: int) -> tuple[CaveNet, dict[str, np.ndarray]]:
    """Train the whole stack: autoencoder first, reconstruction merge-back,
    then the three members (concurrently when `parallel`) on deterministic
    per-member seeds.

    Returns the fused net and each member's (plus the fusion's) validation
    probability rows, keyed cbam/dnn/synxrf/cavenet.
    """
    root = Rng(seed)
    encoder = train_autoencoder(config.autoencoder, train, val,
                                root.fork(1).randint(2 ** 31))
    if config.merge_fraction > 0.0:
        train = merge_reconstructions(encoder, train, config.merge_fraction,
                                      root.fork(5))
    latent_ds = val if config.latent_source == "val" else train
    latents, labels = extract_latents(encoder, latent_ds)

    def fit_dnn():
        return train_dnn(config.dnn, latents, labels, root.fork(2).randint(2 ** 31))

    def fit_synxrf():
        return synxrf_fit(config.synxrf, latents, labels,
                          root.fork(3).randint(2 ** 31))

    def fit_cbam():
        return cbam_train(config.cbam, train, val, root.fork(4).randint(2 ** 31))

    if config.parallel:
        with ThreadPoolExecutor(max_workers=3) as pool:
            futures = [pool.submit(f) for f in (fit_dnn, fit_synxrf, fit_cbam)]
            dnn_model, synxrf_model, cbam_model = [f.result() for f in futures]
    else:
        dnn_model, synxrf_model, cbam_model = fit_dnn(), fit_synxrf(), fit_cbam()

    net = CaveNet(cbam_model, dnn_model, synxrf_model, encoder, config.weights)
    val_images = val.pixel_batch()
    rows = member_probas(net, val_images, parallel=config.parallel)
    rows["cavenet"] = fuse_rows(rows, net.weights)
    return net, rows
