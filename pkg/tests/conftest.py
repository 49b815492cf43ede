"""Shared fixtures: the seeded desk-scale corpus and models trained on it.

Training fixtures are session-scoped so the expensive runs happen once and
every assertion (module tests and acceptance) sees the same artifacts.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cavenet import autoencoder as ae_mod
from cavenet import cbam as cbam_mod
from cavenet import data as data_mod
from cavenet import dnn as dnn_mod
from cavenet import synxrf as synxrf_mod

CORPUS_CLASSES = 4
CORPUS_PER_CLASS = 200
CORPUS_VAL_PER_CLASS = 50
CORPUS_SIDE = 32
TRAIN_SEED = 20240901
VAL_SEED = 20240902


@pytest.fixture(scope="session")
def train_ds():
    return data_mod.generate_synthetic(CORPUS_CLASSES, CORPUS_PER_CLASS,
                                       CORPUS_SIDE, TRAIN_SEED)


@pytest.fixture(scope="session")
def val_ds():
    return data_mod.generate_synthetic(CORPUS_CLASSES, CORPUS_VAL_PER_CLASS,
                                       CORPUS_SIDE, VAL_SEED)


@pytest.fixture(scope="session")
def ae_config():
    return ae_mod.AutoencoderConfig(side=CORPUS_SIDE, widths=(8, 16, 32),
                                    blocks_per_stage=1, latent_dim=64,
                                    max_epochs=15, patience=5, lr=2e-3,
                                    batch_size=32)


@pytest.fixture(scope="session")
def trained_ae(ae_config, train_ds, val_ds):
    return ae_mod.train_autoencoder(ae_config, train_ds, val_ds, seed=611)


@pytest.fixture(scope="session")
def train_latents(trained_ae, train_ds):
    return ae_mod.extract_latents(trained_ae, train_ds)


@pytest.fixture(scope="session")
def val_latents(trained_ae, val_ds):
    return ae_mod.extract_latents(trained_ae, val_ds)


@pytest.fixture(scope="session")
def cbam_config():
    return cbam_mod.CbamConfig(side=CORPUS_SIDE, num_classes=CORPUS_CLASSES,
                               widths=(8, 16, 32), blocks_per_stage=1,
                               epochs=30, batch_size=32, lr=1.5e-3, patience=6)


@pytest.fixture(scope="session")
def trained_cbam(cbam_config, train_ds, val_ds):
    return cbam_mod.cbam_train(cbam_config, train_ds, val_ds, seed=612)


@pytest.fixture(scope="session")
def dnn_config():
    return dnn_mod.DnnConfig(latent_dim=64, num_classes=CORPUS_CLASSES,
                             hidden=(128, 64, 32), dropout=0.3, epochs=50,
                             batch_size=32, lr=1e-3, folds=5)


@pytest.fixture(scope="session")
def trained_dnn(dnn_config, train_latents):
    latents, labels = train_latents
    return dnn_mod.train_dnn(dnn_config, latents, labels, seed=613)


@pytest.fixture(scope="session")
def synxrf_config():
    return synxrf_mod.SynXrfConfig(rf_trees=100, knn_k=7, gbt_rounds=40,
                                   gbt_lr=0.1, gbt_depth=3, svm_epochs=400)


@pytest.fixture(scope="session")
def trained_synxrf(synxrf_config, train_latents):
    latents, labels = train_latents
    return synxrf_mod.synxrf_fit(synxrf_config, latents, labels, seed=614)


@pytest.fixture(scope="session")
def val_images(val_ds):
    return val_ds.pixel_batch()


@pytest.fixture(scope="session")
def val_labels(val_ds):
    return val_ds.labels()
