"""Stage-per-command pipeline driver.

Commands mirror the pipeline: gen-data, balance, train-ae, extract,
train-dnn, train-synxrf, train-cbam, fuse, predict, evaluate, report.
Configuration is a flat key=value file (``#`` comments) plus ``--key value``
flag overrides; unknown keys are rejected.  Artifacts land under the output
directory with stable names so reruns are scriptable.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import autoencoder as ae_mod
from . import cbam as cbam_mod
from . import data as data_mod
from . import dnn as dnn_mod
from . import fusion as fusion_mod
from . import metrics as metrics_mod
from . import synxrf as synxrf_mod
from .checkpoint import config_hash, load_checkpoint, save_checkpoint
from .data import io as io_mod
from .rng import Rng


class CliError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration registry: key -> (type tag, default, help)

KEYS: dict[str, tuple[str, object, str]] = {
    "seed": ("int", None, "master seed; required by every train command"),
    "out": ("str", "out", "output directory for all artifacts"),
    "side": ("int", 32, "image side length after ingestion"),
    "classes": ("int", 4, "synthetic corpus: number of classes"),
    "per_class": ("int", 100, "synthetic corpus: training images per class"),
    "val_per_class": ("int", 25, "synthetic corpus: validation images per class"),
    "data_dir": ("str", "", "ingest this directory instead of generating data"),
    "floor": ("int", 150, "per-class floor for the balance command"),
    "ae_widths": ("ints", (8, 16, 32), "autoencoder stage widths"),
    "ae_blocks": ("int", 1, "autoencoder residual blocks per stage"),
    "ae_latent_dim": ("int", 64, "latent vector length"),
    "ae_epochs": ("int", 15, "autoencoder max epochs"),
    "ae_patience": ("int", 5, "autoencoder early-stop patience"),
    "ae_min_delta": ("float", 1e-5, "autoencoder early-stop min improvement"),
    "ae_lr": ("float", 2e-3, "autoencoder learning rate"),
    "ae_batch_size": ("int", 32, "autoencoder batch size"),
    "ae_merge_fraction": ("float", 0.05, "reconstructed-image merge fraction"),
    "latent_source": ("str", "train", "latents for downstream training: train|val"),
    "dnn_hidden": ("ints", (128, 64, 32), "dnn hidden layer widths"),
    "dnn_dropout": ("float", 0.3, "dnn dropout rate"),
    "dnn_epochs": ("int", 50, "dnn training epochs"),
    "dnn_batch_size": ("int", 32, "dnn batch size"),
    "dnn_lr": ("float", 1e-3, "dnn learning rate"),
    "dnn_folds": ("int", 5, "dnn cross-validation folds"),
    "svm_lambda": ("float", 1e-4, "svm L2 strength"),
    "svm_epochs": ("int", 400, "svm subgradient epochs"),
    "svm_lr": ("float", 0.05, "svm base step size"),
    "svm_temperature": ("float", 1.0, "svm margin-to-probability temperature"),
    "rf_trees": ("int", 100, "random forest tree count"),
    "rf_max_depth": ("int", 0, "random forest depth cap (0 = unlimited)"),
    "knn_k": ("int", 7, "knn neighbour count"),
    "gbt_rounds": ("int", 50, "boosting rounds"),
    "gbt_lr": ("float", 0.1, "boosting shrinkage"),
    "gbt_depth": ("int", 3, "boosting tree depth"),
    "synxrf_voting": ("str", "soft", "syn-xrf combination: soft|hard"),
    "cbam_widths": ("ints", (8, 16, 32), "cbam backbone stage widths"),
    "cbam_blocks": ("int", 1, "cbam residual blocks per stage"),
    "cbam_reduction": ("int", 4, "channel-attention reduction ratio"),
    "cbam_kernel": ("int", 7, "spatial-attention kernel size"),
    "cbam_epochs": ("int", 30, "cbam training epochs"),
    "cbam_batch_size": ("int", 32, "cbam batch size"),
    "cbam_lr": ("float", 1.5e-3, "cbam learning rate"),
    "cbam_patience": ("int", 0, "cbam early-stop patience (0 = off)"),
    "cbam_resnet18": ("int", 0, "1 = full 4-stage/2-block 64..512 layout"),
    "fuse_weights": ("floats", (1.0, 1.0, 1.0), "member weights: cbam,dnn,synxrf"),
    "fuse_parallel": ("int", 1, "1 = evaluate members concurrently"),
}

TRAIN_COMMANDS = {"gen-data", "balance", "train-ae", "train-dnn",
                  "train-synxrf", "train-cbam"}


def _parse_value(key: str, raw: str):
    tag = KEYS[key][0]
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "ints":
            return tuple(int(v) for v in raw.split(",") if v != "")
        if tag == "floats":
            return tuple(float(v) for v in raw.split(",") if v != "")
        return raw
    except ValueError:
        raise CliError(f"bad value for {key}: {raw!r}") from None


def load_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in KEYS:
                raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {key: default for key, (_tag, default, _help) in KEYS.items()}
    if args.config:
        cfg.update(load_config_file(args.config))
    for key in KEYS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            cfg[key] = _parse_value(key, flag)
    return cfg


def require_seed(cfg: dict) -> int:
    if cfg["seed"] is None:
        raise CliError("this command requires --seed")
    return int(cfg["seed"])


def _hash(cfg: dict) -> str:
    # `out` is a location, not behaviour: runs into different directories
    # must still produce byte-identical artifacts
    return config_hash({k: v for k, v in cfg.items()
                        if v is not None and k != "out"})


# ---------------------------------------------------------------------------
# config -> model configs


def ae_config(cfg: dict) -> ae_mod.AutoencoderConfig:
    return ae_mod.AutoencoderConfig(
        side=cfg["side"], widths=tuple(cfg["ae_widths"]),
        blocks_per_stage=cfg["ae_blocks"], latent_dim=cfg["ae_latent_dim"],
        max_epochs=cfg["ae_epochs"], patience=cfg["ae_patience"],
        min_delta=cfg["ae_min_delta"], lr=cfg["ae_lr"],
        batch_size=cfg["ae_batch_size"])


def dnn_config(cfg: dict, num_classes: int) -> dnn_mod.DnnConfig:
    return dnn_mod.DnnConfig(
        latent_dim=cfg["ae_latent_dim"], num_classes=num_classes,
        hidden=tuple(cfg["dnn_hidden"]), dropout=cfg["dnn_dropout"],
        epochs=cfg["dnn_epochs"], batch_size=cfg["dnn_batch_size"],
        lr=cfg["dnn_lr"], folds=cfg["dnn_folds"])


def synxrf_config(cfg: dict) -> synxrf_mod.SynXrfConfig:
    return synxrf_mod.SynXrfConfig(
        svm_lambda=cfg["svm_lambda"], svm_epochs=cfg["svm_epochs"],
        svm_lr=cfg["svm_lr"], svm_temperature=cfg["svm_temperature"],
        rf_trees=cfg["rf_trees"],
        rf_max_depth=cfg["rf_max_depth"] or None,
        knn_k=cfg["knn_k"], gbt_rounds=cfg["gbt_rounds"],
        gbt_lr=cfg["gbt_lr"], gbt_depth=cfg["gbt_depth"],
        voting=cfg["synxrf_voting"])


def cbam_config(cfg: dict, num_classes: int) -> cbam_mod.CbamConfig:
    patience = cfg["cbam_patience"] or None
    if cfg["cbam_resnet18"]:
        return cbam_mod.CbamConfig.resnet18_layout(
            side=cfg["side"], num_classes=num_classes,
            epochs=cfg["cbam_epochs"], batch_size=cfg["cbam_batch_size"],
            lr=cfg["cbam_lr"], patience=patience,
            spatial_kernel=cfg["cbam_kernel"])
    return cbam_mod.CbamConfig(
        side=cfg["side"], num_classes=num_classes,
        widths=tuple(cfg["cbam_widths"]), blocks_per_stage=cfg["cbam_blocks"],
        reduction=cfg["cbam_reduction"], spatial_kernel=cfg["cbam_kernel"],
        epochs=cfg["cbam_epochs"], batch_size=cfg["cbam_batch_size"],
        lr=cfg["cbam_lr"], patience=patience)


# ---------------------------------------------------------------------------
# artifact paths and prerequisites


def _paths(cfg: dict) -> dict[str, str]:
    out = cfg["out"]
    return {
        "out": out,
        "train_dir": os.path.join(out, "data", "train"),
        "val_dir": os.path.join(out, "data", "val"),
        "train_manifest": os.path.join(out, "train_manifest.csv"),
        "val_manifest": os.path.join(out, "val_manifest.csv"),
        "balanced_dir": os.path.join(out, "balanced"),
        "balanced_manifest": os.path.join(out, "balanced_manifest.csv"),
        "ae_ckpt": os.path.join(out, "ae.ckpt"),
        "ae_history": os.path.join(out, "ae_history.csv"),
        "latents_csv": os.path.join(out, "latents.csv"),
        "latents_bin": os.path.join(out, "latents.bin"),
        "dnn_ckpt": os.path.join(out, "dnn.ckpt"),
        "cv_report": os.path.join(out, "cv_report.csv"),
        "synxrf_ckpt": os.path.join(out, "synxrf.ckpt"),
        "cbam_ckpt": os.path.join(out, "cbam.ckpt"),
        "cbam_history": os.path.join(out, "cbam_history.csv"),
        "report": os.path.join(out, "report.csv"),
        "report_combined": os.path.join(out, "report_combined.csv"),
    }


def _require(path: str, producer: str) -> str:
    if not os.path.exists(path):
        raise CliError(f"missing artifact {path}; run `{producer}` first")
    return path


def _train_sources(cfg: dict, paths: dict) -> tuple:
    """Balanced training set and the validation set, ingested at `side`."""
    train_dir = _require(paths["balanced_dir"], "balance")
    val_dir = _require(paths["val_dir"], "gen-data")
    train = data_mod.ingest_directory(train_dir, cfg["side"])
    val = data_mod.ingest_directory(val_dir, cfg["side"])
    return train, val


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(cfg: dict) -> None:
    seed = require_seed(cfg)
    paths = _paths(cfg)
    if cfg["data_dir"]:
        raise CliError("gen-data writes synthetic data; unset data_dir")
    root = Rng(seed)
    train = data_mod.generate_synthetic(cfg["classes"], cfg["per_class"],
                                        cfg["side"], root.fork(1).randint(2 ** 31))
    val = data_mod.generate_synthetic(cfg["classes"], cfg["val_per_class"],
                                      cfg["side"], root.fork(2).randint(2 ** 31))
    data_mod.export_directory(train, paths["train_dir"], paths["train_manifest"])
    data_mod.export_directory(val, paths["val_dir"], paths["val_manifest"])
    print(f"gen-data: wrote {len(train)} train / {len(val)} val images "
          f"under {paths['out']}/data")


def cmd_balance(cfg: dict) -> None:
    seed = require_seed(cfg)
    paths = _paths(cfg)
    source = cfg["data_dir"] or _require(paths["train_dir"], "gen-data")
    ds = data_mod.ingest_directory(source, cfg["side"])
    balanced = data_mod.balance_dataset(ds, cfg["floor"], Rng(seed).fork(3))
    data_mod.export_directory(balanced, paths["balanced_dir"],
                              paths["balanced_manifest"])
    counts = balanced.recount()
    present = {data_mod.class_name(i): int(c)
               for i, c in enumerate(counts) if c}
    print(f"balance: floor {cfg['floor']} -> {len(balanced)} records {present}")


def _write_history(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def read_history_csv(path: str) -> list[tuple]:
    """Training-history rows (epoch, metric...) as written by the train
    commands; also parses cv_report.csv."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [tuple([int(row[0])] + [float(v) for v in row[1:]])
                for row in reader]


def cmd_train_ae(cfg: dict) -> None:
    seed = require_seed(cfg)
    paths = _paths(cfg)
    train, val = _train_sources(cfg, paths)
    model = ae_mod.train_autoencoder(ae_config(cfg), train, val, seed)
    meta = {"seed": seed, "config_hash": _hash(cfg), "side": cfg["side"],
            "widths": list(cfg["ae_widths"]), "blocks": cfg["ae_blocks"],
            "latent_dim": cfg["ae_latent_dim"], "epochs_run": len(model.history)}
    save_checkpoint(paths["ae_ckpt"], model.KIND, model.to_param_arrays(), meta)
    _write_history(paths["ae_history"], ["epoch", "train_loss", "val_loss"],
                   model.history)
    print(f"train-ae: {len(model.history)} epochs, "
          f"best val loss {min(h[2] for h in model.history):.6f}")


def _load_ae(cfg: dict, paths: dict) -> ae_mod.AutoencoderModel:
    kind, params, meta = load_checkpoint(_require(paths["ae_ckpt"], "train-ae"))
    if kind != "autoencoder":
        raise CliError(f"{paths['ae_ckpt']} holds kind {kind!r}, not autoencoder")
    config = ae_mod.AutoencoderConfig(
        side=meta["side"], widths=tuple(meta["widths"]),
        blocks_per_stage=meta["blocks"], latent_dim=meta["latent_dim"],
        max_epochs=max(1, cfg["ae_epochs"]), patience=cfg["ae_patience"],
        lr=cfg["ae_lr"], batch_size=cfg["ae_batch_size"])
    return ae_mod.AutoencoderModel.from_param_arrays(config, params)


def _merge_reconstructions(cfg: dict, model, ds, stream: int):
    """Grow the training set with decoded reconstructions when configured."""
    fraction = cfg["ae_merge_fraction"]
    if fraction <= 0.0:
        return ds
    seed = cfg["seed"] if cfg["seed"] is not None else 0
    return ae_mod.merge_reconstructions(model, ds, fraction,
                                        Rng(seed).fork(stream))


def cmd_extract(cfg: dict) -> None:
    paths = _paths(cfg)
    model = _load_ae(cfg, paths)
    if cfg["latent_source"] == "val":
        ds = data_mod.ingest_directory(_require(paths["val_dir"], "gen-data"),
                                       cfg["side"])
    elif cfg["latent_source"] == "train":
        ds = data_mod.ingest_directory(_require(paths["balanced_dir"], "balance"),
                                       cfg["side"])
        ds = _merge_reconstructions(cfg, model, ds, stream=21)
    else:
        raise CliError(f"latent_source must be train or val, "
                       f"got {cfg['latent_source']!r}")
    latents, labels = ae_mod.extract_latents(model, ds)
    ae_mod.write_latents_csv(paths["latents_csv"], latents, labels)
    ae_mod.write_latents_bin(paths["latents_bin"], latents, labels)
    print(f"extract: {latents.shape[0]} x {latents.shape[1]} latents "
          f"({cfg['latent_source']} split)")


def cmd_train_dnn(cfg: dict) -> None:
    seed = require_seed(cfg)
    paths = _paths(cfg)
    latents, labels = ae_mod.read_latents_csv(
        _require(paths["latents_csv"], "extract"))
    num_classes = int(labels.max()) + 1
    config = dnn_config(cfg, num_classes)
    model = dnn_mod.train_dnn(config, latents, labels, seed)
    meta = {"seed": seed, "config_hash": _hash(cfg),
            "latent_dim": config.latent_dim, "num_classes": num_classes,
            "hidden": list(config.hidden), "dropout": config.dropout,
            "fold_accuracies": model.fold_accuracies}
    save_checkpoint(paths["dnn_ckpt"], model.KIND, model.to_param_arrays(), meta)
    with open(paths["cv_report"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "accuracy"])
        for f, acc in enumerate(model.fold_accuracies):
            writer.writerow([f, repr(acc)])
    print(f"train-dnn: fold accuracies "
          f"{[round(a, 4) for a in model.fold_accuracies]}")


def _load_dnn(paths: dict) -> dnn_mod.DnnModel:
    kind, params, meta = load_checkpoint(_require(paths["dnn_ckpt"], "train-dnn"))
    if kind != "dnn":
        raise CliError(f"{paths['dnn_ckpt']} holds kind {kind!r}, not dnn")
    config = dnn_mod.DnnConfig(latent_dim=meta["latent_dim"],
                               num_classes=meta["num_classes"],
                               hidden=tuple(meta["hidden"]),
                               dropout=meta["dropout"])
    model = dnn_mod.DnnModel.from_param_arrays(config, params)
    model.fold_accuracies = list(meta.get("fold_accuracies", []))
    return model


def cmd_train_synxrf(cfg: dict) -> None:
    seed = require_seed(cfg)
    paths = _paths(cfg)
    latents, labels = ae_mod.read_latents_csv(
        _require(paths["latents_csv"], "extract"))
    model = synxrf_mod.synxrf_fit(synxrf_config(cfg), latents, labels, seed)
    params, meta = synxrf_to_params(model)
    meta.update({"seed": seed, "config_hash": _hash(cfg)})
    save_checkpoint(paths["synxrf_ckpt"], "synxrf", params, meta)
    print(f"train-synxrf: fitted svm/rf/knn/gbt on {len(labels)} latents")


def cmd_train_cbam(cfg: dict) -> None:
    seed = require_seed(cfg)
    paths = _paths(cfg)
    train, val = _train_sources(cfg, paths)
    if cfg["ae_merge_fraction"] > 0.0:
        # reconstruction merge-back needs the trained autoencoder
        train = _merge_reconstructions(cfg, _load_ae(cfg, paths), train, stream=22)
    config = cbam_config(cfg, train.num_classes)
    model = cbam_mod.cbam_train(config, train, val, seed)
    meta = {"seed": seed, "config_hash": _hash(cfg), "side": config.side,
            "num_classes": config.num_classes, "widths": list(config.widths),
            "blocks": config.blocks_per_stage, "reduction": config.reduction,
            "spatial_kernel": config.spatial_kernel,
            "epochs_run": len(model.history)}
    save_checkpoint(paths["cbam_ckpt"], model.KIND, model.to_param_arrays(), meta)
    _write_history(paths["cbam_history"], ["epoch", "train_loss", "val_accuracy"],
                   model.history)
    print(f"train-cbam: best val accuracy "
          f"{max(h[2] for h in model.history):.4f}")


def _load_cbam(paths: dict) -> cbam_mod.CbamBackbone:
    kind, params, meta = load_checkpoint(_require(paths["cbam_ckpt"], "train-cbam"))
    if kind != "cbam":
        raise CliError(f"{paths['cbam_ckpt']} holds kind {kind!r}, not cbam")
    config = cbam_mod.CbamConfig(
        side=meta["side"], num_classes=meta["num_classes"],
        widths=tuple(meta["widths"]), blocks_per_stage=meta["blocks"],
        reduction=meta["reduction"], spatial_kernel=meta["spatial_kernel"])
    return cbam_mod.CbamBackbone.from_param_arrays(config, params)


def _load_net(cfg: dict, paths: dict) -> fusion_mod.CaveNet:
    return fusion_mod.CaveNet(
        cbam=_load_cbam(paths),
        dnn=_load_dnn(paths),
        synxrf=synxrf_from_checkpoint(_require(paths["synxrf_ckpt"],
                                               "train-synxrf")),
        encoder=_load_ae(cfg, paths),
        weights=tuple(cfg["fuse_weights"]))


def _write_predictions(path: str, ids: list[str], probs: np.ndarray) -> None:
    preds = metrics_mod.hard_labels(probs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "predicted_class"]
                        + [f"p{i}" for i in range(probs.shape[1])])
        for i, rid in enumerate(ids):
            writer.writerow([rid, int(preds[i])]
                            + [repr(float(v)) for v in probs[i]])


def read_predictions(path: str) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["id", "predicted_class"]:
            raise CliError(f"{path}: bad predictions header")
        ids, preds, probs = [], [], []
        for row in reader:
            ids.append(row[0])
            preds.append(int(row[1]))
            probs.append([float(v) for v in row[2:]])
    return ids, np.array(preds, dtype=np.int64), np.array(probs, dtype=np.float64)


def cmd_fuse(cfg: dict) -> None:
    paths = _paths(cfg)
    net = _load_net(cfg, paths)
    val = data_mod.ingest_directory(_require(paths["val_dir"], "gen-data"),
                                    cfg["side"])
    ids = [r.source_id for r in val.records]
    rows = fusion_mod.member_probas(net, val.pixel_batch(),
                                    parallel=bool(cfg["fuse_parallel"]))
    fused = fusion_mod.fuse_rows(rows, net.weights)
    for name in fusion_mod.MEMBER_NAMES:
        _write_predictions(os.path.join(paths["out"], f"predictions_{name}.csv"),
                           ids, rows[name])
    _write_predictions(os.path.join(paths["out"], "predictions.csv"), ids, fused)
    acc = float((metrics_mod.hard_labels(fused) == val.labels()).mean())
    print(f"fuse: wrote member + fused predictions; fused val accuracy {acc:.4f}")


def cmd_predict(cfg: dict, input_dir: str, output: str | None) -> None:
    paths = _paths(cfg)
    net = _load_net(cfg, paths)
    if not os.path.isdir(input_dir):
        raise CliError(f"input directory not found: {input_dir}")
    names = sorted(n for n in os.listdir(input_dir)
                   if n.lower().endswith((".ppm", ".pgm", ".png")))
    if not names:
        raise CliError(f"no images found under {input_dir}")
    images = []
    for name in names:
        pixels = io_mod.read_image(os.path.join(input_dir, name))
        images.append(data_mod.resize_nearest(
            data_mod.center_crop_square(pixels), cfg["side"]))
    probs, _ = fusion_mod.cavenet_predict(net, np.stack(images),
                                          parallel=bool(cfg["fuse_parallel"]))
    out_path = output or os.path.join(paths["out"], "predict.csv")
    _write_predictions(out_path, names, probs)
    print(f"predict: wrote {len(names)} rows to {out_path}")


def _truth_for(ids: list[str], manifest_path: str) -> np.ndarray:
    truth = {path: label for path, label, _prov in io_mod.read_manifest(manifest_path)}
    missing = [rid for rid in ids if rid not in truth]
    if missing:
        raise CliError(f"{len(missing)} prediction ids missing from manifest, "
                       f"first: {missing[0]}")
    return np.array([truth[rid] for rid in ids], dtype=np.int64)


def _evaluate_one(name: str, pred_path: str, manifest_path: str,
                  out_dir: str) -> metrics_mod.MetricsReport:
    ids, _preds, probs = read_predictions(pred_path)
    labels = _truth_for(ids, manifest_path)
    report = metrics_mod.report_from_predictions(labels, probs, probs.shape[1])
    cm = metrics_mod.confusion(labels, probs.argmax(axis=1), probs.shape[1])
    metrics_mod.export_heatmap(
        cm, os.path.join(out_dir, f"heatmap_{name}.ppm"),
        os.path.join(out_dir, f"cm_{name}.csv"))
    return report


def cmd_evaluate(cfg: dict, predictions: str, manifest: str, name: str) -> None:
    paths = _paths(cfg)
    os.makedirs(paths["out"], exist_ok=True)
    report = _evaluate_one(name, _require(predictions, "fuse"),
                           _require(manifest, "gen-data"), paths["out"])
    metrics_mod.write_report_csv(os.path.join(paths["out"], f"report_{name}.csv"),
                                 [(name, report)])
    print(f"evaluate[{name}]: acc {report.accuracy:.4f} "
          f"balanced {report.balanced_accuracy:.4f} auc {report.macro_auc:.4f} "
          f"combined {report.combined:.4f}")


def cmd_report(cfg: dict) -> None:
    paths = _paths(cfg)
    manifest = _require(paths["val_manifest"], "gen-data")
    rows = []
    for name in list(fusion_mod.MEMBER_NAMES) + ["cavenet"]:
        pred_path = os.path.join(
            paths["out"],
            "predictions.csv" if name == "cavenet" else f"predictions_{name}.csv")
        rows.append((name, _evaluate_one(name, _require(pred_path, "fuse"),
                                         manifest, paths["out"])))
    metrics_mod.write_report_csv(paths["report"], rows)
    metrics_mod.write_combined_csv(paths["report_combined"], rows)
    print(f"report: wrote {paths['report']} with {len(rows)} model rows")


# ---------------------------------------------------------------------------
# synxrf checkpoint packing


def synxrf_to_params(model: synxrf_mod.SynXrfModel) -> tuple[dict, dict]:
    params: dict[str, np.ndarray] = {
        "svm/W": model.svm.weights,
        "svm/b": model.svm.biases,
        "knn/X": model.knn.latents,
        "knn/y": model.knn.labels.astype(np.int32),
    }

    def pack_tree(prefix: str, tree: synxrf_mod.TreeTable) -> None:
        params[f"{prefix}/feature"] = tree.feature
        params[f"{prefix}/threshold"] = tree.threshold
        params[f"{prefix}/left"] = tree.left
        params[f"{prefix}/right"] = tree.right
        params[f"{prefix}/value"] = tree.value

    for t, tree in enumerate(model.rf.trees):
        pack_tree(f"rf/t{t:03d}", tree)
    for r, stage in enumerate(model.gbt.trees):
        for c, tree in enumerate(stage):
            pack_tree(f"gbt/r{r:03d}c{c:02d}", tree)
    meta = {
        "svm_lambda": model.svm.lam,
        "svm_temperature": model.svm.temperature,
        "rf_trees": len(model.rf.trees),
        "n_classes": model.rf.n_classes,
        "knn_k": model.knn.k,
        "gbt_rounds": len(model.gbt.trees),
        "gbt_lr": model.gbt.lr,
        "gbt_depth": model.gbt.depth,
        "voting": model.voting,
    }
    return params, meta


def synxrf_from_checkpoint(path: str) -> synxrf_mod.SynXrfModel:
    kind, params, meta = load_checkpoint(path)
    if kind != "synxrf":
        raise CliError(f"{path} holds kind {kind!r}, not synxrf")

    def unpack_tree(prefix: str) -> synxrf_mod.TreeTable:
        return synxrf_mod.TreeTable(
            params[f"{prefix}/feature"], params[f"{prefix}/threshold"],
            params[f"{prefix}/left"], params[f"{prefix}/right"],
            params[f"{prefix}/value"])

    n_classes = meta["n_classes"]
    svm = synxrf_mod.SvmModel(params["svm/W"], params["svm/b"],
                              meta["svm_lambda"], meta["svm_temperature"])
    rf = synxrf_mod.RandomForestModel(
        [unpack_tree(f"rf/t{t:03d}") for t in range(meta["rf_trees"])], n_classes)
    knn = synxrf_mod.KnnModel(params["knn/X"], params["knn/y"].astype(np.int64),
                              meta["knn_k"], n_classes)
    gbt = synxrf_mod.GbtModel(
        [[unpack_tree(f"gbt/r{r:03d}c{c:02d}") for c in range(n_classes)]
         for r in range(meta["gbt_rounds"])],
        meta["gbt_lr"], n_classes, meta["gbt_depth"])
    return synxrf_mod.SynXrfModel(svm, rf, knn, gbt, meta["voting"])


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavenet",
        description="Latent-ensemble image classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "gen-data": "generate the synthetic train/val corpus",
        "balance": "augment classes up to the per-class floor",
        "train-ae": "train the autoencoder",
        "extract": "export latents for the balanced (or val) split",
        "train-dnn": "train the latent classifier with k-fold CV",
        "train-synxrf": "fit the four classical members",
        "train-cbam": "train the attention backbone",
        "fuse": "evaluate members + fusion on the val split",
        "predict": "classify a directory of raw images",
        "evaluate": "score one predictions file against a manifest",
        "report": "write report.csv over all member predictions",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key=value config file")
        for key, (_tag, _default, key_help) in KEYS.items():
            p.add_argument(f"--{key}", default=None, help=key_help, metavar="V")
        if name == "predict":
            p.add_argument("--input-dir", required=True,
                           help="directory of raw images")
            p.add_argument("--output", default=None, help="predictions CSV path")
        if name == "evaluate":
            p.add_argument("--predictions", required=True)
            p.add_argument("--manifest", required=True)
            p.add_argument("--name", default="model")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        os.makedirs(cfg["out"], exist_ok=True)
        if args.command == "gen-data":
            cmd_gen_data(cfg)
        elif args.command == "balance":
            cmd_balance(cfg)
        elif args.command == "train-ae":
            cmd_train_ae(cfg)
        elif args.command == "extract":
            cmd_extract(cfg)
        elif args.command == "train-dnn":
            cmd_train_dnn(cfg)
        elif args.command == "train-synxrf":
            cmd_train_synxrf(cfg)
        elif args.command == "train-cbam":
            cmd_train_cbam(cfg)
        elif args.command == "fuse":
            cmd_fuse(cfg)
        elif args.command == "predict":
            cmd_predict(cfg, args.input_dir, args.output)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.predictions, args.manifest, args.name)
        elif args.command == "report":
            cmd_report(cfg)
        else:  # pragma: no cover
            raise CliError(f"unknown command {args.command}")
    except Exception as exc:  # single-line machine-parseable failure
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
