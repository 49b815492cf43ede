"""Datasets: ingestion, synthetic generation, augmentation, rebalancing.

The class taxonomy is fixed and alphabetical; labels are always indices into
it.  Records carry float32 [3,H,W] pixel tensors in [0,1] plus a provenance
tag documenting whether they are originals, augmented copies, or autoencoder
reconstructions.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..rng import Rng
from ..tensor import Tensor
from . import augment as _augment
from . import io as _io
from . import synthetic as _synthetic
from .augment import AugmentOp, sample_op, sample_pipeline

CLASS_NAMES = (
    "Angioectasia",
    "Bleeding",
    "Erosion",
    "Erythema",
    "Foreign Body",
    "Lymphangiectasia",
    "Normal",
    "Polyp",
    "Ulcer",
    "Worms",
)

NUM_CLASSES = len(CLASS_NAMES)

_NAME_TO_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

PROVENANCES = ("original", "augmented", "reconstructed")


class DatasetError(ValueError):
    """Dataset construction or ingestion failure."""


def class_index(name: str) -> int:
    try:
        return _NAME_TO_INDEX[name]
    except KeyError:
        raise DatasetError(f"unknown class name {name!r}; expected one of "
                           f"{', '.join(CLASS_NAMES)}") from None


def class_name(index: int) -> str:
    if not 0 <= index < NUM_CLASSES:
        raise DatasetError(f"class index {index} outside [0,{NUM_CLASSES})")
    return CLASS_NAMES[index]


@dataclass(frozen=True)
class ImageRecord:
    """One labelled image; pixels live in [0,1] with shape [3,H,W]."""

    pixels: Tensor
    label: int
    provenance: str
    source_id: str

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[0] != 3:
            raise DatasetError(f"record pixels must be [3,H,W], got {self.pixels.shape}")
        if not 0 <= self.label < NUM_CLASSES:
            raise DatasetError(f"label {self.label} outside [0,{NUM_CLASSES})")
        if self.provenance not in PROVENANCES:
            raise DatasetError(f"provenance must be one of {PROVENANCES}, "
                               f"got {self.provenance!r}")
        lo = float(self.pixels.data.min(initial=0.0))
        hi = float(self.pixels.data.max(initial=0.0))
        if lo < 0.0 or hi > 1.0:
            raise DatasetError(f"pixels outside [0,1]: min {lo}, max {hi}")


def make_record(pixels: np.ndarray, label: int, provenance: str, source_id: str) -> ImageRecord:
    return ImageRecord(Tensor(np.clip(pixels, 0.0, 1.0)), int(label), provenance, source_id)


class LabeledDataset:
    """Ordered list of records with a class-count table."""

    def __init__(self, records: list[ImageRecord]):
        if not records:
            raise DatasetError("dataset is empty")
        side = records[0].pixels.shape
        for r in records:
            if r.pixels.shape != side:
                raise DatasetError(f"mixed pixel shapes: {side} vs {r.pixels.shape}")
        self.records = list(records)
        counts = np.zeros(NUM_CLASSES, dtype=np.int64)
        for r in self.records:
            counts[r.label] += 1
        self.class_counts = counts

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def image_shape(self) -> tuple:
        return self.records[0].pixels.shape

    @property
    def num_classes(self) -> int:
        """Smallest C covering all labels present."""
        return int(np.max(np.nonzero(self.class_counts)[0])) + 1

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def pixel_batch(self) -> np.ndarray:
        """All records stacked as [N,3,H,W] float32."""
        return np.stack([r.pixels.data for r in self.records])

    def recount(self) -> np.ndarray:
        counts = np.zeros(NUM_CLASSES, dtype=np.int64)
        for r in self.records:
            counts[r.label] += 1
        return counts


# ---------------------------------------------------------------------------
# ingestion


def center_crop_square(pixels: np.ndarray) -> np.ndarray:
    h, w = pixels.shape[1], pixels.shape[2]
    side = min(h, w)
    oy = (h - side) // 2
    ox = (w - side) // 2
    return pixels[:, oy:oy + side, ox:ox + side]


def resize_nearest(pixels: np.ndarray, side: int) -> np.ndarray:
    """Nearest-neighbour resize of a square [3,S,S] image to [3,side,side]."""
    src = pixels.shape[1]
    idx = np.minimum((np.arange(side, dtype=np.float64) + 0.5) * src / side, src - 1)
    idx = idx.astype(np.int64)
    return np.ascontiguousarray(pixels[:, idx][:, :, idx])


def ingest_directory(path: str, side: int) -> LabeledDataset:
    """Load `<path>/<ClassName>/*.{ppm,pgm,png}` as a dataset.

    Every image is centre-cropped square and resized (nearest neighbour) to
    side x side.  Ordering is deterministic: class directories and filenames
    are both walked lexicographically.
    """
    if side < 1:
        raise DatasetError(f"side must be positive, got {side}")
    if not os.path.isdir(path):
        raise DatasetError(f"dataset directory not found: {path}")
    records: list[ImageRecord] = []
    for entry in sorted(os.listdir(path)):
        subdir = os.path.join(path, entry)
        if not os.path.isdir(subdir):
            continue
        label = class_index(entry)  # raises on unknown class directory
        names = sorted(n for n in os.listdir(subdir)
                       if n.lower().endswith((".ppm", ".pgm", ".png")))
        for name in names:
            full = os.path.join(subdir, name)
            try:
                pixels = _io.read_image(full)
            except (OSError, _io.ImageFormatError) as exc:
                raise DatasetError(f"unreadable image {full}: {exc}") from exc
            pixels = resize_nearest(center_crop_square(pixels), side)
            records.append(make_record(pixels, label, "original",
                                       os.path.join(entry, name)))
    if not records:
        raise DatasetError(f"no images found under {path}")
    return LabeledDataset(records)


def export_directory(ds: LabeledDataset, root: str, manifest_path: str | None = None) -> None:
    """Write a dataset back out as `<root>/<ClassName>/<n>.ppm` + manifest."""
    os.makedirs(root, exist_ok=True)
    rows = []
    per_class_counter = np.zeros(NUM_CLASSES, dtype=np.int64)
    for record in ds.records:
        cname = class_name(record.label)
        cdir = os.path.join(root, cname)
        os.makedirs(cdir, exist_ok=True)
        fname = f"{per_class_counter[record.label]:06d}.ppm"
        per_class_counter[record.label] += 1
        _io.write_ppm(os.path.join(cdir, fname), record.pixels.data)
        rows.append((os.path.join(cname, fname), record.label, record.provenance))
    if manifest_path:
        _io.write_manifest(manifest_path, rows)


# ---------------------------------------------------------------------------
# synthetic corpus


def generate_synthetic(classes: int, per_class: int, side: int, seed: int) -> LabeledDataset:
    """Deterministic synthetic corpus: `classes` texture families, `per_class`
    records each.  Record i of class c draws from an independent forked
    stream, so the result is bit-identical for a given (classes, per_class,
    side, seed) regardless of generation order."""
    if not 1 <= classes <= NUM_CLASSES:
        raise DatasetError(f"classes must be in [1,{NUM_CLASSES}], got {classes}")
    if side < 16:
        raise DatasetError(f"side must be >= 16, got {side}")
    if per_class < 1:
        raise DatasetError(f"per_class must be positive, got {per_class}")
    root = Rng(seed)
    records = []
    for c in range(classes):
        for i in range(per_class):
            rng = root.fork((c << 32) | i)
            pixels = _synthetic.render_record_pixels(c, side, rng)
            records.append(make_record(pixels, c, "original",
                                       f"syn/{class_name(c)}/{i:05d}"))
    return LabeledDataset(records)


# ---------------------------------------------------------------------------
# augmentation at the record level


def apply_op(record: ImageRecord, op: AugmentOp, rng: Rng) -> ImageRecord:
    """One operator applied to one record; output provenance is 'augmented'."""
    out = _augment.apply_op_pixels(record.pixels.data, op, rng)
    return make_record(out, record.label, "augmented", record.source_id)


def augment_record(record: ImageRecord, rng: Rng, tag: str) -> ImageRecord:
    """Fresh 2-4 op pipeline applied to a record."""
    pixels = record.pixels.data
    for op in sample_pipeline(rng):
        pixels = _augment.apply_op_pixels(pixels, op, rng)
    return make_record(pixels, record.label, "augmented", f"{record.source_id}#{tag}")


def balanced_counts(counts: np.ndarray, floor: int) -> np.ndarray:
    """Post-balancing per-class counts: max(original, floor) where present."""
    counts = np.asarray(counts, dtype=np.int64)
    out = counts.copy()
    out[counts > 0] = np.maximum(counts[counts > 0], floor)
    return out


def balance_dataset(ds: LabeledDataset, floor: int, rng: Rng) -> LabeledDataset:
    """Top up every class below `floor` with augmented copies.

    Source images cycle round-robin so each original contributes before any
    repeats.  Each new record uses an rng forked from (class, copy index),
    making the result independent of iteration order.  Originals are kept
    verbatim; classes at or above the floor are untouched.
    """
    if floor < 0:
        raise DatasetError(f"floor must be non-negative, got {floor}")
    counts = ds.recount()
    present = np.nonzero(counts)[0]
    for c in present:
        if counts[c] == 0:
            raise DatasetError(f"class {class_name(c)} is empty")
    by_class: dict[int, list[ImageRecord]] = {int(c): [] for c in present}
    for record in ds.records:
        by_class[record.label].append(record)
    new_records = list(ds.records)
    for c in present:
        have = int(counts[c])
        need = max(0, floor - have)
        sources = by_class[int(c)]
        for j in range(need):
            src = sources[j % have]
            child = rng.fork((int(c) << 40) | j)
            new_records.append(augment_record(src, child, f"aug{j:06d}"))
    return LabeledDataset(new_records)


# ---------------------------------------------------------------------------

__all__ = [
    "AugmentOp",
    "CLASS_NAMES",
    "DatasetError",
    "ImageRecord",
    "LabeledDataset",
    "NUM_CLASSES",
    "apply_op",
    "augment_record",
    "balance_dataset",
    "balanced_counts",
    "center_crop_square",
    "class_index",
    "class_name",
    "export_directory",
    "generate_synthetic",
    "ingest_directory",
    "make_record",
    "resize_nearest",
    "sample_op",
    "sample_pipeline",
]
