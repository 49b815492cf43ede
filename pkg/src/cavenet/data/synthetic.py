"""Synthetic labelled corpus generation.

Each class index renders a distinct spatial texture family; colour tint and
brightness are drawn from the same distribution for every class so that the
class signal lives in spatial structure, not in pixel means.  That keeps the
classes hard for a linear model on raw pixels while trivially separable for
a small convolutional net.
"""

from __future__ import annotations

import math

import numpy as np

from ..rng import Rng


def _grid(side: int):
    ys, xs = np.meshgrid(np.arange(side, dtype=np.float64),
                         np.arange(side, dtype=np.float64), indexing="ij")
    return ys, xs


def _blobs(side: int, rng: Rng) -> np.ndarray:
    ys, xs = _grid(side)
    pattern = np.zeros((side, side))
    sigma = side / 7.0
    for _ in range(3):
        cy = rng.uniform((), 0.2 * side, 0.8 * side)
        cx = rng.uniform((), 0.2 * side, 0.8 * side)
        pattern += np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2 * sigma ** 2))
    return np.clip(pattern, 0.0, 1.0)


def _stripes(side: int, rng: Rng, angle_deg: float) -> np.ndarray:
    ys, xs = _grid(side)
    theta = math.radians(angle_deg + rng.uniform((), -6.0, 6.0))
    t = ys * math.cos(theta) + xs * math.sin(theta)
    freq = rng.uniform((), 3.0, 4.5)
    phase = rng.uniform((), 0.0, 2 * math.pi)
    return 0.5 + 0.5 * np.sin(2 * math.pi * freq * t / side + phase)


def _checker(side: int, rng: Rng) -> np.ndarray:
    ys, xs = _grid(side)
    tiles = 3 + rng.randint(2)
    oy = rng.uniform((), 0.0, side / tiles)
    ox = rng.uniform((), 0.0, side / tiles)
    cell = side / tiles
    return ((np.floor((ys + oy) / cell) + np.floor((xs + ox) / cell)) % 2).astype(np.float64)


def _rings(side: int, rng: Rng) -> np.ndarray:
    ys, xs = _grid(side)
    cy = side / 2 + rng.uniform((), -0.15 * side, 0.15 * side)
    cx = side / 2 + rng.uniform((), -0.15 * side, 0.15 * side)
    r = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
    wavelength = rng.uniform((), 0.18 * side, 0.3 * side)
    phase = rng.uniform((), 0.0, 2 * math.pi)
    return 0.5 + 0.5 * np.sin(2 * math.pi * r / wavelength + phase)


def _gradient(side: int, rng: Rng) -> np.ndarray:
    ys, xs = _grid(side)
    theta = rng.uniform((), 0.0, 2 * math.pi)
    t = (ys * math.cos(theta) + xs * math.sin(theta)) / side
    t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
    return t


def _disk(side: int, rng: Rng) -> np.ndarray:
    ys, xs = _grid(side)
    cy = side / 2 + rng.uniform((), -0.12 * side, 0.12 * side)
    cx = side / 2 + rng.uniform((), -0.12 * side, 0.12 * side)
    radius = rng.uniform((), 0.25 * side, 0.38 * side)
    r = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
    return 1.0 / (1.0 + np.exp((r - radius) * 4.0 / max(side / 16.0, 1.0)))


def _crescent(side: int, rng: Rng) -> np.ndarray:
    full = _disk(side, rng)
    ys, xs = _grid(side)
    cy = side / 2 + rng.uniform((), -0.05 * side, 0.25 * side)
    cx = side / 2 + rng.uniform((), -0.05 * side, 0.25 * side)
    radius = 0.3 * side
    r = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
    bite = 1.0 / (1.0 + np.exp((r - radius) * 4.0 / max(side / 16.0, 1.0)))
    return np.clip(full - bite, 0.0, 1.0)


def _curves(side: int, rng: Rng) -> np.ndarray:
    ys, xs = _grid(side)
    pattern = np.zeros((side, side))
    width = max(side / 18.0, 1.0)
    for _ in range(2):
        amp = rng.uniform((), 0.1 * side, 0.25 * side)
        freq = rng.uniform((), 1.0, 2.0)
        phase = rng.uniform((), 0.0, 2 * math.pi)
        base = rng.uniform((), 0.25 * side, 0.75 * side)
        centreline = base + amp * np.sin(2 * math.pi * freq * xs / side + phase)
        pattern += np.exp(-((ys - centreline) ** 2) / (2 * width ** 2))
    return np.clip(pattern, 0.0, 1.0)


def render_pattern(class_index: int, side: int, rng: Rng) -> np.ndarray:
    """Class-specific intensity pattern [H,W] in [0,1]."""
    if class_index == 0:
        return _blobs(side, rng)
    if class_index == 1:
        return _stripes(side, rng, 0.0)     # horizontal bands
    if class_index == 2:
        return _stripes(side, rng, 90.0)    # vertical bands
    if class_index == 3:
        return _stripes(side, rng, 45.0)    # diagonal bands
    if class_index == 4:
        return _checker(side, rng)
    if class_index == 5:
        return _rings(side, rng)
    if class_index == 6:
        return _gradient(side, rng)
    if class_index == 7:
        return _disk(side, rng)
    if class_index == 8:
        return _crescent(side, rng)
    if class_index == 9:
        return _curves(side, rng)
    raise ValueError(f"class index {class_index} outside the 10-class taxonomy")


def render_record_pixels(class_index: int, side: int, rng: Rng) -> np.ndarray:
    """One synthetic image [3,H,W]: tinted pattern plus pixel noise.

    Tint and base brightness are class-independent draws.
    """
    pattern = render_pattern(class_index, side, rng)
    tint = rng.uniform(3, 0.55, 1.0)
    base = rng.uniform((), 0.08, 0.22)
    img = base + (0.95 - base) * pattern[None, :, :] * tint[:, None, None]
    img = img + rng.normal((3, side, side), 0.0, 0.03)
    return np.clip(img, 0.0, 1.0).astype(np.float32)
