"""The seven augmentation operators and pipeline sampling.

Operator set: flip, rotate, zoom, shear, blur, noise, crop.  Geometric
operators resample with bilinear interpolation and reflect padding at the
borders; every output is clamped to [0,1] and keeps its input shape.

Parameter ranges:

* rotate  angle in [-20, +20] degrees
* zoom    scale in [0.85, 1.15]
* shear   horizontal shear angle in [-10, +10] degrees
* blur    gaussian, kernel size 5, sigma in [0.1, 1.0]
* noise   additive gaussian, sigma 0.05
* crop    area fraction in [0.85, 1.0], then resized back to the input side
* flip    independent horizontal / vertical booleans
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..rng import Rng

VARIANTS = ("flip", "rotate", "zoom", "shear", "blur", "noise", "crop")

ROTATE_RANGE = (-20.0, 20.0)
ZOOM_RANGE = (0.85, 1.15)
SHEAR_RANGE = (-10.0, 10.0)
BLUR_KERNEL = 5
BLUR_SIGMA_RANGE = (0.1, 1.0)
NOISE_SIGMA = 0.05
CROP_FRACTION_RANGE = (0.85, 1.0)


@dataclass(frozen=True)
class AugmentOp:
    """One sampled transformation: a variant tag plus its parameters."""

    variant: str
    params: tuple

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown augmentation variant {self.variant!r}")


def sample_op(variant: str, rng: Rng) -> AugmentOp:
    """Draw fresh parameters for one operator variant."""
    if variant == "flip":
        params = (rng.bernoulli(0.5), rng.bernoulli(0.5))
    elif variant == "rotate":
        params = (rng.uniform((), *ROTATE_RANGE),)
    elif variant == "zoom":
        params = (rng.uniform((), *ZOOM_RANGE),)
    elif variant == "shear":
        params = (rng.uniform((), *SHEAR_RANGE),)
    elif variant == "blur":
        params = (rng.uniform((), *BLUR_SIGMA_RANGE),)
    elif variant == "noise":
        params = (NOISE_SIGMA,)
    elif variant == "crop":
        # area fraction plus normalised offsets into the leftover margin
        params = (rng.uniform((), *CROP_FRACTION_RANGE), rng.uniform(), rng.uniform())
    else:
        raise ValueError(f"unknown augmentation variant {variant!r}")
    return AugmentOp(variant, params)


def sample_pipeline(rng: Rng) -> list[AugmentOp]:
    """Two to four distinct operator variants, each with fresh parameters.

    Application order is the sampling order.
    """
    count = 2 + rng.randint(3)
    order = rng.permutation(len(VARIANTS))[:count]
    return [sample_op(VARIANTS[i], rng) for i in order]


# ---------------------------------------------------------------------------
# resampling machinery


def _reflect(coords: np.ndarray, size: int) -> np.ndarray:
    """Fold float coordinates into [0, size-1] by edge reflection (abcba)."""
    if size == 1:
        return np.zeros_like(coords)
    period = 2.0 * (size - 1)
    folded = np.mod(coords, period)
    return (size - 1) - np.abs(folded - (size - 1))


def bilinear_sample(pixels: np.ndarray, src_y: np.ndarray, src_x: np.ndarray) -> np.ndarray:
    """Gather [3,H,W] pixels at float source coords with reflect padding."""
    h, w = pixels.shape[1], pixels.shape[2]
    sy = _reflect(src_y, h)
    sx = _reflect(src_x, w)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0).astype(np.float32)
    fx = (sx - x0).astype(np.float32)
    p00 = pixels[:, y0, x0]
    p01 = pixels[:, y0, x1]
    p10 = pixels[:, y1, x0]
    p11 = pixels[:, y1, x1]
    top = p00 * (1 - fx) + p01 * fx
    bot = p10 * (1 - fx) + p11 * fx
    return top * (1 - fy) + bot * fy


def _affine_grid(h: int, w: int, inv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Source coordinates for each target pixel under a 2x3 inverse map
    acting about the image centre."""
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64) - cy,
                         np.arange(w, dtype=np.float64) - cx, indexing="ij")
    src_y = inv[0, 0] * ys + inv[0, 1] * xs + inv[0, 2] + cy
    src_x = inv[1, 0] * ys + inv[1, 1] * xs + inv[1, 2] + cx
    return src_y, src_x


def _warp(pixels: np.ndarray, inv: np.ndarray) -> np.ndarray:
    src_y, src_x = _affine_grid(pixels.shape[1], pixels.shape[2], inv)
    return bilinear_sample(pixels, src_y, src_x)


def rotate(pixels: np.ndarray, angle_deg: float) -> np.ndarray:
    t = math.radians(angle_deg)
    inv = np.array([[math.cos(t), -math.sin(t), 0.0],
                    [math.sin(t), math.cos(t), 0.0]])
    return _warp(pixels, inv)


def zoom(pixels: np.ndarray, factor: float) -> np.ndarray:
    inv = np.array([[1.0 / factor, 0.0, 0.0],
                    [0.0, 1.0 / factor, 0.0]])
    return _warp(pixels, inv)


def shear(pixels: np.ndarray, angle_deg: float) -> np.ndarray:
    # horizontal shear: columns slide proportionally to their row offset
    inv = np.array([[1.0, 0.0, 0.0],
                    [-math.tan(math.radians(angle_deg)), 1.0, 0.0]])
    return _warp(pixels, inv)


def flip(pixels: np.ndarray, horizontal: bool, vertical: bool) -> np.ndarray:
    out = pixels
    if horizontal:
        out = out[:, :, ::-1]
    if vertical:
        out = out[:, ::-1, :]
    return np.ascontiguousarray(out)


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def blur(pixels: np.ndarray, sigma: float, size: int = BLUR_KERNEL) -> np.ndarray:
    """Separable gaussian blur with reflect padding."""
    k = gaussian_kernel(size, sigma).astype(np.float32)
    half = size // 2
    padded = np.pad(pixels, ((0, 0), (half, half), (half, half)), mode="reflect")
    h = pixels.shape[1]
    rows = sum(k[i] * padded[:, i:i + h, :] for i in range(size))
    w = pixels.shape[2]
    out = sum(k[i] * rows[:, :, i:i + w] for i in range(size))
    return out.astype(np.float32)


def crop_resize(pixels: np.ndarray, fraction: float, off_u: float, off_v: float) -> np.ndarray:
    """Crop a square of `fraction` of the area at a uniform offset, then
    resize back to the input side with bilinear sampling."""
    h, w = pixels.shape[1], pixels.shape[2]
    side = min(h, w)
    crop_side = max(1, int(round(side * math.sqrt(fraction))))
    oy = int(round(off_u * (h - crop_side)))
    ox = int(round(off_v * (w - crop_side)))
    ys = np.linspace(oy, oy + crop_side - 1, h)
    xs = np.linspace(ox, ox + crop_side - 1, w)
    src_y, src_x = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(pixels, src_y, src_x)


def resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = pixels.shape[1], pixels.shape[2]
    ys = np.linspace(0, h - 1, out_h)
    xs = np.linspace(0, w - 1, out_w)
    src_y, src_x = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(pixels, src_y, src_x)


def apply_op_pixels(pixels: np.ndarray, op: AugmentOp, rng: Rng) -> np.ndarray:
    """Apply one operator to a [3,H,W] float array, clamped to [0,1]."""
    if op.variant == "flip":
        out = flip(pixels, *op.params)
    elif op.variant == "rotate":
        out = rotate(pixels, op.params[0])
    elif op.variant == "zoom":
        out = zoom(pixels, op.params[0])
    elif op.variant == "shear":
        out = shear(pixels, op.params[0])
    elif op.variant == "blur":
        out = blur(pixels, op.params[0])
    elif op.variant == "noise":
        out = pixels + rng.normal(pixels.shape, 0.0, op.params[0]).astype(np.float32)
    elif op.variant == "crop":
        out = crop_resize(pixels, *op.params)
    else:
        raise ValueError(f"unknown augmentation variant {op.variant!r}")
    return np.clip(out, 0.0, 1.0).astype(np.float32)
