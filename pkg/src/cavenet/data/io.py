"""Image and manifest file I/O.

PPM (P6 binary, P3 ascii) is the canonical raster format for ingestion and
export; 8-bit non-interlaced PNG (gray / RGB / RGBA) is supported read-only.
Pixels are exchanged as float32 [3,H,W] arrays in [0,1].
"""

from __future__ import annotations

import csv
import struct
import zlib

import numpy as np


class ImageFormatError(ValueError):
    """Raster file cannot be parsed."""


# ---------------------------------------------------------------------------
# PPM / PGM


def _read_ppm_tokens(blob: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integer header tokens, skipping
    '#' comments. Returns (tokens, offset one past the whitespace byte that
    terminates the last token)."""
    tokens: list[int] = []
    i = 0
    n = len(blob)
    while len(tokens) < count:
        while i < n and blob[i:i + 1].isspace():
            i += 1
        if i < n and blob[i:i + 1] == b"#":
            while i < n and blob[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < n and not blob[i:i + 1].isspace():
            i += 1
        if start == i:
            raise ImageFormatError("truncated PPM header")
        tokens.append(int(blob[start:i]))
    return tokens, i + 1


def read_ppm(path: str) -> np.ndarray:
    """Load a P6/P3 PPM (or P5/P2 PGM) as float32 [3,H,W] in [0,1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    magic = blob[:2]
    if magic not in (b"P6", b"P3", b"P5", b"P2"):
        raise ImageFormatError(f"{path}: not a PPM/PGM file (magic {magic!r})")
    channels = 3 if magic in (b"P6", b"P3") else 1
    (w, h, maxval), offset = _read_ppm_tokens(blob[2:], 3)
    offset += 2
    if w < 1 or h < 1:
        raise ImageFormatError(f"{path}: bad dimensions {w}x{h}")
    if maxval < 1 or maxval > 255:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval}")
    need = w * h * channels
    if magic in (b"P6", b"P5"):
        raw = blob[offset:offset + need]
        if len(raw) < need:
            raise ImageFormatError(f"{path}: truncated pixel data")
        flat = np.frombuffer(raw, dtype=np.uint8, count=need)
    else:
        values = blob[offset:].split()
        if len(values) < need:
            raise ImageFormatError(f"{path}: truncated pixel data")
        flat = np.array([int(v) for v in values[:need]], dtype=np.uint16)
    img = flat.reshape(h, w, channels).astype(np.float32) / float(maxval)
    if channels == 1:
        img = np.repeat(img, 3, axis=2)
    return np.ascontiguousarray(img.transpose(2, 0, 1))


def write_ppm(path: str, pixels: np.ndarray) -> None:
    """Write float32 [3,H,W] in [0,1] as binary P6 with maxval 255."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"write_ppm needs [3,H,W], got {arr.shape}")
    byts = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape[1], arr.shape[2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(byts.transpose(1, 2, 0).tobytes())


def write_pgm(path: str, gray: np.ndarray) -> None:
    """Write float32 [H,W] in [0,1] as binary P5 with maxval 255."""
    arr = np.asarray(gray)
    if arr.ndim != 2:
        raise ValueError(f"write_pgm needs [H,W], got {arr.shape}")
    byts = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
        fh.write(byts.tobytes())


# ---------------------------------------------------------------------------
# PNG (read-only, 8-bit, non-interlaced)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def read_png(path: str) -> np.ndarray:
    """Load an 8-bit non-interlaced PNG as float32 [3,H,W] in [0,1].

    Alpha, when present, is dropped.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != b"\x89PNG\r\n\x1a\n":
        raise ImageFormatError(f"{path}: not a PNG file")
    pos = 8
    width = height = color = None
    idat = bytearray()
    while pos + 8 <= len(blob):
        length, ctype = struct.unpack(">I4s", blob[pos:pos + 8])
        body = blob[pos + 8:pos + 8 + length]
        pos += 12 + length
        if ctype == b"IHDR":
            width, height, bitdepth, color, _, _, interlace = struct.unpack(
                ">IIBBBBB", body)
            if bitdepth != 8 or color not in (0, 2, 6) or interlace != 0:
                raise ImageFormatError(
                    f"{path}: only 8-bit non-interlaced gray/RGB/RGBA PNG supported "
                    f"(bitdepth {bitdepth}, color {color}, interlace {interlace})")
        elif ctype == b"IDAT":
            idat.extend(body)
        elif ctype == b"IEND":
            break
    if width is None:
        raise ImageFormatError(f"{path}: missing IHDR")
    ch = {0: 1, 2: 3, 6: 4}[color]
    raw = zlib.decompress(bytes(idat))
    stride = width * ch
    if len(raw) < height * (stride + 1):
        raise ImageFormatError(f"{path}: truncated PNG data")
    rows = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.int32)
    for y in range(height):
        ftype = raw[y * (stride + 1)]
        line = np.frombuffer(
            raw[y * (stride + 1) + 1:(y + 1) * (stride + 1)], dtype=np.uint8
        ).astype(np.int32)
        if ftype == 0:
            cur = line
        elif ftype == 2:  # up
            cur = (line + prev) & 0xFF
        else:  # sub/average/paeth carry a left dependency per pixel
            cur = np.zeros(stride, dtype=np.int32)
            for x in range(stride):
                left = cur[x - ch] if x >= ch else 0
                up = prev[x]
                ul = prev[x - ch] if x >= ch else 0
                if ftype == 1:
                    cur[x] = (line[x] + left) & 0xFF
                elif ftype == 3:
                    cur[x] = (line[x] + (left + up) // 2) & 0xFF
                elif ftype == 4:
                    cur[x] = (line[x] + _paeth(left, up, ul)) & 0xFF
                else:
                    raise ImageFormatError(f"{path}: bad filter type {ftype}")
        rows[y] = cur.astype(np.uint8)
        prev = cur
    img = rows.reshape(height, width, ch).astype(np.float32) / 255.0
    if ch == 1:
        img = np.repeat(img, 3, axis=2)
    elif ch == 4:
        img = img[:, :, :3]
    return np.ascontiguousarray(img.transpose(2, 0, 1))


def read_image(path: str) -> np.ndarray:
    """Dispatch on extension: .ppm/.pgm mandatory formats, .png optional."""
    lower = path.lower()
    if lower.endswith((".ppm", ".pgm")):
        return read_ppm(path)
    if lower.endswith(".png"):
        return read_png(path)
    raise ImageFormatError(f"{path}: unsupported image extension")


# ---------------------------------------------------------------------------
# manifests


MANIFEST_HEADER = ["path", "label", "provenance"]


def write_manifest(path: str, rows: list[tuple[str, int, str]]) -> None:
    """CSV with columns path,label,provenance."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for rel, label, provenance in rows:
            writer.writerow([rel, int(label), provenance])


def read_manifest(path: str) -> list[tuple[str, int, str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: bad manifest header {header}")
        return [(rel, int(label), provenance) for rel, label, provenance in reader]
