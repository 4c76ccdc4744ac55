"""Minimal binary PPM/PGM image IO.

Raster previews are written as netpbm files so dataset contents can be
inspected with any image viewer without an imaging dependency.
"""

from __future__ import annotations

import os

import numpy as np


def _to_u8(image: np.ndarray) -> np.ndarray:
    if image.dtype == np.uint8:
        return image
    return (np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).round().astype(np.uint8)


def write_ppm(path: str | os.PathLike, image: np.ndarray) -> None:
    """Write an (H, W, 3) color image as binary PPM (P6)."""
    img = _to_u8(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3), got {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def write_pgm(path: str | os.PathLike, image: np.ndarray) -> None:
    """Write an (H, W) grayscale image as binary PGM (P5)."""
    img = _to_u8(image)
    if img.ndim != 2:
        raise ValueError(f"expected (H, W), got {img.shape}")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def _read_netpbm(path: str | os.PathLike, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(magic):
        raise ValueError(f"not a {magic.decode()} file")
    # header = magic, width, height, maxval; comments start with '#'
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    count = h * w * channels
    img = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return img.reshape(shape).copy()


def read_ppm(path: str | os.PathLike) -> np.ndarray:
    return _read_netpbm(path, b"P6", 3)


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    return _read_netpbm(path, b"P5", 1)
