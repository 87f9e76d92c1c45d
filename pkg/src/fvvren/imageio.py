"""Raster file I/O: PFM depth maps, PGM/PPM binary images, PNG via Pillow."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ParseError


def write_pfm(path, data: np.ndarray) -> None:
    """Grayscale PFM (Pf), little-endian float32, scale -1.0."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ValueError("write_pfm expects a 2D raster")
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        # PFM stores rows bottom-to-top
        f.write(np.flipud(data).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"Pf":
            raise ParseError(f"{path}: not a grayscale PFM (magic {magic!r})")
        dims = f.readline().split()
        if len(dims) != 2:
            raise ParseError(f"{path}: malformed PFM dimension line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        raw = f.read(w * h * 4)
        if len(raw) != w * h * 4:
            raise ParseError(f"{path}: truncated PFM payload")
    endian = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(raw, dtype=endian).reshape(h, w)
    return np.flipud(data).astype(np.float32)


def write_pgm(path, data: np.ndarray) -> None:
    """Binary PGM (P5), maxval 255. Accepts uint8 or floats in [0, 1]."""
    data = _to_u8(data)
    if data.ndim != 2:
        raise ValueError("write_pgm expects a 2D raster")
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    magic, w, h, maxval, raw = _read_pnm(path, b"P5", 1)
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w)


def write_ppm(path, rgb: np.ndarray) -> None:
    """Binary PPM (P6). Accepts uint8 or floats in [0, 1], shape (H, W, 3)."""
    rgb = _to_u8(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("write_ppm expects an (H, W, 3) raster")
    h, w, _ = rgb.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    magic, w, h, maxval, raw = _read_pnm(path, b"P6", 3)
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)


def write_png(path, data: np.ndarray) -> None:
    """8-bit PNG, grayscale for 2D input, RGB for (H, W, 3)."""
    Image.fromarray(_to_u8(data)).save(path, format="PNG")


def read_png(path) -> np.ndarray:
    return np.asarray(Image.open(path))


def png_bytes(data: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(_to_u8(data)).save(buf, format="PNG")
    return buf.getvalue()


def read_mask_pgm(path) -> np.ndarray:
    """Foreground mask from a P5 PGM: pixel >= 128 is foreground."""
    return read_pgm(path) >= 128


def _to_u8(data: np.ndarray) -> np.ndarray:
    data = np.asarray(data)
    if data.dtype == np.uint8:
        return data
    if data.dtype == bool:
        return data.astype(np.uint8) * 255
    return np.clip(np.rint(np.asarray(data, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def _read_pnm(path, expected_magic: bytes, channels: int):
    with open(path, "rb") as f:
        content = f.read()
    tokens = []
    pos = 0
    # header = 4 whitespace-separated tokens, '#' comments allowed
    while len(tokens) < 4:
        while pos < len(content) and content[pos : pos + 1].isspace():
            pos += 1
        if pos < len(content) and content[pos : pos + 1] == b"#":
            nl = content.find(b"\n", pos)
            pos = len(content) if nl < 0 else nl + 1
            continue
        start = pos
        while pos < len(content) and not content[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PNM header")
        tokens.append(content[start:pos])
    magic = tokens[0]
    if magic != expected_magic:
        raise ParseError(f"{path}: expected {expected_magic.decode()} magic, got {magic!r}")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as e:
        raise ParseError(f"{path}: non-numeric PNM header field") from e
    if maxval != 255:
        raise ParseError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    raw = content[pos : pos + w * h * channels]
    if len(raw) != w * h * channels:
        raise ParseError(f"{path}: truncated PNM payload")
    return magic, w, h, maxval, raw
