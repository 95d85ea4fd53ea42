"""Binary PPM (color) and PGM (gray/mask) image I/O, 8-bit, maxval 255.

These formats are bit-exact and dependency free, which keeps golden-file
tests and determinism checks trivial. Masks are written as PGM with
0 = clear and 255 = set; soft masks as weight * 255 rounded half-up.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ImageFormatError",
    "read_ppm",
    "write_ppm",
    "read_pgm",
    "write_pgm",
    "write_mask",
    "read_mask",
    "write_soft_mask",
]


class ImageFormatError(ValueError):
    pass


def _read_tokens(data: bytes, path, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace-separated header tokens, honoring '#' comments.

    Returns the tokens and the offset of the byte right after the single
    whitespace that terminates the last token (start of binary data).
    """
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ImageFormatError(f"{path}: truncated header")
        tokens.append(data[start:i])
    if i >= n or not data[i : i + 1].isspace():
        raise ImageFormatError(f"{path}: truncated header")
    return tokens, i + 1


def _read_netpbm(path, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if not data:
        raise ImageFormatError(f"{path}: empty file")
    tokens, offset = _read_tokens(data, path, 4)
    if tokens[0] != magic:
        raise ImageFormatError(
            f"{path}: expected binary {magic.decode()} image, got magic {tokens[0][:2]!r}"
        )
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ImageFormatError(f"{path}: non-numeric header fields") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"{path}: only maxval 255 supported, got {maxval}")
    expected = width * height * channels
    raw = data[offset : offset + expected]
    if len(raw) != expected:
        raise ImageFormatError(f"{path}: expected {expected} data bytes, got {len(raw)}")
    arr = np.frombuffer(raw, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return arr.reshape(height, width, channels).copy()


def _write_netpbm(arr: np.ndarray, path, magic: bytes) -> None:
    if arr.size == 0:
        raise ImageFormatError(f"{path}: refusing to write empty raster")
    if arr.dtype != np.uint8:
        raise ImageFormatError(f"{path}: raster must be uint8, got {arr.dtype}")
    height, width = arr.shape[0], arr.shape[1]
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 image into an (H, W, 3) uint8 array, top-left origin."""
    return _read_netpbm(path, b"P6", 3)


def write_ppm(image: np.ndarray, path) -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise ImageFormatError(f"{path}: expected (H, W, 3) raster, got {image.shape}")
    _write_netpbm(image, path, b"P6")


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 image into an (H, W) uint8 array."""
    return _read_netpbm(path, b"P5", 1)


def write_pgm(gray: np.ndarray, path) -> None:
    if gray.ndim != 2:
        raise ImageFormatError(f"{path}: expected (H, W) raster, got {gray.shape}")
    _write_netpbm(gray, path, b"P5")


def write_mask(mask: np.ndarray, path) -> None:
    """Write a boolean mask as PGM, 255 where set."""
    write_pgm(np.where(mask, 255, 0).astype(np.uint8), path)


def read_mask(path) -> np.ndarray:
    return read_pgm(path) != 0


def write_soft_mask(weights: np.ndarray, path) -> None:
    """Write [0, 1] weights as PGM, scaled by 255 and rounded half-up."""
    write_pgm(np.floor(weights * 255.0 + 0.5).astype(np.uint8), path)
