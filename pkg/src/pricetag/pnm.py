"""Image codecs: binary PGM (P5) and PPM (P6), with optional PNG via Pillow."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np


class CodecError(ValueError):
    pass


def _tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` header integers, skipping whitespace and comments."""
    out, pos, n = [], 2, len(data)
    while len(out) < count:
        while pos < n and data[pos] in b" \t\r\n":
            pos += 1
        if pos < n and data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and data[pos] in b"0123456789":
            pos += 1
        if start == pos:
            raise CodecError("malformed PNM header")
        out.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def decode_pnm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise CodecError(f"unsupported PNM magic {magic!r}")
    (w, h, maxval), off = _tokens(data, 3)
    if maxval != 255:
        raise CodecError(f"only maxval 255 is supported, got {maxval}")
    chans = 3 if magic == b"P6" else 1
    need = w * h * chans
    raster = np.frombuffer(data, dtype=np.uint8, count=need, offset=off) if len(data) - off >= need else None
    if raster is None or w < 1 or h < 1:
        raise CodecError("truncated PNM raster")
    return raster.reshape((h, w, 3) if chans == 3 else (h, w)).copy()


def encode_pnm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.dtype == np.bool_:
        img = img.astype(np.uint8) * 255
    if img.dtype != np.uint8:
        raise CodecError(f"expected uint8 or bool pixels, got {img.dtype}")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise CodecError(f"cannot encode array of shape {img.shape}")
    h, w = img.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read a PGM/PPM (or PNG when Pillow is available) into a uint8 array."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P5", b"P6"):
        return decode_pnm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        try:
            from PIL import Image
        except ImportError as exc:  # pragma: no cover
            raise CodecError("PNG support needs Pillow") from exc
        with Image.open(path) as im:
            im = im.convert("L" if im.mode in ("1", "L", "I") else "RGB")
            return np.asarray(im, dtype=np.uint8).copy()
    raise CodecError(f"unrecognized image format: {path}")


def write_image(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write PGM/PPM by default; ``.png`` goes through Pillow."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        arr = np.asarray(img)
        if arr.dtype == np.bool_:
            arr = arr.astype(np.uint8) * 255
        Image.fromarray(arr).save(path)
        return
    path.write_bytes(encode_pnm(img))
