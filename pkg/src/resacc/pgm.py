"""Binary PGM (P5) reading and writing for 8-bit grayscale planes."""
from __future__ import annotations

import numpy as np

from .errors import IngestError


def _read_header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Pull whitespace-separated header tokens, honoring '#' comments."""
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace():
            pos += 1
        if pos == start:
            raise IngestError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from raster data
    return tokens, pos + 1


def read_pgm(path: str) -> np.ndarray:
    """Read a binary PGM file into a (height, width) uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise IngestError(f"{path}: not a binary PGM (missing P5 magic)")
    try:
        tokens, offset = _read_header_tokens(data, 4)
        width, height, maxval = (int(t) for t in tokens[1:])
    except (ValueError, IngestError) as exc:
        raise IngestError(f"{path}: bad PGM header ({exc})") from exc
    if width < 1 or height < 1:
        raise IngestError(f"{path}: bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise IngestError(f"{path}: only maxval 255 is supported, got {maxval}")
    raster = data[offset:offset + width * height]
    if len(raster) < width * height:
        raise IngestError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path: str, plane: np.ndarray) -> None:
    """Write a (height, width) uint8 array as a binary PGM file."""
    arr = np.asarray(plane)
    if arr.ndim != 2:
        raise ValueError(f"plane must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"plane must be uint8, got dtype {arr.dtype}")
    height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(arr.tobytes())
