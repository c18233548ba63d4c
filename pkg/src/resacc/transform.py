"""8x8 block transforms: orthonormal DCT-II, uniform quantization, zigzag scan.

The forward transform is the separable orthonormal DCT-II computed in double
precision as D @ X @ D.T with a precomputed basis matrix; the inverse is its
transpose pair.  Orthonormality gives energy preservation (Parseval) and a
round-trip error at the level of float64 rounding, which downstream tests pin
below 1e-9.
"""
from __future__ import annotations

import numpy as np

BLOCK = 8

INT16_MIN = -32768
INT16_MAX = 32767


def _dct_matrix(n: int = BLOCK) -> np.ndarray:
    """Orthonormal DCT-II basis: D[u, x] = a(u) * cos(pi * (2x+1) * u / 2n)."""
    u = np.arange(n, dtype=np.float64)[:, None]
    x = np.arange(n, dtype=np.float64)[None, :]
    mat = np.cos(np.pi * (2.0 * x + 1.0) * u / (2.0 * n))
    mat[0, :] *= np.sqrt(1.0 / n)
    mat[1:, :] *= np.sqrt(2.0 / n)
    return mat


DCT_MATRIX = _dct_matrix()

# Classic 8x8 zigzag scan as flat indices into a row-major block.  The scan
# walks anti-diagonals starting (0,0),(0,1),(1,0),(2,0),(1,1),(0,2),...
ZIGZAG_ORDER = np.array([
    0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
], dtype=np.int64)

INVERSE_ZIGZAG_ORDER = np.argsort(ZIGZAG_ORDER)


def _check_block(block: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(block)
    if arr.shape != (BLOCK, BLOCK):
        raise ValueError(f"{name} must be {BLOCK}x{BLOCK}, got shape {arr.shape}")
    return arr


def dct8x8(block: np.ndarray) -> np.ndarray:
    """Forward 2-D orthonormal DCT-II of one 8x8 block (float64 out)."""
    arr = _check_block(block, "block").astype(np.float64)
    return DCT_MATRIX @ arr @ DCT_MATRIX.T


def idct8x8(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of dct8x8 (orthonormal, so the transpose pair)."""
    arr = _check_block(coeffs, "coeffs").astype(np.float64)
    return DCT_MATRIX.T @ arr @ DCT_MATRIX


def dct_blocks(blocks: np.ndarray) -> np.ndarray:
    """Batched forward DCT over an (n, 8, 8) stack."""
    return DCT_MATRIX @ blocks.astype(np.float64) @ DCT_MATRIX.T


def idct_blocks(coeffs: np.ndarray) -> np.ndarray:
    """Batched inverse DCT over an (n, 8, 8) stack."""
    return DCT_MATRIX.T @ coeffs.astype(np.float64) @ DCT_MATRIX


def quantize(coeffs: np.ndarray, qscale: int) -> np.ndarray:
    """Uniform scalar quantization: round-half-away-from-zero(c / qscale).

    Results saturate to the signed 16-bit range.  qscale must be a positive
    integer.
    """
    if int(qscale) != qscale or qscale < 1:
        raise ValueError(f"qscale must be a positive integer, got {qscale!r}")
    v = np.asarray(coeffs, dtype=np.float64) / float(qscale)
    # trunc(v + copysign(0.5, v)) rounds halves away from zero
    q = np.trunc(v + np.copysign(0.5, v))
    return np.clip(q, INT16_MIN, INT16_MAX).astype(np.int16)


def dequantize(quantized: np.ndarray, qscale: int) -> np.ndarray:
    """Inverse of quantize up to quantization error: value * qscale."""
    if int(qscale) != qscale or qscale < 1:
        raise ValueError(f"qscale must be a positive integer, got {qscale!r}")
    return np.asarray(quantized, dtype=np.float64) * float(qscale)


def zigzag(block: np.ndarray) -> np.ndarray:
    """Scan an 8x8 block into a 64-vector in zigzag order."""
    arr = _check_block(block, "block")
    return arr.reshape(64)[ZIGZAG_ORDER].copy()


def inverse_zigzag(seq: np.ndarray) -> np.ndarray:
    """Rebuild an 8x8 block from a 64-vector in zigzag order."""
    arr = np.asarray(seq)
    if arr.shape != (64,):
        raise ValueError(f"zigzag sequence must have length 64, got shape {arr.shape}")
    return arr[INVERSE_ZIGZAG_ORDER].reshape(BLOCK, BLOCK).copy()
