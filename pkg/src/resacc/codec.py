"""Block-based I/P video encoder producing CRV bitstreams.

Frames are split into 16x16 macroblocks.  P-frames are predicted from the
previous *reconstructed* frame by exhaustive translational motion search; the
prediction residual is transform-coded per 8x8 quadrant (DCT, uniform
quantization, zigzag RLE).  I-frames are coded as a residual against an
all-zero prediction, so the same residual path covers both frame types and
the encoder never drifts from what a decoder recovers.
"""
from __future__ import annotations

import glob
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import transform
from .errors import IngestError
from .pgm import read_pgm

MACROBLOCK = 16
QUADRANTS = 4
MAGIC = b"CRV1"

# little-endian: magic, width, height, gop_size, qscale, search_range, frame_count
HEADER_STRUCT = struct.Struct("<4sHHHHHI")
HEADER_SIZE = HEADER_STRUCT.size
MV_STRUCT = struct.Struct("<bb")
RLE_PAIR_STRUCT = struct.Struct("<Bh")
RLE_SENTINEL_RUN = 255

FRAME_TYPE_I = 0
FRAME_TYPE_P = 1

MAX_SEARCH_RANGE = 15


@dataclass(frozen=True)
class EncoderConfig:
    """Encoder knobs; defaults keep desk-scale clips in a single GOP."""

    qscale: int = 8
    gop_size: int = 250
    search_range: int = 7

    def __post_init__(self):
        if self.qscale < 1:
            raise ValueError(f"qscale must be >= 1, got {self.qscale}")
        if self.gop_size < 1:
            raise ValueError(f"gop_size must be >= 1, got {self.gop_size}")
        if not 0 <= self.search_range <= MAX_SEARCH_RANGE:
            raise ValueError(
                f"search_range must be in [0, {MAX_SEARCH_RANGE}], got {self.search_range}")


@dataclass(frozen=True)
class StreamHeader:
    """Parsed CRV header fields."""

    width: int
    height: int
    gop_size: int
    qscale: int
    search_range: int
    frame_count: int

    @property
    def macroblocks(self) -> tuple[int, int]:
        return self.height // MACROBLOCK, self.width // MACROBLOCK


class FrameRecord:
    """One coded frame: type, per-macroblock motion vectors and coefficients.

    motion_vectors has shape (mb_rows, mb_cols, 2) holding (dx, dy); blocks has
    shape (mb_rows, mb_cols, 4, 8, 8) int16 quantized coefficients with the
    four 8x8 quadrants of each macroblock in raster order.
    """

    __slots__ = ("frame_type", "motion_vectors", "blocks")

    def __init__(self, frame_type: int, motion_vectors: np.ndarray, blocks: np.ndarray):
        self.frame_type = int(frame_type)
        self.motion_vectors = motion_vectors
        self.blocks = blocks

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameRecord):
            return NotImplemented
        return (self.frame_type == other.frame_type
                and np.array_equal(self.motion_vectors, other.motion_vectors)
                and np.array_equal(self.blocks, other.blocks))

    def __repr__(self) -> str:
        kind = "I" if self.frame_type == FRAME_TYPE_I else "P"
        return f"FrameRecord({kind}, mbs={self.blocks.shape[:2]})"


@dataclass
class EncodeResult:
    """Encoder output plus the pre-transform residual planes it retained."""

    header: StreamHeader
    records: list[FrameRecord]
    residuals: list[np.ndarray]
    stream: bytes


def validate_frame(plane: np.ndarray, index: int) -> np.ndarray:
    arr = np.asarray(plane)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise IngestError(
            f"frame {index}: expected a 2-D uint8 plane, got shape {arr.shape} dtype {arr.dtype}")
    h, w = arr.shape
    if h % MACROBLOCK or w % MACROBLOCK or h == 0 or w == 0:
        raise IngestError(
            f"frame {index}: dimensions {w}x{h} are not positive multiples of {MACROBLOCK}")
    return arr


def ingest_frames(source) -> list[np.ndarray]:
    """Load a frame sequence from a glob pattern, directory, or plane list.

    All frames must agree on dimensions; the error names the first offender.
    """
    if isinstance(source, (str, os.PathLike)):
        source = os.fspath(source)
        pattern = os.path.join(source, "*.pgm") if os.path.isdir(source) else source
        paths = sorted(glob.glob(pattern))
        if not paths:
            raise IngestError(f"no frames match {pattern!r}")
        planes = [read_pgm(p) for p in paths]
    else:
        planes = [np.asarray(p) for p in source]
        if not planes:
            raise IngestError("no frames supplied")
    first = validate_frame(planes[0], 0)
    for i, plane in enumerate(planes[1:], start=1):
        arr = validate_frame(plane, i)
        if arr.shape != first.shape:
            raise IngestError(
                f"frame {i}: dimensions {arr.shape[1]}x{arr.shape[0]} do not match "
                f"frame 0 ({first.shape[1]}x{first.shape[0]})")
    return planes


def split_blocks(plane: np.ndarray) -> np.ndarray:
    """(h, w) plane -> (mb_rows, mb_cols, 4, 8, 8) with quadrants in raster order."""
    h, w = plane.shape
    mby, mbx = h // MACROBLOCK, w // MACROBLOCK
    q = plane.reshape(mby, 2, 8, mbx, 2, 8)
    return q.transpose(0, 3, 1, 4, 2, 5).reshape(mby, mbx, QUADRANTS, 8, 8)


def assemble_blocks(blocks: np.ndarray) -> np.ndarray:
    """Inverse of split_blocks."""
    mby, mbx = blocks.shape[:2]
    q = blocks.reshape(mby, mbx, 2, 2, 8, 8)
    return q.transpose(0, 2, 4, 1, 3, 5).reshape(mby * MACROBLOCK, mbx * MACROBLOCK)


def full_search_me(cur: np.ndarray, ref: np.ndarray, search_range: int) -> np.ndarray:
    """Exhaustive translational motion search per 16x16 macroblock.

    Every displacement (dx, dy) in [-search_range, search_range]^2 whose
    referenced block lies fully inside ref is scored by SAD.  Ties go to the
    smallest |dx|+|dy|, then to the earliest candidate in raster order
    (dy outer, dx inner, both ascending).  Returns (mb_rows, mb_cols, 2)
    int32 vectors as (dx, dy).
    """
    if cur.shape != ref.shape:
        raise ValueError(f"frame shapes differ: {cur.shape} vs {ref.shape}")
    if not 0 <= search_range <= MAX_SEARCH_RANGE:
        raise ValueError(f"search_range must be in [0, {MAX_SEARCH_RANGE}]")
    h, w = cur.shape
    mby, mbx = h // MACROBLOCK, w // MACROBLOCK
    cur_i = cur.astype(np.int32)
    ref_i = ref.astype(np.int32)
    best_sad = np.full((mby, mbx), np.iinfo(np.int64).max, dtype=np.int64)
    best_taxi = np.full((mby, mbx), np.iinfo(np.int64).max, dtype=np.int64)
    best = np.zeros((mby, mbx, 2), dtype=np.int32)
    for dy in range(-search_range, search_range + 1):
        # |d| <= 15 < 16, so a displacement can invalidate only the first or
        # last row/column of macroblocks
        r0, r1 = (1 if dy < 0 else 0), mby - (1 if dy > 0 else 0)
        for dx in range(-search_range, search_range + 1):
            c0, c1 = (1 if dx < 0 else 0), mbx - (1 if dx > 0 else 0)
            if r0 >= r1 or c0 >= c1:
                continue
            y0, y1 = r0 * MACROBLOCK, r1 * MACROBLOCK
            x0, x1 = c0 * MACROBLOCK, c1 * MACROBLOCK
            diff = np.abs(cur_i[y0:y1, x0:x1] - ref_i[y0 + dy:y1 + dy, x0 + dx:x1 + dx])
            sads = diff.reshape(r1 - r0, MACROBLOCK, c1 - c0, MACROBLOCK).sum(
                axis=(1, 3), dtype=np.int64)
            taxi = abs(dx) + abs(dy)
            sub = (slice(r0, r1), slice(c0, c1))
            better = (sads < best_sad[sub]) | (
                (sads == best_sad[sub]) & (taxi < best_taxi[sub]))
            best_sad[sub] = np.where(better, sads, best_sad[sub])
            best_taxi[sub] = np.where(better, taxi, best_taxi[sub])
            best[sub + (0,)] = np.where(better, dx, best[sub + (0,)])
            best[sub + (1,)] = np.where(better, dy, best[sub + (1,)])
    return best


def predict_frame(ref: np.ndarray, mvs: np.ndarray) -> np.ndarray:
    """Build the motion-compensated prediction of a frame from ref."""
    h, w = ref.shape
    mby, mbx = h // MACROBLOCK, w // MACROBLOCK
    pred = np.empty((h, w), dtype=ref.dtype)
    for r in range(mby):
        y0 = r * MACROBLOCK
        for c in range(mbx):
            x0 = c * MACROBLOCK
            dx, dy = int(mvs[r, c, 0]), int(mvs[r, c, 1])
            pred[y0:y0 + MACROBLOCK, x0:x0 + MACROBLOCK] = \
                ref[y0 + dy:y0 + dy + MACROBLOCK, x0 + dx:x0 + dx + MACROBLOCK]
    return pred


def compute_residual(cur: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Pixelwise prediction residual as int16."""
    if cur.shape != predicted.shape:
        raise ValueError(f"frame shapes differ: {cur.shape} vs {predicted.shape}")
    return cur.astype(np.int16) - predicted.astype(np.int16)


def _transform_residual(residual: np.ndarray, qscale: int) -> np.ndarray:
    """Residual plane -> (mb_rows, mb_cols, 4, 8, 8) int16 quantized coefficients."""
    blocks = split_blocks(residual.astype(np.float64))
    shape = blocks.shape
    coeffs = transform.dct_blocks(blocks.reshape(-1, 8, 8))
    return transform.quantize(coeffs, qscale).reshape(shape)


def decode_residual_blocks(blocks: np.ndarray, qscale: int) -> np.ndarray:
    """Quantized coefficients -> reconstructed residual plane (int16).

    Dequantize, inverse DCT, round to nearest integer, clamp to int16.  This
    is the shared reconstruction path for the encoder reference loop and the
    standalone decoder; no motion compensation happens here.
    """
    shape = blocks.shape
    spatial = transform.idct_blocks(
        transform.dequantize(blocks.reshape(-1, 8, 8), qscale))
    spatial = np.clip(np.rint(spatial), transform.INT16_MIN, transform.INT16_MAX)
    return assemble_blocks(spatial.astype(np.int16).reshape(shape))


def encode_clip(frames, config: EncoderConfig = EncoderConfig()) -> EncodeResult:
    """Encode a frame sequence, retaining per-frame records and residuals.

    Frame i is an I-frame iff i % gop_size == 0.  P-frames reference the
    reconstructed previous frame so encoder and decoder agree bit-for-bit on
    what each residual was computed against.
    """
    planes = ingest_frames(frames)
    h, w = planes[0].shape
    header = StreamHeader(width=w, height=h, gop_size=config.gop_size,
                          qscale=config.qscale, search_range=config.search_range,
                          frame_count=len(planes))
    mby, mbx = header.macroblocks
    records: list[FrameRecord] = []
    residuals: list[np.ndarray] = []
    recon_prev: np.ndarray | None = None
    for i, plane in enumerate(planes):
        if i % config.gop_size == 0:
            frame_type = FRAME_TYPE_I
            mvs = np.zeros((mby, mbx, 2), dtype=np.int32)
            predicted = np.zeros((h, w), dtype=np.int16)
        else:
            frame_type = FRAME_TYPE_P
            mvs = full_search_me(plane, recon_prev, config.search_range)
            predicted = predict_frame(recon_prev, mvs).astype(np.int16)
        residual = plane.astype(np.int16) - predicted
        blocks = _transform_residual(residual, config.qscale)
        records.append(FrameRecord(frame_type, mvs, blocks))
        residuals.append(residual)
        decoded = decode_residual_blocks(blocks, config.qscale)
        recon_prev = np.clip(predicted.astype(np.int32) + decoded, 0, 255).astype(np.uint8)
    stream = serialize_stream(header, records)
    return EncodeResult(header=header, records=records, residuals=residuals, stream=stream)


def encode(frames, config: EncoderConfig = EncoderConfig()) -> bytes:
    """Encode a frame sequence to CRV bytes."""
    return encode_clip(frames, config).stream


def _serialize_block(out: bytearray, block: np.ndarray) -> None:
    seq = block.reshape(64)[transform.ZIGZAG_ORDER]
    positions = np.nonzero(seq)[0]
    prev = -1
    for pos in positions:
        out += RLE_PAIR_STRUCT.pack(int(pos) - prev - 1, int(seq[pos]))
        prev = int(pos)
    out += RLE_PAIR_STRUCT.pack(RLE_SENTINEL_RUN, 0)


def serialize_stream(header: StreamHeader, records: list[FrameRecord]) -> bytes:
    """Serialize header plus frame records into CRV bytes."""
    if len(records) != header.frame_count:
        raise ValueError(
            f"header announces {header.frame_count} frames, got {len(records)} records")
    out = bytearray()
    out += HEADER_STRUCT.pack(MAGIC, header.width, header.height, header.gop_size,
                              header.qscale, header.search_range, header.frame_count)
    mby, mbx = header.macroblocks
    for record in records:
        out.append(record.frame_type)
        if record.blocks.shape[:2] != (mby, mbx):
            raise ValueError(
                f"record macroblock grid {record.blocks.shape[:2]} does not match "
                f"header grid {(mby, mbx)}")
        for r in range(mby):
            for c in range(mbx):
                dx, dy = int(record.motion_vectors[r, c, 0]), int(record.motion_vectors[r, c, 1])
                out += MV_STRUCT.pack(dx, dy)
                for q in range(QUADRANTS):
                    _serialize_block(out, record.blocks[r, c, q])
    return bytes(out)
