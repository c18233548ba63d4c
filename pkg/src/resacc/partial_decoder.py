"""Partial CRV decoding: residual frames only, no motion compensation.

The decoder dequantizes and inverse-transforms each frame's coefficients and
stops there; motion vectors are parsed (the bitstream interleaves them) and
exposed as record metadata but never applied.  That makes decoding one frame
independent of every other frame and keeps the live state to a single plane,
so residual_stream can hand frames out lazily.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .codec import (FRAME_TYPE_I, FRAME_TYPE_P, HEADER_SIZE, HEADER_STRUCT,
                    MACROBLOCK, MAGIC, MV_STRUCT, QUADRANTS, RLE_PAIR_STRUCT,
                    RLE_SENTINEL_RUN, FrameRecord, StreamHeader,
                    decode_residual_blocks)
from .errors import ParseError
from .transform import INVERSE_ZIGZAG_ORDER


@dataclass
class ResidualFrame:
    """One decoded residual plane with its stream position and frame kind."""

    values: np.ndarray  # (height, width) int16
    frame_index: int
    kind: str  # "I" or "P"

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def parse_header(data: bytes) -> StreamHeader:
    """Parse and validate the fixed-size CRV header."""
    if len(data) < HEADER_SIZE:
        raise ParseError("unexpected end of stream in header", offset=len(data))
    magic, width, height, gop_size, qscale, search_range, frame_count = \
        HEADER_STRUCT.unpack_from(data, 0)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if width == 0 or height == 0 or width % MACROBLOCK or height % MACROBLOCK:
        raise ParseError(
            f"dimensions {width}x{height} are not positive multiples of {MACROBLOCK}",
            offset=4)
    if gop_size < 1:
        raise ParseError("gop_size must be >= 1", offset=8)
    if qscale < 1:
        raise ParseError("qscale must be >= 1", offset=10)
    return StreamHeader(width=width, height=height, gop_size=gop_size,
                        qscale=qscale, search_range=search_range,
                        frame_count=frame_count)


def _parse_block(data: bytes, pos: int, out: np.ndarray,
                 frame_index: int, mb_index: int) -> int:
    """Parse one RLE-coded block into out (64 int16, pre-zeroed)."""
    coeff = 0
    unpack = RLE_PAIR_STRUCT.unpack_from
    while True:
        if pos + 3 > len(data):
            raise ParseError("unexpected end of stream in block data",
                             offset=len(data), frame_index=frame_index,
                             macroblock_index=mb_index)
        run, level = unpack(data, pos)
        pos += 3
        if run == RLE_SENTINEL_RUN and level == 0:
            return pos
        coeff += run
        if coeff >= 64:
            raise ParseError(f"RLE run past 64 coefficients (position {coeff})",
                             offset=pos - 3, frame_index=frame_index,
                             macroblock_index=mb_index)
        out[coeff] = level
        coeff += 1


def read_frame_record(data: bytes, offset: int, header: StreamHeader,
                      frame_index: int) -> tuple[FrameRecord, int]:
    """Parse one frame record starting at offset; returns it and the next offset."""
    mby, mbx = header.macroblocks
    if offset + 1 > len(data):
        raise ParseError("unexpected end of stream at frame header",
                         offset=len(data), frame_index=frame_index)
    frame_type = data[offset]
    if frame_type not in (FRAME_TYPE_I, FRAME_TYPE_P):
        raise ParseError(f"unknown frame type {frame_type}", offset=offset,
                         frame_index=frame_index)
    pos = offset + 1
    mvs = np.zeros((mby, mbx, 2), dtype=np.int32)
    zz = np.zeros((mby, mbx, QUADRANTS, 64), dtype=np.int16)
    for r in range(mby):
        for c in range(mbx):
            mb_index = r * mbx + c
            if pos + 2 > len(data):
                raise ParseError("unexpected end of stream at motion vector",
                                 offset=len(data), frame_index=frame_index,
                                 macroblock_index=mb_index)
            dx, dy = MV_STRUCT.unpack_from(data, pos)
            pos += 2
            mvs[r, c, 0] = dx
            mvs[r, c, 1] = dy
            for q in range(QUADRANTS):
                pos = _parse_block(data, pos, zz[r, c, q], frame_index, mb_index)
    # coefficients were stored in zigzag order; undo the scan per block
    blocks = zz[..., INVERSE_ZIGZAG_ORDER].reshape(mby, mbx, QUADRANTS, 8, 8)
    return FrameRecord(frame_type, mvs, blocks), pos


def iter_frame_records(data: bytes) -> Iterator[FrameRecord]:
    """Lazily parse frame records; trailing bytes after the last frame are an error."""
    header = parse_header(data)
    pos = HEADER_SIZE
    for i in range(header.frame_count):
        record, pos = read_frame_record(data, pos, header, i)
        yield record
    if pos != len(data):
        raise ParseError(f"{len(data) - pos} trailing bytes after final frame",
                         offset=pos)


def parse_stream(data: bytes) -> tuple[StreamHeader, list[FrameRecord]]:
    """Parse a whole stream eagerly (round-trip and inspection helper)."""
    return parse_header(data), list(iter_frame_records(data))


def scan_frame_offsets(data: bytes) -> list[int]:
    """Byte offset of each frame record, computed in one forward scan.

    With these offsets, decoding frame k costs only frame k's bytes.
    """
    header = parse_header(data)
    offsets: list[int] = []
    pos = HEADER_SIZE
    for i in range(header.frame_count):
        offsets.append(pos)
        _, pos = read_frame_record(data, pos, header, i)
    return offsets


def decode_residual_frame(record: FrameRecord, qscale: int,
                          frame_index: int) -> ResidualFrame:
    """Dequantize + inverse DCT one frame record into a ResidualFrame."""
    values = decode_residual_blocks(record.blocks, qscale)
    kind = "I" if record.frame_type == FRAME_TYPE_I else "P"
    return ResidualFrame(values=values, frame_index=frame_index, kind=kind)


def residual_stream(data: bytes) -> Iterator[ResidualFrame]:
    """Lazily decode residual frames in stream order.

    Corruption raises ParseError when reached; frames decoded before the
    damage have already been yielded.
    """
    header = parse_header(data)
    for i, record in enumerate(iter_frame_records(data)):
        yield decode_residual_frame(record, header.qscale, i)


def residual_to_plane(values: np.ndarray) -> np.ndarray:
    """Map residual values to uint8 for export: [-255, 255] -> [0, 255].

    The affine map is out = (clip(v, -255, 255) + 255) // 2, so -255 -> 0,
    0 -> 127, 255 -> 255.
    """
    clipped = np.clip(values, -255, 255).astype(np.int32)
    return ((clipped + 255) // 2).astype(np.uint8)
