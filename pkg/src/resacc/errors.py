"""Exception types shared across the pipeline.

Data-driven failures get their own classes so callers (and the CLI exit-code
mapping) can tell bad input apart from internal invariant violations, which
surface as plain ValueError.
"""
from __future__ import annotations


class ResaccError(Exception):
    """Base class for pipeline errors caused by input data."""


class IngestError(ResaccError):
    """Raised when input frames or manifest files cannot be used."""


class ParseError(ResaccError):
    """Raised when a bitstream or model file is malformed.

    Carries enough position context to locate the damage: ``offset`` is the
    byte offset where parsing failed; ``frame_index`` and ``macroblock_index``
    are set when the failure happened inside a frame record.
    """

    def __init__(self, message: str, *, offset: int | None = None,
                 frame_index: int | None = None,
                 macroblock_index: int | None = None):
        parts = [message]
        if offset is not None:
            parts.append(f"at byte offset {offset}")
        if frame_index is not None:
            parts.append(f"in frame {frame_index}")
        if macroblock_index is not None:
            parts.append(f"macroblock {macroblock_index}")
        super().__init__(" ".join(parts))
        self.offset = offset
        self.frame_index = frame_index
        self.macroblock_index = macroblock_index
