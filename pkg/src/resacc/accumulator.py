"""Dynamic accumulation of residual frames.

Consecutive residual frames that look alike get summed into one accumulated
plane instead of being processed individually.  "Alike" is decided by a
similarity score over pixel magnitudes compared against the running mean of a
sliding window of recent scores:

    sim(a, b) = (2 * sum(|a|*|b|) + c) / (sum(a^2) + sum(b^2) + c)

The score lies in (0, 1], is exactly symmetric (integer sums commute), and
equals 1 when a == b.  The flow per arriving frame:

  1. warm-up: the first frame starts a group; each following frame joins it
     and its similarity to the previous frame enters the window, until the
     window holds window_size values;
  2. after warm-up, a frame whose similarity is >= the window mean joins the
     group and the window slides (oldest score out, new score in);
  3. a frame whose similarity is < the mean cuts: the group is emitted, the
     frame starts a new group, and the window is cleared back into warm-up;
  4. end of stream flushes the final group.

Ties accumulate.  I-frames are intra content rather than motion, so with
cut_on_iframe (the default) they are excluded from groups and force a cut;
similarity is never computed across an excluded frame.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .partial_decoder import ResidualFrame


def similarity(prev: np.ndarray, cur: np.ndarray, c: float = 1.0) -> float:
    """Similarity of two residual planes over pixel magnitudes, in (0, 1].

    Sums are taken in int64 so the score is exact and symmetric; c > 0 keeps
    the ratio defined (and equal to 1) for a pair of all-zero planes.
    """
    if prev.shape != cur.shape:
        raise ValueError(f"plane shapes differ: {prev.shape} vs {cur.shape}")
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    a = np.abs(prev.astype(np.int64))
    b = np.abs(cur.astype(np.int64))
    cross = int((a * b).sum())
    energy = int((a * a).sum()) + int((b * b).sum())
    return (2.0 * cross + c) / (energy + c)


@dataclass(frozen=True)
class AccumulatorConfig:
    window_size: int = 10
    c: float = 1.0
    cut_on_iframe: bool = True

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {self.window_size}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")


class SimilarityWindow:
    """Fixed-capacity FIFO of recent similarity scores."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._values: deque[float] = deque()

    def __len__(self) -> int:
        return len(self._values)

    @property
    def full(self) -> bool:
        return len(self._values) == self.capacity

    def append(self, value: float) -> None:
        if self.full:
            raise ValueError("window is full; slide instead")
        self._values.append(value)

    def slide(self, value: float) -> None:
        self._values.popleft()
        self._values.append(value)

    def mean(self) -> float:
        if not self._values:
            raise ValueError("window is empty")
        return sum(self._values) / len(self._values)

    def clear(self) -> None:
        self._values.clear()


@dataclass
class AccumulatedResidual:
    """Pixelwise int32 sum of one group of consecutive residual frames."""

    sums: np.ndarray
    first_index: int
    last_index: int
    member_count: int

    def __post_init__(self):
        if self.member_count != self.last_index - self.first_index + 1:
            raise ValueError(
                f"member_count {self.member_count} does not match span "
                f"[{self.first_index}, {self.last_index}]")


@dataclass
class TraceRow:
    """One decision in the accumulation run, for the audit trace."""

    frame_index: int
    kind: str
    similarity: float | None
    window_mean: float | None
    decision: str  # warmup | accumulate | cut | flush
    group_id: int | None


class _Group:
    __slots__ = ("sums", "first", "last", "count")

    def __init__(self, frame: ResidualFrame):
        self.sums = frame.values.astype(np.int32)
        self.first = frame.frame_index
        self.last = frame.frame_index
        self.count = 1

    def add(self, frame: ResidualFrame) -> None:
        self.sums += frame.values
        self.last = frame.frame_index
        self.count += 1

    def emit(self) -> AccumulatedResidual:
        return AccumulatedResidual(sums=self.sums, first_index=self.first,
                                   last_index=self.last, member_count=self.count)


def run_dynamic_accumulation(stream: Iterable[ResidualFrame],
                             config: AccumulatorConfig = AccumulatorConfig(),
                             trace: list[TraceRow] | None = None,
                             ) -> Iterator[AccumulatedResidual]:
    """Group a residual stream into accumulated planes, lazily.

    Upstream errors propagate after all groups completed before the damage
    have been yielded; the in-progress group is abandoned.
    """
    window = SimilarityWindow(config.window_size)
    group: _Group | None = None
    prev: ResidualFrame | None = None
    next_id = 0

    def note(frame_index, kind, sim, mean, decision, group_id):
        if trace is not None:
            trace.append(TraceRow(frame_index, kind, sim, mean, decision, group_id))

    for frame in stream:
        if frame.kind == "I" and config.cut_on_iframe:
            note(frame.frame_index, frame.kind, None, None, "cut", None)
            if group is not None:
                yield group.emit()
                next_id += 1
                group = None
            window.clear()
            prev = None
            continue
        if group is None:
            group = _Group(frame)
            note(frame.frame_index, frame.kind, None, None, "warmup", next_id)
        else:
            s = similarity(prev.values, frame.values, config.c)
            if not window.full:
                window.append(s)
                group.add(frame)
                note(frame.frame_index, frame.kind, s, window.mean(), "warmup", next_id)
            else:
                m = window.mean()
                if s >= m:
                    group.add(frame)
                    window.slide(s)
                    note(frame.frame_index, frame.kind, s, m, "accumulate", next_id)
                else:
                    yield group.emit()
                    next_id += 1
                    group = _Group(frame)
                    window.clear()
                    note(frame.frame_index, frame.kind, s, m, "cut", next_id)
        prev = frame
    if group is not None:
        note(group.last, "", None, None, "flush", next_id)
        yield group.emit()


def normalize_plane(values: np.ndarray) -> np.ndarray:
    """Affine-map an integer plane onto [0, 255] uint8.

    min -> 0 and max -> 255 via floor of the affine map; a constant plane
    becomes all 128.
    """
    v = np.asarray(values, dtype=np.float64)
    lo = v.min()
    hi = v.max()
    if lo == hi:
        return np.full(v.shape, 128, dtype=np.uint8)
    out = np.floor((v - lo) * 255.0 / (hi - lo))
    return np.clip(out, 0, 255).astype(np.uint8)


def normalize_accumulated(acc: AccumulatedResidual) -> np.ndarray:
    """normalize_plane over an accumulated group's sums."""
    return normalize_plane(acc.sums)


@dataclass
class ReductionStats:
    """How much the accumulator shrank the stream."""

    input_frames: int
    emitted_groups: int
    ratio: float
    span_histogram: dict[int, int] = field(default_factory=dict)


def reduction_stats(input_frame_count: int, emitted_group_count: int,
                    group_spans: Iterable[int] = ()) -> ReductionStats:
    """Reduction ratio 1 - emitted/input (0 for an empty input) plus span counts."""
    if input_frame_count < 0 or emitted_group_count < 0:
        raise ValueError("counts must be nonnegative")
    if emitted_group_count > input_frame_count:
        raise ValueError(
            f"emitted {emitted_group_count} groups from {input_frame_count} frames")
    ratio = 0.0 if input_frame_count == 0 else \
        1.0 - emitted_group_count / input_frame_count
    histogram: dict[int, int] = {}
    for span in group_spans:
        histogram[span] = histogram.get(span, 0) + 1
    return ReductionStats(input_frames=input_frame_count,
                          emitted_groups=emitted_group_count,
                          ratio=ratio, span_histogram=histogram)
