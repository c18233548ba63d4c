"""Features over accumulated residual planes, temporal pooling, and voting.

The built-in extractor is deliberately simple and pluggable through the
features CSV format: anything that yields one fixed-length nonnegative vector
per accumulated plane can replace it.  It summarizes an 8-bit plane with a
4x4 grid; each cell contributes one energy value (mean absolute deviation
from the 128 midpoint) and an 8-bin unsigned gradient-orientation histogram
(central differences, magnitude-weighted, L1-normalized per cell), giving
4 * 4 * 9 = 144 dimensions.
"""
from __future__ import annotations

import csv

import numpy as np

from .errors import IngestError

GRID = 4
ORIENTATION_BINS = 8
CELL_DIM = 1 + ORIENTATION_BINS
FEATURE_DIM = GRID * GRID * CELL_DIM
EXTRACTOR_ID = "grid4x4-mad-og8"

MIDPOINT = 128.0


def extract_features(plane: np.ndarray) -> np.ndarray:
    """144-vector of per-cell energy and orientation histograms.

    The plane is padded to a multiple of the grid by edge replication.  Cells
    are visited in raster order; within a cell the energy value comes first,
    then the 8 histogram bins.  A constant-128 plane maps to the zero vector.
    """
    arr = np.asarray(plane)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"plane must be a nonempty 2-D array, got shape {arr.shape}")
    p = arr.astype(np.float64)
    pad_r = (-p.shape[0]) % GRID
    pad_c = (-p.shape[1]) % GRID
    if pad_r or pad_c:
        p = np.pad(p, ((0, pad_r), (0, pad_c)), mode="edge")
    gy, gx = np.gradient(p)
    magnitude = np.hypot(gx, gy)
    # unsigned orientation: angle mod pi, binned over [0, pi)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.minimum((theta / (np.pi / ORIENTATION_BINS)).astype(np.int64),
                      ORIENTATION_BINS - 1)
    deviation = np.abs(p - MIDPOINT)
    cell_h = p.shape[0] // GRID
    cell_w = p.shape[1] // GRID
    out = np.empty(FEATURE_DIM, dtype=np.float64)
    pos = 0
    for r in range(GRID):
        ys = slice(r * cell_h, (r + 1) * cell_h)
        for c in range(GRID):
            xs = slice(c * cell_w, (c + 1) * cell_w)
            out[pos] = deviation[ys, xs].mean()
            hist = np.bincount(bins[ys, xs].ravel(),
                               weights=magnitude[ys, xs].ravel(),
                               minlength=ORIENTATION_BINS)
            total = hist.sum()
            if total > 0:
                hist = hist / total
            out[pos + 1:pos + CELL_DIM] = hist
            pos += CELL_DIM
    return out


def pot_pool(matrix: np.ndarray, partitions: int) -> np.ndarray:
    """Temporal max-pooling over contiguous near-equal partitions.

    Rows of matrix are per-group feature vectors in time order.  They are
    split into `partitions` contiguous segments whose sizes differ by at most
    one (earlier segments take the extra row); each output row is the
    per-dimension max of its segment.  With fewer rows than partitions, the
    first T segments are the T rows and the rest replicate the last row.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError(f"matrix must be (T>=1, D), got shape {m.shape}")
    if partitions < 1:
        raise ValueError(f"partitions must be >= 1, got {partitions}")
    t = m.shape[0]
    out = np.empty((partitions, m.shape[1]), dtype=np.float64)
    if t >= partitions:
        base, extra = divmod(t, partitions)
        start = 0
        for i in range(partitions):
            size = base + (1 if i < extra else 0)
            out[i] = m[start:start + size].max(axis=0)
            start += size
    else:
        for i in range(partitions):
            out[i] = m[min(i, t - 1)]
    return out


def partition_and_vote(decisions, tiebreak_scores) -> int:
    """Majority vote over per-partition labels.

    Vote ties are broken by the smallest summed score over each tied label's
    partitions (scores are distances: lower means more confident), then by
    the lowest label id.
    """
    labels = list(decisions)
    scores = list(tiebreak_scores)
    if not labels:
        raise ValueError("no decisions to vote over")
    if len(labels) != len(scores):
        raise ValueError(f"{len(labels)} decisions but {len(scores)} scores")
    votes: dict[int, int] = {}
    sums: dict[int, float] = {}
    for label, score in zip(labels, scores):
        votes[label] = votes.get(label, 0) + 1
        sums[label] = sums.get(label, 0.0) + score
    top = max(votes.values())
    tied = [label for label, n in votes.items() if n == top]
    return min(tied, key=lambda label: (sums[label], label))


def write_features_csv(path: str, rows) -> None:
    """Write one CSV row per accumulated plane.

    Each row is (group_id, first_index, last_index, vector); floats use
    shortest round-trip formatting.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_id", "first_index", "last_index"]
                        + [f"f{i:03d}" for i in range(FEATURE_DIM)])
        for group_id, first_index, last_index, vector in rows:
            vec = np.asarray(vector)
            if vec.shape != (FEATURE_DIM,):
                raise ValueError(f"feature vector must be ({FEATURE_DIM},), "
                                 f"got shape {vec.shape}")
            writer.writerow([group_id, first_index, last_index]
                            + [repr(float(v)) for v in vec])


def read_features_csv(path: str) -> tuple[list[tuple[int, int, int]], np.ndarray]:
    """Read a features CSV back into (group spans, (T, D) matrix)."""
    spans: list[tuple[int, int, int]] = []
    vectors: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["group_id", "first_index", "last_index"]:
            raise IngestError(f"{path}: not a features CSV")
        if len(header) != 3 + FEATURE_DIM:
            raise IngestError(f"{path}: expected {FEATURE_DIM} feature columns, "
                              f"got {len(header) - 3}")
        for line, row in enumerate(reader, start=2):
            if len(row) != 3 + FEATURE_DIM:
                raise IngestError(f"{path}: line {line}: wrong column count")
            try:
                spans.append((int(row[0]), int(row[1]), int(row[2])))
                vectors.append([float(v) for v in row[3:]])
            except ValueError as exc:
                raise IngestError(f"{path}: line {line}: {exc}") from exc
    if not vectors:
        raise IngestError(f"{path}: no feature rows")
    return spans, np.array(vectors, dtype=np.float64)
