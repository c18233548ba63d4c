"""Chi-square k-nearest-neighbor classification over feature vectors.

Feature vectors are nonnegative, so the chi-square distance

    d(x, y) = sum_i (x_i - y_i)^2 / (x_i + y_i)

is well defined once dimensions with x_i + y_i == 0 are taken to contribute
zero.  Prediction is deterministic end to end: neighbor ties at the k-th
distance break by lower exemplar insertion index, label ties by the smaller
summed distance and then the lower label id.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

MODEL_MAGIC = "RESACC-MODEL"
MODEL_VERSION = "v1"


def _check_nonnegative(arr: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite and nonnegative")
    return a


def chi2_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Chi-square distance between two nonnegative vectors."""
    a = _check_nonnegative(x, "x")
    b = _check_nonnegative(y, "y")
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"vector shapes differ: {a.shape} vs {b.shape}")
    num = (a - b) ** 2
    den = a + b
    safe = np.where(den > 0, den, 1.0)
    return float(np.where(den > 0, num / safe, 0.0).sum())


def _chi2_to_matrix(matrix: np.ndarray, probe: np.ndarray) -> np.ndarray:
    """Chi-square distance from probe to every row of matrix."""
    diff = matrix - probe
    den = matrix + probe
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, diff * diff / safe, 0.0).sum(axis=1)


@dataclass
class LabeledDataset:
    """Exemplar vectors with integer labels and the id -> name table."""

    vectors: np.ndarray  # (N, D) float64, nonnegative
    labels: np.ndarray  # (N,) int
    label_names: list[str]

    def __post_init__(self):
        self.vectors = _check_nonnegative(self.vectors, "vectors")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise ValueError(f"vectors must be (N>=1, D), got {self.vectors.shape}")
        if self.labels.shape != (self.vectors.shape[0],):
            raise ValueError("one label per vector required")
        if len(self.label_names) < 1:
            raise ValueError("label_names must not be empty")
        if self.labels.min() < 0 or self.labels.max() >= len(self.label_names):
            raise ValueError("label ids must index label_names")


def dataset_from_named(vectors, names) -> LabeledDataset:
    """Build a LabeledDataset from string labels; ids follow sorted name order."""
    names = list(names)
    table = sorted(set(names))
    ids = {name: i for i, name in enumerate(table)}
    return LabeledDataset(vectors=np.asarray(vectors, dtype=np.float64),
                          labels=np.array([ids[n] for n in names], dtype=np.int64),
                          label_names=table)


@dataclass
class Model:
    """Trained k-NN model: the dataset plus k and the extractor identifier."""

    dataset: LabeledDataset
    k: int
    extractor_id: str

    @property
    def dim(self) -> int:
        return self.dataset.vectors.shape[1]


def train(dataset: LabeledDataset, k: int = 3,
          extractor_id: str = "unknown") -> Model:
    """Validate and freeze a dataset into a Model (k-NN stores exemplars)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > dataset.vectors.shape[0]:
        raise ValueError(f"k={k} exceeds the {dataset.vectors.shape[0]} exemplars")
    return Model(dataset=dataset, k=k, extractor_id=extractor_id)


def predict(model: Model, probe: np.ndarray) -> tuple[int, float]:
    """Label id and score for one probe vector.

    The score is the summed chi-square distance of the winning label's
    neighbors among the k nearest; lower means more confident.
    """
    p = _check_nonnegative(probe, "probe")
    if p.shape != (model.dim,):
        raise ValueError(f"probe must have shape ({model.dim},), got {p.shape}")
    distances = _chi2_to_matrix(model.dataset.vectors, p)
    # stable sort keeps insertion order among exactly-equal distances
    order = np.argsort(distances, kind="stable")[:model.k]
    votes: dict[int, int] = {}
    sums: dict[int, float] = {}
    for idx in order:
        label = int(model.dataset.labels[idx])
        votes[label] = votes.get(label, 0) + 1
        sums[label] = sums.get(label, 0.0) + float(distances[idx])
    top = max(votes.values())
    tied = [label for label, n in votes.items() if n == top]
    winner = min(tied, key=lambda label: (sums[label], label))
    return winner, sums[winner]


def save_model(model: Model, path: str) -> None:
    """Write a Model as line-oriented text with round-trip float formatting."""
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION} dim={model.dim} k={model.k}",
             f"extractor,{model.extractor_id}"]
    for i, name in enumerate(model.dataset.label_names):
        lines.append(f"label,{i},{name}")
    for label, vector in zip(model.dataset.labels, model.dataset.vectors):
        lines.append(",".join([str(int(label))] + [repr(float(v)) for v in vector]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> Model:
    """Parse a model file written by save_model."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines:
        raise ParseError(f"{path}: empty model file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != MODEL_MAGIC or head[1] != MODEL_VERSION:
        raise ParseError(f"{path}: bad model header {lines[0]!r}")
    try:
        fields = dict(part.split("=", 1) for part in head[2:])
        dim = int(fields["dim"])
        k = int(fields["k"])
    except (ValueError, KeyError) as exc:
        raise ParseError(f"{path}: bad model header fields ({exc})") from exc
    extractor_id = "unknown"
    label_names: list[str] = []
    vectors: list[list[float]] = []
    labels: list[int] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if parts[0] == "extractor":
            if len(parts) != 2:
                raise ParseError(f"{path}: line {line_no}: bad extractor entry")
            extractor_id = parts[1]
            continue
        if parts[0] == "label":
            if len(parts) != 3 or int(parts[1]) != len(label_names):
                raise ParseError(f"{path}: line {line_no}: bad label table entry")
            label_names.append(parts[2])
            continue
        if len(parts) != 1 + dim:
            raise ParseError(f"{path}: line {line_no}: expected {dim} values")
        try:
            labels.append(int(parts[0]))
            vectors.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise ParseError(f"{path}: line {line_no}: {exc}") from exc
    try:
        dataset = LabeledDataset(vectors=np.array(vectors, dtype=np.float64),
                                 labels=np.array(labels, dtype=np.int64),
                                 label_names=label_names)
        return train(dataset, k=k, extractor_id=extractor_id)
    except ValueError as exc:
        raise ParseError(f"{path}: inconsistent model data ({exc})") from exc
