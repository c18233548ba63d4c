"""End-to-end orchestration: clips -> encode -> residuals -> groups -> labels.

This module glues the stages together for the CLI and keeps evaluation logic
in library form.  Corpus evaluation processes every manifest clip twice over
the same decoded residuals (grouped by the accumulator, and one unit per
residual frame as the no-accumulation baseline), trains one k-NN model per
mode on the train split, and scores the test split.

Clip work can fan out across processes; results are collected in manifest
order so outputs are identical to a sequential run.  RESACC_THREADS caps the
worker count (0 or unset means auto).
"""
from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .accumulator import (AccumulatorConfig, normalize_plane, reduction_stats,
                          run_dynamic_accumulation)
from .classifier import dataset_from_named, predict, train
from .codec import EncoderConfig, encode
from .errors import IngestError
from .features import EXTRACTOR_ID, extract_features, partition_and_vote, pot_pool
from .partial_decoder import residual_stream
from .synthgen import generate, load_clip_spec

THREADS_ENV = "RESACC_THREADS"


@dataclass(frozen=True)
class PipelineConfig:
    """One bag of knobs for the full pipeline; defaults match the CLI."""

    window_size: int = 10
    sim_c: float = 1.0
    qscale: int = 8
    gop_size: int = 250
    search_range: int = 7
    partitions: int = 8
    k: int = 3
    cut_on_iframe: bool = True

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(qscale=self.qscale, gop_size=self.gop_size,
                             search_range=self.search_range)

    def accumulator_config(self) -> AccumulatorConfig:
        return AccumulatorConfig(window_size=self.window_size, c=self.sim_c,
                                 cut_on_iframe=self.cut_on_iframe)


@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    spec_path: str
    label: str
    split: str  # train | test


def read_manifest(path: str) -> list[ManifestEntry]:
    """Read a corpus manifest CSV: clip_id,spec,label,split.

    Spec paths are resolved relative to the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestError(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["clip_id", "spec", "label", "split"]:
            raise IngestError(f"{path}: expected header clip_id,spec,label,split")
        for line, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise IngestError(f"{path}: line {line}: expected 4 columns")
            clip_id, spec, label, split = row
            if split not in ("train", "test"):
                raise IngestError(
                    f"{path}: line {line}: split must be train or test, got {split!r}")
            if clip_id in seen:
                raise IngestError(f"{path}: line {line}: duplicate clip_id {clip_id!r}")
            seen.add(clip_id)
            entries.append(ManifestEntry(clip_id=clip_id,
                                         spec_path=os.path.join(base, spec),
                                         label=label, split=split))
    if not entries:
        raise IngestError(f"{path}: no clips in manifest")
    return entries


@dataclass
class ClipResult:
    """Everything evaluation needs from one processed clip."""

    clip_id: str
    label: str
    split: str
    frames_in: int
    groups_out: int
    group_spans: list[int]
    decode_seconds: float
    accumulate_seconds: float
    pooled_with: np.ndarray
    pooled_without: np.ndarray


def group_feature_matrix(groups) -> np.ndarray:
    """(T, D) features of accumulated groups, normalized per group."""
    if not groups:
        raise IngestError("no accumulated groups to featurize")
    return np.stack([extract_features(normalize_plane(g.sums)) for g in groups])


def frame_feature_matrix(residuals) -> np.ndarray:
    """(T, D) features of individual residual frames (no accumulation)."""
    if not residuals:
        raise IngestError("no residual frames to featurize")
    return np.stack([extract_features(normalize_plane(f.values)) for f in residuals])


def process_clip(entry: ManifestEntry, config: PipelineConfig) -> ClipResult:
    """Generate, encode, decode, accumulate, and featurize one manifest clip.

    The no-accumulation baseline sees the same frame population as the
    accumulated path: with cut_on_iframe, I-frames are excluded from both.
    """
    spec = load_clip_spec(entry.spec_path)
    frames = generate(spec)
    stream = encode(frames, config.encoder_config())

    t0 = time.perf_counter()
    residuals = list(residual_stream(stream))
    t1 = time.perf_counter()
    groups = list(run_dynamic_accumulation(iter(residuals),
                                           config.accumulator_config()))
    t2 = time.perf_counter()

    if config.cut_on_iframe:
        baseline = [f for f in residuals if f.kind == "P"]
    else:
        baseline = residuals
    pooled_with = pot_pool(group_feature_matrix(groups), config.partitions)
    pooled_without = pot_pool(frame_feature_matrix(baseline), config.partitions)
    return ClipResult(clip_id=entry.clip_id, label=entry.label, split=entry.split,
                      frames_in=len(residuals), groups_out=len(groups),
                      group_spans=[g.member_count for g in groups],
                      decode_seconds=t1 - t0, accumulate_seconds=t2 - t1,
                      pooled_with=pooled_with, pooled_without=pooled_without)


def _clip_worker(payload: tuple[ManifestEntry, PipelineConfig]) -> ClipResult:
    return process_clip(*payload)


def resolve_threads(requested: int | None = None, jobs: int = 1) -> int:
    """Worker count from the explicit request or RESACC_THREADS (0 = auto)."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "0")
        try:
            requested = int(raw)
        except ValueError as exc:
            raise IngestError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if requested < 0:
        raise IngestError(f"thread count must be >= 0, got {requested}")
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, min(requested, jobs))


def process_clips(entries, config: PipelineConfig,
                  threads: int | None = None) -> list[ClipResult]:
    """Process manifest clips, in parallel when allowed, in manifest order."""
    workers = resolve_threads(threads, len(entries))
    payloads = [(entry, config) for entry in entries]
    if workers == 1:
        return [process_clip(*p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_clip_worker, payloads))


@dataclass
class ModeOutcome:
    """Accuracy bookkeeping for one featurization mode."""

    accuracy: float
    predictions: dict[str, str]  # clip_id -> predicted label name
    confusion: dict[tuple[str, str], int] = field(default_factory=dict)


def _score_mode(clips: list[ClipResult], config: PipelineConfig,
                mode: str) -> ModeOutcome:
    pooled = {"with": lambda r: r.pooled_with,
              "without": lambda r: r.pooled_without}[mode]
    train_clips = [r for r in clips if r.split == "train"]
    test_clips = [r for r in clips if r.split == "test"]
    vectors = np.concatenate([pooled(r) for r in train_clips])
    names = [r.label for r in train_clips for _ in range(config.partitions)]
    model = train(dataset_from_named(vectors, names), k=config.k,
                  extractor_id=EXTRACTOR_ID)
    table = model.dataset.label_names
    outcome = ModeOutcome(accuracy=0.0, predictions={})
    correct = 0
    for clip in test_clips:
        results = [predict(model, row) for row in pooled(clip)]
        voted = partition_and_vote([r[0] for r in results],
                                   [r[1] for r in results])
        predicted = table[voted]
        outcome.predictions[clip.clip_id] = predicted
        key = (clip.label, predicted)
        outcome.confusion[key] = outcome.confusion.get(key, 0) + 1
        correct += predicted == clip.label
    outcome.accuracy = correct / len(test_clips)
    return outcome


@dataclass
class EvalResult:
    """Corpus evaluation summary (see run_evaluate)."""

    clips: list[ClipResult]
    label_names: list[str]
    with_acc: ModeOutcome
    without_acc: ModeOutcome
    input_frames: int
    emitted_groups: int
    reduction_ratio: float
    decode_seconds: float
    accumulate_seconds: float
    frames_per_second: float


def evaluate_corpus(manifest_path: str, config: PipelineConfig = PipelineConfig(),
                    threads: int | None = None) -> EvalResult:
    """Run the full evaluation over a corpus manifest."""
    entries = read_manifest(manifest_path)
    splits = {entry.split for entry in entries}
    if splits != {"train", "test"}:
        raise IngestError("manifest needs at least one train and one test clip")
    clips = process_clips(entries, config, threads)
    with_acc = _score_mode(clips, config, "with")
    without_acc = _score_mode(clips, config, "without")
    input_frames = sum(r.frames_in for r in clips)
    emitted_groups = sum(r.groups_out for r in clips)
    stats = reduction_stats(input_frames, emitted_groups)
    decode_s = sum(r.decode_seconds for r in clips)
    acc_s = sum(r.accumulate_seconds for r in clips)
    elapsed = decode_s + acc_s
    fps = input_frames / elapsed if elapsed > 0 else float("inf")
    labels = sorted({r.label for r in clips})
    return EvalResult(clips=clips, label_names=labels, with_acc=with_acc,
                      without_acc=without_acc, input_frames=input_frames,
                      emitted_groups=emitted_groups, reduction_ratio=stats.ratio,
                      decode_seconds=decode_s, accumulate_seconds=acc_s,
                      frames_per_second=fps)


def write_csv(path: str, rows) -> None:
    """Write CSV rows through a temp file so partial output never lands."""
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerows(rows)
    os.replace(tmp, path)


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def write_evaluation_reports(result: EvalResult, config: PipelineConfig,
                             out_dir: str) -> dict[str, str]:
    """Emit the evaluation CSV set into out_dir; returns name -> path.

    throughput.csv carries wall-clock timings and is the one file expected to
    differ between otherwise identical runs.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths: dict[str, str] = {}

    summary = [["metric", "value"],
               ["clips", len(result.clips)],
               ["train_clips", sum(r.split == "train" for r in result.clips)],
               ["test_clips", sum(r.split == "test" for r in result.clips)],
               ["accuracy_with_accumulation", result.with_acc.accuracy],
               ["accuracy_without_accumulation", result.without_acc.accuracy],
               ["input_frames", result.input_frames],
               ["emitted_groups", result.emitted_groups],
               ["reduction_ratio", result.reduction_ratio],
               ["window_size", config.window_size],
               ["sim_c", config.sim_c],
               ["qscale", config.qscale],
               ["gop_size", config.gop_size],
               ["search_range", config.search_range],
               ["partitions", config.partitions],
               ["k", config.k],
               ["cut_on_iframe", int(config.cut_on_iframe)]]
    paths["summary"] = os.path.join(out_dir, "summary.csv")
    write_csv(paths["summary"], [[r[0], _fmt(r[1])] for r in summary])

    pred_rows = [["clip_id", "label", "predicted_with", "predicted_without"]]
    for clip in result.clips:
        if clip.split != "test":
            continue
        pred_rows.append([clip.clip_id, clip.label,
                          result.with_acc.predictions[clip.clip_id],
                          result.without_acc.predictions[clip.clip_id]])
    paths["predictions"] = os.path.join(out_dir, "predictions.csv")
    write_csv(paths["predictions"], pred_rows)

    conf_rows = [["mode", "true_label", "predicted_label", "count"]]
    for mode, outcome in (("with", result.with_acc), ("without", result.without_acc)):
        for true_label in result.label_names:
            for predicted in result.label_names:
                count = outcome.confusion.get((true_label, predicted), 0)
                conf_rows.append([mode, true_label, predicted, count])
    paths["confusion"] = os.path.join(out_dir, "confusion.csv")
    write_csv(paths["confusion"], conf_rows)

    red_rows = [["clip_id", "frames", "groups", "reduction_ratio"]]
    for clip in result.clips:
        ratio = reduction_stats(clip.frames_in, clip.groups_out).ratio
        red_rows.append([clip.clip_id, clip.frames_in, clip.groups_out, _fmt(ratio)])
    paths["reduction"] = os.path.join(out_dir, "reduction.csv")
    write_csv(paths["reduction"], red_rows)

    throughput = [["metric", "value"],
                  ["decoded_frames", result.input_frames],
                  ["decode_seconds", _fmt(result.decode_seconds)],
                  ["accumulate_seconds", _fmt(result.accumulate_seconds)],
                  ["frames_per_second", _fmt(result.frames_per_second)]]
    paths["throughput"] = os.path.join(out_dir, "throughput.csv")
    write_csv(paths["throughput"], throughput)
    return paths
