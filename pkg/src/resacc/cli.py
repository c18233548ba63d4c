"""Command-line interface.

Subcommands cover each pipeline stage (synth, encode, residuals, accumulate,
featurize, train, predict) plus corpus evaluation.  Report-producing commands
write figures next to their CSVs.

Exit codes: 0 success, 2 usage, 3 unreadable or malformed input, 4 internal
invariant violation.  Commands either finish their outputs or remove what
they started; single files go through a .tmp rename.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import os
import re
import sys

import numpy as np

from . import __version__
from .accumulator import (AccumulatorConfig, normalize_plane, reduction_stats,
                          run_dynamic_accumulation)
from .classifier import load_model, predict, save_model, train
from .classifier import dataset_from_named
from .codec import EncoderConfig, encode
from .errors import IngestError, ParseError, ResaccError
from .features import (EXTRACTOR_ID, extract_features, partition_and_vote,
                       pot_pool, read_features_csv, write_features_csv)
from .partial_decoder import residual_stream, residual_to_plane
from .pgm import read_pgm, write_pgm
from .pipeline import (PipelineConfig, evaluate_corpus, write_csv,
                       write_evaluation_reports)
from .synthgen import generate, load_clip_spec


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _bool_flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


@contextlib.contextmanager
def _output_batch():
    """Collect created paths; remove them all if the command fails midway."""
    created: list[str] = []
    try:
        yield created
    except BaseException:
        for path in created:
            with contextlib.suppress(OSError):
                os.unlink(path)
        raise


def _read_stream(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc


def _fmt_opt(value) -> str:
    if value is None:
        return ""
    return repr(float(value)) if isinstance(value, float) else str(value)


def _acc_config(args) -> AccumulatorConfig:
    return AccumulatorConfig(window_size=args.window_size, c=args.sim_c,
                             cut_on_iframe=args.cut_on_iframe)


def cmd_synth(args) -> int:
    spec = load_clip_spec(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    frames = generate(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    with _output_batch() as created:
        for i, frame in enumerate(frames):
            path = os.path.join(args.out_dir, f"frame_{i:04d}.pgm")
            write_pgm(path, frame)
            created.append(path)
    print(f"wrote {len(frames)} frames to {args.out_dir}")
    return 0


def cmd_encode(args) -> int:
    config = EncoderConfig(qscale=args.qscale, gop_size=args.gop,
                           search_range=args.search_range)
    stream = encode(args.frames, config)
    tmp = args.out + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(stream)
    os.replace(tmp, args.out)
    print(f"wrote {len(stream)} bytes to {args.out}")
    return 0


def cmd_residuals(args) -> int:
    data = _read_stream(args.input)
    os.makedirs(args.out_dir, exist_ok=True)
    rows = [["frame_index", "kind", "min", "max", "mean_abs"]]
    with _output_batch() as created:
        count = 0
        for frame in residual_stream(data):
            path = os.path.join(args.out_dir,
                                f"res_{frame.frame_index:04d}_{frame.kind}.pgm")
            write_pgm(path, residual_to_plane(frame.values))
            created.append(path)
            values = frame.values.astype(np.int64)
            rows.append([frame.frame_index, frame.kind, int(values.min()),
                         int(values.max()), repr(float(np.abs(values).mean()))])
            count += 1
        csv_path = os.path.join(args.out_dir, "residuals.csv")
        write_csv(csv_path, rows)
        created.append(csv_path)
    print(f"wrote {count} residual frames to {args.out_dir}")
    return 0


def cmd_accumulate(args) -> int:
    data = _read_stream(args.input)
    os.makedirs(args.out_dir, exist_ok=True)
    trace = []
    frames = 0

    def counted(stream):
        nonlocal frames
        for frame in stream:
            frames += 1
            yield frame

    with _output_batch() as created:
        groups = []
        for acc in run_dynamic_accumulation(counted(residual_stream(data)),
                                            _acc_config(args), trace=trace):
            path = os.path.join(
                args.out_dir,
                f"acc_{len(groups):04d}_{acc.first_index}_{acc.last_index}.pgm")
            write_pgm(path, normalize_plane(acc.sums))
            created.append(path)
            groups.append(acc)
        stats = reduction_stats(frames, len(groups),
                                [g.member_count for g in groups])
        rows = [["metric", "value"],
                ["input_frames", stats.input_frames],
                ["emitted_groups", stats.emitted_groups],
                ["reduction_ratio", repr(stats.ratio)]]
        for span in sorted(stats.span_histogram):
            rows.append([f"span_{span}", stats.span_histogram[span]])
        stats_path = os.path.join(args.out_dir, "stats.csv")
        write_csv(stats_path, rows)
        created.append(stats_path)
        trace_rows = [["frame_index", "kind", "similarity", "window_mean",
                       "decision", "group_id"]]
        for row in trace:
            trace_rows.append([row.frame_index, row.kind,
                               _fmt_opt(row.similarity),
                               _fmt_opt(row.window_mean),
                               row.decision, _fmt_opt(row.group_id)])
        trace_path = os.path.join(args.out_dir, "trace.csv")
        write_csv(trace_path, trace_rows)
        created.append(trace_path)
        if args.trace:
            from .report import save_similarity_trace
            figure_path = os.path.join(args.out_dir, "trace.png")
            save_similarity_trace(trace, figure_path)
            created.append(figure_path)
    print(f"accumulated {frames} frames into {len(groups)} groups "
          f"(reduction {stats.ratio:.3f})")
    return 0


_ACC_PGM_RE = re.compile(r"acc_(\d+)_(\d+)_(\d+)\.pgm$")


def cmd_featurize(args) -> int:
    rows = []
    if os.path.isdir(args.input):
        paths = sorted(p for p in os.listdir(args.input) if p.endswith(".pgm"))
        if not paths:
            raise IngestError(f"no .pgm files in {args.input}")
        for i, name in enumerate(paths):
            plane = read_pgm(os.path.join(args.input, name))
            match = _ACC_PGM_RE.search(name)
            group_id, first, last = (int(match.group(1)), int(match.group(2)),
                                     int(match.group(3))) if match else (i, i, i)
            rows.append((group_id, first, last, extract_features(plane)))
    else:
        data = _read_stream(args.input)
        groups = list(run_dynamic_accumulation(residual_stream(data),
                                               _acc_config(args)))
        if not groups:
            raise IngestError(f"{args.input}: stream produced no groups")
        for i, acc in enumerate(groups):
            rows.append((i, acc.first_index, acc.last_index,
                         extract_features(normalize_plane(acc.sums))))
    tmp = args.out + ".tmp"
    write_features_csv(tmp, rows)
    os.replace(tmp, args.out)
    print(f"wrote {len(rows)} feature rows to {args.out}")
    return 0


def _read_train_manifest(path: str) -> list[tuple[str, str]]:
    base = os.path.dirname(os.path.abspath(path))
    items: list[tuple[str, str]] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestError(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["features", "label"]:
            raise IngestError(f"{path}: expected header features,label")
        for line, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise IngestError(f"{path}: line {line}: expected 2 columns")
            items.append((os.path.join(base, row[0]), row[1]))
    if not items:
        raise IngestError(f"{path}: no training rows")
    return items


def cmd_train(args) -> int:
    vectors = []
    names = []
    for features_path, label in _read_train_manifest(args.manifest):
        _, matrix = read_features_csv(features_path)
        pooled = pot_pool(matrix, args.partitions)
        vectors.append(pooled)
        names.extend([label] * args.partitions)
    model = train(dataset_from_named(np.concatenate(vectors), names),
                  k=args.k, extractor_id=EXTRACTOR_ID)
    tmp = args.out + ".tmp"
    save_model(model, tmp)
    os.replace(tmp, args.out)
    print(f"trained on {len(names)} exemplars "
          f"({len(model.dataset.label_names)} labels), wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    _, matrix = read_features_csv(args.features)
    pooled = pot_pool(matrix, args.partitions)
    results = [predict(model, row) for row in pooled]
    voted = partition_and_vote([r[0] for r in results], [r[1] for r in results])
    os.makedirs(args.out_dir, exist_ok=True)
    rows = [["partition", "label_id", "label", "score"]]
    for i, (label_id, score) in enumerate(results):
        rows.append([i, label_id, model.dataset.label_names[label_id],
                     repr(score)])
    write_csv(os.path.join(args.out_dir, "decisions.csv"), rows)
    print(model.dataset.label_names[voted])
    return 0


def cmd_evaluate(args) -> int:
    config = PipelineConfig(window_size=args.window_size, sim_c=args.sim_c,
                            qscale=args.qscale, gop_size=args.gop,
                            search_range=args.search_range,
                            partitions=args.partitions, k=args.k,
                            cut_on_iframe=args.cut_on_iframe)
    result = evaluate_corpus(args.manifest, config, threads=args.threads)
    write_evaluation_reports(result, config, args.out_dir)
    from .report import save_confusion_matrix, save_reduction_chart
    save_confusion_matrix(result.with_acc.confusion, result.label_names,
                          os.path.join(args.out_dir, "confusion.png"),
                          title="test confusion (with accumulation)")
    ratios = [reduction_stats(r.frames_in, r.groups_out).ratio
              for r in result.clips]
    save_reduction_chart([r.clip_id for r in result.clips], ratios,
                         result.reduction_ratio,
                         os.path.join(args.out_dir, "reduction.png"))
    print(f"accuracy with accumulation:    {result.with_acc.accuracy:.3f}")
    print(f"accuracy without accumulation: {result.without_acc.accuracy:.3f}")
    print(f"reduction ratio: {result.reduction_ratio:.3f} "
          f"({result.input_frames} frames -> {result.emitted_groups} groups)")
    print(f"residual decode + accumulate throughput: "
          f"{result.frames_per_second:.1f} frames/s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resacc",
        description="Residual extraction and dynamic accumulation pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    enc = argparse.ArgumentParser(add_help=False)
    enc.add_argument("--qscale", type=_positive_int, default=8,
                     help="quantization step (default 8)")
    enc.add_argument("--gop", type=_positive_int, default=250,
                     help="I-frame period (default 250)")
    enc.add_argument("--search-range", type=_nonneg_int, default=7,
                     help="motion search radius in pixels (default 7)")

    acc = argparse.ArgumentParser(add_help=False)
    acc.add_argument("--window-size", type=_positive_int, default=10,
                     help="similarity window size (default 10)")
    acc.add_argument("--sim-c", type=_positive_float, default=1.0,
                     help="similarity stabilizer constant (default 1.0)")
    acc.add_argument("--cut-on-iframe", type=_bool_flag, default=True,
                     metavar="BOOL",
                     help="exclude I-frames and cut groups at them (default true)")

    pool = argparse.ArgumentParser(add_help=False)
    pool.add_argument("--partitions", type=_positive_int, default=8,
                      help="temporal partitions for pooling (default 8)")

    p = sub.add_parser("synth", help="render a ClipSpec to a PGM sequence")
    p.add_argument("--spec", required=True, help="ClipSpec text file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=_nonneg_int, default=None,
                   help="override the spec's seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", parents=[enc],
                       help="encode PGM frames into a .crv stream")
    p.add_argument("--frames", required=True,
                   help="PGM glob pattern or directory")
    p.add_argument("--out", required=True, help="output .crv path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("residuals",
                       help="dump decoded residual frames as PGM + CSV")
    p.add_argument("--input", required=True, help=".crv stream")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("accumulate", parents=[acc],
                       help="group residuals into accumulated planes")
    p.add_argument("--input", required=True, help=".crv stream")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace", action="store_true",
                   help="also render the decision trace as a figure")
    p.set_defaults(func=cmd_accumulate)

    p = sub.add_parser("featurize", parents=[acc],
                       help="feature vectors from a .crv stream or PGM directory")
    p.add_argument("--input", required=True,
                   help=".crv stream (end-to-end) or directory of planes")
    p.add_argument("--out", required=True, help="output features CSV")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[pool],
                       help="train a k-NN model from per-clip features CSVs")
    p.add_argument("--manifest", required=True,
                   help="CSV manifest: features,label")
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--k", type=_positive_int, default=3,
                   help="neighbor count (default 3)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[pool],
                       help="classify one clip's features CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", default=".",
                   help="where the per-partition decisions CSV goes (default .)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[enc, acc, pool],
                       help="full corpus evaluation from a manifest")
    p.add_argument("--manifest", required=True,
                   help="CSV manifest: clip_id,spec,label,split")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=_positive_int, default=3,
                   help="neighbor count (default 3)")
    p.add_argument("--threads", type=_nonneg_int, default=None,
                   help="worker processes (default: RESACC_THREADS, 0 = auto)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IngestError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ResaccError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - invariant violations map to 4
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
