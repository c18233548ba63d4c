"""Compressed-domain action recognition via accumulated residuals.

The pipeline decodes only the residual signal from a block-transform video
stream (no motion compensation), merges runs of similar consecutive residual
frames into accumulated planes, and classifies pooled grid features with a
chi-square k-NN.
"""

__version__ = "0.1.0"

from .accumulator import (AccumulatedResidual, AccumulatorConfig,
                          normalize_plane, reduction_stats,
                          run_dynamic_accumulation, similarity)
from .classifier import (LabeledDataset, Model, chi2_distance,
                         dataset_from_named, load_model, predict, save_model,
                         train)
from .codec import EncoderConfig, encode, encode_clip, ingest_frames
from .errors import IngestError, ParseError, ResaccError
from .features import (FEATURE_DIM, extract_features, partition_and_vote,
                       pot_pool)
from .partial_decoder import (ResidualFrame, parse_header, parse_stream,
                              residual_stream, residual_to_plane)
from .pgm import read_pgm, write_pgm
from .pipeline import PipelineConfig, evaluate_corpus, process_clip
from .synthgen import ClipSpec, generate, load_clip_spec, save_clip_spec

__all__ = [
    "AccumulatedResidual",
    "AccumulatorConfig",
    "ClipSpec",
    "EncoderConfig",
    "FEATURE_DIM",
    "IngestError",
    "LabeledDataset",
    "Model",
    "ParseError",
    "PipelineConfig",
    "ResaccError",
    "ResidualFrame",
    "chi2_distance",
    "dataset_from_named",
    "encode",
    "encode_clip",
    "evaluate_corpus",
    "extract_features",
    "generate",
    "ingest_frames",
    "load_clip_spec",
    "load_model",
    "normalize_plane",
    "parse_header",
    "parse_stream",
    "partition_and_vote",
    "pot_pool",
    "predict",
    "process_clip",
    "read_pgm",
    "reduction_stats",
    "residual_stream",
    "residual_to_plane",
    "run_dynamic_accumulation",
    "save_clip_spec",
    "save_model",
    "similarity",
    "train",
    "write_pgm",
    "__version__",
]
