"""Streaming online hashing: fixed codes, online-learned projections, Hamming search."""

from .codes import (
    PackedCode,
    hamming,
    hamming_rows,
    pack_code,
    pack_rows,
    sign,
    unpack_code,
    unpack_rows,
)
from .errors import (
    DegenerateDataError,
    EmptyLabelError,
    StaleProjectionError,
    ZeroNormError,
)
from .evaluate import (
    EvalRun,
    SyntheticDataset,
    TrainedPipeline,
    average_precision,
    gen_synthetic_multilabel,
    groundtruth_neighbors,
    mean_average_precision,
    mean_relevant_fraction,
    run_c_sweep,
    run_checkpoint_curve,
    run_streaming_pipeline,
    split_queries,
)
from .fileformats import (
    ModelBundle,
    load_bundle,
    load_index,
    read_features,
    read_labels,
    save_bundle,
    save_index,
    write_features,
    write_labels,
)
from .index import CodeIndex
from .itq import HashModel, encode, encode_batch, fit_pca_itq, quantization_error
from .labelcodes import LabelHashMatrix, ideal_code, sample_label_matrix
from .online import (
    BoundLedger,
    ProjectionState,
    hinge_loss_code,
    hinge_loss_feature,
    init_projection_state,
    mistake_bound,
    process_chunk,
    process_stream_point,
    update_code_projection,
    update_feature_projection,
)

__version__ = "0.1.0"

__all__ = [
    "PackedCode",
    "hamming",
    "hamming_rows",
    "pack_code",
    "pack_rows",
    "sign",
    "unpack_code",
    "unpack_rows",
    "DegenerateDataError",
    "EmptyLabelError",
    "StaleProjectionError",
    "ZeroNormError",
    "EvalRun",
    "SyntheticDataset",
    "TrainedPipeline",
    "average_precision",
    "gen_synthetic_multilabel",
    "groundtruth_neighbors",
    "mean_average_precision",
    "mean_relevant_fraction",
    "run_c_sweep",
    "run_checkpoint_curve",
    "run_streaming_pipeline",
    "split_queries",
    "ModelBundle",
    "load_bundle",
    "load_index",
    "read_features",
    "read_labels",
    "save_bundle",
    "save_index",
    "write_features",
    "write_labels",
    "CodeIndex",
    "HashModel",
    "encode",
    "encode_batch",
    "fit_pca_itq",
    "quantization_error",
    "LabelHashMatrix",
    "ideal_code",
    "sample_label_matrix",
    "BoundLedger",
    "ProjectionState",
    "hinge_loss_code",
    "hinge_loss_feature",
    "init_projection_state",
    "mistake_bound",
    "process_chunk",
    "process_stream_point",
    "update_code_projection",
    "update_feature_projection",
]
