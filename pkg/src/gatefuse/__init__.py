"""gatefuse: trainable gated-fusion classification over precomputed
multimodal embedding manifests."""

__version__ = "0.1.0"

from .data import (
    EmbeddingRecord,
    Manifest,
    ManifestError,
    ModalityEmbedding,
    ModalitySchema,
    load_manifest,
    save_manifest,
    synth_incongruity,
)
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    confusion,
    emit_report,
    score_predictions,
    weighted_prf,
)
from .model import (
    CANONICAL_MODALITIES,
    ForwardCache,
    FusionParams,
    backward,
    classify,
    forward,
    fuse,
    gate_modality,
    init_params,
    load_checkpoint,
    loss,
    pair_gate,
    project,
    save_checkpoint,
)
from .numerics import finite_diff_grad, l2_normalize, mean_pool, sigmoid
from .training import (
    DEFAULT_GRID,
    HyperGrid,
    TrainConfig,
    TrainHistory,
    adam_step,
    evaluate,
    grid_search,
    train,
)

__all__ = [
    "__version__",
    "CANONICAL_MODALITIES",
    "ConfusionMatrix",
    "DEFAULT_GRID",
    "EmbeddingRecord",
    "ForwardCache",
    "FusionParams",
    "HyperGrid",
    "Manifest",
    "ManifestError",
    "MetricsReport",
    "ModalityEmbedding",
    "ModalitySchema",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "backward",
    "classify",
    "confusion",
    "emit_report",
    "evaluate",
    "finite_diff_grad",
    "forward",
    "fuse",
    "gate_modality",
    "grid_search",
    "init_params",
    "l2_normalize",
    "load_checkpoint",
    "load_manifest",
    "loss",
    "mean_pool",
    "pair_gate",
    "project",
    "save_checkpoint",
    "save_manifest",
    "score_predictions",
    "sigmoid",
    "synth_incongruity",
    "train",
    "weighted_prf",
]
