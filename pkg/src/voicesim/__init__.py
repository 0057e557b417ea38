"""Speaker voice similarity scoring on precomputed layer-wise representations."""

from .errors import (
    ConfigError,
    DimensionError,
    FormatError,
    ManifestError,
    VoicesimError,
    ZeroVarianceError,
)
from .metrics import (
    MetricBlock,
    MetricsReport,
    SystemRow,
    average_ranks,
    compute_report,
    evaluate,
    mse,
    pearson,
    spearman,
    system_aggregate,
)
from .model import (
    MODE_CLASSIFICATION,
    MODE_REGRESSION,
    NUM_CLASSES,
    PARAM_FIELDS,
    SOURCE_LAST_LAYER,
    SOURCE_WEIGHTED_SUM,
    Gradients,
    ModelConfig,
    ModelParams,
    ScoreOutput,
    apply_adapter,
    co_attention,
    forward,
    init_params,
    layer_weights,
    load_checkpoint,
    loss_and_grad,
    mean_pool,
    per_dim_l1,
    predict_head,
    save_checkpoint,
    select_last_layer,
    weighted_sum,
)
from .repr_store import (
    Dataset,
    LayerwiseRepr,
    RatedPair,
    load_manifest,
    read_lrp,
    split_dataset,
    validate_manifest,
    write_lrp,
)
from .training import (
    AdamState,
    TrainConfig,
    TrainResult,
    adam_step,
    grad_check,
    init_adam,
    select_best,
    train,
    train_epoch,
    write_history,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "ConfigError",
    "Dataset",
    "DimensionError",
    "FormatError",
    "Gradients",
    "LayerwiseRepr",
    "MODE_CLASSIFICATION",
    "MODE_REGRESSION",
    "ManifestError",
    "MetricBlock",
    "MetricsReport",
    "ModelConfig",
    "ModelParams",
    "NUM_CLASSES",
    "PARAM_FIELDS",
    "RatedPair",
    "SOURCE_LAST_LAYER",
    "SOURCE_WEIGHTED_SUM",
    "ScoreOutput",
    "SystemRow",
    "TrainConfig",
    "TrainResult",
    "VoicesimError",
    "ZeroVarianceError",
    "adam_step",
    "apply_adapter",
    "average_ranks",
    "co_attention",
    "compute_report",
    "evaluate",
    "forward",
    "grad_check",
    "init_adam",
    "init_params",
    "layer_weights",
    "load_checkpoint",
    "load_manifest",
    "loss_and_grad",
    "mean_pool",
    "mse",
    "pearson",
    "per_dim_l1",
    "predict_head",
    "read_lrp",
    "save_checkpoint",
    "select_best",
    "select_last_layer",
    "spearman",
    "split_dataset",
    "system_aggregate",
    "train",
    "train_epoch",
    "validate_manifest",
    "weighted_sum",
    "write_history",
    "write_lrp",
]
