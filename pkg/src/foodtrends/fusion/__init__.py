"""Late-fusion classifier: feature tables, the concat head, training."""

from .features import (
    Modality,
    FeatureTable,
    read_feature_file,
    write_feature_file,
    stub_feature_table,
    zero_filled_table,
)
from .head import (
    FusionHeadParams,
    Gradients,
    init_params,
    forward,
    loss_and_gradients,
    save_head,
    load_head,
)
from .train import TrainConfig, Prediction, train, predict, predict_batch

__all__ = [
    "Modality",
    "FeatureTable",
    "read_feature_file",
    "write_feature_file",
    "stub_feature_table",
    "zero_filled_table",
    "FusionHeadParams",
    "Gradients",
    "init_params",
    "forward",
    "loss_and_gradients",
    "save_head",
    "load_head",
    "TrainConfig",
    "Prediction",
    "train",
    "predict",
    "predict_batch",
]
