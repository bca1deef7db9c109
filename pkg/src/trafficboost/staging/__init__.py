"""Stage one (time context recovery) and stage two (congestion and ETA heads)."""

from .base import BaseStageModel, StagingError
from .models import PRESET_NAMES, StageOneModel, StageTarget, StageTwoModel
from .stage1 import (
    combine_predictions,
    predict_context,
    predict_contexts,
    round_half_away,
    stage1_feature_names,
    stage1_features,
    train_stage1,
)
from .stage2 import (
    ETA_FLOOR,
    combine_probabilities,
    fit_tables,
    predict_stage2,
    predict_stage2_many,
    stage2_features,
    te_baseline,
    train_stage2,
)

__all__ = [
    "ETA_FLOOR",
    "PRESET_NAMES",
    "BaseStageModel",
    "StageOneModel",
    "StageTarget",
    "StageTwoModel",
    "StagingError",
    "combine_predictions",
    "combine_probabilities",
    "fit_tables",
    "predict_context",
    "predict_contexts",
    "predict_stage2",
    "predict_stage2_many",
    "round_half_away",
    "stage1_feature_names",
    "stage1_features",
    "stage2_features",
    "te_baseline",
    "train_stage1",
    "train_stage2",
]
