"""Histogram gradient boosted decision trees with masked softmax and L1 objectives."""

from .base import (
    BaseObjective,
    GbdtError,
    ObjectiveError,
    PredictionError,
    SerializationError,
    TrainingError,
)
from .binning import BinMapper
from .booster import EarlyStopping, feature_importance, predict, predict_raw, train
from .grower import TreeGrower, refine_leaves
from .models import (
    PRESET_A,
    PRESET_B,
    FeatureMatrix,
    GbdtModel,
    GbdtParams,
    Objective,
    ObjectiveKind,
    Tree,
)
from .objectives import (
    AbsoluteError,
    MaskedWeightedSoftmax,
    SquaredError,
    class_weights,
    get_objective,
    gradients,
    masked_loss,
    softmax,
)
from .serialization import deserialize, load_model, save_model, serialize

__all__ = [
    "PRESET_A",
    "PRESET_B",
    "AbsoluteError",
    "BaseObjective",
    "BinMapper",
    "EarlyStopping",
    "FeatureMatrix",
    "GbdtError",
    "GbdtModel",
    "GbdtParams",
    "MaskedWeightedSoftmax",
    "Objective",
    "ObjectiveError",
    "ObjectiveKind",
    "PredictionError",
    "SerializationError",
    "SquaredError",
    "TrainingError",
    "Tree",
    "TreeGrower",
    "class_weights",
    "deserialize",
    "feature_importance",
    "get_objective",
    "gradients",
    "load_model",
    "masked_loss",
    "predict",
    "predict_raw",
    "refine_leaves",
    "save_model",
    "serialize",
    "softmax",
]
