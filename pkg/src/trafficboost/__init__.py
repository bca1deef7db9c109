"""
TrafficBoost - two-stage gradient boosting for short-term traffic state estimation.

Stage one recovers the calendar context (month, day of week, 15-minute slot) of a snapshot
from one hour of loop-counter volumes. Stage two predicts a congestion class per road edge
and an ETA per super-segment from target-encoded features and that recovered context.

Subpackages:
- trafficboost.data - road graph, snapshot and label types
- trafficboost.gbdt - histogram gradient boosted trees
- trafficboost.encoding - target encoding and feature builders
- trafficboost.staging - the two stages
- trafficboost.metrics - scores and reports
- trafficboost.pipeline - files, synthetic cities, training protocol and CLI
"""

from trafficboost.data import (
    CongestionClass,
    CounterSnapshot,
    RoadGraph,
    SnapshotLabels,
    TimeContext,
    TrafficBoostError,
    validate_graph,
)
from trafficboost.gbdt import PRESET_A, PRESET_B, GbdtModel, GbdtParams, Objective, predict, train
from trafficboost.metrics import AblationReport, EvalReport, core_metric, extended_metric
from trafficboost.pipeline import (
    Dataset,
    ModelBundle,
    PipelineConfig,
    SyntheticSpec,
    generate_city,
    train_full,
)
from trafficboost.staging import (
    StageOneModel,
    StageTwoModel,
    predict_context,
    predict_stage2,
    predict_stage2_many,
    train_stage1,
    train_stage2,
)

__all__ = [
    "PRESET_A",
    "PRESET_B",
    "AblationReport",
    "CongestionClass",
    "CounterSnapshot",
    "Dataset",
    "EvalReport",
    "GbdtModel",
    "GbdtParams",
    "ModelBundle",
    "Objective",
    "PipelineConfig",
    "RoadGraph",
    "SnapshotLabels",
    "StageOneModel",
    "StageTwoModel",
    "SyntheticSpec",
    "TimeContext",
    "TrafficBoostError",
    "core_metric",
    "extended_metric",
    "generate_city",
    "predict",
    "predict_context",
    "predict_stage2",
    "predict_stage2_many",
    "train",
    "train_full",
    "train_stage1",
    "train_stage2",
    "validate_graph",
]
