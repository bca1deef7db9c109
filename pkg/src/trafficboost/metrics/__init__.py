"""Challenge metrics and evaluation reports."""

from .base import MetricError
from .models import AblationCondition, AblationReport, EvalReport, TargetScore
from .scores import (
    core_metric,
    cyclic_distance,
    evaluation_class_weights,
    extended_metric,
    stage1_metric,
)

__all__ = [
    "AblationCondition",
    "AblationReport",
    "EvalReport",
    "MetricError",
    "TargetScore",
    "core_metric",
    "cyclic_distance",
    "evaluation_class_weights",
    "extended_metric",
    "stage1_metric",
]
