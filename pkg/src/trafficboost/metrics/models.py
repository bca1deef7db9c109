"""
Pydantic models for evaluation and ablation reports.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, NonNegativeFloat, NonNegativeInt, computed_field


class TargetScore(BaseModel):
    """Exact-match rate and mean absolute deviation of one stage-one target"""

    accuracy: float = Field(ge=0.0, le=1.0)
    mad: NonNegativeFloat = Field(description="Mean (cyclic) absolute deviation")


class EvalReport(BaseModel):
    core_loss: Optional[NonNegativeFloat] = Field(
        default=None, description="Masked class-weighted cross-entropy over edges"
    )
    extended_mae: Optional[NonNegativeFloat] = Field(
        default=None, description="Mean absolute ETA error in seconds"
    )
    stage1: dict[str, TargetScore] = Field(default_factory=dict)
    snapshots: NonNegativeInt = Field(default=0, description="Snapshots scored by stage one")
    labelled_snapshots: NonNegativeInt = Field(
        default=0, description="Snapshots with labels, scored by stage two"
    )
    core_rows: NonNegativeInt = Field(default=0, description="Labelled edge rows scored")
    core_ignored: NonNegativeInt = Field(default=0, description="IGNORE edge rows skipped")
    extended_rows: NonNegativeInt = Field(default=0)

    def to_flat(self) -> dict[str, float | int | None]:
        """Dotted-key view, e.g. `stage1.slot.accuracy`"""
        flat: dict[str, float | int | None] = {
            "core_loss": self.core_loss,
            "extended_mae": self.extended_mae,
            "snapshots": self.snapshots,
            "labelled_snapshots": self.labelled_snapshots,
            "core_rows": self.core_rows,
            "core_ignored": self.core_ignored,
            "extended_rows": self.extended_rows,
        }
        for target, score in self.stage1.items():
            flat[f"stage1.{target}.accuracy"] = score.accuracy
            flat[f"stage1.{target}.mad"] = score.mad
        return flat


class AblationCondition(str, Enum):
    TWO_STAGE = "two_stage"
    SINGLE_STAGE_NULLED = "single_stage_nulled"
    SINGLE_STAGE_RETRAINED = "single_stage_retrained"
    GROUND_TRUTH = "ground_truth"
    TE_BASELINE = "te_baseline"


def _relative(value: Optional[float], reference: Optional[float]) -> Optional[float]:
    if value is None or reference is None or reference == 0:
        return None
    return (value - reference) / reference


class AblationReport(BaseModel):
    """Metrics of every ablation condition plus relative deltas against the two-stage run.

    The ground-truth delta is (two_stage - ground_truth) / two_stage, positive when true
    contexts help; every other delta is (condition - two_stage) / two_stage, positive when
    the condition loses to the two-stage model.
    """

    conditions: dict[AblationCondition, EvalReport]

    @computed_field
    @property
    def deltas(self) -> dict[str, Optional[float]]:
        reference = self.conditions.get(AblationCondition.TWO_STAGE)
        out: dict[str, Optional[float]] = {}
        if reference is None:
            return out
        for condition, report in self.conditions.items():
            if condition is AblationCondition.TWO_STAGE:
                continue
            for metric in ("core_loss", "extended_mae"):
                ref, value = getattr(reference, metric), getattr(report, metric)
                if condition is AblationCondition.GROUND_TRUTH:
                    delta = _relative(value, ref)
                    delta = None if delta is None else -delta
                else:
                    delta = _relative(value, ref)
                out[f"{condition.value}.{metric}"] = delta
        return out

    def to_flat(self) -> dict[str, float | int | None]:
        flat: dict[str, float | int | None] = {}
        for condition, report in self.conditions.items():
            for key, value in report.to_flat().items():
                flat[f"{condition.value}.{key}"] = value
        for key, value in self.deltas.items():
            flat[f"delta.{key}"] = value
        return flat
