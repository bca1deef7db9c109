"""
Pydantic models for the stage-one context regressors and the stage-two heads.
"""

from enum import Enum

from pydantic import Field, model_validator

from ..data.models import SLOTS_PER_DAY
from ..encoding.models import CcEncodingTable, EtaEncodingTable
from ..gbdt.models import GbdtModel
from .base import BaseStageModel

# Ensemble member labels, one per hyperparameter preset
PRESET_NAMES = ("a", "b")


class StageTarget(str, Enum):
    """Time context fields recovered by stage one"""

    MONTH = "month"
    DAY_OF_WEEK = "day_of_week"
    SLOT = "slot"

    @property
    def bounds(self) -> tuple[int, int]:
        """Inclusive valid range"""
        return {
            StageTarget.MONTH: (1, 12),
            StageTarget.DAY_OF_WEEK: (0, 6),
            StageTarget.SLOT: (0, SLOTS_PER_DAY - 1),
        }[self]


class StageOneModel(BaseStageModel):
    """Three context regressors, each an ensemble of one model per preset"""

    counter_ids: tuple[int, ...] = Field(description="Sorted counter node ids of the layout")
    feature_names: tuple[str, ...] = Field(description="Persisted column layout")
    heads: dict[StageTarget, tuple[GbdtModel, ...]]

    @model_validator(mode="after")
    def validate_heads(self) -> "StageOneModel":
        if set(self.heads) != set(StageTarget):
            raise ValueError("Stage one needs a month, day_of_week and slot head")
        for target, models in self.heads.items():
            if not models:
                raise ValueError(f"Head '{target.value}' has no models")
            for model in models:
                if model.feature_names != self.feature_names:
                    raise ValueError(f"Head '{target.value}' disagrees with the feature layout")
        return self

    def members(self) -> dict[str, GbdtModel]:
        return {
            f"{target.value}.{PRESET_NAMES[i]}": model
            for target in StageTarget
            for i, model in enumerate(self.heads[target])
        }


class StageTwoModel(BaseStageModel):
    """Congestion ensemble, ETA regressor and the encoding tables they were trained with"""

    core_models: tuple[GbdtModel, ...] = Field(description="One masked-softmax model per preset")
    extended_model: GbdtModel = Field(description="Absolute-error ETA model")
    cc_table: CcEncodingTable
    eta_table: EtaEncodingTable
    context_free: bool = Field(
        default=False, description="Trained without context-dependent columns"
    )

    @model_validator(mode="after")
    def validate_heads(self) -> "StageTwoModel":
        if not self.core_models:
            raise ValueError("Stage two needs at least one congestion model")
        names = self.core_models[0].feature_names
        if any(m.feature_names != names for m in self.core_models):
            raise ValueError("Congestion models disagree on their feature layout")
        return self

    @property
    def core_feature_names(self) -> tuple[str, ...]:
        return self.core_models[0].feature_names

    @property
    def extended_feature_names(self) -> tuple[str, ...]:
        return self.extended_model.feature_names

    def members(self) -> dict[str, GbdtModel]:
        members = {f"core.{PRESET_NAMES[i]}": m for i, m in enumerate(self.core_models)}
        members["extended.b"] = self.extended_model
        return members
