"""
Base class for per-city stage models and the staging exception classes.
"""

from abc import ABC, abstractmethod

from pydantic import BaseModel, ConfigDict, Field

from ..data.base import TrafficBoostError
from ..gbdt.models import GbdtModel


class StagingError(TrafficBoostError):
    """Raised for missing contexts, layout or city mismatches and unfitted models"""


class BaseStageModel(BaseModel, ABC):
    """Trained models of one stage for one city, addressable by member name"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    city: str = Field(description="City the models were trained for")

    @abstractmethod
    def members(self) -> dict[str, GbdtModel]:
        """Every boosted model of the stage keyed by a stable member name"""
        pass

    def best_rounds(self) -> dict[str, int]:
        """Validation-optimal round of every member, replayed by the full-data retrain"""
        return {name: model.best_round for name, model in self.members().items()}

    def check_city(self, city: str) -> None:
        if city != self.city:
            raise StagingError(f"Model trained for city '{self.city}' got data for '{city}'")
