"""
Base class for boosting objectives and the gbdt exception classes.
"""

from abc import ABC, abstractmethod

import numpy as np

from ..data.base import TrafficBoostError
from .models import Objective


class GbdtError(TrafficBoostError):
    """Base class for gradient boosting errors"""


class TrainingError(GbdtError):
    """Raised when training input cannot produce a model"""


class PredictionError(GbdtError):
    """Raised when prediction input does not match the model"""


class ObjectiveError(GbdtError):
    """Raised for unknown objectives and undefined class weights or losses"""


class SerializationError(GbdtError):
    """Raised for malformed, truncated or incompatible model payloads"""


class BaseObjective(ABC):
    """Base class for boosting objectives.

    Raw scores are always 2-D, shape (n_rows, num_outputs); targets are 1-D.
    """

    #: replace Newton leaf values with residual medians after growing each tree
    refines_leaves: bool = False

    def __init__(self, objective: Objective):
        self.objective = objective

    @property
    def num_outputs(self) -> int:
        return self.objective.num_outputs

    def row_weights(self, targets: np.ndarray) -> np.ndarray:
        """Per-row weight in the loss normalisation; zero for masked rows"""
        return np.ones(len(targets))

    def active_rows(self, targets: np.ndarray) -> np.ndarray:
        """Indices of rows that carry training signal"""
        return np.flatnonzero(self.row_weights(targets) > 0)

    def loss(self, raw: np.ndarray, targets: np.ndarray) -> float:
        """Weighted mean of the per-row loss"""
        weights = self.row_weights(targets)
        return float(self.row_loss(raw, targets).sum() / weights.sum())

    @abstractmethod
    def check_targets(self, targets) -> np.ndarray:
        """Validate and convert targets, raising TrainingError when unusable"""
        pass

    @abstractmethod
    def base_score(self, targets: np.ndarray) -> np.ndarray:
        """Initial raw score, one value per output"""
        pass

    @abstractmethod
    def gradients(
        self, raw: np.ndarray, targets: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """First and second order derivatives of the loss w.r.t. raw scores"""
        pass

    @abstractmethod
    def row_loss(self, raw: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Unnormalised per-row loss whose derivative `gradients` returns"""
        pass

    @abstractmethod
    def transform(self, raw: np.ndarray) -> np.ndarray:
        """Map raw scores to model outputs"""
        pass
