"""
Pydantic models for boosting parameters, objectives, feature matrices and tree ensembles.
"""

from enum import Enum
from typing import Optional, Sequence

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)

DEFAULT_EPSILON = 1e-9


class ObjectiveKind(str, Enum):
    SQUARED_ERROR = "squared_error"
    ABSOLUTE_ERROR = "absolute_error"
    MASKED_WEIGHTED_SOFTMAX = "masked_weighted_softmax"


class Objective(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ObjectiveKind
    num_classes: int = Field(default=1, ge=1, description="2+ for softmax, else 1")
    class_weights: Optional[tuple[PositiveFloat, ...]] = Field(
        default=None,
        description="Per-class weights (softmax only); filled from training targets when None",
    )
    epsilon: PositiveFloat = Field(
        default=DEFAULT_EPSILON, description="Stabiliser inside the masked log ratio"
    )

    @model_validator(mode="after")
    def validate_classes(self) -> "Objective":
        if self.kind is ObjectiveKind.MASKED_WEIGHTED_SOFTMAX:
            if self.num_classes < 2:
                raise ValueError(
                    f"Softmax objective needs at least 2 classes, got: {self.num_classes}"
                )
            if self.class_weights is not None and len(self.class_weights) != self.num_classes:
                raise ValueError(
                    f"Expected {self.num_classes} class weights, got: {len(self.class_weights)}"
                )
        else:
            if self.num_classes != 1:
                raise ValueError(
                    f"Regression objectives have num_classes 1, got: {self.num_classes}"
                )
            if self.class_weights is not None:
                raise ValueError("Class weights apply to the softmax objective only")
        return self

    @property
    def is_multiclass(self) -> bool:
        return self.kind is ObjectiveKind.MASKED_WEIGHTED_SOFTMAX

    @property
    def num_outputs(self) -> int:
        return self.num_classes

    @classmethod
    def squared_error(cls) -> "Objective":
        return cls(kind=ObjectiveKind.SQUARED_ERROR)

    @classmethod
    def absolute_error(cls) -> "Objective":
        return cls(kind=ObjectiveKind.ABSOLUTE_ERROR)

    @classmethod
    def masked_softmax(
        cls,
        num_classes: int,
        class_weights: Optional[Sequence[float]] = None,
        epsilon: float = DEFAULT_EPSILON,
    ) -> "Objective":
        return cls(
            kind=ObjectiveKind.MASKED_WEIGHTED_SOFTMAX,
            num_classes=num_classes,
            class_weights=None if class_weights is None else tuple(class_weights),
            epsilon=epsilon,
        )


class GbdtParams(BaseModel):
    """Boosting hyperparameters"""

    model_config = ConfigDict(frozen=True)

    max_depth: PositiveInt = Field(default=6)
    learning_rate: PositiveFloat = Field(default=0.1)
    subsample: float = Field(default=1.0, gt=0.0, le=1.0)
    colsample_bytree: float = Field(default=1.0, gt=0.0, le=1.0)
    colsample_bylevel: float = Field(default=1.0, gt=0.0, le=1.0)
    num_rounds: PositiveInt = Field(default=10_000, description="Upper bound on boosting rounds")
    early_stopping_rounds: PositiveInt = Field(default=1_000)
    min_samples_leaf: PositiveInt = Field(default=20)
    l2_reg: float = Field(default=1.0, ge=0.0)
    histogram_bins: int = Field(default=256, ge=2, le=65_535)
    seed: int = Field(default=0)


# Two settings of the one engine; ensemble members differ by hyperparameters and seed
PRESET_A = GbdtParams(
    max_depth=5,
    learning_rate=0.01,
    subsample=0.5,
    colsample_bytree=0.9,
    colsample_bylevel=0.9,
)
PRESET_B = GbdtParams(learning_rate=0.1, seed=1)


class FeatureMatrix(BaseModel):
    """Rectangular float matrix with named columns; NaN marks MISSING cells"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    column_names: tuple[str, ...]

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"Feature values must be 2-D, got shape: {v.shape}")
        return v

    @model_validator(mode="after")
    def validate_columns(self) -> "FeatureMatrix":
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError("Column names must be unique")
        if self.values.shape[1] != len(self.column_names):
            raise ValueError(
                f"{len(self.column_names)} names for {self.values.shape[1]} columns"
            )
        return self

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def columns(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        """Keep only `names`, in the given order"""
        idx = [self.column_names.index(n) for n in names]
        return FeatureMatrix(values=self.values[:, idx], column_names=tuple(names))

    def with_missing(self, names: Sequence[str]) -> "FeatureMatrix":
        """Copy with the named columns replaced by MISSING"""
        values = self.values.copy()
        for name in names:
            values[:, self.column_names.index(name)] = np.nan
        return FeatureMatrix(values=values, column_names=self.column_names)

    @classmethod
    def from_columns(cls, columns: dict[str, np.ndarray], rows: int) -> "FeatureMatrix":
        """Build from an ordered name -> column mapping (scalars are broadcast)"""
        values = np.empty((rows, len(columns)))
        for j, col in enumerate(columns.values()):
            values[:, j] = col
        return cls(values=values, column_names=tuple(columns))

    @classmethod
    def vstack(cls, matrices: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        if not matrices:
            raise ValueError("Cannot stack zero feature matrices")
        names = matrices[0].column_names
        for m in matrices[1:]:
            if m.column_names != names:
                raise ValueError("Cannot stack matrices with different columns")
        return cls(values=np.vstack([m.values for m in matrices]), column_names=names)


class Tree(BaseModel):
    """Regression tree stored as parallel node arrays.

    Leaves have `feature == -1`; internal nodes send a row left when its value is
    <= threshold, and MISSING values follow `default_left`.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    count: np.ndarray

    @model_validator(mode="after")
    def validate_arrays(self) -> "Tree":
        n = len(self.feature)
        for name in ("threshold", "default_left", "left", "right", "value", "gain", "count"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"Tree array '{name}' must have {n} entries")
        internal = self.feature >= 0
        if np.any(self.left[internal] < 0) or np.any(self.right[internal] < 0):
            raise ValueError("Every internal node needs two children")
        return self

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row"""
        node = np.zeros(values.shape[0], dtype=np.int64)
        rows = np.arange(values.shape[0])
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            at = node[internal]
            x = values[rows[internal], feat[internal]]
            go_left = np.where(
                np.isnan(x), self.default_left[at], x <= self.threshold[at]
            )
            node[internal] = np.where(go_left, self.left[at], self.right[at])

    def predict(self, values: np.ndarray) -> np.ndarray:
        return self.value[self.apply(values)]


class GbdtModel(BaseModel):
    """Boosted tree ensemble.

    Multiclass models hold `num_classes` trees per round, tree k of a round scoring class k.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    objective: Objective
    params: GbdtParams
    base_score: tuple[float, ...]
    trees: tuple[Tree, ...] = Field(default=())
    best_round: int = Field(default=0, ge=0)
    feature_names: tuple[str, ...]
    train_history: tuple[float, ...] = Field(default=())
    valid_history: tuple[float, ...] = Field(default=())

    @model_validator(mode="after")
    def validate_layout(self) -> "GbdtModel":
        k = self.objective.num_outputs
        if len(self.base_score) != k:
            raise ValueError(f"Expected {k} base scores, got: {len(self.base_score)}")
        if len(self.trees) % k:
            raise ValueError(f"Tree count {len(self.trees)} is not a multiple of {k}")
        return self

    @property
    def num_outputs(self) -> int:
        return self.objective.num_outputs

    @property
    def num_rounds_trained(self) -> int:
        return len(self.trees) // self.num_outputs
