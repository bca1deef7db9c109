"""
Pipeline and synthetic-city configuration.
"""

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from datetime import date
from pathlib import Path
from typing import Optional

from pydantic import (
    BaseModel,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from ..data.models import SLOTS_PER_DAY
from ..encoding.models import DEFAULT_PSEUDOCOUNT
from ..gbdt.models import PRESET_A, PRESET_B, GbdtParams
from .base import ConfigError

# Input file names inside `data_dir`
NODES_FILE = "nodes.csv"
EDGES_FILE = "edges.csv"
SUPERSEGMENTS_FILE = "supersegments.csv"
CORE_LABELS_FILE = "core_labels.csv"
ETA_LABELS_FILE = "eta_labels.csv"
SNAPSHOTS_FILE = "snapshots.csv"
DATA_FILES = (
    NODES_FILE,
    EDGES_FILE,
    SUPERSEGMENTS_FILE,
    CORE_LABELS_FILE,
    ETA_LABELS_FILE,
    SNAPSHOTS_FILE,
)

# Fields that do not change trained models
_DIGEST_EXCLUDE = {"data_dir", "out_dir", "n_jobs", "log_every"}


class PipelineConfig(BaseModel):
    """Settings of one city's pipeline run"""

    city: str = Field(default="synthetic", description="City identifier")
    data_dir: Path = Field(default=Path("data"), description="Directory of the input files")
    out_dir: Path = Field(default=Path("out"), description="Bundle and prediction directory")
    slots_per_day: int = Field(default=SLOTS_PER_DAY)
    pseudocount: PositiveFloat = Field(
        default=DEFAULT_PSEUDOCOUNT, description="Congestion encoding smoothing weight"
    )
    preset_a: GbdtParams = Field(default=PRESET_A)
    preset_b: GbdtParams = Field(default=PRESET_B)
    num_rounds: PositiveInt = Field(default=10_000, description="Boosting round cap")
    early_stopping_rounds: PositiveInt = Field(default=1_000)
    validation_weeks: PositiveInt = Field(default=2)
    contiguous_validation: bool = Field(
        default=True, description="Validation weeks form one contiguous block"
    )
    test_weeks: NonNegativeInt = Field(
        default=1, description="Final calendar weeks held out for evaluate and ablate"
    )
    seed: int = Field(default=0)
    n_jobs: PositiveInt = Field(default=1, description="Threads across ensemble members")
    log_every: NonNegativeInt = Field(default=100)

    @field_validator("slots_per_day")
    @classmethod
    def validate_slots(cls, v: int) -> int:
        if v != SLOTS_PER_DAY:
            raise ValueError(f"slots_per_day is fixed at {SLOTS_PER_DAY}, got: {v}")
        return v

    def presets(self) -> tuple[GbdtParams, GbdtParams]:
        """Presets A and B with the run's round cap, patience and seed applied"""
        return tuple(
            p.model_copy(
                update={
                    "num_rounds": self.num_rounds,
                    "early_stopping_rounds": self.early_stopping_rounds,
                    "seed": p.seed + self.seed,
                }
            )
            for p in (self.preset_a, self.preset_b)
        )

    def config_digest(self) -> str:
        """SHA-256 of the canonical JSON of every model-affecting field"""
        payload = self.model_dump(mode="json", exclude=_DIGEST_EXCLUDE)
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def data_path(self, name: str) -> Path:
        return self.data_dir / name

    @property
    def bundle_path(self) -> Path:
        return self.out_dir / f"{self.city}.bundle"

    def check_paths(self) -> None:
        """Raises ConfigError unless every input file exists"""
        missing = [str(self.data_path(n)) for n in DATA_FILES if not self.data_path(n).is_file()]
        if missing:
            raise ConfigError(f"Missing input files: {', '.join(missing)}")

    @classmethod
    def load(cls, path: Path) -> "PipelineConfig":
        """Read a JSON or TOML config; relative directories resolve against its location.

        Raises:
            ConfigError: unreadable file, unknown format or invalid values.
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}")
        try:
            if path.suffix == ".toml":
                raw = tomllib.loads(text)
            elif path.suffix == ".json":
                raw = json.loads(text)
            else:
                raise ConfigError(f"Config must be .json or .toml, got: {path.name}")
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot parse config {path}: {e}")
        try:
            config = cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"Invalid config {path}: {e}")
        return config.resolve(path.parent)

    def resolve(self, base_dir: Path) -> "PipelineConfig":
        update = {}
        for name in ("data_dir", "out_dir"):
            value = getattr(self, name)
            if not value.is_absolute():
                update[name] = (base_dir / value).resolve()
        return self.model_copy(update=update)

    def override(
        self,
        seed: Optional[int] = None,
        city: Optional[str] = None,
        out_dir: Optional[Path] = None,
    ) -> "PipelineConfig":
        """Copy with CLI flag values applied"""
        update = {"seed": seed, "city": city, "out_dir": out_dir}
        return self.model_copy(update={k: v for k, v in update.items() if v is not None})

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


class SyntheticSpec(BaseModel):
    """Shape of a generated city: graph size, calendar span, signal and noise levels.

    Counter volumes are `amplitude` off-peak and rise by `peak_height` times that in two rush
    hours. Counters run their day curve at phases spread evenly around the clock, so every
    slot sits on the rising or falling side of some counter's rush hour.
    """

    city: str = Field(default="synthetic")
    n_nodes: PositiveInt = Field(default=40)
    neighbours: PositiveInt = Field(default=4, description="Ring neighbours per node")
    rewire: float = Field(default=0.2, ge=0.0, le=1.0, description="Ring rewiring probability")
    oneway_rate: float = Field(default=0.4, ge=0.0, le=1.0)
    n_counters: PositiveInt = Field(default=12)
    n_supersegments: PositiveInt = Field(default=15)
    supersegment_nodes: tuple[PositiveInt, PositiveInt] = Field(
        default=(3, 6), description="Inclusive node count range of a super-segment"
    )
    start: date = Field(default=date(2020, 1, 6), description="First day, a Monday by default")
    weeks: PositiveInt = Field(default=10)
    snapshots_per_day: PositiveInt = Field(
        default=SLOTS_PER_DAY, description="Counter snapshots per day; all slots by default"
    )
    labelled_per_day: Optional[PositiveInt] = Field(
        default=4,
        description="Snapshots per day that carry labels (capped at snapshots_per_day); "
        "None labels every snapshot",
    )
    amplitude: PositiveFloat = Field(default=100.0, description="Mean off-peak counter volume")
    peak_height: NonNegativeFloat = Field(
        default=4.0, description="Rush-hour rise above the off-peak level, in amplitudes"
    )
    peak_width: PositiveFloat = Field(default=3.0, description="Rush-hour width in slots")
    noise: NonNegativeFloat = Field(default=0.1, description="Volume noise, fraction of amplitude")
    missing_rate: float = Field(default=0.05, ge=0.0, lt=1.0)
    phase_jitter: NonNegativeFloat = Field(
        default=1.0, description="Max offset of a counter from its evenly spread phase, in slots"
    )
    edge_phase_jitter: NonNegativeFloat = Field(
        default=6.0, description="Max per-edge phase offset of the congestion curve, in slots"
    )
    weekday_factors: tuple[PositiveFloat, ...] = Field(
        default=(1.0, 1.02, 1.04, 1.03, 0.97, 0.9, 0.85),
        description="Volume multiplier per day of week, Monday first",
    )
    daily_trend: float = Field(default=0.001, description="Relative volume growth per day")
    label_rate: float = Field(default=0.85, gt=0.0, le=1.0, description="Labelled edge share")
    congestion_thresholds: tuple[float, float] = Field(
        default=(0.75, 0.45), description="Latent level thresholds for red and yellow"
    )
    congestion_noise: NonNegativeFloat = Field(default=0.08)
    eta_base: tuple[PositiveFloat, PositiveFloat] = Field(default=(60.0, 600.0))
    eta_modulation: NonNegativeFloat = Field(default=0.5)
    eta_noise: NonNegativeFloat = Field(default=0.05, description="Fraction of the base ETA")
    seed: int = Field(default=0)

    @field_validator("weekday_factors")
    @classmethod
    def validate_weekday_factors(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if len(v) != 7:
            raise ValueError(f"Expected 7 weekday factors, got: {len(v)}")
        return v

    @model_validator(mode="after")
    def validate_counts(self) -> "SyntheticSpec":
        if self.n_counters > self.n_nodes:
            raise ValueError(
                f"Cannot place {self.n_counters} counters on {self.n_nodes} nodes"
            )
        if self.neighbours >= self.n_nodes:
            raise ValueError("Ring neighbours must be fewer than the nodes")
        lo, hi = self.supersegment_nodes
        if not 2 <= lo <= hi:
            raise ValueError(f"Super-segment node range needs 2 <= lo <= hi, got: {lo}, {hi}")
        if self.congestion_thresholds[0] <= self.congestion_thresholds[1]:
            raise ValueError("The red threshold must exceed the yellow one")
        if self.eta_base[0] > self.eta_base[1]:
            raise ValueError("eta_base must be an increasing (low, high) pair")
        if self.snapshots_per_day > SLOTS_PER_DAY:
            raise ValueError(f"At most {SLOTS_PER_DAY} snapshots per day")
        return self

    @property
    def days(self) -> int:
        return self.weeks * 7

    @property
    def labelled_snapshots_per_day(self) -> int:
        if self.labelled_per_day is None:
            return self.snapshots_per_day
        return min(self.labelled_per_day, self.snapshots_per_day)


def desk_config(spec: SyntheticSpec, data_dir: Path, out_dir: Path) -> PipelineConfig:
    """Config sized for a generated city.

    Stage one sees every slot of every day, so the presets grow deeper trees on small leaves;
    the round cap and patience are far below the full-scale defaults.
    """
    return PipelineConfig(
        city=spec.city,
        data_dir=data_dir,
        out_dir=out_dir,
        preset_a=PRESET_A.model_copy(
            update={"max_depth": 6, "learning_rate": 0.1, "subsample": 0.8, "min_samples_leaf": 5}
        ),
        preset_b=PRESET_B.model_copy(update={"min_samples_leaf": 5}),
        num_rounds=600,
        early_stopping_rounds=40,
        validation_weeks=2,
        test_weeks=1,
        seed=spec.seed,
        n_jobs=4,
        log_every=100,
    )
