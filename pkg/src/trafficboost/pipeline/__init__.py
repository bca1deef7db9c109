"""Ingestion, synthetic cities, the training protocol, model bundles and the CLI."""

from .base import BundleError, ConfigError, IngestError, ProtocolError
from .bundle import BundleManifest, ModelBundle, load_bundle, save_bundle
from .cli import main, setup_logging
from .config import PipelineConfig, SyntheticSpec, desk_config
from .io import Dataset, read_dataset, read_graph, read_snapshots, write_dataset
from .protocol import (
    ablate,
    evaluate_condition,
    split_holdout,
    split_validation,
    train_context_free,
    train_full,
)
from .synthetic import day_profile, generate_city, volume_profile

__all__ = [
    "BundleError",
    "BundleManifest",
    "ConfigError",
    "Dataset",
    "IngestError",
    "ModelBundle",
    "PipelineConfig",
    "ProtocolError",
    "SyntheticSpec",
    "ablate",
    "day_profile",
    "desk_config",
    "evaluate_condition",
    "generate_city",
    "load_bundle",
    "main",
    "read_dataset",
    "read_graph",
    "read_snapshots",
    "save_bundle",
    "setup_logging",
    "split_holdout",
    "split_validation",
    "train_context_free",
    "train_full",
    "volume_profile",
    "write_dataset",
]
