"""
Subcommand implementations. Every command reads its inputs from the config, writes its
outputs under `out_dir` through atomic renames and returns what it wrote.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..data.models import CLASS_NAMES, CounterSnapshot, RoadGraph
from ..gbdt.booster import feature_importance
from ..gbdt.serialization import atomic_write_bytes
from ..metrics.models import AblationReport, EvalReport
from ..staging.stage1 import predict_contexts
from ..staging.stage2 import predict_stage2_many
from .bundle import ModelBundle, load_bundle, save_bundle
from .config import PipelineConfig, SyntheticSpec, desk_config
from .io import Dataset, read_dataset, read_graph, read_snapshots, write_dataset, write_frame
from .protocol import ablate as run_ablation
from .protocol import evaluate_condition, split_holdout, train_full
from .synthetic import generate_city

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
TRAIN_SUMMARY_FILE = "train_summary.json"
CONTEXTS_FILE = "contexts.csv"
CORE_PREDICTIONS_FILE = "core_predictions.csv"
EXTENDED_PREDICTIONS_FILE = "extended_predictions.csv"
EVALUATION_FILE = "evaluation.json"
ABLATION_FILE = "ablation.json"


def _write_json(payload: str, path: Path) -> None:
    atomic_write_bytes(path, payload.encode("utf-8"))
    logger.info("Wrote %s", path)


def synthesize(spec: SyntheticSpec, out_dir: Path) -> PipelineConfig:
    """Generate a city, write its input files to `out_dir/data` and a matching config.

    Returns:
        PipelineConfig: the written config with directories resolved against `out_dir`.
    """
    out_dir = Path(out_dir)
    dataset = generate_city(spec)
    write_dataset(dataset, out_dir / "data")
    config = desk_config(spec, Path("data"), Path("out"))
    _write_json(config.to_json(), out_dir / CONFIG_FILE)
    return config.resolve(out_dir)


def ingest_check(config: PipelineConfig) -> Dataset:
    """Ingest and validate every input file; raises on the first problem"""
    config.check_paths()
    dataset = read_dataset(config.data_dir, config.city)
    labelled = sum(len(lab.congestion) for lab in dataset.labels)
    etas = sum(len(lab.eta) for lab in dataset.labels)
    logger.info(
        "'%s' is valid: %d snapshots over %d days, %d congestion and %d ETA labels",
        config.city, len(dataset.snapshots), len(dataset.days()), labelled, etas,
    )
    return dataset


def _load(config: PipelineConfig) -> tuple[Dataset, Dataset]:
    dataset = ingest_check(config)
    return split_holdout(dataset, config.test_weeks)


def train(config: PipelineConfig) -> ModelBundle:
    """Train both stages on everything but the held-out weeks and persist the bundle"""
    train_set, _ = _load(config)
    bundle = train_full(config, train_set)
    save_bundle(bundle, config.bundle_path)

    members = {**bundle.stage1.members(), **bundle.stage2.members()}
    summary = {
        "city": bundle.city,
        "config_digest": bundle.config_digest,
        "validation_days": [d.isoformat() for d in bundle.validation_days],
        "best_rounds": bundle.best_rounds,
        "feature_importance": {
            name: dict(
                sorted(feature_importance(model).items(), key=lambda kv: -kv[1])[:10]
            )
            for name, model in members.items()
        },
    }
    _write_json(json.dumps(summary, indent=2), config.out_dir / TRAIN_SUMMARY_FILE)
    return bundle


def _bundle(config: PipelineConfig) -> ModelBundle:
    return load_bundle(config.bundle_path, expected_digest=config.config_digest())


def predict(config: PipelineConfig, snapshots_path: Optional[Path] = None) -> list[Path]:
    """Write recovered contexts, class probabilities and ETAs for a set of snapshots.

    Args:
        config (PipelineConfig): pipeline settings; the bundle must match its digest.
        snapshots_path (Path, optional): snapshot file to predict. Defaults to the
            held-out weeks of the config's data.

    Raises:
        BundleError: missing bundle or digest mismatch.

    Returns:
        list[Path]: the contexts, core and extended prediction files.
    """
    bundle = _bundle(config)
    if snapshots_path is None:
        _, test = _load(config)
        graph, snapshots = test.graph, list(test.snapshots)
    else:
        graph = read_graph(config.data_dir, config.city)
        snapshots = read_snapshots(snapshots_path, graph)
    return write_predictions(bundle, graph, snapshots, config.out_dir)


def write_predictions(
    bundle: ModelBundle, graph: RoadGraph, snapshots: list[CounterSnapshot], out_dir: Path
) -> list[Path]:
    """Predict every snapshot and write the three prediction files, rows in snapshot order"""
    contexts = predict_contexts(bundle.stage1, snapshots)
    probs, etas = predict_stage2_many(bundle.stage2, graph, snapshots, contexts)
    ids = np.asarray([s.snapshot_id for s in snapshots], dtype=object)
    n_edges, n_segments = len(graph.edges), len(graph.supersegments)

    context_frame = pd.DataFrame(
        {
            "snapshot_id": ids,
            "month": [c.month for c in contexts],
            "day_of_week": [c.day_of_week for c in contexts],
            "slot": [c.slot for c in contexts],
            "is_weekend": [int(c.is_weekend) for c in contexts],
        }
    )
    flat = probs.reshape(-1, len(CLASS_NAMES))
    core_frame = pd.DataFrame(
        {
            "snapshot_id": np.repeat(ids, n_edges),
            "edge_id": np.tile(np.asarray(graph.edge_ids), len(snapshots)),
            **{f"p_{name}": flat[:, i] for i, name in enumerate(CLASS_NAMES)},
            "argmax": np.asarray(CLASS_NAMES, dtype=object)[flat.argmax(axis=1)],
        }
    )
    ext_frame = pd.DataFrame(
        {
            "snapshot_id": np.repeat(ids, n_segments),
            "supersegment_id": np.tile(np.asarray(graph.supersegment_ids), len(snapshots)),
            "eta_seconds": etas.reshape(-1),
        }
    )

    out_dir = Path(out_dir)
    paths = [
        out_dir / CONTEXTS_FILE,
        out_dir / CORE_PREDICTIONS_FILE,
        out_dir / EXTENDED_PREDICTIONS_FILE,
    ]
    for frame, path in zip((context_frame, core_frame, ext_frame), paths):
        write_frame(frame, path)
    return paths


def evaluate(config: PipelineConfig) -> EvalReport:
    """Score the two-stage pipeline on the held-out weeks"""
    bundle = _bundle(config)
    _, test = _load(config)
    report = evaluate_condition(bundle, test)
    _write_json(report.model_dump_json(indent=2), config.out_dir / EVALUATION_FILE)
    return report


def ablate(config: PipelineConfig) -> AblationReport:
    """Score every ablation condition on the held-out weeks"""
    bundle = _bundle(config)
    train_set, test = _load(config)
    report = run_ablation(config, bundle, train_set, test)
    _write_json(report.model_dump_json(indent=2), config.out_dir / ABLATION_FILE)
    return report
