"""
Model bundles: every trained model of one city plus its encoding tables in one zip archive.

Archive layout:
    manifest.json            BundleManifest
    stage1/<member>.tbgb     context regressors
    stage2/<member>.tbgb     congestion and ETA heads
    tables/cc.npz            congestion encoding table
    tables/eta.npz           ETA encoding table
"""

import io
import logging
import zipfile
from datetime import date
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..encoding.base import EncodingError
from ..encoding.models import CcEncodingTable, EtaEncodingTable
from ..gbdt.base import SerializationError
from ..gbdt.serialization import atomic_write_bytes, deserialize, serialize
from ..staging.models import StageOneModel, StageTarget, StageTwoModel
from .base import BundleError

logger = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1
MANIFEST = "manifest.json"
CC_TABLE = "tables/cc.npz"
ETA_TABLE = "tables/eta.npz"

# Fixed member timestamp keeps archives byte-identical across runs
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


class BundleManifest(BaseModel):
    format_version: int = Field(default=BUNDLE_FORMAT_VERSION)
    city: str
    config_digest: str = Field(description="SHA-256 of the config the models were trained with")
    counter_ids: tuple[int, ...]
    stage1_features: tuple[str, ...]
    core_features: tuple[str, ...]
    extended_features: tuple[str, ...]
    stage1_members: tuple[str, ...]
    stage2_members: tuple[str, ...]
    best_rounds: dict[str, int] = Field(description="Phase-one validation optimum per member")
    context_free: bool = False
    validation_days: tuple[date, ...] = ()


class ModelBundle(BaseModel):
    """Both stages of one city and the provenance needed to reuse them"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    city: str
    config_digest: str
    stage1: StageOneModel
    stage2: StageTwoModel
    best_rounds: dict[str, int] = Field(default_factory=dict)
    validation_days: tuple[date, ...] = ()

    def manifest(self) -> BundleManifest:
        return BundleManifest(
            city=self.city,
            config_digest=self.config_digest,
            counter_ids=self.stage1.counter_ids,
            stage1_features=self.stage1.feature_names,
            core_features=self.stage2.core_feature_names,
            extended_features=self.stage2.extended_feature_names,
            stage1_members=tuple(self.stage1.members()),
            stage2_members=tuple(self.stage2.members()),
            best_rounds=self.best_rounds,
            context_free=self.stage2.context_free,
            validation_days=self.validation_days,
        )


def _member_path(stage: str, name: str) -> str:
    return f"{stage}/{name}.tbgb"


def bundle_bytes(bundle: ModelBundle) -> bytes:
    """Serialize a bundle to zip archive bytes"""
    entries = [(MANIFEST, bundle.manifest().model_dump_json(indent=2).encode("utf-8"))]
    for stage, model in (("stage1", bundle.stage1), ("stage2", bundle.stage2)):
        for name, member in model.members().items():
            entries.append((_member_path(stage, name), serialize(member)))
    entries.append((CC_TABLE, bundle.stage2.cc_table.to_bytes()))
    entries.append((ETA_TABLE, bundle.stage2.eta_table.to_bytes()))

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as archive:
        for name, payload in entries:
            info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            archive.writestr(info, payload)
    return buffer.getvalue()


def save_bundle(bundle: ModelBundle, path: Path) -> None:
    atomic_write_bytes(Path(path), bundle_bytes(bundle))
    logger.info("Saved model bundle for '%s' to %s", bundle.city, path)


def load_bundle(path: Path, expected_digest: Optional[str] = None) -> ModelBundle:
    """Read a bundle written by `save_bundle`.

    Args:
        path (Path): bundle archive.
        expected_digest (str, optional): digest of the current config; a bundle trained with
            another config is rejected. Defaults to None (no check).

    Raises:
        BundleError: missing or malformed archive, missing members, or digest mismatch.
    """
    path = Path(path)
    if not path.is_file():
        raise BundleError(f"No model bundle at {path}; run `trafficboost train` first")
    try:
        with zipfile.ZipFile(path) as archive:
            contents = {name: archive.read(name) for name in archive.namelist()}
    except zipfile.BadZipFile as e:
        raise BundleError(f"{path} is not a model bundle: {e}")

    def entry(name: str) -> bytes:
        if name not in contents:
            raise BundleError(f"{path} lacks '{name}'")
        return contents[name]

    try:
        manifest = BundleManifest.model_validate_json(entry(MANIFEST))
    except ValidationError as e:
        raise BundleError(f"Malformed bundle manifest in {path}: {e}")
    if manifest.format_version != BUNDLE_FORMAT_VERSION:
        raise BundleError(
            f"Bundle format {manifest.format_version} is not supported "
            f"(expected {BUNDLE_FORMAT_VERSION})"
        )
    if expected_digest is not None and manifest.config_digest != expected_digest:
        raise BundleError(
            f"Bundle {path} was trained with config {manifest.config_digest[:12]}, "
            f"current config is {expected_digest[:12]}; retrain or restore the config"
        )

    try:
        stage1_members = {
            name: deserialize(entry(_member_path("stage1", name)))
            for name in manifest.stage1_members
        }
        stage2_members = {
            name: deserialize(entry(_member_path("stage2", name)))
            for name in manifest.stage2_members
        }
        cc_table = CcEncodingTable.from_bytes(entry(CC_TABLE))
        eta_table = EtaEncodingTable.from_bytes(entry(ETA_TABLE))
    except (SerializationError, EncodingError) as e:
        raise BundleError(f"Corrupt member in {path}: {e}")

    heads = {
        target: tuple(
            model for name, model in stage1_members.items()
            if name.split(".", 1)[0] == target.value
        )
        for target in StageTarget
    }
    core = tuple(m for name, m in stage2_members.items() if name.startswith("core."))
    extended = [m for name, m in stage2_members.items() if name.startswith("extended.")]
    if len(extended) != 1:
        raise BundleError(f"{path} must hold exactly one extended member, got: {len(extended)}")
    try:
        stage1 = StageOneModel(
            city=manifest.city,
            counter_ids=manifest.counter_ids,
            feature_names=manifest.stage1_features,
            heads=heads,
        )
        stage2 = StageTwoModel(
            city=manifest.city,
            core_models=core,
            extended_model=extended[0],
            cc_table=cc_table,
            eta_table=eta_table,
            context_free=manifest.context_free,
        )
    except ValidationError as e:
        raise BundleError(f"Inconsistent models in {path}: {e}")
    if stage2.core_feature_names != manifest.core_features:
        raise BundleError(f"Core feature layout in {path} disagrees with its manifest")
    if stage2.extended_feature_names != manifest.extended_features:
        raise BundleError(f"Extended feature layout in {path} disagrees with its manifest")

    logger.info("Loaded model bundle for '%s' from %s", manifest.city, path)
    return ModelBundle(
        city=manifest.city,
        config_digest=manifest.config_digest,
        stage1=stage1,
        stage2=stage2,
        best_rounds=manifest.best_rounds,
        validation_days=manifest.validation_days,
    )
