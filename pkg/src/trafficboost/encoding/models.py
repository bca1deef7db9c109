"""
Pydantic models for conditioning keys and target encoding tables.

Tables keep every training observation (sorted by calendar day) next to the aggregated
statistics, so any single day can be removed exactly for leave-one-day-out encoding.
"""

import io
import zipfile
from datetime import date
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PrivateAttr,
    model_validator,
)

from ..data.models import IGNORE, NUM_CLASSES, SLOTS_PER_DAY, WEEKEND_DAYS, TimeContext
from .base import EncodingError

TABLE_FORMAT_VERSION = 1
DEFAULT_PSEUDOCOUNT = 20.0
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


class ConditioningSet(str, Enum):
    """Time categories a target statistic is conditioned on"""

    NONE = "none"
    SLOT = "slot"
    WEEKEND = "weekend"
    DOW = "dow"
    SLOT_WEEKEND = "slot_weekend"
    SLOT_DOW = "slot_dow"

    @property
    def components(self) -> tuple[str, ...]:
        return () if self is ConditioningSet.NONE else tuple(self.value.split("_"))

    @property
    def n_categories(self) -> int:
        sizes = {"slot": SLOTS_PER_DAY, "weekend": 2, "dow": 7}
        return int(np.prod([sizes[c] for c in self.components], dtype=np.int64))

    @property
    def has_slot(self) -> bool:
        return "slot" in self.components


def category_codes(conditioning: ConditioningSet, slot, day_of_week) -> np.ndarray:
    """Flat category index of every (slot, day_of_week) pair under `conditioning`"""
    slot = np.asarray(slot, dtype=np.int64)
    dow = np.asarray(day_of_week, dtype=np.int64)
    weekend = np.isin(dow, list(WEEKEND_DAYS)).astype(np.int64)
    match conditioning:
        case ConditioningSet.NONE:
            return np.zeros(np.broadcast(slot, dow).shape, dtype=np.int64)
        case ConditioningSet.SLOT:
            return slot + 0 * dow
        case ConditioningSet.WEEKEND:
            return weekend + 0 * slot
        case ConditioningSet.DOW:
            return dow + 0 * slot
        case ConditioningSet.SLOT_WEEKEND:
            return slot * 2 + weekend
        case ConditioningSet.SLOT_DOW:
            return slot * 7 + dow


class CategoryKey(BaseModel):
    """A conditioning set together with concrete category values"""

    model_config = ConfigDict(frozen=True)

    conditioning: ConditioningSet
    slot: Optional[int] = Field(default=None, ge=0, le=SLOTS_PER_DAY - 1)
    weekend: Optional[bool] = Field(default=None)
    dow: Optional[int] = Field(default=None, ge=0, le=6)

    @model_validator(mode="after")
    def validate_components(self) -> "CategoryKey":
        needed = set(self.conditioning.components)
        for name in ("slot", "weekend", "dow"):
            present = getattr(self, name) is not None
            if present != (name in needed):
                state = "requires" if name in needed else "does not take"
                raise ValueError(
                    f"Conditioning set '{self.conditioning.value}' {state} '{name}'"
                )
        return self

    @classmethod
    def from_context(cls, conditioning: ConditioningSet, context: TimeContext) -> "CategoryKey":
        values = {
            "slot": context.slot,
            "weekend": context.is_weekend,
            "dow": context.day_of_week,
        }
        return cls(
            conditioning=conditioning,
            **{c: values[c] for c in conditioning.components},
        )

    @property
    def code(self) -> int:
        match self.conditioning:
            case ConditioningSet.NONE:
                return 0
            case ConditioningSet.SLOT:
                return self.slot
            case ConditioningSet.WEEKEND:
                return int(self.weekend)
            case ConditioningSet.DOW:
                return self.dow
            case ConditioningSet.SLOT_WEEKEND:
                return self.slot * 2 + int(self.weekend)
            case ConditioningSet.SLOT_DOW:
                return self.slot * 7 + self.dow


def day_ordinal(day: Optional[date]) -> Optional[int]:
    return None if day is None else day.toordinal()


def _positions(keys: np.ndarray, ids) -> np.ndarray:
    """Row of each id in the sorted `keys`, -1 when unseen"""
    ids = np.asarray(ids, dtype=np.int64)
    if keys.size == 0:
        return np.full(ids.shape, -1, dtype=np.int64)
    pos = np.searchsorted(keys, ids)
    pos = np.minimum(pos, keys.size - 1)
    return np.where(keys[pos] == ids, pos, -1)


def _payload(kind: str, arrays: dict[str, np.ndarray]) -> bytes:
    """npz archive of `arrays` with fixed member timestamps: equal tables give equal bytes"""
    members = {"format_version": np.int64(TABLE_FORMAT_VERSION), "kind": np.array(kind), **arrays}
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as archive:
        for name, array in members.items():
            npy = io.BytesIO()
            np.lib.format.write_array(npy, np.asanyarray(array), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            archive.writestr(info, npy.getvalue())
    return buf.getvalue()


def _load_payload(kind: str, payload: bytes) -> dict[str, np.ndarray]:
    try:
        with np.load(io.BytesIO(payload), allow_pickle=False) as data:
            arrays = {name: data[name] for name in data.files}
    except Exception as e:
        raise EncodingError(f"Unreadable encoding table payload: {e}")
    version = int(arrays.pop("format_version", -1))
    if version != TABLE_FORMAT_VERSION:
        raise EncodingError(
            f"Unsupported encoding table version {version}; expected {TABLE_FORMAT_VERSION}"
        )
    found = str(arrays.pop("kind", ""))
    if found != kind:
        raise EncodingError(f"Expected a '{kind}' table, got: '{found}'")
    return arrays


class _ObservationTable(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    keys: np.ndarray = Field(description="Sorted unique edge or super-segment ids")
    obs_key: np.ndarray = Field(description="Row in `keys` of every observation")
    obs_day: np.ndarray = Field(description="Calendar day ordinal, sorted ascending")
    obs_slot: np.ndarray
    obs_dow: np.ndarray

    _codes: dict[ConditioningSet, np.ndarray] = PrivateAttr(default_factory=dict)

    def _check_lengths(self, *extra: str) -> None:
        n = len(self.obs_key)
        for name in ("obs_day", "obs_slot", "obs_dow", *extra):
            if len(getattr(self, name)) != n:
                raise ValueError(f"Observation array '{name}' must have {n} entries")
        if n == 0:
            raise ValueError("An encoding table needs at least one observation")
        if np.any(np.diff(self.obs_day) < 0):
            raise ValueError("Observations must be sorted by day")

    def _build_codes(self) -> None:
        for cond in ConditioningSet:
            self._codes[cond] = category_codes(cond, self.obs_slot, self.obs_dow)

    def positions(self, ids) -> np.ndarray:
        return _positions(self.keys, ids)

    @property
    def num_observations(self) -> int:
        return len(self.obs_key)

    @property
    def days(self) -> list[date]:
        return [date.fromordinal(int(d)) for d in np.unique(self.obs_day)]

    def _day_slice(self, day: int) -> slice:
        lo = np.searchsorted(self.obs_day, day, side="left")
        hi = np.searchsorted(self.obs_day, day, side="right")
        return slice(int(lo), int(hi))


def _sorted_observations(keys_ids, days, slots, dows) -> tuple[np.ndarray, ...]:
    keys_ids = np.asarray(keys_ids, dtype=np.int64)
    days = np.asarray(days, dtype=np.int64)
    order = np.argsort(days, kind="stable")
    keys = np.unique(keys_ids)
    return (
        keys,
        order,
        np.searchsorted(keys, keys_ids[order]),
        days[order],
        np.asarray(slots, dtype=np.int64)[order],
        np.asarray(dows, dtype=np.int64)[order],
    )


# Congestion class encoding
class CcEncodingTable(_ObservationTable):
    """Per-edge congestion class counts under every conditioning set.

    IGNORE labels are never stored. `pseudocount` is the smoothing weight pulling sparse keys
    toward the global class fractions.
    """

    pseudocount: PositiveFloat = Field(default=DEFAULT_PSEUDOCOUNT)
    num_classes: int = Field(default=NUM_CLASSES, ge=2)
    obs_class: np.ndarray

    _counts: dict[ConditioningSet, np.ndarray] = PrivateAttr(default_factory=dict)
    _global: np.ndarray = PrivateAttr(default=None)

    def model_post_init(self, __context) -> None:
        self._check_lengths("obs_class")
        if np.any((self.obs_class < 0) | (self.obs_class >= self.num_classes)):
            raise ValueError("Observed classes must lie in [0, num_classes)")
        self._build_codes()
        n_keys, c = len(self.keys), self.num_classes
        for cond in ConditioningSet:
            n_cat = cond.n_categories
            flat = (self.obs_key * n_cat + self._codes[cond]) * c + self.obs_class
            counts = np.bincount(flat, minlength=n_keys * n_cat * c).astype(np.float64)
            self._counts[cond] = counts.reshape(n_keys, n_cat, c)
        self._global = np.bincount(self.obs_class, minlength=c).astype(np.float64)

    @classmethod
    def from_observations(
        cls,
        edge_ids,
        days,
        slots,
        dows,
        classes,
        pseudocount: float = DEFAULT_PSEUDOCOUNT,
        num_classes: int = NUM_CLASSES,
    ) -> "CcEncodingTable":
        """Build from parallel observation arrays; IGNORE rows are dropped.

        Raises:
            EncodingError: no labelled observation remains.
        """
        classes = np.asarray(classes, dtype=np.int64)
        keep = classes != IGNORE
        if not keep.any():
            raise EncodingError("Cannot fit a congestion encoding without labelled observations")
        keys, order, obs_key, obs_day, obs_slot, obs_dow = _sorted_observations(
            np.asarray(edge_ids)[keep],
            np.asarray(days)[keep],
            np.asarray(slots)[keep],
            np.asarray(dows)[keep],
        )
        return cls(
            pseudocount=pseudocount,
            num_classes=num_classes,
            keys=keys,
            obs_key=obs_key,
            obs_day=obs_day,
            obs_slot=obs_slot,
            obs_dow=obs_dow,
            obs_class=classes[keep][order],
        )

    def global_counts(self, exclude_day: Optional[int] = None) -> np.ndarray:
        """Class counts over all edges and days"""
        if exclude_day is None:
            return self._global.copy()
        sl = self._day_slice(exclude_day)
        return self._global - np.bincount(self.obs_class[sl], minlength=self.num_classes)

    @property
    def mean_cc(self) -> np.ndarray:
        """Global class fractions"""
        return self._global / self._global.sum()

    def class_counts(
        self,
        conditioning: ConditioningSet,
        positions: np.ndarray,
        code: int,
        exclude_day: Optional[int] = None,
    ) -> np.ndarray:
        """Class counts of each key row for one category, shape (len(positions), num_classes)"""
        counts = self._counts[conditioning][:, code, :]
        if exclude_day is not None:
            counts = counts - self._day_counts(conditioning, code, exclude_day)
        out = np.zeros((len(positions), self.num_classes))
        seen = positions >= 0
        out[seen] = counts[positions[seen]]
        return out

    def _day_counts(self, conditioning: ConditioningSet, code: int, day: int) -> np.ndarray:
        sl = self._day_slice(day)
        hit = self._codes[conditioning][sl] == code
        out = np.zeros((len(self.keys), self.num_classes))
        np.add.at(out, (self.obs_key[sl][hit], self.obs_class[sl][hit]), 1.0)
        return out

    def count(self, edge_id: int, key: CategoryKey) -> int:
        """Labelled observations for (edge, key)"""
        pos = self.positions([edge_id])
        return int(self.class_counts(key.conditioning, pos, key.code).sum())

    def fractions(self, edge_id: int, key: CategoryKey) -> np.ndarray:
        """Unsmoothed class fractions for (edge, key); NaN when unobserved"""
        pos = self.positions([edge_id])
        counts = self.class_counts(key.conditioning, pos, key.code)[0]
        total = counts.sum()
        return counts / total if total else np.full(self.num_classes, np.nan)

    def to_bytes(self) -> bytes:
        return _payload(
            "cc",
            {
                "pseudocount": np.float64(self.pseudocount),
                "num_classes": np.int64(self.num_classes),
                "keys": self.keys,
                "obs_key": self.obs_key,
                "obs_day": self.obs_day,
                "obs_slot": self.obs_slot,
                "obs_dow": self.obs_dow,
                "obs_class": self.obs_class,
            },
        )

    @classmethod
    def from_bytes(cls, payload: bytes) -> "CcEncodingTable":
        arrays = _load_payload("cc", payload)
        try:
            return cls(
                pseudocount=float(arrays.pop("pseudocount")),
                num_classes=int(arrays.pop("num_classes")),
                **arrays,
            )
        except (KeyError, ValueError) as e:
            raise EncodingError(f"Malformed congestion encoding table: {e}")


# ETA encoding
class EtaEncodingTable(_ObservationTable):
    """Per-super-segment ETA sums and counts under every conditioning set"""

    obs_eta: np.ndarray

    _sums: dict[ConditioningSet, np.ndarray] = PrivateAttr(default_factory=dict)
    _counts: dict[ConditioningSet, np.ndarray] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self._check_lengths("obs_eta")
        if np.any(~(self.obs_eta > 0)):
            raise ValueError("Observed ETAs must be positive")
        self._build_codes()
        for cond in ConditioningSet:
            self._sums[cond], self._counts[cond] = self._aggregate(cond, None)

    @classmethod
    def from_observations(cls, supersegment_ids, days, slots, dows, etas) -> "EtaEncodingTable":
        """Build from parallel observation arrays.

        Raises:
            EncodingError: no observations.
        """
        etas = np.asarray(etas, dtype=np.float64)
        if etas.size == 0:
            raise EncodingError("Cannot fit an ETA encoding without observations")
        keys, order, obs_key, obs_day, obs_slot, obs_dow = _sorted_observations(
            supersegment_ids, days, slots, dows
        )
        return cls(
            keys=keys,
            obs_key=obs_key,
            obs_day=obs_day,
            obs_slot=obs_slot,
            obs_dow=obs_dow,
            obs_eta=etas[order],
        )

    def _aggregate(
        self, conditioning: ConditioningSet, keep: Optional[np.ndarray]
    ) -> tuple[np.ndarray, np.ndarray]:
        n_keys, n_cat = len(self.keys), conditioning.n_categories
        flat = self.obs_key * n_cat + self._codes[conditioning]
        eta = self.obs_eta
        if keep is not None:
            flat, eta = flat[keep], eta[keep]
        sums = np.bincount(flat, weights=eta, minlength=n_keys * n_cat)
        counts = np.bincount(flat, minlength=n_keys * n_cat).astype(np.float64)
        return sums.reshape(n_keys, n_cat), counts.reshape(n_keys, n_cat)

    def sums_counts(
        self, conditioning: ConditioningSet, exclude_day: Optional[int] = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """ETA sums and counts per (key row, category), recomputed without `exclude_day`"""
        if exclude_day is None:
            return self._sums[conditioning], self._counts[conditioning]
        return self._aggregate(conditioning, self.obs_day != exclude_day)

    def global_mean(self, exclude_day: Optional[int] = None) -> float:
        """Mean ETA over every super-segment and day"""
        eta = self.obs_eta
        if exclude_day is not None:
            eta = eta[self.obs_day != exclude_day]
        if eta.size == 0:
            raise EncodingError("No ETA observations remain after excluding the day")
        return float(eta.mean())

    def to_bytes(self) -> bytes:
        return _payload(
            "eta",
            {
                "keys": self.keys,
                "obs_key": self.obs_key,
                "obs_day": self.obs_day,
                "obs_slot": self.obs_slot,
                "obs_dow": self.obs_dow,
                "obs_eta": self.obs_eta,
            },
        )

    @classmethod
    def from_bytes(cls, payload: bytes) -> "EtaEncodingTable":
        arrays = _load_payload("eta", payload)
        try:
            return cls(**arrays)
        except (KeyError, ValueError) as e:
            raise EncodingError(f"Malformed ETA encoding table: {e}")
