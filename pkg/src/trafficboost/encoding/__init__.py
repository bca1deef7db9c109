"""Target encoding tables and the core/extended feature builders."""

from .base import EncodingError
from .encoders import (
    SMOOTHING_DENOMINATOR,
    encode_edges,
    encode_supersegments,
    eta_grid,
    fit_cc_encoding,
    fit_eta_encoding,
    lookup_cc,
    lookup_eta,
    smoothed_te,
)
from .features import (
    CONTEXT_COLUMNS_CORE,
    CONTEXT_COLUMNS_EXTENDED,
    CORE_FEATURES,
    EXTENDED_FEATURES,
    build_core_features,
    build_extended_features,
    edge_static_columns,
)
from .models import (
    DEFAULT_PSEUDOCOUNT,
    CategoryKey,
    CcEncodingTable,
    ConditioningSet,
    EtaEncodingTable,
    category_codes,
)

__all__ = [
    "CONTEXT_COLUMNS_CORE",
    "CONTEXT_COLUMNS_EXTENDED",
    "CORE_FEATURES",
    "DEFAULT_PSEUDOCOUNT",
    "EXTENDED_FEATURES",
    "SMOOTHING_DENOMINATOR",
    "CategoryKey",
    "CcEncodingTable",
    "ConditioningSet",
    "EncodingError",
    "EtaEncodingTable",
    "build_core_features",
    "build_extended_features",
    "category_codes",
    "edge_static_columns",
    "encode_edges",
    "encode_supersegments",
    "eta_grid",
    "fit_cc_encoding",
    "fit_eta_encoding",
    "lookup_cc",
    "lookup_eta",
    "smoothed_te",
]
