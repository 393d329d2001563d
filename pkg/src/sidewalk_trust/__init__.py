"""Coverage and history-based trustworthiness of OpenStreetMap sidewalk data."""

__version__ = "0.1.0"

from .classify import ClassifierConfig, FeatureClass, classify_way, extract_attributes
from .coverage import CoverageReport, attribute_availability, coverage_stats, growth_series
from .history import HistoryStore, Snapshot, load_history, parse_history, resolve_way_geometry, snapshot_at
from .spatial import (
    BoundaryPolygon,
    haversine_length,
    hexbin,
    load_boundary,
    neighbor_index,
    point_in_boundary,
    way_in_scope,
)
from .trust import (
    TrustScore,
    TrustWeights,
    direct_trust,
    extract_signals,
    indirect_trust,
    temporal_trust,
    trust_distribution,
    trustworthiness,
)

__all__ = [
    "BoundaryPolygon", "ClassifierConfig", "CoverageReport", "FeatureClass", "HistoryStore", "Snapshot",
    "TrustScore", "TrustWeights", "attribute_availability", "classify_way", "coverage_stats", "direct_trust",
    "extract_attributes", "extract_signals", "growth_series", "haversine_length", "hexbin", "indirect_trust",
    "load_boundary", "load_history", "neighbor_index", "parse_history", "point_in_boundary", "resolve_way_geometry",
    "snapshot_at", "temporal_trust", "trust_distribution", "trustworthiness", "way_in_scope",
]
