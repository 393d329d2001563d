"""Sidewalk taxonomy for OSM way tags."""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigError


class FeatureClass(str, Enum):
    ROAD_NO_SIDEWALK_INFO = "road_no_sidewalk_info"
    ROAD_WITH_SIDEWALK_INFO = "road_with_sidewalk_info"
    SIDEWALK_GEOMETRY = "sidewalk"
    FOOTWAY = "footway"
    OTHER = "other"

    @property
    def is_road(self) -> bool:
        return self in (FeatureClass.ROAD_NO_SIDEWALK_INFO, FeatureClass.ROAD_WITH_SIDEWALK_INFO)


DEFAULT_EXCLUDED_HIGHWAYS = frozenset({
    "footway", "escape", "raceway", "busway", "bridleway",
    "path", "cycleway", "construction", "corridor",
})
DEFAULT_SIDEWALK_INFO_VALUES = frozenset({"both", "right", "left", "yes"})
DEFAULT_TRACKED_ATTRIBUTES = (
    "surface", "width", "smoothness", "kerb", "wheelchair", "tactile_paving", "incline", "lit",
)


@dataclass(frozen=True)
class ClassifierConfig:
    excluded_highways: frozenset[str] = DEFAULT_EXCLUDED_HIGHWAYS
    sidewalk_info_values: frozenset[str] = DEFAULT_SIDEWALK_INFO_VALUES
    tracked_attributes: tuple[str, ...] = field(default=DEFAULT_TRACKED_ATTRIBUTES)

    def __post_init__(self):
        object.__setattr__(self, "excluded_highways", frozenset(self.excluded_highways))
        object.__setattr__(self, "sidewalk_info_values", frozenset(self.sidewalk_info_values))
        object.__setattr__(self, "tracked_attributes", tuple(self.tracked_attributes))
        for name in ("excluded_highways", "sidewalk_info_values", "tracked_attributes"):
            values = getattr(self, name)
            if not values:
                raise ConfigError(f"classifier {name} must not be empty")
            if not all(isinstance(v, str) for v in values):
                raise ConfigError(f"classifier {name} must contain strings only")

    @classmethod
    def from_dict(cls, data: Mapping) -> ClassifierConfig:
        unknown = set(data) - {"excluded_highways", "sidewalk_info_values", "tracked_attributes"}
        if unknown:
            raise ConfigError(f"unknown classifier keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items()})

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> ClassifierConfig:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read classifier config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "excluded_highways": sorted(self.excluded_highways),
            "sidewalk_info_values": sorted(self.sidewalk_info_values),
            "tracked_attributes": list(self.tracked_attributes),
        }


DEFAULT_CONFIG = ClassifierConfig()


def classify_way(tags: Mapping[str, str], cfg: ClassifierConfig = DEFAULT_CONFIG) -> FeatureClass:
    """Classify a way by its tags. Matching is exact and case-sensitive.

    Separate sidewalk ways (``highway=footway`` + ``footway=sidewalk``) are
    checked first, then other footways, then the road types that cannot carry
    a sidewalk, then ``sidewalk=*`` refinement of the remaining highways.
    """
    highway = tags.get("highway")
    if highway is None:
        return FeatureClass.OTHER
    if highway == "footway":
        if tags.get("footway") == "sidewalk":
            return FeatureClass.SIDEWALK_GEOMETRY
        return FeatureClass.FOOTWAY
    if highway in cfg.excluded_highways:
        return FeatureClass.OTHER
    if tags.get("sidewalk") in cfg.sidewalk_info_values:
        return FeatureClass.ROAD_WITH_SIDEWALK_INFO
    return FeatureClass.ROAD_NO_SIDEWALK_INFO


def extract_attributes(tags: Mapping[str, str], cfg: ClassifierConfig = DEFAULT_CONFIG) -> set[str]:
    """Tracked attribute keys present on ``tags`` with a non-empty value."""
    return {k for k in cfg.tracked_attributes if tags.get(k)}
