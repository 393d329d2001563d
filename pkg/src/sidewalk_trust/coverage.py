"""Object- and attribute-level coverage statistics and their yearly growth."""

from __future__ import annotations

import logging
import multiprocessing
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .classify import DEFAULT_CONFIG, ClassifierConfig, FeatureClass, classify_way, extract_attributes
from .history import HistoryStore, Snapshot, VersionedElement, WayGeometry, resolve_way_geometry, snapshot_at
from .spatial import BoundaryPolygon, haversine_length, in_scope_from_flags

log = logging.getLogger(__name__)


def pct_roads_with_info(n_roads_with_info: int, n_roads: int) -> float | None:
    return None if n_roads == 0 else 100.0 * n_roads_with_info / n_roads


def sidewalk_to_road_ratio(n_sidewalks: int, n_roads: int) -> float | None:
    return None if n_roads == 0 else n_sidewalks / n_roads


def _ratio(num: float, den: float) -> float | None:
    return None if den == 0 else num / den


@dataclass(slots=True)
class ClassifiedWay:
    way: VersionedElement
    cls: FeatureClass
    geometry: WayGeometry

    @property
    def id(self) -> int:
        return self.way.id


class ScopeCache:
    """Memoizes point-in-boundary results per vertex so yearly snapshots reuse them."""

    def __init__(self, boundary: BoundaryPolygon | None):
        self.boundary = boundary
        self._flags: dict[tuple[float, float], bool] = {}

    def prime(self, points: Iterable[tuple[float, float]]):
        if self.boundary is None:
            return
        new = list({p for p in points if p not in self._flags})
        if not new:
            return
        flags = self.boundary.contains_many([p[0] for p in new], [p[1] for p in new])
        self._flags.update(zip(new, flags.tolist()))

    def in_scope(self, vertices: Sequence[tuple[float, float]]) -> bool:
        if self.boundary is None:
            return True
        flags = self._flags
        return in_scope_from_flags([flags[p] for p in vertices])


@dataclass
class ClassifiedSnapshot:
    """In-scope, non-Other ways of a snapshot with their resolved geometry, ascending by id."""

    timestamp: int
    features: list[ClassifiedWay]
    n_unlocatable: int = 0

    def of_class(self, cls: FeatureClass) -> list[ClassifiedWay]:
        return [f for f in self.features if f.cls is cls]


def classify_snapshot(
    snapshot: Snapshot,
    boundary: BoundaryPolygon | None,
    cfg: ClassifierConfig = DEFAULT_CONFIG,
    scope: ScopeCache | None = None,
) -> ClassifiedSnapshot:
    """Classify every snapshot way and keep the in-scope ones of a sidewalk-relevant class.

    Ways whose node references resolve to no vertex at all cannot be placed
    against the boundary and are only counted in ``n_unlocatable``.
    """
    if scope is None or scope.boundary is not boundary:
        scope = ScopeCache(boundary)
    candidates = []
    for wid in snapshot.ways:
        way = snapshot.ways[wid]
        cls = classify_way(way.tags, cfg)
        if cls is FeatureClass.OTHER:
            continue
        candidates.append(ClassifiedWay(way, cls, resolve_way_geometry(snapshot, wid)))
    if boundary is None:
        return ClassifiedSnapshot(snapshot.timestamp, candidates)
    unlocatable = 0
    located = []
    for c in candidates:
        if c.geometry.vertices:
            located.append(c)
        else:
            unlocatable += 1
    scope.prime(p for c in located for p in c.geometry.vertices)
    kept = [c for c in located if scope.in_scope(c.geometry.vertices)]
    return ClassifiedSnapshot(snapshot.timestamp, kept, unlocatable)


@dataclass
class CoverageReport:
    city: str
    timestamp: int
    n_roads: int = 0
    n_roads_with_info: int = 0
    n_sidewalk_geometries: int = 0
    n_footways: int = 0
    pct_roads_with_info: float | None = None
    sidewalk_to_road_ratio: float | None = None
    attribute_availability: dict[str, float | None] = field(default_factory=dict)
    road_length_m: float = 0.0
    road_with_info_length_m: float = 0.0
    sidewalk_length_m: float = 0.0
    footway_length_m: float = 0.0
    pct_road_length_with_info: float | None = None
    sidewalk_to_road_length_ratio: float | None = None
    n_unlocatable: int = 0

    @property
    def timestamp_iso(self) -> str:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def availability_from_tags(sidewalk_tags: Sequence, cfg: ClassifierConfig = DEFAULT_CONFIG) -> dict[str, float | None]:
    """Fraction of sidewalk tag maps carrying each tracked attribute; all None for no sidewalks."""
    if not sidewalk_tags:
        return {k: None for k in cfg.tracked_attributes}
    counts = dict.fromkeys(cfg.tracked_attributes, 0)
    for tags in sidewalk_tags:
        for k in extract_attributes(tags, cfg):
            counts[k] += 1
    n = len(sidewalk_tags)
    return {k: counts[k] / n for k in cfg.tracked_attributes}


def report_from_classified(city: str, classified: ClassifiedSnapshot, cfg: ClassifierConfig = DEFAULT_CONFIG) -> CoverageReport:
    counts = dict.fromkeys(FeatureClass, 0)
    lengths = dict.fromkeys(FeatureClass, 0.0)
    sidewalk_tags = []
    for f in classified.features:
        counts[f.cls] += 1
        lengths[f.cls] += haversine_length(f.geometry.vertices)[0]
        if f.cls is FeatureClass.SIDEWALK_GEOMETRY:
            sidewalk_tags.append(f.way.tags)
    n_with = counts[FeatureClass.ROAD_WITH_SIDEWALK_INFO]
    n_roads = n_with + counts[FeatureClass.ROAD_NO_SIDEWALK_INFO]
    n_sw = counts[FeatureClass.SIDEWALK_GEOMETRY]
    len_with = lengths[FeatureClass.ROAD_WITH_SIDEWALK_INFO]
    len_roads = len_with + lengths[FeatureClass.ROAD_NO_SIDEWALK_INFO]
    pct_len = _ratio(100.0 * len_with, len_roads)
    return CoverageReport(
        city=city,
        timestamp=classified.timestamp,
        n_roads=n_roads,
        n_roads_with_info=n_with,
        n_sidewalk_geometries=n_sw,
        n_footways=counts[FeatureClass.FOOTWAY],
        pct_roads_with_info=pct_roads_with_info(n_with, n_roads),
        sidewalk_to_road_ratio=sidewalk_to_road_ratio(n_sw, n_roads),
        attribute_availability=availability_from_tags(sidewalk_tags, cfg),
        road_length_m=len_roads,
        road_with_info_length_m=len_with,
        sidewalk_length_m=lengths[FeatureClass.SIDEWALK_GEOMETRY],
        footway_length_m=lengths[FeatureClass.FOOTWAY],
        pct_road_length_with_info=pct_len,
        sidewalk_to_road_length_ratio=_ratio(lengths[FeatureClass.SIDEWALK_GEOMETRY], len_roads),
        n_unlocatable=classified.n_unlocatable,
    )


def coverage_stats(
    snapshot: Snapshot,
    boundary: BoundaryPolygon | None,
    cfg: ClassifierConfig = DEFAULT_CONFIG,
    city: str | None = None,
    scope: ScopeCache | None = None,
) -> CoverageReport:
    """Count-based coverage of one snapshot within ``boundary`` (``None`` = whole extract)."""
    if city is None:
        city = boundary.name if boundary is not None else ""
    classified = classify_snapshot(snapshot, boundary, cfg, scope)
    return report_from_classified(city, classified, cfg)


def attribute_availability(
    snapshot: Snapshot, boundary: BoundaryPolygon | None, cfg: ClassifierConfig = DEFAULT_CONFIG
) -> dict[str, float | None]:
    classified = classify_snapshot(snapshot, boundary, cfg)
    tags = [f.way.tags for f in classified.of_class(FeatureClass.SIDEWALK_GEOMETRY)]
    return availability_from_tags(tags, cfg)


def year_start(year: int) -> int:
    return int(datetime(year, 1, 1, tzinfo=timezone.utc).timestamp())


@dataclass
class GrowthPoint:
    year: int
    report: CoverageReport

    @property
    def pct_roads_with_info(self) -> float:
        """Series value; a year without roads plots as 0."""
        v = self.report.pct_roads_with_info
        return 0.0 if v is None else v

    @property
    def sidewalk_to_road_ratio(self) -> float:
        v = self.report.sidewalk_to_road_ratio
        return 0.0 if v is None else v


# state shared with forked workers; set only around a pool's lifetime
_GROWTH_STATE: tuple | None = None


def _growth_worker(year: int) -> CoverageReport:
    store, boundary, cfg, city = _GROWTH_STATE
    return coverage_stats(snapshot_at(store, year_start(year)), boundary, cfg, city)


def growth_series(
    store: HistoryStore,
    boundary: BoundaryPolygon | None,
    cfg: ClassifierConfig = DEFAULT_CONFIG,
    years: Sequence[int] = (),
    city: str | None = None,
    workers: int = 1,
) -> list[GrowthPoint]:
    """Coverage at Jan 1 00:00:00 UTC of each year.

    With ``workers > 1`` on a platform that can fork, years are computed in
    child processes sharing the store copy-on-write.
    """
    years = list(years)
    if years != sorted(years):
        raise ValueError("years must be sorted ascending")
    if city is None:
        city = boundary.name if boundary is not None else ""
    if workers > 1 and len(years) > 1 and "fork" in multiprocessing.get_all_start_methods():
        global _GROWTH_STATE
        _GROWTH_STATE = (store, boundary, cfg, city)
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=min(workers, len(years)), mp_context=ctx) as pool:
                reports = list(pool.map(_growth_worker, years))
        finally:
            _GROWTH_STATE = None
        return [GrowthPoint(y, r) for y, r in zip(years, reports)]
    scope = ScopeCache(boundary)
    return [
        GrowthPoint(y, coverage_stats(snapshot_at(store, year_start(y)), boundary, cfg, city, scope))
        for y in years
    ]
