"""End-to-end runs and their CSV / GeoJSON outputs.

Writers only format values computed by the analysis modules; rows and
features are always ordered by ascending OSM id so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone

from . import __version__
from .classify import FeatureClass
from .config import RunConfig
from .coverage import (
    ClassifiedSnapshot,
    CoverageReport,
    GrowthPoint,
    classify_snapshot,
    growth_series,
    report_from_classified,
)
from .history import HistoryStore, format_epoch, load_history, snapshot_at
from .spatial import BoundaryPolygon, HexGrid, LocalProjection, hexbin, load_boundary, representative_point
from .trust import N_BINS, TrustDistribution, TrustScore, score_histories, trust_distribution

log = logging.getLogger(__name__)

SCORED_CLASSES = (
    FeatureClass.ROAD_WITH_SIDEWALK_INFO,
    FeatureClass.SIDEWALK_GEOMETRY,
    FeatureClass.ROAD_NO_SIDEWALK_INFO,
    FeatureClass.FOOTWAY,
)


def _num(x, digits: int = 6) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def _write_csv(path: str, header: list[str], rows: list[list]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: str, data: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=False, ensure_ascii=False)
        fh.write("\n")


def _write_meta(csv_path: str, meta: dict):
    _write_json(os.path.splitext(csv_path)[0] + ".meta.json", {"run_metadata": meta})


def _feature_collection(features: list[dict], meta: dict) -> dict:
    return {"type": "FeatureCollection", "run_metadata": meta, "features": features}


def _line(vertices) -> dict | None:
    if len(vertices) < 2:
        return None
    return {"type": "LineString", "coordinates": [[lon, lat] for lat, lon in vertices]}


@dataclass
class RunContext:
    cfg: RunConfig
    store: HistoryStore
    boundary: BoundaryPolygon | None
    city: str
    at: int

    def metadata(self, command: str) -> dict:
        meta = {"tool": "sidewalk_trust", "version": __version__, "command": command}
        meta.update(self.cfg.metadata())
        meta["city"] = self.city
        meta["snapshot"] = format_epoch(self.at)
        meta["store"] = {k: v for k, v in self.store.summary().items() if k != "reject_details"}
        return meta


def open_run(cfg: RunConfig, store: HistoryStore | None = None) -> RunContext:
    cfg.validate(need_history=store is None)
    if store is None:
        store = load_history(cfg.history)
    boundary = load_boundary(cfg.boundary, cfg.city or "") if cfg.boundary else None
    city = cfg.city or (boundary.name if boundary is not None else "")
    at = cfg.at
    if at is None:
        at = store.meta.max_timestamp if store.meta.max_timestamp is not None else 0
    return RunContext(cfg, store, boundary, city, at)


def run_ingest(cfg: RunConfig) -> tuple[HistoryStore, dict]:
    cfg.validate()
    store = load_history(cfg.history)
    summary = store.summary()
    os.makedirs(cfg.out, exist_ok=True)
    meta = {"tool": "sidewalk_trust", "version": __version__, "command": "ingest"}
    meta.update(cfg.metadata())
    _write_json(os.path.join(cfg.out, "ingest_summary.json"), {"run_metadata": meta, **summary})
    return store, summary


COVERAGE_HEADER = [
    "city", "timestamp", "n_roads", "n_roads_with_info", "n_sidewalks", "n_footways",
    "pct_roads_with_info", "sidewalk_to_road_ratio",
]
LENGTH_HEADER = [
    "road_length_m", "road_with_info_length_m", "sidewalk_length_m", "footway_length_m",
    "pct_road_length_with_info", "sidewalk_to_road_length_ratio",
]


def coverage_row(r: CoverageReport, cfg: RunConfig) -> list:
    row = [
        r.city, r.timestamp_iso, r.n_roads, r.n_roads_with_info, r.n_sidewalk_geometries, r.n_footways,
        _num(r.pct_roads_with_info), _num(r.sidewalk_to_road_ratio),
    ]
    row += [_num(r.attribute_availability.get(k)) for k in cfg.classifier.tracked_attributes]
    if cfg.length_columns:
        row += [_num(r.road_length_m, 3), _num(r.road_with_info_length_m, 3), _num(r.sidewalk_length_m, 3),
                _num(r.footway_length_m, 3), _num(r.pct_road_length_with_info),
                _num(r.sidewalk_to_road_length_ratio)]
    return row


def classify_run(ctx: RunContext) -> ClassifiedSnapshot:
    return classify_snapshot(snapshot_at(ctx.store, ctx.at), ctx.boundary, ctx.cfg.classifier)


def run_coverage(ctx: RunContext, classified: ClassifiedSnapshot | None = None) -> CoverageReport:
    cfg = ctx.cfg
    classified = classified or classify_run(ctx)
    report = report_from_classified(ctx.city, classified, cfg.classifier)
    os.makedirs(cfg.out, exist_ok=True)
    meta = ctx.metadata("coverage")
    header = COVERAGE_HEADER + list(cfg.classifier.tracked_attributes)
    if cfg.length_columns:
        header += LENGTH_HEADER
    path = os.path.join(cfg.out, "coverage.csv")
    _write_csv(path, header, [coverage_row(report, cfg)])
    _write_meta(path, meta)
    features = [
        {
            "type": "Feature",
            "geometry": _line(f.geometry.vertices),
            "properties": {"osm_id": f.id, "class": f.cls.value},
        }
        for f in classified.features
    ]
    _write_json(os.path.join(cfg.out, "classes.geojson"), _feature_collection(features, meta))
    return report


@dataclass
class TrustResult:
    scores: dict[int, TrustScore]
    classes: dict[int, FeatureClass]
    distributions: dict[FeatureClass, TrustDistribution | None]
    cells: dict[FeatureClass, list]
    grid: HexGrid | None


def compute_trust(ctx: RunContext, classified: ClassifiedSnapshot) -> TrustResult:
    cfg = ctx.cfg
    eval_t = cfg.eval_at if cfg.eval_at is not None else ctx.at
    histories = {}
    points = {}
    classes = {}
    for f in classified.features:
        histories[f.id] = ctx.store.ways[f.id].until(ctx.at)
        classes[f.id] = f.cls
        if f.geometry.geometric:
            points[f.id] = representative_point(f.geometry.vertices)
    groups = classes if cfg.trust.same_class_neighbors else None
    scores = score_histories(histories, points, eval_t, cfg.trust, groups)
    distributions = {
        cls: trust_distribution([s for fid, s in scores.items() if classes[fid] is cls], cfg.threshold)
        for cls in SCORED_CLASSES
    }
    grid = None
    if points:
        if ctx.boundary is not None:
            lat0, lon0 = ctx.boundary.centroid()
        else:
            lats = [p[0] for p in points.values()]
            lons = [p[1] for p in points.values()]
            lat0, lon0 = (min(lats) + max(lats)) / 2, (min(lons) + max(lons)) / 2
        grid = HexGrid(LocalProjection(lat0, lon0), cfg.hex_size_m)
    cells = {
        cls: hexbin(
            [(fid, points[fid], scores[fid].t) for fid in scores if classes[fid] is cls and fid in points],
            cfg.hex_size_m, ctx.boundary, grid,
        )
        for cls in SCORED_CLASSES
    }
    return TrustResult(scores, classes, distributions, cells, grid)


DISTRIBUTION_HEADER = ["class", "threshold", "pct_below", "pct_at_or_above"] + [
    f"bin_{i:02d}" for i in range(N_BINS)
]


def run_trust(ctx: RunContext, classified: ClassifiedSnapshot | None = None) -> TrustResult:
    cfg = ctx.cfg
    classified = classified or classify_run(ctx)
    result = compute_trust(ctx, classified)
    os.makedirs(cfg.out, exist_ok=True)
    meta = ctx.metadata("trust")
    meta["eval_at"] = format_epoch(cfg.eval_at if cfg.eval_at is not None else ctx.at)
    features = []
    for f in classified.features:
        s = result.scores[f.id]
        features.append({
            "type": "Feature",
            "geometry": _line(f.geometry.vertices),
            "properties": {
                "osm_id": f.id, "class": f.cls.value,
                "T_dir": s.t_dir, "T_ind": s.t_ind, "T_time": s.t_time, "T": s.t,
            },
        })
    _write_json(os.path.join(cfg.out, "trust.geojson"), _feature_collection(features, meta))

    rows = []
    for cls in SCORED_CLASSES:
        d = result.distributions[cls]
        if d is None:
            rows.append([cls.value, _num(cfg.threshold, 4), "", ""] + [""] * N_BINS)
        else:
            rows.append([cls.value, _num(d.threshold, 4), _num(d.pct_below, 2), _num(d.pct_at_or_above, 2),
                         *d.histogram])
    path = os.path.join(cfg.out, "trust_distribution.csv")
    _write_csv(path, DISTRIBUTION_HEADER, rows)
    _write_meta(path, meta)

    grid = result.grid
    hex_features = []
    for cls in SCORED_CLASSES:
        for c in result.cells[cls]:
            hex_features.append({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [[[lon, lat] for lat, lon in grid.corners(c.q, c.r)]]},
                "properties": {
                    "class": cls.value, "q": c.q, "r": c.r, "count": c.count, "mean_trust": c.mean_trust,
                    "center_lat": c.center[0], "center_lon": c.center[1],
                },
            })
    _write_json(os.path.join(cfg.out, "hexbin.geojson"), _feature_collection(hex_features, meta))
    return result


GROWTH_HEADER = [
    "city", "year", "timestamp", "n_roads", "n_roads_with_info", "n_sidewalks",
    "pct_roads_with_info", "sidewalk_to_road_ratio",
]


def default_years(store: HistoryStore) -> list[int]:
    meta = store.meta
    if meta.min_timestamp is None:
        return []
    first = datetime.fromtimestamp(meta.min_timestamp, tz=timezone.utc).year
    last = datetime.fromtimestamp(meta.max_timestamp, tz=timezone.utc).year
    return list(range(first + 1, last + 2))


def run_growth(ctx: RunContext) -> list[GrowthPoint]:
    cfg = ctx.cfg
    years = cfg.years or default_years(ctx.store)
    series = growth_series(ctx.store, ctx.boundary, cfg.classifier, years, ctx.city, workers=cfg.threads)
    os.makedirs(cfg.out, exist_ok=True)
    meta = ctx.metadata("growth")
    meta["years"] = years
    rows = [
        [ctx.city, p.year, p.report.timestamp_iso, p.report.n_roads, p.report.n_roads_with_info,
         p.report.n_sidewalk_geometries, _num(p.pct_roads_with_info), _num(p.sidewalk_to_road_ratio)]
        for p in series
    ]
    path = os.path.join(cfg.out, "growth.csv")
    _write_csv(path, GROWTH_HEADER, rows)
    _write_meta(path, meta)
    return series
