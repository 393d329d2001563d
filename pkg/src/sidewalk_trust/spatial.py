"""Geographic helpers: study-area membership, haversine lengths, hex binning, radius queries.

Points are ``(lat, lon)`` tuples in decimal degrees everywhere in this module;
GeoJSON ``[lon, lat]`` order is only used at the file boundary.
"""

from __future__ import annotations

import json
import math
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError

EARTH_RADIUS_M = 6_371_008.8
DEFAULT_HEX_SIZE_M = 250.0

Point = tuple[float, float]


def haversine(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def haversine_np(lat1, lon1, lat2, lon2) -> np.ndarray:
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(a)))


def haversine_length(polyline: Sequence[Point]) -> tuple[float, bool]:
    """Length of a polyline in meters, and whether it was degenerate (< 2 vertices)."""
    if len(polyline) < 2:
        return 0.0, True
    total = 0.0
    for (lat1, lon1), (lat2, lon2) in zip(polyline, polyline[1:]):
        total += haversine(lat1, lon1, lat2, lon2)
    return total, False


def representative_point(polyline: Sequence[Point]) -> Point:
    """Middle vertex of the resolved polyline."""
    return polyline[len(polyline) // 2]


@dataclass
class BoundaryPolygon:
    """Study area made of closed rings (outer rings and holes), tested with the even-odd rule."""

    rings: list[list[Point]]
    name: str = ""
    _strips: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.rings:
            raise InputError("boundary has no rings")
        for ring in self.rings:
            if len(ring) < 4:
                raise InputError(f"boundary ring has {len(ring)} vertices, need at least 4")
            if tuple(ring[0]) != tuple(ring[-1]):
                raise InputError("boundary ring is not closed")
        self.rings = [[(float(lat), float(lon)) for lat, lon in ring] for ring in self.rings]

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        lats = [p[0] for r in self.rings for p in r]
        lons = [p[1] for r in self.rings for p in r]
        return min(lats), min(lons), max(lats), max(lons)

    def centroid(self) -> Point:
        """Area centroid in degree space (holes subtract); falls back to the bbox center."""
        area = cx = cy = 0.0
        for ring in self.rings:
            for (y1, x1), (y2, x2) in zip(ring, ring[1:]):
                cross = x1 * y2 - x2 * y1
                area += cross
                cx += (x1 + x2) * cross
                cy += (y1 + y2) * cross
        if abs(area) < 1e-15:
            lat0, lon0, lat1, lon1 = self.bbox
            return (lat0 + lat1) / 2, (lon0 + lon1) / 2
        # signed shoelace sums: holes wound opposite to their outer ring subtract
        return cy / (3 * area), cx / (3 * area)

    def _edge_strips(self):
        if self._strips is None:
            segs = np.array(
                [(y1, x1, y2, x2) for ring in self.rings for (y1, x1), (y2, x2) in zip(ring, ring[1:]) if y1 != y2],
                dtype=float,
            ).reshape(-1, 4)
            lo = float(segs[:, [0, 2]].min()) if len(segs) else 0.0
            hi = float(segs[:, [0, 2]].max()) if len(segs) else 0.0
            n_strips = max(1, min(4096, int(math.sqrt(len(segs)))))
            height = (hi - lo) / n_strips or 1.0
            ymin = np.minimum(segs[:, 0], segs[:, 2])
            ymax = np.maximum(segs[:, 0], segs[:, 2])
            first = np.clip(((ymin - lo) // height).astype(int), 0, n_strips - 1)
            last = np.clip(((ymax - lo) // height).astype(int), 0, n_strips - 1)
            members = [[] for _ in range(n_strips)]
            for i, (a, b) in enumerate(zip(first, last)):
                for s in range(a, b + 1):
                    members[s].append(i)
            strips = [segs[m] for m in members]
            self._strips = (lo, hi, height, n_strips, strips)
        return self._strips

    def contains(self, lat: float, lon: float) -> bool:
        return point_in_boundary((lat, lon), self)

    def contains_many(self, lats, lons) -> np.ndarray:
        """Vectorized :func:`point_in_boundary` (identical crossing arithmetic)."""
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        result = np.zeros(lats.shape, dtype=bool)
        if lats.size == 0:
            return result
        lo, hi, height, n_strips, strips = self._edge_strips()
        candidate = (lats >= lo) & (lats <= hi)
        idx = np.nonzero(candidate)[0]
        strip_of = np.clip(((lats[idx] - lo) // height).astype(int), 0, n_strips - 1)
        order = np.argsort(strip_of, kind="stable")
        idx = idx[order]
        strip_of = strip_of[order]
        bounds = np.searchsorted(strip_of, np.arange(n_strips + 1))
        for s in range(n_strips):
            a, b = bounds[s], bounds[s + 1]
            if a == b or not len(strips[s]):
                continue
            seg = strips[s]
            y1, x1, y2, x2 = seg[:, 0], seg[:, 1], seg[:, 2], seg[:, 3]
            step = max(1, 2_000_000 // len(seg))
            for c in range(a, b, step):
                pts = idx[c:min(b, c + step)]
                py = lats[pts][:, None]
                px = lons[pts][:, None]
                straddle = (y1 > py) != (y2 > py)
                with np.errstate(divide="ignore", invalid="ignore"):
                    xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                crossings = np.count_nonzero(straddle & (px < xint), axis=1)
                result[pts] = (crossings % 2) == 1
        return result


def point_in_boundary(p: Point, b: BoundaryPolygon) -> bool:
    """Even-odd ray casting across all rings of ``b``."""
    py, px = p
    inside = False
    for ring in b.rings:
        for (y1, x1), (y2, x2) in zip(ring, ring[1:]):
            if (y1 > py) != (y2 > py):
                if px < x1 + (py - y1) * (x2 - x1) / (y2 - y1):
                    inside = not inside
    return inside


def in_scope_from_flags(flags: Sequence[bool]) -> bool:
    """Majority-vertex rule; an exact tie counts as inside."""
    return 2 * sum(bool(f) for f in flags) >= len(flags)


def way_in_scope(polyline: Sequence[Point], b: BoundaryPolygon) -> bool:
    """True iff at least half of the polyline's vertices lie inside ``b``."""
    if not polyline:
        raise ValueError("polyline needs at least one vertex")
    return in_scope_from_flags([point_in_boundary(p, b) for p in polyline])


def _geometry_rings(geom: dict) -> list[list[Point]]:
    kind = geom.get("type")
    if kind == "Polygon":
        polys = [geom["coordinates"]]
    elif kind == "MultiPolygon":
        polys = geom["coordinates"]
    elif kind == "GeometryCollection":
        return [r for g in geom.get("geometries", []) for r in _geometry_rings(g)]
    else:
        raise InputError(f"boundary geometry must be Polygon or MultiPolygon, got {kind!r}")
    return [[(c[1], c[0]) for c in ring] for poly in polys for ring in poly]


def boundary_from_geojson(data: dict, name: str = "") -> BoundaryPolygon:
    kind = data.get("type")
    rings: list[list[Point]] = []
    if kind == "FeatureCollection":
        for feat in data.get("features", []):
            if feat.get("geometry"):
                rings.extend(_geometry_rings(feat["geometry"]))
                name = name or (feat.get("properties") or {}).get("name", "")
    elif kind == "Feature":
        rings = _geometry_rings(data["geometry"])
        name = name or (data.get("properties") or {}).get("name", "")
    else:
        rings = _geometry_rings(data)
    return BoundaryPolygon(rings, name or "")


def load_boundary(path: str | os.PathLike, name: str = "") -> BoundaryPolygon:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read boundary {path}: {exc}") from exc
    try:
        b = boundary_from_geojson(data, name)
    except (KeyError, TypeError, IndexError) as exc:
        raise InputError(f"malformed boundary GeoJSON {path}: {exc}") from exc
    if not b.name:
        b.name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return b


class LocalProjection:
    """Spherical azimuthal-equidistant projection centered on ``(lat0, lon0)``; meters."""

    def __init__(self, lat0: float, lon0: float):
        self.lat0 = lat0
        self.lon0 = lon0
        self._phi0 = math.radians(lat0)
        self._lmb0 = math.radians(lon0)

    def forward(self, lats, lons) -> tuple[np.ndarray, np.ndarray]:
        phi = np.radians(np.asarray(lats, dtype=float))
        dl = np.radians(np.asarray(lons, dtype=float)) - self._lmb0
        sp0, cp0 = math.sin(self._phi0), math.cos(self._phi0)
        cos_c = np.clip(sp0 * np.sin(phi) + cp0 * np.cos(phi) * np.cos(dl), -1.0, 1.0)
        c = np.arccos(cos_c)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(c > 1e-12, c / np.sin(c), 1.0)
        x = EARTH_RADIUS_M * k * np.cos(phi) * np.sin(dl)
        y = EARTH_RADIUS_M * k * (cp0 * np.sin(phi) - sp0 * np.cos(phi) * np.cos(dl))
        return x, y

    def inverse(self, xs, ys) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        rho = np.hypot(x, y)
        c = rho / EARTH_RADIUS_M
        sp0, cp0 = math.sin(self._phi0), math.cos(self._phi0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rho > 0, y * np.sin(c) / rho, 0.0)
        phi = np.arcsin(np.clip(np.cos(c) * sp0 + ratio * cp0, -1.0, 1.0))
        lmb = self._lmb0 + np.arctan2(x * np.sin(c), rho * cp0 * np.cos(c) - y * sp0 * np.sin(c))
        lon = (np.degrees(lmb) + 180.0) % 360.0 - 180.0
        return np.degrees(phi), lon


@dataclass
class HexCell:
    q: int
    r: int
    center: Point
    members: list = field(default_factory=list)
    mean_trust: float | None = None

    @property
    def count(self) -> int:
        return len(self.members)


class HexGrid:
    """Pointy-top hexagons of flat-to-flat width ``cell_size`` meters in a local projection."""

    def __init__(self, projection: LocalProjection, cell_size: float = DEFAULT_HEX_SIZE_M):
        if not cell_size > 0:
            raise ValueError("hex cell size must be positive")
        self.projection = projection
        self.cell_size = float(cell_size)
        self.radius = self.cell_size / math.sqrt(3)  # center-to-corner

    def axial(self, lats, lons) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.projection.forward(lats, lons)
        qf = (math.sqrt(3) / 3 * x - y / 3) / self.radius
        rf = (2 / 3 * y) / self.radius
        sf = -qf - rf
        q, r, s = np.rint(qf), np.rint(rf), np.rint(sf)
        dq, dr, ds = np.abs(q - qf), np.abs(r - rf), np.abs(s - sf)
        fix_q = (dq > dr) & (dq > ds)
        fix_r = ~fix_q & (dr > ds)
        q = np.where(fix_q, -r - s, q)
        r = np.where(fix_r, -q - s, r)
        return q.astype(np.int64), r.astype(np.int64)

    def center_xy(self, q, r) -> tuple[np.ndarray, np.ndarray]:
        q = np.asarray(q, dtype=float)
        r = np.asarray(r, dtype=float)
        return self.radius * math.sqrt(3) * (q + r / 2), self.radius * 1.5 * r

    def center(self, q: int, r: int) -> Point:
        x, y = self.center_xy(q, r)
        lat, lon = self.projection.inverse(x, y)
        return float(lat), float(lon)

    def corners(self, q: int, r: int) -> list[Point]:
        """Closed ring of the cell's six corners."""
        cx, cy = self.center_xy(q, r)
        angles = np.radians(30 + 60 * np.arange(7))
        lat, lon = self.projection.inverse(cx + self.radius * np.cos(angles), cy + self.radius * np.sin(angles))
        ring = [(float(a), float(b)) for a, b in zip(lat, lon)]
        ring[-1] = ring[0]
        return ring


def hexbin(
    features: Iterable[tuple[object, Point, float]],
    cell_size: float = DEFAULT_HEX_SIZE_M,
    b: BoundaryPolygon | None = None,
    grid: HexGrid | None = None,
) -> list[HexCell]:
    """Assign each ``(id, point, value)`` to one hexagon and average values per cell.

    The grid is centered on the boundary centroid (or the features' bbox center
    when no boundary is given). Cells come back sorted by ``(q, r)``.
    """
    features = list(features)
    if not cell_size > 0:
        raise ValueError("hex cell size must be positive")
    if not features:
        return []
    lats = np.array([f[1][0] for f in features], dtype=float)
    lons = np.array([f[1][1] for f in features], dtype=float)
    if grid is None:
        if b is not None:
            lat0, lon0 = b.centroid()
        else:
            lat0, lon0 = (lats.min() + lats.max()) / 2, (lons.min() + lons.max()) / 2
        grid = HexGrid(LocalProjection(lat0, lon0), cell_size)
    qs, rs = grid.axial(lats, lons)
    cells: dict[tuple[int, int], tuple[list, list]] = {}
    for (fid, _, value), q, r in zip(features, qs.tolist(), rs.tolist()):
        ids, values = cells.setdefault((q, r), ([], []))
        ids.append(fid)
        values.append(value)
    out = []
    for (q, r) in sorted(cells):
        ids, values = cells[(q, r)]
        out.append(HexCell(q, r, grid.center(q, r), ids, math.fsum(values) / len(values)))
    return out


def _unit_vectors(lats, lons) -> np.ndarray:
    phi = np.radians(np.asarray(lats, dtype=float))
    lmb = np.radians(np.asarray(lons, dtype=float))
    return np.column_stack((np.cos(phi) * np.cos(lmb), np.cos(phi) * np.sin(lmb), np.sin(phi)))


def _chord(radius_m: float) -> float:
    angle = min(radius_m / EARTH_RADIUS_M, math.pi)
    return 2 * math.sin(angle / 2) * (1 + 1e-9) + 1e-12


class NeighborIndex:
    """Radius queries over feature points; candidates from a k-d tree on the unit sphere,
    then filtered by haversine distance."""

    def __init__(self, features: Iterable[tuple[object, Point]]):
        features = list(features)
        self.ids = [f[0] for f in features]
        self.lats = np.array([f[1][0] for f in features], dtype=float)
        self.lons = np.array([f[1][1] for f in features], dtype=float)
        self._pos = {fid: i for i, fid in enumerate(self.ids)}
        self._tree = cKDTree(_unit_vectors(self.lats, self.lons)) if features else None

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, fid) -> bool:
        return fid in self._pos

    def query(self, p: Point, radius_m: float, exclude=None) -> list:
        """Ids within ``radius_m`` (great-circle, inclusive) of ``p``, ascending by index order."""
        if self._tree is None:
            return []
        cand = self._tree.query_ball_point(_unit_vectors([p[0]], [p[1]])[0], _chord(radius_m))
        out = []
        for i in sorted(cand):
            fid = self.ids[i]
            if exclude is not None and fid == exclude:
                continue
            if haversine(p[0], p[1], self.lats[i], self.lons[i]) <= radius_m:
                out.append(fid)
        return out

    def neighbors(self, fid, radius_m: float) -> list:
        i = self._pos[fid]
        return self.query((self.lats[i], self.lons[i]), radius_m, exclude=fid)

    def pairs(self, radius_m: float) -> np.ndarray:
        """All unordered index pairs ``(i, j)``, i < j, within ``radius_m``; shape (n, 2)."""
        if self._tree is None or len(self.ids) < 2:
            return np.empty((0, 2), dtype=np.int64)
        pairs = self._tree.query_pairs(_chord(radius_m), output_type="ndarray")
        if not len(pairs):
            return pairs.reshape(0, 2).astype(np.int64)
        i, j = pairs[:, 0], pairs[:, 1]
        d = haversine_np(self.lats[i], self.lons[i], self.lats[j], self.lons[j])
        return pairs[d <= radius_m].astype(np.int64)


def neighbor_index(features: Iterable[tuple[object, Point]]) -> NeighborIndex:
    return NeighborIndex(features)
