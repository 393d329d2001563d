"""Streaming ingest of OSM full-history XML and point-in-time snapshots.

Timestamps are stored as integer UTC epoch seconds throughout; use
:func:`to_epoch` / :func:`format_epoch` at the edges.
"""

from __future__ import annotations

import logging
import os
from bisect import bisect_right
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from operator import attrgetter
from types import MappingProxyType
from typing import BinaryIO
from xml.parsers import expat

from .errors import HistoryParseError

log = logging.getLogger(__name__)

NODE = "node"
WAY = "way"

_NO_TAGS: Mapping[str, str] = MappingProxyType({})
_by_timestamp = attrgetter("timestamp")


def to_epoch(value: int | float | str | datetime) -> int:
    """Normalize an instant (epoch seconds, ISO-8601 string or datetime) to epoch seconds."""
    if isinstance(value, bool):
        raise TypeError("boolean is not an instant")
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        value = datetime.fromisoformat(text)
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return int(value.timestamp())


def format_epoch(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(slots=True)
class VersionedElement:
    """One version of a node or way."""

    kind: str
    id: int
    version: int
    timestamp: int
    uid: int
    user: str
    changeset: int
    visible: bool
    tags: Mapping[str, str]
    lat: float | None = None
    lon: float | None = None
    nodes: tuple[int, ...] = ()

    @property
    def state(self) -> tuple[Mapping[str, str], tuple[int, ...]]:
        """Tag map and node-id list, the content compared by confirmation/rollback detection."""
        return self.tags, self.nodes


@dataclass(slots=True)
class FeatureHistory:
    """Version chain of one element, sorted by version."""

    id: int
    versions: list[VersionedElement]
    monotonic: bool = True

    def __post_init__(self):
        if not self.versions:
            raise ValueError(f"empty history for element {self.id}")

    def __len__(self) -> int:
        return len(self.versions)

    @property
    def latest(self) -> VersionedElement:
        return self.versions[-1]

    def at(self, t: int) -> VersionedElement | None:
        """Highest version with timestamp <= t, visible or not; None if none exists yet."""
        versions = self.versions
        if self.monotonic:
            i = bisect_right(versions, t, key=_by_timestamp)
            return versions[i - 1] if i else None
        best = None
        for v in versions:
            if v.timestamp <= t:
                best = v
        return best

    def until(self, t: int) -> FeatureHistory | None:
        """Prefix of the history made of versions with timestamp <= t."""
        kept = [v for v in self.versions if v.timestamp <= t]
        if not kept:
            return None
        if len(kept) == len(self.versions):
            return self
        return FeatureHistory(self.id, kept, self.monotonic)


@dataclass(slots=True)
class Reject:
    kind: str
    id: str | None
    byte_offset: int
    reason: str


@dataclass
class IngestMetadata:
    source: str = ""
    relations_skipped: int = 0
    duplicates: int = 0
    timestamp_regressions: int = 0
    min_timestamp: int | None = None
    max_timestamp: int | None = None
    rejects: list[Reject] = field(default_factory=list)


@dataclass
class HistoryStore:
    """All node and way histories of one extract, keyed by id in ascending order."""

    nodes: dict[int, FeatureHistory]
    ways: dict[int, FeatureHistory]
    meta: IngestMetadata
    unresolved_refs: list[tuple[int, int]] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        return {
            "nodes": len(self.nodes),
            "node_versions": sum(len(h) for h in self.nodes.values()),
            "ways": len(self.ways),
            "way_versions": sum(len(h) for h in self.ways.values()),
        }

    def summary(self) -> dict:
        meta = self.meta
        return {
            "source": meta.source,
            "counts": self.counts(),
            "relations_skipped": meta.relations_skipped,
            "duplicates": meta.duplicates,
            "timestamp_regressions": meta.timestamp_regressions,
            "min_timestamp": None if meta.min_timestamp is None else format_epoch(meta.min_timestamp),
            "max_timestamp": None if meta.max_timestamp is None else format_epoch(meta.max_timestamp),
            "rejects": len(meta.rejects),
            "reject_details": [
                {"kind": r.kind, "id": r.id, "byte_offset": r.byte_offset, "reason": r.reason}
                for r in meta.rejects
            ],
            "unresolved_refs": len(self.unresolved_refs),
        }


class _Handler:
    """expat callbacks accumulating versions into per-id lists."""

    def __init__(self, parser):
        self.parser = parser
        self.nodes: dict[int, list[VersionedElement]] = {}
        self.ways: dict[int, list[VersionedElement]] = {}
        self.meta = IngestMetadata()
        self.users: dict[str, str] = {}
        self.current: dict | None = None
        self.current_kind: str | None = None
        self.current_offset = 0
        self.tags: dict[str, str] | None = None
        self.refs: list[int] | None = None
        self.current_error: str | None = None

    def start(self, name, attrs):
        if name == "nd":
            if self.refs is not None:
                ref = attrs.get("ref")
                try:
                    self.refs.append(int(ref))
                except (TypeError, ValueError):
                    self.current_error = f"bad nd ref {ref!r}"
        elif name == "tag":
            if self.tags is not None:
                k = attrs.get("k")
                if k is not None:
                    self.tags[k] = attrs.get("v", "")
        elif name == "node" or name == "way":
            self.current = attrs
            self.current_kind = name
            self.current_offset = self.parser.CurrentByteIndex
            self.current_error = None
            self.tags = {}
            self.refs = [] if name == "way" else None
        elif name == "relation":
            self.meta.relations_skipped += 1

    def end(self, name):
        if name == "node" or name == "way":
            if self.current is not None:
                self._finish()
            self.current = None
            self.tags = None
            self.refs = None

    def _reject(self, reason: str):
        attrs = self.current
        self.meta.rejects.append(Reject(self.current_kind, attrs.get("id"), self.current_offset, reason))
        log.warning("rejected %s %s at byte %d: %s", self.current_kind, attrs.get("id"), self.current_offset, reason)

    def _finish(self):
        attrs = self.current
        kind = self.current_kind
        for required in ("id", "version", "timestamp"):
            if required not in attrs:
                return self._reject(f"missing required attribute {required!r}")
        if self.current_error:
            return self._reject(self.current_error)
        try:
            eid = int(attrs["id"])
            version = int(attrs["version"])
            ts = to_epoch(attrs["timestamp"])
            uid = int(attrs.get("uid", 0))
            changeset = int(attrs.get("changeset", 0))
        except (ValueError, TypeError) as exc:
            return self._reject(f"invalid attribute value: {exc}")
        if version < 1:
            return self._reject(f"version {version} < 1")
        visible = attrs.get("visible", "true") != "false"
        user = attrs.get("user", "")
        user = self.users.setdefault(user, user)
        tags = self.tags or _NO_TAGS
        if kind == NODE:
            lat = lon = None
            if "lat" in attrs and "lon" in attrs:
                try:
                    lat = float(attrs["lat"])
                    lon = float(attrs["lon"])
                except ValueError as exc:
                    return self._reject(f"invalid coordinate: {exc}")
            if visible:
                if lat is None:
                    return self._reject("visible node without lat/lon")
                if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                    return self._reject(f"coordinate out of range ({lat}, {lon})")
            elem = VersionedElement(NODE, eid, version, ts, uid, user, changeset, visible, tags, lat, lon)
            self.nodes.setdefault(eid, []).append(elem)
        else:
            elem = VersionedElement(WAY, eid, version, ts, uid, user, changeset, visible, tags,
                                    nodes=tuple(self.refs))
            self.ways.setdefault(eid, []).append(elem)
        meta = self.meta
        if meta.min_timestamp is None or ts < meta.min_timestamp:
            meta.min_timestamp = ts
        if meta.max_timestamp is None or ts > meta.max_timestamp:
            meta.max_timestamp = ts


def _build_histories(raw: dict[int, list[VersionedElement]], meta: IngestMetadata) -> dict[int, FeatureHistory]:
    out = {}
    for eid in sorted(raw):
        versions = raw[eid]
        versions.sort(key=attrgetter("version"))  # stable: file order among duplicates
        kept = [versions[0]]
        for v in versions[1:]:
            if v.version == kept[-1].version:
                meta.duplicates += 1
                log.warning("duplicate %s %d version %d ignored", v.kind, eid, v.version)
                continue
            kept.append(v)
        monotonic = True
        for prev, cur in zip(kept, kept[1:]):
            if cur.timestamp < prev.timestamp:
                monotonic = False
                meta.timestamp_regressions += 1
        if not monotonic:
            log.warning("%s %d has timestamps decreasing with version", kept[0].kind, eid)
        out[eid] = FeatureHistory(eid, kept, monotonic)
    return out


def parse_history(stream: BinaryIO, source: str = "") -> HistoryStore:
    """Stream-parse OSM history XML into a :class:`HistoryStore`.

    Relations are counted and skipped.  Elements missing ``id``, ``version``
    or ``timestamp`` (or carrying unparseable values) are rejected into
    ``store.meta.rejects``; duplicate ``(id, version)`` pairs keep the first
    occurrence.  Malformed XML raises :class:`HistoryParseError`.
    """
    parser = expat.ParserCreate()
    parser.buffer_text = True
    parser.buffer_size = 1 << 16
    handler = _Handler(parser)
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    try:
        parser.ParseFile(stream)
    except expat.ExpatError as exc:
        raise HistoryParseError(expat.errors.messages[exc.code], parser.ErrorByteIndex, exc.lineno) from None

    meta = handler.meta
    meta.source = source
    nodes = _build_histories(handler.nodes, meta)
    ways = _build_histories(handler.ways, meta)
    unresolved = sorted({
        (wid, ref)
        for wid, h in ways.items()
        for v in h.versions
        for ref in v.nodes
        if ref not in nodes
    })
    if unresolved:
        log.info("%d way node references do not resolve within the extract", len(unresolved))
    return HistoryStore(nodes, ways, meta, unresolved)


def load_history(path: str | os.PathLike) -> HistoryStore:
    with open(path, "rb") as fh:
        return parse_history(fh, source=os.fspath(path))


class SnapshotView(Mapping):
    """Lazy id -> effective visible version mapping for one element kind."""

    def __init__(self, histories: dict[int, FeatureHistory], t: int):
        self._histories = histories
        self._t = t
        self._cache: dict[int, VersionedElement | None] = {}

    def _effective(self, eid: int) -> VersionedElement | None:
        try:
            return self._cache[eid]
        except KeyError:
            pass
        h = self._histories.get(eid)
        v = h.at(self._t) if h is not None else None
        if v is not None and not v.visible:
            v = None
        self._cache[eid] = v
        return v

    def __getitem__(self, eid: int) -> VersionedElement:
        v = self._effective(eid)
        if v is None:
            raise KeyError(eid)
        return v

    def get(self, eid, default=None):
        v = self._effective(eid)
        return default if v is None else v

    def __contains__(self, eid) -> bool:
        return self._effective(eid) is not None

    def __iter__(self) -> Iterator[int]:
        for eid in self._histories:
            if self._effective(eid) is not None:
                yield eid

    def __len__(self) -> int:
        return sum(1 for _ in self)


@dataclass
class Snapshot:
    """State of the extract at ``timestamp``: only elements visible at that instant."""

    timestamp: int
    nodes: SnapshotView
    ways: SnapshotView
    store: HistoryStore


def snapshot_at(store: HistoryStore, t) -> Snapshot:
    """Reconstruct the extract at instant ``t``.

    An element's effective version is its highest version stamped at or
    before ``t``; the element is present iff that version is visible.
    """
    t = to_epoch(t)
    return Snapshot(t, SnapshotView(store.nodes, t), SnapshotView(store.ways, t), store)


@dataclass(slots=True)
class WayGeometry:
    way_id: int
    vertices: list[tuple[float, float]]
    missing: list[int]

    @property
    def partial(self) -> bool:
        return bool(self.missing)

    @property
    def geometric(self) -> bool:
        """False when fewer than two vertices resolved; such ways stay out of spatial operations."""
        return len(self.vertices) >= 2


def resolve_way_geometry(snapshot: Snapshot, way_id: int) -> WayGeometry:
    """Resolve a snapshot way's node references to (lat, lon) vertices at the snapshot instant."""
    way = snapshot.ways[way_id]
    nodes = snapshot.nodes
    vertices = []
    missing = []
    for ref in way.nodes:
        n = nodes.get(ref)
        if n is None:
            missing.append(ref)
        else:
            vertices.append((n.lat, n.lon))
    return WayGeometry(way_id, vertices, missing)
