"""Synthetic OSM history extracts for CLI and performance tests.

Run as a script to write a large file:  python tests/synth.py OUT.osh [MEGABYTES]
"""

from __future__ import annotations

import json
import math
import random
import sys
from calendar import timegm
from time import gmtime, strftime

LAT0, LON0 = 47.60, -122.33
T_START = timegm((2010, 1, 1, 0, 0, 0))
T_END = timegm((2023, 6, 1, 0, 0, 0))


def _ts(t: int) -> str:
    return strftime("%Y-%m-%dT%H:%M:%SZ", gmtime(t))


def _node(i, v, t, uid, lat=None, lon=None, visible=True, tags=()):
    head = (f' <node id="{i}" version="{v}" timestamp="{_ts(t)}" uid="{uid}" user="mapper{uid}" '
            f'changeset="{uid * 1000 + v}" visible="{"true" if visible else "false"}"')
    if visible:
        head += f' lat="{lat:.7f}" lon="{lon:.7f}"'
    if not tags:
        return head + "/>\n"
    body = "".join(f'  <tag k="{k}" v="{val}"/>\n' for k, val in tags)
    return head + ">\n" + body + " </node>\n"


def _way(i, v, t, uid, refs, tags, visible=True):
    head = (f' <way id="{i}" version="{v}" timestamp="{_ts(t)}" uid="{uid}" user="mapper{uid}" '
            f'changeset="{uid * 1000 + v}" visible="{"true" if visible else "false"}">\n')
    body = "".join(f'  <nd ref="{r}"/>\n' for r in refs) if visible else ""
    body += "".join(f'  <tag k="{k}" v="{val}"/>\n' for k, val in tags) if visible else ""
    return head + body + " </way>\n"


def square_boundary(path, lat0=LAT0, lon0=LON0, half=0.05, name="Synthville"):
    ring = [[lon0 - half, lat0 - half], [lon0 + half, lat0 - half], [lon0 + half, lat0 + half],
            [lon0 - half, lat0 + half], [lon0 - half, lat0 - half]]
    with open(path, "w") as fh:
        json.dump({"type": "Feature", "properties": {"name": name},
                   "geometry": {"type": "Polygon", "coordinates": [ring]}}, fh)


def wavy_boundary(path, lat0=LAT0, lon0=LON0, radius=0.08, n=400, name="Synthville"):
    """Star-ish polygon with many vertices, to make point-in-polygon work realistic."""
    ring = []
    for k in range(n):
        a = 2 * math.pi * k / n
        r = radius * (1 + 0.15 * math.sin(9 * a))
        ring.append([lon0 + r * math.cos(a) / math.cos(math.radians(lat0)), lat0 + r * math.sin(a)])
    ring.append(ring[0])
    with open(path, "w") as fh:
        json.dump({"type": "Feature", "properties": {"name": name},
                   "geometry": {"type": "Polygon", "coordinates": [ring]}}, fh)


def counts_fixture(path, n_roads, n_with_info, n_sidewalks, n_outside=3, n_footways=2):
    """Single-version extract with exact class counts inside the square boundary."""
    t = timegm((2019, 1, 1, 0, 0, 0))
    nodes, ways = [], []
    nid = 1
    wid = 1

    def add_way(tags, lat, lon):
        nonlocal nid, wid
        refs = []
        for k in range(2):
            nodes.append(_node(nid, 1, t, 1 + wid % 7, lat, lon + k * 0.0005))
            refs.append(nid)
            nid += 1
        ways.append(_way(wid, 1, t + 60, 1 + wid % 7, refs, tags))
        wid += 1

    for k in range(n_roads):
        tags = [("highway", "residential")]
        if k < n_with_info:
            tags.append(("sidewalk", ("both", "left", "right", "yes")[k % 4]))
        elif k % 3 == 0:
            tags.append(("sidewalk", "no"))
        add_way(tags, LAT0 + 0.0004 * k, LON0)
    for k in range(n_sidewalks):
        add_way([("highway", "footway"), ("footway", "sidewalk")] + ([("surface", "concrete")] if k % 2 else []),
                LAT0 + 0.0004 * k, LON0 + 0.01)
    for k in range(n_footways):
        add_way([("highway", "footway")], LAT0 - 0.01, LON0 + 0.001 * k)
    for k in range(n_outside):
        add_way([("highway", "primary"), ("sidewalk", "both")], LAT0 + 1.0, LON0 + 0.001 * k)
    add_way([("highway", "cycleway"), ("sidewalk", "yes")], LAT0, LON0 - 0.01)
    add_way([("building", "yes")], LAT0, LON0 - 0.02)
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n<osm version="0.6" generator="synth">\n')
        fh.writelines(nodes)
        fh.writelines(ways)
        fh.write("</osm>\n")


ROAD_TYPES = ("residential", "residential", "service", "primary", "secondary", "tertiary")
NODES_PER_WAY = 8


def _block_plan(b: int):
    """Deterministic plan of one way and its nodes."""
    rng = random.Random(b * 7919 + 17)
    row, col = divmod(b, 400)
    # rows alternate north and south of the center so small files still overlap the boundary
    offset = (row + 1) // 2 * (1 if row % 2 else -1)
    lat = LAT0 + offset * 0.00045
    lon = LON0 - 0.15 + col * 0.00075
    kind = rng.random()
    if kind < 0.60:
        base = [("highway", rng.choice(ROAD_TYPES)), ("name", f"Street {row}")]
        sidewalk = rng.random() < 0.2
    elif kind < 0.80:
        base = [("highway", "footway"), ("footway", "sidewalk")]
        sidewalk = False
    elif kind < 0.90:
        base = [("highway", "footway")]
        sidewalk = False
    else:
        base = [("highway", "cycleway")] if rng.random() < 0.5 else [("building", "yes")]
        sidewalk = False
    t0 = rng.randint(T_START, T_END - 400 * 86400)
    return rng, lat, lon, base, sidewalk, t0


def _block_nodes(b: int) -> list[str]:
    _, lat, lon, _, _, t0 = _block_plan(b)
    rng = random.Random(b * 104729 + 1)
    out = []
    first = b * NODES_PER_WAY + 1
    for k in range(NODES_PER_WAY):
        nid = first + k
        t = t0 - 3600
        uid = rng.randint(1, 5000)
        la, lo = lat, lon + k * 0.00009
        out.append(_node(nid, 1, t, uid, la, lo, tags=(("highway", "crossing"),) if k == 0 and b % 5 == 0 else ()))
        for v in range(2, 2 + (rng.random() < 0.5) + (rng.random() < 0.15)):
            t += rng.randint(1, 900) * 86400
            la += rng.uniform(-2e-6, 2e-6)
            out.append(_node(nid, v, min(t, T_END), rng.randint(1, 5000), la, lo))
    return out


def _block_way(b: int) -> list[str]:
    _, _, _, base, sidewalk, t0 = _block_plan(b)
    rng = random.Random(b * 15485863 + 2)
    refs = list(range(b * NODES_PER_WAY + 1, (b + 1) * NODES_PER_WAY + 1))
    out = []
    uid = rng.randint(1, 5000)
    tags = list(base)
    t = t0
    n_versions = 1 + rng.choice((0, 0, 1, 1, 2, 3))
    prev_tags = None
    for v in range(1, n_versions + 1):
        if v > 1:
            t += rng.randint(1, 600) * 86400
            action = rng.random()
            if action < 0.3:
                uid = rng.randint(1, 5000)  # confirmation touch
            elif action < 0.45 and prev_tags is not None:
                tags, prev_tags = prev_tags, tags  # revert
            else:
                prev_tags = list(tags)
                if sidewalk and not any(k == "sidewalk" for k, _ in tags):
                    tags.append(("sidewalk", rng.choice(("both", "left", "right", "yes"))))
                elif base[0][1] == "footway" and rng.random() < 0.5:
                    tags.append(("surface", rng.choice(("concrete", "asphalt"))))
                else:
                    tags.append(("note", f"edit {v}"))
        if v == 1:
            prev_tags = None
        deleted = v == n_versions and v > 2 and rng.random() < 0.1
        out.append(_way(b + 1, v, min(t, T_END), uid, refs, tags, visible=not deleted))
    return out


def generate_large(path: str, target_bytes: int) -> int:
    """Write a nodes-then-ways history of roughly ``target_bytes``; returns the way count."""
    # measured rate: about 2.9 kB per way block
    n_blocks = max(1, int(target_bytes / 2900))
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n<osm version="0.6" generator="synth">\n')
        for start in range(0, n_blocks, 2000):
            chunk = []
            for b in range(start, min(n_blocks, start + 2000)):
                chunk.extend(_block_nodes(b))
            fh.write("".join(chunk))
        for start in range(0, n_blocks, 2000):
            chunk = []
            for b in range(start, min(n_blocks, start + 2000)):
                chunk.extend(_block_way(b))
            fh.write("".join(chunk))
        fh.write("</osm>\n")
    return n_blocks


if __name__ == "__main__":
    out = sys.argv[1]
    mb = float(sys.argv[2]) if len(sys.argv) > 2 else 500
    n = generate_large(out, int(mb * 1_000_000))
    print(f"wrote {n} ways to {out}")
