"""``sidewalk-trust`` command line: ingest, coverage, trust, growth, all."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import RunConfig, load_config, parse_years
from .errors import ConfigError, InputError
from .history import to_epoch
from .report import open_run, run_coverage, run_growth, run_ingest, run_trust, classify_run

log = logging.getLogger("sidewalk_trust")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--history", metavar="PATH", help="OSM full-history XML (.osh)")
    p.add_argument("--boundary", metavar="PATH", help="study area as GeoJSON Polygon/MultiPolygon")
    p.add_argument("--city", metavar="NAME")
    p.add_argument("--at", metavar="ISO8601", help="snapshot instant (default: last edit in the extract)")
    p.add_argument("--years", metavar="A..B", help="growth years, inclusive range or comma list")
    p.add_argument("--hex-size", metavar="M", type=float, help="hex cell width in meters (flat to flat)")
    p.add_argument("--radius", metavar="M", type=float, help="neighbor radius for indirect trust")
    p.add_argument("--threshold", metavar="X", type=float, help="trust threshold for the distribution split")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--threads", metavar="N", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sidewalk-trust",
        description="Sidewalk coverage and trustworthiness from OSM full-history extracts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    for name, help_text in (
        ("ingest", "parse a history file and print a summary"),
        ("coverage", "coverage CSV and per-feature class GeoJSON"),
        ("trust", "per-feature trust GeoJSON, distribution CSV and hexbin GeoJSON"),
        ("growth", "yearly coverage growth CSV"),
        ("all", "run ingest, coverage, trust and growth"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    updates = {}
    for attr in ("history", "boundary", "city", "out", "threshold", "threads"):
        value = getattr(args, attr)
        if value is not None:
            updates[attr] = value
    if args.hex_size is not None:
        updates["hex_size_m"] = args.hex_size
    if args.at is not None:
        try:
            updates["at"] = to_epoch(args.at)
        except ValueError as exc:
            raise ConfigError(f"invalid --at {args.at!r}") from exc
    if args.years is not None:
        updates["years"] = parse_years(args.years)
    if args.radius is not None:
        updates["trust"] = replace(cfg.trust, radius_m=args.radius)
    return replace(cfg, **updates)


def _run(args) -> int:
    cfg = config_from_args(args)
    if args.command == "ingest":
        _, summary = run_ingest(cfg)
        print(json.dumps(summary, indent=1))
        return EXIT_OK
    if args.command == "all":
        store, summary = run_ingest(cfg)
        print(json.dumps({k: v for k, v in summary.items() if k != "reject_details"}, indent=1))
        ctx = open_run(cfg, store)
    else:
        ctx = open_run(cfg)
    if args.command in ("coverage", "trust", "all"):
        classified = classify_run(ctx)
        if args.command in ("coverage", "all"):
            report = run_coverage(ctx, classified)
            log.info("coverage: %d roads, %d with sidewalk info, %d sidewalks",
                     report.n_roads, report.n_roads_with_info, report.n_sidewalk_geometries)
        if args.command in ("trust", "all"):
            result = run_trust(ctx, classified)
            log.info("trust: %d features scored", len(result.scores))
    if args.command in ("growth", "all"):
        series = run_growth(ctx)
        log.info("growth: %d years", len(series))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
