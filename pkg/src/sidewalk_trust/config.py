"""Run configuration: JSON file plus command-line overrides."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, replace

from .classify import ClassifierConfig
from .errors import ConfigError
from .history import format_epoch, to_epoch
from .spatial import DEFAULT_HEX_SIZE_M
from .trust import TrustParams, TrustWeights


def parse_years(value) -> list[int]:
    """``"2015..2020"`` (inclusive), ``"2015,2017"``, ``"2018"`` or a list of ints."""
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        try:
            years = [int(y) for y in value]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid years list {value!r}") from exc
    else:
        text = str(value).strip()
        m = re.fullmatch(r"(\d{4})\s*\.\.\s*(\d{4})", text)
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            if a > b:
                raise ConfigError(f"empty year range {text!r}")
            years = list(range(a, b + 1))
        elif re.fullmatch(r"\d{4}(\s*,\s*\d{4})*", text):
            years = [int(y) for y in text.split(",")]
        else:
            raise ConfigError(f"invalid years {text!r}; expected A..B or a comma list")
    return sorted(set(years))


def _parse_instant(value, what: str) -> int | None:
    if value is None:
        return None
    try:
        return to_epoch(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what} instant {value!r}") from exc


def _weights(value) -> TrustWeights:
    if isinstance(value, dict):
        return TrustWeights(**value)
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return TrustWeights(*value)
    raise ConfigError(f"trust weights must be [w_d, w_i, w_time] or an object, got {value!r}")


def trust_params_from_dict(data: dict) -> TrustParams:
    data = dict(data)
    data.pop("eval_at", None)
    allowed = {"lambda_d", "rho", "tau_days", "signal_weights", "radius_m", "weights", "same_class_neighbors"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown trust keys: {sorted(unknown)}")
    if "weights" in data:
        data["weights"] = _weights(data["weights"])
    try:
        return TrustParams(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class RunConfig:
    history: str | None = None
    boundary: str | None = None
    city: str | None = None
    at: int | None = None
    eval_at: int | None = None
    years: list[int] = field(default_factory=list)
    hex_size_m: float = DEFAULT_HEX_SIZE_M
    threshold: float = 0.5
    trust: TrustParams = field(default_factory=TrustParams)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    out: str = "out"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    length_columns: bool = False

    def validate(self, need_history: bool = True):
        if need_history:
            if not self.history:
                raise ConfigError("no history file given (--history)")
            if not os.path.isfile(self.history):
                raise ConfigError(f"history file not found: {self.history}")
        if self.boundary is not None and not os.path.isfile(self.boundary):
            raise ConfigError(f"boundary file not found: {self.boundary}")
        if not self.hex_size_m > 0:
            raise ConfigError("hex size must be > 0")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must be within [0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.at is not None and self.eval_at is not None and self.eval_at < self.at:
            raise ConfigError("trust evaluation instant precedes the snapshot instant")
        return self

    def metadata(self) -> dict:
        """Every model parameter of the run, echoed into each output."""
        return {
            "history": self.history,
            "boundary": self.boundary,
            "city": self.city,
            "at": None if self.at is None else format_epoch(self.at),
            "eval_at": None if self.eval_at is None else format_epoch(self.eval_at),
            "years": list(self.years),
            "hex_size_m": self.hex_size_m,
            "threshold": self.threshold,
            "trust": self.trust.to_dict(),
            "classifier": self.classifier.to_dict(),
            "scope_rule": "way in scope iff at least half of its resolved vertices are inside the boundary",
            "representative_point": "vertex at index floor(n/2) of the resolved polyline",
            "growth_instant": "Jan 1 00:00:00 UTC",
        }


_TOP_KEYS = {
    "history", "boundary", "city", "at", "eval_at", "years", "hex_size_m", "threshold",
    "trust", "classifier", "out", "threads", "length_columns", "radius_m",
}


def config_from_dict(data: dict, base: RunConfig | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = base or RunConfig()
    updates = {}
    for key in ("history", "boundary", "city", "out"):
        if key in data:
            updates[key] = None if data[key] is None else str(data[key])
    if "at" in data:
        updates["at"] = _parse_instant(data["at"], "snapshot")
    if "years" in data:
        updates["years"] = parse_years(data["years"])
    for key, typ in (("hex_size_m", float), ("threshold", float), ("threads", int)):
        if key in data:
            try:
                updates[key] = typ(data[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid {key}: {data[key]!r}") from exc
    if "length_columns" in data:
        updates["length_columns"] = bool(data["length_columns"])
    trust = dict(data.get("trust") or {})
    if "radius_m" in data:
        trust.setdefault("radius_m", data["radius_m"])
    if "eval_at" in trust:
        updates["eval_at"] = _parse_instant(trust["eval_at"], "evaluation")
    if "eval_at" in data:
        updates["eval_at"] = _parse_instant(data["eval_at"], "evaluation")
    if trust:
        merged = cfg.trust.to_dict()
        merged.update(trust)
        updates["trust"] = trust_params_from_dict(merged)
    if "classifier" in data:
        updates["classifier"] = ClassifierConfig.from_dict(data["classifier"])
    return replace(cfg, **updates)


def load_config(path: str | os.PathLike, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data, base)
