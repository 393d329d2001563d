"""History-based trustworthiness of individual features.

A feature's score is a convex combination of three indicators in [0, 1]:
a direct one from its own version chain, an indirect one from the direct
scores of spatially neighboring features, and a temporal one growing with
the time since the last edit.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationTimeError
from .history import FeatureHistory
from .spatial import NeighborIndex

SECONDS_PER_DAY = 86_400
N_BINS = 20


@dataclass(frozen=True)
class TrustWeights:
    w_d: float = 0.5
    w_i: float = 0.25
    w_time: float = 0.25

    def __post_init__(self):
        for name in ("w_d", "w_i", "w_time"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v < 0:
                raise ConfigError(f"trust weight {name} must be a finite number >= 0, got {v!r}")
        if abs(self.w_d + self.w_i + self.w_time - 1.0) > 1e-9:
            raise ConfigError(f"trust weights must sum to 1, got {self.w_d + self.w_i + self.w_time!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return self.w_d, self.w_i, self.w_time


@dataclass(frozen=True)
class TrustParams:
    """Every free parameter of the indicator formulas."""

    lambda_d: float = 0.3
    rho: float = 0.5
    tau_days: float = 730.0
    signal_weights: tuple[float, float, float] = (1.0, 2.0, 3.0)
    radius_m: float = 50.0
    weights: TrustWeights = field(default_factory=TrustWeights)
    same_class_neighbors: bool = False

    def __post_init__(self):
        if not self.lambda_d > 0:
            raise ConfigError("lambda_d must be > 0")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must be in (0, 1]")
        if not self.tau_days > 0:
            raise ConfigError("tau_days must be > 0")
        if not self.radius_m >= 0:
            raise ConfigError("radius_m must be >= 0")
        sw = tuple(float(x) for x in self.signal_weights)
        if len(sw) != 3 or any(x < 0 for x in sw):
            raise ConfigError("signal_weights must be three numbers >= 0")
        object.__setattr__(self, "signal_weights", sw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["signal_weights"] = list(self.signal_weights)
        return d


DEFAULT_PARAMS = TrustParams()


@dataclass(frozen=True)
class HistorySignals:
    versions: int
    users: int
    confirmations: int
    rollbacks: int
    age_days: float


def _same_state(a, b) -> bool:
    return a.nodes == b.nodes and a.tags == b.tags


def count_confirmations(versions: Sequence) -> int:
    """Versions by a different user than their predecessor that change neither tags nor node list."""
    return sum(
        1
        for prev, cur in zip(versions, versions[1:])
        if cur.uid != prev.uid and _same_state(cur, prev)
    )


def count_rollbacks(versions: Sequence) -> int:
    """Versions restoring the state of two versions earlier after it had been changed."""
    return sum(
        1
        for k in range(2, len(versions))
        if _same_state(versions[k], versions[k - 2]) and not _same_state(versions[k], versions[k - 1])
    )


def extract_signals(h: FeatureHistory, eval_t: int) -> HistorySignals:
    versions = h.versions
    last = max(v.timestamp for v in versions)
    if eval_t < last:
        raise EvaluationTimeError(
            f"evaluation instant {eval_t} precedes last edit {last} of element {h.id}"
        )
    return HistorySignals(
        versions=len(versions),
        users=len({v.uid for v in versions}),
        confirmations=count_confirmations(versions),
        rollbacks=count_rollbacks(versions),
        age_days=(eval_t - last) / SECONDS_PER_DAY,
    )


def direct_trust(s: HistorySignals, params: TrustParams = DEFAULT_PARAMS) -> float:
    """Saturating score of edit activity, halved (by default) for each rollback."""
    a, b, c = params.signal_weights
    support = a * (s.versions - 1) + b * (s.users - 1) + c * s.confirmations
    return -math.expm1(-params.lambda_d * support) * params.rho ** s.rollbacks


def temporal_trust(s: HistorySignals, params: TrustParams = DEFAULT_PARAMS) -> float:
    return -math.expm1(-s.age_days / params.tau_days)


def indirect_trust(f, index: NeighborIndex, dir_scores: Mapping, radius_m: float = 50.0) -> float:
    """Mean direct score of the features within ``radius_m`` of ``f``; ``f``'s own score if isolated."""
    if f not in dir_scores:
        raise KeyError(f"no direct score for feature {f!r}")
    if f not in index:
        return dir_scores[f]
    neighbors = index.neighbors(f, radius_m)
    if not neighbors:
        return dir_scores[f]
    return math.fsum(dir_scores[n] for n in neighbors) / len(neighbors)


def indirect_trust_all(index: NeighborIndex, dir_scores: Mapping, radius_m: float = 50.0) -> dict:
    """:func:`indirect_trust` for every indexed feature at once, from the index's pair list."""
    n = len(index)
    own = np.array([dir_scores[fid] for fid in index.ids], dtype=float)
    if n == 0:
        return {}
    pairs = index.pairs(radius_m)
    i, j = pairs[:, 0], pairs[:, 1]
    sums = np.bincount(i, weights=own[j], minlength=n) + np.bincount(j, weights=own[i], minlength=n)
    counts = np.bincount(i, minlength=n) + np.bincount(j, minlength=n)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), own)
    return dict(zip(index.ids, mean.tolist()))


@dataclass(frozen=True)
class TrustScore:
    feature_id: object
    t_dir: float
    t_ind: float
    t_time: float
    t: float
    weights: TrustWeights


def trustworthiness(t_dir: float, t_ind: float, t_time: float, w: TrustWeights | None = None,
                    feature_id=None) -> TrustScore:
    w = w or TrustWeights()
    for name, v in (("t_dir", t_dir), ("t_ind", t_ind), ("t_time", t_time)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v!r} outside [0, 1]")
    t = w.w_d * t_dir + w.w_i * t_ind + w.w_time * t_time
    # guard against 1 + ulp from rounding in the weighted sum
    t = min(max(t, min(t_dir, t_ind, t_time)), max(t_dir, t_ind, t_time))
    return TrustScore(feature_id, t_dir, t_ind, t_time, t, w)


@dataclass(frozen=True)
class TrustDistribution:
    n: int
    threshold: float
    pct_below: float
    pct_at_or_above: float
    histogram: tuple[int, ...]


def bin_edges() -> np.ndarray:
    return np.linspace(0.0, 1.0, N_BINS + 1)


def trust_distribution(scores: Sequence, threshold: float = 0.5) -> TrustDistribution | None:
    """Share of scores below / at-or-above ``threshold`` (percent, 2 dp) and a 20-bin histogram.

    Accepts :class:`TrustScore` objects or bare floats. Bins are half-open
    ``[a, b)`` except the last, which includes 1.0.
    """
    if not len(scores):
        return None
    values = np.array([s.t if isinstance(s, TrustScore) else s for s in scores], dtype=float)
    n = len(values)
    below = int(np.count_nonzero(values < threshold))
    pct_below = round(100.0 * below / n, 2)
    pct_above = round(100.0 - pct_below, 2)
    hist, _ = np.histogram(values, bins=bin_edges())
    return TrustDistribution(n, threshold, pct_below, pct_above, tuple(int(c) for c in hist))


def score_histories(
    histories: Mapping[object, FeatureHistory],
    points: Mapping[object, tuple[float, float]],
    eval_t: int,
    params: TrustParams = DEFAULT_PARAMS,
    groups: Mapping[object, object] | None = None,
) -> dict[object, TrustScore]:
    """Two-phase scoring: all direct scores first, then neighbor means over them.

    ``points`` holds representative points for features that take part in
    spatial neighborhoods; features without one fall back to their own
    direct score.  With ``groups`` given, neighborhoods are restricted to
    features of the same group.
    """
    signals = {fid: extract_signals(h, eval_t) for fid, h in histories.items()}
    dir_scores = {fid: direct_trust(s, params) for fid, s in signals.items()}
    indirect = dict(dir_scores)
    if groups is None:
        buckets = {None: [fid for fid in histories if fid in points]}
    else:
        buckets = {}
        for fid in histories:
            if fid in points:
                buckets.setdefault(groups[fid], []).append(fid)
    for members in buckets.values():
        index = NeighborIndex((fid, points[fid]) for fid in members)
        indirect.update(indirect_trust_all(index, dir_scores, params.radius_m))
    return {
        fid: trustworthiness(dir_scores[fid], indirect[fid], temporal_trust(signals[fid], params),
                             params.weights, feature_id=fid)
        for fid in histories
    }
