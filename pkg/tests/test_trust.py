import io
import math
import random

import pytest

import oracles
from sidewalk_trust.errors import ConfigError, EvaluationTimeError
from sidewalk_trust.history import FeatureHistory, VersionedElement, load_history, parse_history, to_epoch
from sidewalk_trust.spatial import neighbor_index
from sidewalk_trust.trust import (
    HistorySignals,
    TrustParams,
    TrustWeights,
    direct_trust,
    extract_signals,
    indirect_trust,
    indirect_trust_all,
    score_histories,
    temporal_trust,
    trust_distribution,
    trustworthiness,
)

DAY = 86400
T0 = to_epoch("2015-01-01T00:00:00Z")


def version(v, uid, tags, nodes=(1, 2), t=None):
    return VersionedElement("way", 1, v, T0 + v * DAY if t is None else t, uid, f"u{uid}", v, True,
                            dict(tags), nodes=tuple(nodes))


def history(*versions):
    return FeatureHistory(1, list(versions))


def test_single_version_signals():
    h = history(version(1, 7, {"highway": "footway"}, t=T0))
    assert extract_signals(h, T0 + 30 * DAY) == HistorySignals(1, 1, 0, 0, 30.0)


def test_confirmation_by_other_user():
    h = history(version(1, 1, {"a": "1"}), version(2, 2, {"a": "1"}))
    s = extract_signals(h, T0 + 10 * DAY)
    assert s.confirmations == 1 and s.users == 2 and s.rollbacks == 0


def test_same_user_resave_is_not_confirmation():
    h = history(version(1, 1, {"a": "1"}), version(2, 1, {"a": "1"}))
    assert extract_signals(h, T0 + 10 * DAY).confirmations == 0


def test_geometry_change_is_not_confirmation():
    h = history(version(1, 1, {"a": "1"}, nodes=(1, 2)), version(2, 2, {"a": "1"}, nodes=(1, 3)))
    assert extract_signals(h, T0 + 10 * DAY).confirmations == 0


def test_revert_counts_rollback():
    h = history(
        version(1, 1, {"highway": "residential"}),
        version(2, 2, {"highway": "residential", "sidewalk": "both"}),
        version(3, 1, {"highway": "residential"}),
    )
    s = extract_signals(h, T0 + 10 * DAY)
    assert (s.versions, s.users, s.confirmations, s.rollbacks) == (3, 2, 0, 1)


def test_future_evaluation_rejected():
    h = history(version(1, 1, {}, t=T0))
    with pytest.raises(EvaluationTimeError):
        extract_signals(h, T0 - 1)


def test_signals_match_oracle_on_fixture(replay_xml):
    store = parse_history(io.BytesIO(replay_xml.encode()))
    eval_t = store.meta.max_timestamp
    raw = oracles.read_versions(replay_xml)
    for wid, h in store.ways.items():
        expected = oracles.signals([v for v in raw if v["kind"] == "way" and v["id"] == wid], eval_t)
        s = extract_signals(h, eval_t)
        assert (s.versions, s.users, s.confirmations, s.rollbacks, s.age_days) == expected
    # hand-traced: A Street has one confirmation (v2) and one rollback (v5)
    s = extract_signals(store.ways[100], eval_t)
    assert (s.versions, s.users, s.confirmations, s.rollbacks) == (5, 4, 1, 1)


def test_direct_trust_values():
    assert direct_trust(HistorySignals(1, 1, 0, 0, 0)) == 0.0
    assert direct_trust(HistorySignals(3, 2, 1, 0, 0)) == pytest.approx(0.8775435717470181, abs=1e-12)
    assert direct_trust(HistorySignals(3, 2, 1, 1, 0)) == pytest.approx(0.43877178587350907, abs=1e-12)


def test_direct_trust_uses_params():
    p = TrustParams(lambda_d=1.0, rho=0.25, signal_weights=(1, 0, 0))
    assert direct_trust(HistorySignals(2, 2, 1, 1, 0), p) == pytest.approx((1 - math.exp(-1)) * 0.25)


def test_temporal_trust_values():
    assert temporal_trust(HistorySignals(1, 1, 0, 0, 0.0)) == 0.0
    assert temporal_trust(HistorySignals(1, 1, 0, 0, 730.0)) == pytest.approx(0.6321205588285577, abs=1e-12)
    big = temporal_trust(HistorySignals(1, 1, 0, 0, 1e9))
    assert big <= 1.0 and big == pytest.approx(1.0)


def test_indirect_isolated_falls_back():
    idx = neighbor_index([("a", (47.6, -122.3))])
    assert indirect_trust("a", idx, {"a": 0.7}, 50) == 0.7


def test_indirect_mutual_neighbors():
    idx = neighbor_index([("a", (47.6, -122.3)), ("b", (47.6002, -122.3))])
    scores = {"a": 0.2, "b": 0.8}
    assert indirect_trust("a", idx, scores, 50) == 0.8
    assert indirect_trust("b", idx, scores, 50) == 0.2
    assert indirect_trust_all(idx, scores, 50) == {"a": 0.8, "b": 0.2}


def test_indirect_unknown_feature():
    idx = neighbor_index([("a", (0, 0))])
    with pytest.raises(KeyError):
        indirect_trust("zz", idx, {"a": 0.1}, 50)


def test_indirect_cluster_matches_brute_force():
    points = {
        1: (47.60000, -122.33000),
        2: (47.60020, -122.33000),
        3: (47.60040, -122.33000),
        4: (47.60000, -122.33050),
        5: (47.61000, -122.33000),
    }
    dirs = {1: 0.1, 2: 0.5, 3: 0.9, 4: 0.3, 5: 0.6}
    idx = neighbor_index(points.items())
    batch = indirect_trust_all(idx, dirs, 50)
    for f, p in points.items():
        nb = oracles.brute_neighbors(points, p, 50, exclude=f)
        expected = sum(dirs[n] for n in nb) / len(nb) if nb else dirs[f]
        assert indirect_trust(f, idx, dirs, 50) == pytest.approx(expected, abs=1e-15)
        assert batch[f] == pytest.approx(expected, abs=1e-15)
    assert batch[5] == 0.6  # isolated
    assert batch[1] == pytest.approx((0.5 + 0.9 + 0.3) / 3)  # 22 m, 44.5 m, 37.5 m away


def test_indirect_batch_equals_scalar_random():
    rng = random.Random(2)
    pts = [(i, (41.88 + rng.uniform(0, 0.003), -87.63 + rng.uniform(0, 0.003))) for i in range(300)]
    dirs = {i: rng.random() for i, _ in pts}
    idx = neighbor_index(pts)
    batch = indirect_trust_all(idx, dirs, 60)
    for i, _ in pts:
        assert batch[i] == pytest.approx(indirect_trust(i, idx, dirs, 60), abs=1e-12)


def test_trustworthiness_examples():
    w = TrustWeights()
    assert trustworthiness(1, 1, 1, w).t == 1.0
    assert trustworthiness(0.8, 0.4, 0.2, w).t == pytest.approx(0.55, abs=1e-12)
    assert trustworthiness(0, 0, 0, w).t == 0.0


@pytest.mark.parametrize("weights", [(0.5, 0.5, 0.5), (1.2, -0.1, -0.1), (0.5, 0.25, 0.2)])
def test_bad_weights(weights):
    with pytest.raises(ConfigError):
        TrustWeights(*weights)


def test_component_range_checked():
    with pytest.raises(ValueError):
        trustworthiness(1.5, 0, 0)


def test_distribution_examples():
    d = trust_distribution([0.2, 0.6])
    assert (d.pct_below, d.pct_at_or_above) == (50.0, 50.0)
    d = trust_distribution([0.5, 0.5, 0.5])
    assert (d.pct_below, d.pct_at_or_above) == (0.0, 100.0)
    assert trust_distribution([]) is None


def test_distribution_histogram_edges():
    d = trust_distribution([0.0, 0.049, 0.05, 0.999, 1.0])
    assert d.histogram[0] == 2 and d.histogram[1] == 1 and d.histogram[19] == 2
    assert sum(d.histogram) == 5


def test_distribution_counting_oracle():
    rng = random.Random(9)
    values = [rng.random() for _ in range(100)]
    d = trust_distribution(values, 0.5)
    below = len([v for v in values if v < 0.5])
    assert d.pct_below == round(below, 2)
    assert d.pct_below + d.pct_at_or_above == 100.0
    for k in range(20):
        lo, hi = k / 20, (k + 1) / 20
        expected = len([v for v in values if lo <= v < hi or (k == 19 and v == 1.0)])
        assert d.histogram[k] == expected


def test_threshold_override():
    d = trust_distribution([0.6, 0.69, 0.7, 0.9], threshold=0.7)
    assert (d.pct_below, d.pct_at_or_above) == (50.0, 50.0)


def test_score_histories_fixture(fixtures_dir):
    store = load_history(fixtures_dir / "replay.osh")
    eval_t = store.meta.max_timestamp
    hs = {wid: store.ways[wid] for wid in (100, 101)}
    pts = {100: (47.6005, -122.33), 101: (47.6004, -122.331)}
    scores = score_histories(hs, pts, eval_t)
    d100 = direct_trust(extract_signals(store.ways[100], eval_t))
    d101 = direct_trust(extract_signals(store.ways[101], eval_t))
    # 100 and 101 are ~76 m apart: no neighbors within 50 m, each falls back to itself
    assert scores[100].t_ind == d100 and scores[101].t_ind == d101
    wide = score_histories(hs, pts, eval_t, TrustParams(radius_m=100))
    assert wide[100].t_ind == d101 and wide[101].t_ind == d100
    s = wide[100]
    assert s.t == pytest.approx(0.5 * s.t_dir + 0.25 * s.t_ind + 0.25 * s.t_time, abs=1e-12)
