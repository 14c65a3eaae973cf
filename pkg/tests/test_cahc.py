import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from carchase.cahc import (EMPTY_FINGERPRINT, ID_BITS, CacheStats, CarRelevance, ConflictAwareCache,
                           ConflictFingerprint, RelevanceConfig, StateOnlyCache, cached_h, entry_bytes,
                           extract_fingerprint, point_segment_distance, relevant)
from carchase.core import Constraint, Pose, Resolution, TimedState


def con(i, x, y, t0, t1, r=2.2):
    return Constraint(i, 0, (x, y), r, t0, t1)


id_sets = st.sets(st.integers(0, 600), max_size=12)


@given(id_sets)
def test_fingerprint_round_trips_ids(ids):
    fp = ConflictFingerprint.from_ids(ids)
    assert sorted(fp.ids()) == sorted(ids)
    assert len(fp) == len(ids)


@given(id_sets)
def test_fingerprint_order_independent(ids):
    a = ConflictFingerprint.from_ids(sorted(ids))
    b = ConflictFingerprint.from_ids(sorted(ids, reverse=True))
    assert a == b and hash(a) == hash(b)


@given(id_sets, id_sets)
def test_fingerprint_equality_is_set_equality(a, b):
    assert (ConflictFingerprint.from_ids(a) == ConflictFingerprint.from_ids(b)) == (a == b)


def test_overflow_ids_are_kept_apart():
    fp = ConflictFingerprint.from_ids([3, ID_BITS, ID_BITS + 7])
    assert fp.overflow == (ID_BITS, ID_BITS + 7)
    assert fp.nbytes == 32 + 8 + 2 * 8 + 3 * 16
    with pytest.raises(ValueError):
        ConflictFingerprint.from_ids([-1])


def test_empty_fingerprint():
    assert len(EMPTY_FINGERPRINT) == 0
    assert EMPTY_FINGERPRINT == ConflictFingerprint.from_ids([])
    assert entry_bytes(EMPTY_FINGERPRINT) == 12 + 40 + 8 + 32


def test_point_segment_distance():
    assert point_segment_distance(0, 1, -1, 0, 1, 0) == pytest.approx(1.0)
    assert point_segment_distance(3, 4, 0, 0, 0, 0) == pytest.approx(5.0)
    assert point_segment_distance(5, 0, 0, 0, 2, 0) == pytest.approx(3.0)


def test_relevance_window_and_geometry():
    cfg = RelevanceConfig(10, 3.0)
    s = TimedState(Pose(0, 0, 0), 20)
    g = Pose(20, 0, 0)
    ahead_far = con(0, 15, 30, 20, 20)
    behind_near = con(1, -2, 1, 22, 25)
    behind_far = con(2, -30, 0, 20, 20)
    stale = con(3, 10, 0, 0, 5)
    future = con(4, 10, 0, 31, 40)
    assert relevant(0, 0, 20, 20, 0, ahead_far, cfg)
    assert relevant(0, 0, 20, 20, 0, behind_near, cfg)
    assert not relevant(0, 0, 20, 20, 0, behind_far, cfg)
    assert not relevant(0, 0, 20, 20, 0, stale, cfg)
    assert not relevant(0, 0, 20, 20, 0, future, cfg)
    fp = extract_fingerprint(s, g, [ahead_far, behind_near, behind_far, stale, future], cfg)
    assert sorted(fp.ids()) == [0, 1]
    assert extract_fingerprint(s, g, [], cfg) is EMPTY_FINGERPRINT


coords = st.floats(-40, 40, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(coords, coords, st.integers(0, 150), st.integers(0, 30)), max_size=15),
       coords, coords, st.integers(0, 150), coords, coords)
def test_fast_filter_matches_reference(rows, sx, sy, stime, gx, gy):
    cs = [con(i, x, y, t, t + d) for i, (x, y, t, d) in enumerate(rows)]
    cfg = RelevanceConfig(40, 5.0)
    fast = CarRelevance(cs, Pose(gx, gy, 0.0), cfg).fingerprint(sx, sy, stime)
    ref = extract_fingerprint(TimedState(Pose(sx, sy, 0.0), stime), Pose(gx, gy, 0.0), cs, cfg)
    assert fast == ref


def test_fast_filter_interns():
    cs = [con(0, 5, 0, 0, 10), con(1, 9, 0, 0, 10)]
    rel = CarRelevance(cs, Pose(20, 0, 0), RelevanceConfig())
    assert rel.fingerprint(0, 0, 1) is rel.fingerprint(1, 0, 2)


def test_cache_hit_requires_same_fingerprint():
    cache = ConflictAwareCache(10)
    calls = []

    def compute(v):
        def f():
            calls.append(v)
            return v
        return f

    a = ConflictFingerprint.from_ids([1])
    b = ConflictFingerprint.from_ids([2])
    assert cache.get_or_compute("k", a, compute(1.0)) == 1.0
    assert cache.get_or_compute("k", a, compute(9.0)) == 1.0
    assert cache.get_or_compute("k", b, compute(2.0)) == 2.0
    assert calls == [1.0, 2.0]
    st_ = cache.stats
    assert (st_.lookups, st_.hits, st_.misses, st_.entries) == (3, 1, 2, 2)
    assert st_.approx_bytes == entry_bytes(a) + entry_bytes(b)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 50), st.lists(st.integers(0, 200), max_size=400))
def test_capacity_never_exceeded(cap, keys):
    cache = ConflictAwareCache(cap)
    for k in keys:
        cache.get_or_compute(k, EMPTY_FINGERPRINT, lambda: 1.0)
        assert len(cache) <= cap
        assert cache.stats.peak_entries <= cap
    assert cache.stats.approx_bytes == len(cache) * entry_bytes(EMPTY_FINGERPRINT)


def test_eviction_drops_oldest_half():
    cache = ConflictAwareCache(8)
    for k in range(8):
        cache.get_or_compute(k, EMPTY_FINGERPRINT, lambda: 0.0)
    cache.get_or_compute(8, EMPTY_FINGERPRINT, lambda: 0.0)
    assert len(cache) == 4
    assert [k for k, _ in cache.entries] == [5, 6, 7, 8]
    assert cache.stats.evictions == 5


def test_state_only_hit_requires_same_context():
    cache = StateOnlyCache(4)
    assert cache.get_or_compute("k", "ctx1", lambda: 1.0) == 1.0
    assert cache.get_or_compute("k", "ctx1", lambda: 5.0) == 1.0
    assert cache.get_or_compute("k", "ctx2", lambda: 2.0) == 2.0
    assert cache.get_or_compute("k", "ctx1", lambda: 3.0) == 3.0
    assert cache.stats.hits == 1 and len(cache) == 1
    for i in range(10):
        cache.get_or_compute(i, "c", lambda: 0.0)
        assert len(cache) <= 4


def test_stats_dump_and_merge():
    a = CacheStats(10, 4, 6, 0, 6, 600, 6)
    b = CacheStats(5, 5, 0, 1, 2, 200, 9)
    m = a.merge(b)
    assert m.lookups == 15 and m.hits == 9 and m.peak_entries == 9
    assert m.hit_rate == pytest.approx(0.6)
    assert '"hits": 4' in a.dump()
    assert CacheStats().hit_rate == 0.0 and CacheStats().bytes_per_entry == 0.0


def test_cached_h_wraps_base():
    cache = ConflictAwareCache()
    g = Pose(10, 0, 0)
    s = TimedState(Pose(0.2, 0.3, 0.0), 0)
    calls = []

    def base(state, goal, cs):
        calls.append(state)
        return math.hypot(goal.x - state.pose.x, goal.y - state.pose.y)

    cs = [con(0, 5, 0, 0, 3)]
    v1 = cached_h(s, g, cs, cache, base, resolution=Resolution())
    v2 = cached_h(TimedState(Pose(0.2, 0.3, 0.01), 0), g, cs, cache, base, resolution=Resolution())
    assert v1 == v2 and len(calls) == 1


def test_capacity_validation():
    with pytest.raises(ValueError):
        ConflictAwareCache(0)
    with pytest.raises(ValueError):
        RelevanceConfig(-1, 1.0)
