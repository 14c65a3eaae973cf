import math
import random

import numpy as np
import pytest

from carchase.approx import (ApproxTable, HybridConfig, build_table, default_hybrid_config, hybrid_h,
                             load_table, measure_epsilon, rs_approx, to_goal_frame)
from carchase.core import Pose
from carchase.reeds_shepp import RSConfig, rs_exact

CFG = RSConfig(2.0, 1.0)


@pytest.fixture(scope="module")
def table():
    return build_table(CFG, (-12, 12, -12, 12), (25, 25, 24), samples=20_000, seed=1)


def test_epsilon_is_measured_and_small(table):
    assert 0.0 < table.epsilon_table < 0.25
    assert measure_epsilon(table, 20_000, 1) == table.epsilon_table


def test_exact_at_nodes(table):
    rng = random.Random(0)
    g = Pose(1.5, -2.0, 0.9)
    c, s = math.cos(g.theta), math.sin(g.theta)
    checked = 0
    while checked < 300:
        i, j, k = rng.randrange(25), rng.randrange(25), rng.randrange(24)
        rx, ry, rt = table.node_pose(i, j, k)
        if math.hypot(rx, ry) < table.min_radius:
            continue
        a = Pose(g.x + c * rx - s * ry, g.y + s * rx + c * ry, g.theta + rt)
        assert rs_approx(a, g, table) == pytest.approx(rs_exact(a, g, CFG), abs=1e-9)
        checked += 1


def test_bound_holds_on_fresh_samples(table):
    rng = random.Random(42)
    for _ in range(5000):
        a = Pose(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-4, 4))
        b = Pose(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-4, 4))
        ex = rs_exact(a, b, CFG)
        assert rs_approx(a, b, table) <= (1 + table.epsilon_table + 0.01) * ex + 1e-9


def test_falls_back_near_goal_and_outside(table):
    g = Pose(0, 0, 0)
    near = Pose(1.0, 0.5, 0.3)
    far = Pose(40.0, 0.0, 0.0)
    assert rs_approx(near, g, table) == rs_exact(near, g, CFG)
    assert rs_approx(far, g, table) == rs_exact(far, g, CFG)


def test_goal_frame_round_trip():
    rx, ry, rt = to_goal_frame(3.0, 4.0, 1.0, 3.0, 4.0, 1.0)
    assert (rx, ry, rt) == (0.0, 0.0, 0.0)
    rx, ry, _ = to_goal_frame(1.0, 0.0, 0.0, 0.0, 0.0, math.pi / 2)
    assert rx == pytest.approx(0.0, abs=1e-12) and ry == pytest.approx(-1.0)


def test_disk_cache_round_trip(tmp_path):
    t1 = build_table(CFG, (-6, 6, -6, 6), (9, 9, 12), samples=500, cache_dir=tmp_path)
    files = list(tmp_path.glob("*.npz"))
    assert len(files) == 1
    t2 = build_table(CFG, (-6, 6, -6, 6), (9, 9, 12), samples=500, cache_dir=tmp_path)
    assert np.array_equal(t1.values, t2.values) and t1.epsilon_table == t2.epsilon_table
    other = build_table(CFG, (-6, 6, -6, 6), (9, 9, 16), samples=500, cache_dir=tmp_path)
    assert other.values.shape == (9, 9, 16)
    assert len(list(tmp_path.glob("*.npz"))) == 2


def test_mismatched_header_rejected(tmp_path):
    build_table(CFG, (-6, 6, -6, 6), (9, 9, 12), samples=100, cache_dir=tmp_path)
    path = next(tmp_path.glob("*.npz"))
    assert load_table(path, {"format": 999}) is None


def test_table_validation():
    with pytest.raises(ValueError):
        ApproxTable(CFG, (0, 1, 0, 1), (1, 2, 2), np.zeros((1, 2, 2)), 0.0, 4.0)
    with pytest.raises(ValueError):
        ApproxTable(CFG, (0, 1, 0, 1), (2, 2, 2), np.zeros((2, 2, 3)), 0.0, 4.0)


def test_threshold_schedule():
    cfg = HybridConfig(20.0, 4.0, 50.0)
    assert cfg.threshold(0.0) == 20.0
    assert cfg.threshold(25.0) == pytest.approx(12.0)
    assert cfg.threshold(500.0) == 4.0
    with pytest.raises(ValueError):
        HybridConfig(1.0, 4.0, 10.0)


def test_hybrid_uses_exact_when_close(table):
    g = Pose(0, 0, 0)
    hc = default_hybrid_config(math.hypot(25, 25), Pose(10, 0, 0), g, CFG)
    close = Pose(3.0, 2.0, 1.0)
    assert hybrid_h(close, g, 0.0, hc, table, CFG) == rs_exact(close, g, CFG)
    far = Pose(9.3, -7.1, 2.0)
    assert hybrid_h(far, g, 0.0, hc, table, CFG) == rs_approx(far, g, table)
