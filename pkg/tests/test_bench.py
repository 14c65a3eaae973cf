import csv
import json
import math

import numpy as np
import pytest

from carchase import bench
from carchase.bench import (CSV_COLUMNS, PlacementError, RunRecord, generate_suite, geometric_mean_speedup,
                            parse_instance_id, random_instance, read_csv, run_suite, summarize, write_summary)
from carchase.core import load_instance


def test_generate_is_deterministic(tmp_path):
    a = generate_suite(1, tmp_path / "a", map_sizes=(25,), agent_counts=(4,), densities=(0.0,), count=10)
    b = generate_suite(1, tmp_path / "b", map_sizes=(25,), agent_counts=(4,), densities=(0.0,), count=10)
    assert len(a) == 10
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
    c = generate_suite(2, tmp_path / "c", map_sizes=(25,), agent_counts=(4,), densities=(0.0,), count=1)
    assert c[0].read_bytes() != a[0].read_bytes()


def test_generated_agents_are_separated(tmp_path):
    files = generate_suite(3, tmp_path, map_sizes=(25,), agent_counts=(8,), densities=(0.2,), count=2)
    for f in files:
        inst = load_instance(f)
        sep = 4 * inst.kinematics.footprint_radius
        for attr in ("start", "goal"):
            pts = [getattr(a, attr) for a in inst.agents]
            for i in range(len(pts)):
                assert inst.pose_free(pts[i].x, pts[i].y)
                for j in range(i + 1, len(pts)):
                    assert math.hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) >= sep


def test_overdense_map_fails():
    with pytest.raises(PlacementError):
        random_instance(np.random.default_rng(0), 10, 4, 0.5, retries=50)


def test_full_grid_layout(tmp_path):
    # 60 instances per cell over the 8 desk-scale cells; only the names are checked
    names = [bench.instance_id(m, a, d, k) for m in (25, 50) for a in (4, 12) for d in (0.0, 0.2) for k in range(60)]
    assert len(set(names)) == 480
    assert parse_instance_id(names[-1]) == {"map": 50, "agents": 12, "density": 20, "index": 59}
    assert parse_instance_id("foo") is None


def test_run_suite_rows_and_sidecar(tmp_path):
    suite = tmp_path / "suite"
    generate_suite(5, suite, map_sizes=(25,), agent_counts=(4,), densities=(0.0,), count=5)
    out = tmp_path / "r.csv"
    recs = run_suite(suite, ["baseline", "carchase"], timeout=20, out_csv=out)
    rows = read_csv(out)
    assert len(rows) == 10 == len(recs)
    assert list(rows[0].keys()) == CSV_COLUMNS
    assert [r["config"] for r in rows[:2]] == ["baseline", "carchase"]
    for r in rows:
        assert float(r["wall_time_s"]) <= 20 + 1.0
        if r["solved"] == "1":
            assert math.isfinite(float(r["cost"]))
    side = [json.loads(line) for line in open(str(out) + ".stats.jsonl")]
    assert len(side) == 10 and "ct_expanded" in side[0]


def test_timeout_is_enforced(tmp_path):
    suite = tmp_path / "suite"
    generate_suite(9, suite, map_sizes=(50,), agent_counts=(12,), densities=(0.2,), count=1)
    recs = run_suite(suite, ["baseline"], timeout=0.5, out_csv=tmp_path / "t.csv")
    assert recs[0].wall_time_s <= 0.5 + 1.0


def test_unknown_config_rejected(tmp_path):
    with pytest.raises(ValueError):
        run_suite(tmp_path, ["turbo"])


def _write(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(r.row())


def test_speedup_arithmetic(tmp_path):
    p = tmp_path / "s.csv"
    _write(p, [RunRecord("m25_a4_d0_000", "baseline", True, 2.0, 1.0),
               RunRecord("m25_a4_d0_000", "carchase", True, 1.0, 1.0),
               RunRecord("m25_a4_d0_001", "baseline", True, 8.0, 1.0),
               RunRecord("m25_a4_d0_001", "carchase", True, 2.0, 1.0)])
    s = summarize(p, "baseline", "carchase")
    assert s.speedup == pytest.approx(math.sqrt(8.0))
    assert round(s.speedup, 2) == 2.83


def test_identical_configs_speedup_one(tmp_path):
    p = tmp_path / "s.csv"
    _write(p, [RunRecord("m25_a4_d0_000", "baseline", True, 3.0, 1.0),
               RunRecord("m25_a4_d0_001", "baseline", True, 5.0, 1.0)])
    assert summarize(p, "baseline", "baseline").speedup == 1.0


def test_one_sided_timeouts_excluded(tmp_path):
    p = tmp_path / "s.csv"
    _write(p, [RunRecord("m25_a4_d0_000", "baseline", True, 4.0, 1.0),
               RunRecord("m25_a4_d0_000", "carchase", True, 2.0, 1.0),
               RunRecord("m25_a4_d0_001", "baseline", False, 30.0),
               RunRecord("m25_a4_d0_001", "carchase", True, 1.0, 1.0),
               RunRecord("m25_a4_d0_002", "baseline", True, 1.0, 1.0),
               RunRecord("m25_a4_d0_002", "carchase", False, 30.0)])
    s = summarize(p, "baseline", "carchase")
    assert s.mutual == 1 and s.speedup == pytest.approx(2.0)
    assert s.timeouts == {"baseline": 1, "carchase": 1}
    assert s.avg_time_own["carchase"] == pytest.approx(1.5)
    assert s.avg_time_mutual["carchase"] == pytest.approx(2.0)


def test_empty_intersection(tmp_path):
    p = tmp_path / "s.csv"
    _write(p, [RunRecord("m25_a4_d0_000", "baseline", False, 30.0),
               RunRecord("m25_a4_d0_000", "carchase", True, 1.0, 1.0)])
    s = summarize(p, "baseline", "carchase")
    assert s.speedup is None and "n/a" in bench.format_table(s)


def test_summary_is_pure(tmp_path):
    p = tmp_path / "s.csv"
    _write(p, [RunRecord("m25_a4_d0_000", "baseline", True, 2.0, 1.0),
               RunRecord("m25_a4_d0_000", "carchase", True, 1.0, 1.0),
               RunRecord("m50_a12_d20_000", "baseline", True, 9.0, 1.0),
               RunRecord("m50_a12_d20_000", "carchase", True, 3.0, 1.0)])
    a = write_summary(summarize(p, "baseline", "carchase"), tmp_path / "a")
    b = write_summary(summarize(p, "baseline", "carchase"), tmp_path / "b")
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()
    plot = read_csv(a["plot"])
    assert [r["agents"] for r in plot] == ["4", "12"]
    assert float(plot[1]["speedup"]) == pytest.approx(3.0)
