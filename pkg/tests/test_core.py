import math

import pytest
import yaml
from hypothesis import given, settings, strategies as st

from carchase.core import (AgentTask, Constraint, Instance, InstanceError, Kinematics, Pose, Resolution,
                           Solution, StateKey, TimedState, angle_diff, discretize, key_pose, load_instance,
                           load_solution, normalize_angle, parse_instance, path_positions, validate_solution,
                           write_instance, write_solution)


def doc(**over):
    d = {"map": {"dimensions": [30, 20], "obstacles": []},
         "agents": [{"start": [5, 5, 0], "goal": [20, 5, 0]}]}
    d.update(over)
    return d


def test_minimal_instance():
    inst = parse_instance(doc())
    assert len(inst.agents) == 1 and inst.obstacles == ()
    assert inst.agents[0].goal == Pose(20, 5, 0)


def test_large_instance_with_obstacles():
    obs = [[10 + 1.5 * (i % 10), 10 + 8 * (i // 10)] for i in range(50)]
    agents = [{"start": [3 + 4.5 * i, 3, 0], "goal": [3 + 4.5 * i, 96, math.pi / 2]} for i in range(20)]
    inst = parse_instance({"map": {"dimensions": [100, 100], "obstacles": obs}, "agents": agents})
    assert len(inst.agents) == 20 and len(inst.obstacles) == 50
    assert all(r == 1.0 for _, r in inst.obstacles)


def test_goal_inside_obstacle_rejected():
    d = doc()
    d["map"]["obstacles"] = [[20, 5]]
    with pytest.raises(InstanceError):
        parse_instance(d)


@pytest.mark.parametrize("bad", [
    {"map": {"dimensions": [0, 5]}, "agents": []},
    {"map": {"dimensions": [10]}, "agents": []},
    {"agents": []},
    {"map": {"dimensions": [30, 30]}, "agents": [{"start": [5, 5]}]},
    {"map": {"dimensions": [30, 30]}, "agents": [{"start": [5, 5, 0], "goal": [50, 5, 0]}]},
    {"map": {"dimensions": [30, 30], "obstacles": [[1, 2, 3, 4]]}, "agents": []},
])
def test_malformed_instances(bad):
    with pytest.raises(InstanceError):
        parse_instance(bad)


def test_start_equals_goal_warns():
    with pytest.warns(UserWarning):
        parse_instance(doc(agents=[{"start": [5, 5, 0], "goal": [5, 5, 0]}]))


def test_obstacle_radius_and_kinematics_from_file():
    d = doc()
    d["map"]["obstacle_radius"] = 0.5
    d["map"]["obstacles"] = [[12, 12], [15, 15, 2.0]]
    d["kinematics"] = {"turning_radius": 3.0}
    inst = parse_instance(d)
    assert [r for _, r in inst.obstacles] == [0.5, 2.0]
    assert inst.kinematics.turning_radius == 3.0


def test_instance_file_round_trip(tmp_path):
    inst = parse_instance(doc())
    p = tmp_path / "i.yaml"
    write_instance(inst, p)
    back = load_instance(p)
    assert back.agents == inst.agents and back.kinematics == inst.kinematics
    (tmp_path / "bad.yaml").write_text("map: [unclosed")
    with pytest.raises(InstanceError):
        load_instance(tmp_path / "bad.yaml")


def test_discretize_examples():
    res = Resolution(1.0, 72)
    assert discretize(TimedState(Pose(0, 0, 0), 0), res) == StateKey(0, 0, 0, 0)
    assert discretize(TimedState(Pose(10.6, 3.2, math.pi), 7), res) == StateKey(10, 3, 36, 7)
    a = discretize(TimedState(Pose(4.40, 2.50, 0.3), 1), res)
    b = discretize(TimedState(Pose(4.41, 2.50, 0.3), 1), res)
    assert a == b


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-10, 10), st.integers(0, 500))
def test_key_pose_lies_in_its_own_cell(x, y, th, t):
    res = Resolution(1.0, 72)
    k = discretize(TimedState(Pose(x, y, th), t), res)
    p = key_pose(k, res)
    assert discretize(TimedState(p, t), res) == k
    assert abs(p.x - x) <= 0.5 + 1e-9 and abs(p.y - y) <= 0.5 + 1e-9
    assert angle_diff(p.theta, th) <= res.bin_width / 2 + 1e-9


@given(st.floats(-1e4, 1e4))
def test_normalize_angle_range(a):
    n = normalize_angle(a)
    assert 0.0 <= n < 2 * math.pi
    assert angle_diff(n, a) < 1e-6


def test_constraint_semantics():
    c = Constraint(0, 1, (5.0, 5.0), 2.0, 3, 6)
    assert c.covers(5.5, 5.0, 3) and c.covers(6.9, 5.0, 6)
    assert not c.covers(5.5, 5.0, 2) and not c.covers(7.1, 5.0, 4)
    with pytest.raises(ValueError):
        Constraint(0, 1, (0, 0), 0.0, 0, 1)
    with pytest.raises(ValueError):
        Constraint(0, 1, (0, 0), 1.0, 5, 1)


def _solution():
    step = Kinematics().step_length
    p0 = [TimedState(Pose(5 + i * step, 5, 0), i) for i in range(3)]
    p1 = [TimedState(Pose(5, 15 - i * step, -math.pi / 2), i) for i in range(4)]
    return Solution([p0, p1], [2 * step, 3 * step])


def test_solution_round_trip(tmp_path):
    sol = _solution()
    p = tmp_path / "s.yaml"
    write_solution(sol, p)
    blocks = yaml.safe_load(p.read_text())["agents"]
    assert [b["agent"] for b in blocks] == [0, 1]
    back = load_solution(p)
    assert back.paths == sol.paths and back.costs == sol.costs


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-7, 7)),
                         min_size=1, max_size=6), min_size=1, max_size=3))
def test_random_solution_round_trip(tmp_path_factory, raw):
    paths = [[TimedState(Pose(x, y, th), t) for t, (x, y, th) in enumerate(p)] for p in raw]
    sol = Solution(paths, [float(len(p)) for p in paths])
    f = tmp_path_factory.mktemp("sol") / "s.yaml"
    write_solution(sol, f)
    back = load_solution(f)
    assert back.paths == sol.paths and back.costs == sol.costs


def test_validate_solution_catches_problems():
    step = Kinematics().step_length
    inst = Instance(30, 30, (), (AgentTask(Pose(5, 5, 0), Pose(5 + 2 * step, 5, 0)),
                                 AgentTask(Pose(5, 15, -math.pi / 2), Pose(5, 15 - 3 * step, -math.pi / 2))))
    sol = _solution()
    assert validate_solution(inst, sol) == []
    jump = Solution([sol.paths[0][:1] + [TimedState(Pose(9, 5, 0), 1)], sol.paths[1]], sol.costs)
    assert any("illegal motion" in p for p in validate_solution(inst, jump))
    crash = Solution([sol.paths[0], [TimedState(Pose(5.5, 5.2, 0), t) for t in range(3)]], sol.costs)
    assert any("collide" in p or "start" in p for p in validate_solution(inst, crash))


def test_path_positions_parks_finished_agents():
    sol = _solution()
    assert path_positions(sol.paths, 10)[0] == (sol.paths[0][-1].pose.x, 5)
