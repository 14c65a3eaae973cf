import math

import pytest

from carchase.cahc import ConflictAwareCache
from carchase.core import AgentTask, Constraint, Instance, Pose, TimedState
from carchase.lowlevel import (BudgetExceededError, NoPathError, PlannerConfig, SearchNode, SearchTimeout,
                               expand, plan_single, primitives)


def corridor(obstacles=()):
    return Instance(30.0, 12.0, tuple(obstacles), (AgentTask(Pose(5, 5, 0), Pose(25, 5, 0)),))


def test_straight_corridor_cost():
    inst = corridor()
    res = plan_single(inst, 0, ())
    assert res.cost == pytest.approx(20.0, abs=inst.kinematics.step_length)
    assert res.path[0].pose == Pose(5, 5, 0) and res.path[-1].pose == Pose(25, 5, 0)
    assert [s.time for s in res.path] == list(range(len(res.path)))


def test_blocking_constraint_raises_cost():
    inst = corridor()
    free = plan_single(inst, 0, ())
    block = Constraint(0, 0, (15.0, 5.0), 3.0, 0, 40)
    res = plan_single(inst, 0, (block,))
    assert res.cost > free.cost
    for s in res.path:
        assert not block.covers(s.pose.x, s.pose.y, s.time)


def test_other_agents_constraints_ignored():
    inst = corridor()
    block = Constraint(0, 3, (15.0, 5.0), 3.0, 0, 40)
    assert plan_single(inst, 0, (block,)).cost == plan_single(inst, 0, ()).cost


def test_goal_ringed_by_obstacles():
    ring = tuple(((25 + 4 * math.cos(a), 5 + 4 * math.sin(a)), 1.2) for a in (i * math.pi / 8 for i in range(16)))
    inst = Instance(40.0, 12.0, ring, (AgentTask(Pose(5, 5, 0), Pose(25, 5, 0)),))
    with pytest.raises(NoPathError):
        plan_single(inst, 0, ())


def test_budget_exceeded():
    inst = Instance(60.0, 60.0, (), (AgentTask(Pose(5, 5, 0), Pose(55, 55, math.pi)),))
    with pytest.raises(BudgetExceededError):
        plan_single(inst, 0, (), PlannerConfig(max_expansions=10))


def test_deadline():
    inst = Instance(60.0, 60.0, (), (AgentTask(Pose(5, 5, 0), Pose(55, 55, math.pi)),))
    with pytest.raises(SearchTimeout):
        plan_single(inst, 0, (), deadline=0.0)


def test_expand_counts_and_filters():
    inst = corridor()
    node = SearchNode(TimedState(Pose(15, 6, 0), 0), 0.0, 0.0)
    assert len(expand(node, primitives(inst.kinematics.step_length), (), inst)) == 7
    wall = Constraint(0, 0, (15.0, 6.0), 0.5, 1, 1)
    kids = expand(node, None, (wall,), inst)
    assert len(kids) == 6 and all(k.state.pose != node.state.pose for k in kids)
    edge = SearchNode(TimedState(Pose(1.2, 6, math.pi), 0), 0.0, 0.0)
    kids = expand(edge, None, (), inst)
    assert all(inst.in_bounds(k.state.pose.x, k.state.pose.y) for k in kids)
    assert len(kids) < 7


def test_primitive_geometry():
    prims = primitives(1.0)
    assert len(prims) == 6
    for p in prims:
        x, y, _ = p.apply(0.0, 0.0, 0.0, 2.0)
        assert math.hypot(x, y) <= 1.0 + 1e-12
        assert p.cost(1.5) == (1.5 if p.direction < 0 else 1.0)


@pytest.mark.parametrize("mode", ["exact", "hybrid"])
def test_cache_does_not_change_result(mode):
    inst = Instance(30.0, 30.0, (((15.0, 12.0), 2.0),), (AgentTask(Pose(4, 4, 0), Pose(26, 22, 1.5)),))
    cons = (Constraint(0, 0, (12.0, 6.0), 2.5, 3, 9), Constraint(1, 0, (20.0, 18.0), 2.5, 10, 14))
    off = plan_single(inst, 0, cons, PlannerConfig(heuristic_mode=mode))
    cache = ConflictAwareCache()
    cfg = PlannerConfig(heuristic_mode=mode, cache_mode="conflict_aware")
    first = plan_single(inst, 0, cons, cfg, cache=cache)
    again = plan_single(inst, 0, cons, cfg, cache=cache)
    assert first.cost == off.cost == again.cost
    assert first.path == off.path
    assert cache.stats.hits > 0


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(heuristic_mode="magic")
    with pytest.raises(ValueError):
        PlannerConfig(cache_mode="lru")
