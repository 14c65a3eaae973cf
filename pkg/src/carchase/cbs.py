"""Conflict-based search over car-like agents, with sequential agent batches."""
from __future__ import annotations

import gc
import heapq
import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cahc import CacheStats
from .core import ANY_AGENT, FOREVER, Constraint, Instance, Solution, TimedState
from .lowlevel import (BudgetExceededError, NoPathError, PlannerConfig, SearchTimeout, make_cache,
                       plan_single, table_for)

log = logging.getLogger(__name__)


class SolveTimeout(RuntimeError):
    """Wall-clock budget exhausted; ``.stats`` and ``.cache`` hold the partial run."""


class NoSolutionError(RuntimeError):
    """No conflict-free solution found; ``.stats`` and ``.cache`` hold the run's counters."""


@dataclass(frozen=True)
class SolverConfig:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    timeout: float = 120.0
    batch_size: int = 20
    padding: int = 1          # constraint interval is [t - padding, t + padding]
    progress_every: int = 100  # CT expansions between progress log lines


@dataclass(frozen=True)
class Conflict:
    agents: tuple[int, int]
    time: int
    location: tuple[float, float]


@dataclass
class HighLevelNode:
    id: int
    constraints: list[tuple[Constraint, ...]]
    paths: list[list[TimedState]]
    costs: list[float]
    conflicts: int = 0

    @property
    def cost(self) -> float:
        return math.fsum(self.costs)


@dataclass
class SolveStats:
    ct_expanded: int = 0
    ct_generated: int = 0
    low_level_calls: int = 0
    expansions: int = 0
    h_exact: int = 0
    h_approx: int = 0
    constraints: int = 0
    cache: CacheStats | None = None


@dataclass
class SolveResult:
    solution: Solution
    stats: SolveStats
    cache: object = None


def _positions(paths: Sequence[Sequence[TimedState]]) -> np.ndarray:
    """(T, n, 2) array of positions with agents parked after their last state."""
    T = max(len(p) for p in paths)
    out = np.empty((T, len(paths), 2))
    for a, p in enumerate(paths):
        xy = np.array([(s.pose.x, s.pose.y) for s in p])
        out[: len(p), a] = xy
        out[len(p):, a] = xy[-1]
    return out


def _overlaps(paths, min_separation: float) -> np.ndarray:
    P = _positions(paths)
    d = P[:, :, None, :] - P[:, None, :, :]
    close = (d[..., 0] ** 2 + d[..., 1] ** 2) < min_separation * min_separation
    n = len(paths)
    close &= np.triu(np.ones((n, n), dtype=bool), 1)[None]
    return close


def detect_first_conflict(paths: Sequence[Sequence[TimedState]], min_separation: float | None = None,
                          agent_ids: Sequence[int] | None = None) -> Conflict | None:
    """Earliest overlapping pair (ties: lowest pair); ``min_separation`` defaults to two footprint radii."""
    if min_separation is None:
        from .core import Kinematics

        min_separation = 2.0 * Kinematics().footprint_radius
    if len(paths) < 2:
        return None
    close = _overlaps(paths, min_separation)
    hits = np.argwhere(close)
    if hits.size == 0:
        return None
    t, i, j = (int(v) for v in hits[0])  # argwhere is row-major: time, then i, then j
    pi = paths[i][min(t, len(paths[i]) - 1)].pose
    pj = paths[j][min(t, len(paths[j]) - 1)].pose
    ids = agent_ids or range(len(paths))
    return Conflict((ids[i], ids[j]), t, (0.5 * (pi.x + pj.x), 0.5 * (pi.y + pj.y)))


def count_conflicts(paths, min_separation: float) -> int:
    if len(paths) < 2:
        return 0
    return int(_overlaps(paths, min_separation).sum())


class _Run:
    """State of one solve() call: id counter, cache, deadline and counters."""

    def __init__(self, inst: Instance, config: SolverConfig, deadline: float):
        self.inst = inst
        self.config = config
        self.deadline = deadline
        self.next_id = 0
        self.cache = make_cache(config.planner)
        self.table = table_for(inst, config.planner) if config.planner.heuristic_mode == "hybrid" else None
        self.stats = SolveStats()
        self.sep = 2.0 * inst.kinematics.footprint_radius

    def new_constraint(self, agent, center, t_begin, t_end) -> Constraint:
        c = Constraint(self.next_id, agent, (float(center[0]), float(center[1])), self.sep, t_begin, t_end)
        self.next_id += 1
        self.stats.constraints += 1
        return c

    def plan(self, agent: int, constraints):
        if _time.perf_counter() > self.deadline:
            raise SolveTimeout("deadline passed")
        self.stats.low_level_calls += 1
        try:
            res = plan_single(self.inst, agent, constraints, self.config.planner, cache=self.cache,
                              table=self.table, deadline=self.deadline)
        except SearchTimeout as exc:
            raise SolveTimeout(str(exc)) from exc
        self.stats.expansions += res.expansions
        self.stats.h_exact += res.h_exact
        self.stats.h_approx += res.h_approx
        return res


def branch(run: _Run, node: HighLevelNode, conflict: Conflict, agents: Sequence[int],
           node_id: int) -> list[HighLevelNode]:
    """Children constraining each conflicting agent in turn; infeasible children are dropped."""
    pad = run.config.padding
    t = conflict.time
    local = {a: k for k, a in enumerate(agents)}
    children = []
    for a, other in (conflict.agents, conflict.agents[::-1]):
        la, lo = local[a], local[other]
        op = node.paths[lo][min(t, len(node.paths[lo]) - 1)].pose
        c = run.new_constraint(a, (op.x, op.y), max(0, t - pad), t + pad)
        cons = list(node.constraints)
        cons[la] = cons[la] + (c,)
        try:
            res = run.plan(a, cons[la])
        except (NoPathError, BudgetExceededError):
            continue
        paths = list(node.paths)
        costs = list(node.costs)
        paths[la] = res.path
        costs[la] = res.cost
        child = HighLevelNode(node_id + len(children), cons, paths, costs)
        child.conflicts = count_conflicts(paths, run.sep)
        children.append(child)
    return children


def _solve_batch(run: _Run, agents: list[int], inherited: tuple[Constraint, ...]) -> HighLevelNode:
    root_cons = [inherited for _ in agents]
    paths, costs = [], []
    for a in agents:
        try:
            res = run.plan(a, inherited)
        except (NoPathError, BudgetExceededError) as exc:
            raise NoSolutionError(f"agent {a}: {exc}") from exc
        paths.append(res.path)
        costs.append(res.cost)
    root = HighLevelNode(0, root_cons, paths, costs)
    root.conflicts = count_conflicts(paths, run.sep)
    next_node = 1
    openl = [(root.cost, root.conflicts, root.id, root)]
    run.stats.ct_generated += 1
    every = max(1, run.config.progress_every)
    while openl:
        if _time.perf_counter() > run.deadline:
            raise SolveTimeout("deadline passed")
        _, _, _, node = heapq.heappop(openl)
        run.stats.ct_expanded += 1
        if run.stats.ct_expanded % every == 0:
            hr = run.cache.stats.hit_rate if run.cache is not None else 0.0
            log.info("ct_expanded=%d open=%d best_cost=%.3f hit_rate=%.3f",
                     run.stats.ct_expanded, len(openl), node.cost, hr)
        conflict = detect_first_conflict(node.paths, run.sep, agents)
        if conflict is None:
            return node
        for child in branch(run, node, conflict, agents, next_node):
            heapq.heappush(openl, (child.cost, child.conflicts, child.id, child))
            run.stats.ct_generated += 1
        next_node += 2
    raise NoSolutionError("constraint tree exhausted")


def solve(instance: Instance, config: SolverConfig | None = None) -> SolveResult:
    """Conflict-free paths for every agent; raises SolveTimeout or NoSolutionError."""
    # The cyclic collector rescans the large cache and search dicts over and over.
    # Nothing here builds reference cycles, so it is paused for every config alike.
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        return _solve(instance, config or SolverConfig())
    finally:
        if was_enabled:
            gc.enable()


def _solve(instance: Instance, config: SolverConfig) -> SolveResult:
    run = _Run(instance, config, math.inf)  # table build happens here, outside the clock
    run.deadline = _time.perf_counter() + config.timeout
    n = len(instance.agents)
    paths: list = [None] * n
    costs: list = [0.0] * n
    inherited: tuple[Constraint, ...] = ()
    for b0 in range(0, n, config.batch_size):
        agents = list(range(b0, min(n, b0 + config.batch_size)))
        try:
            node = _solve_batch(run, agents, inherited)
        except (NoSolutionError, SolveTimeout) as exc:
            # counters so far travel with the failure; they are partial for a timeout
            run.stats.cache = run.cache.stats if run.cache is not None else None
            exc.stats = run.stats
            exc.cache = run.cache
            raise
        extra = []
        for k, a in enumerate(agents):
            paths[a] = node.paths[k]
            costs[a] = node.costs[k]
            if b0 + config.batch_size < n:
                extra.extend(obstacle_constraints(run, node.paths[k]))
        inherited = inherited + tuple(extra)
    run.stats.cache = run.cache.stats if run.cache is not None else None
    return SolveResult(Solution(paths, costs), run.stats, run.cache)


def obstacle_constraints(run: _Run, path: Sequence[TimedState]) -> list[Constraint]:
    """Turn a finished agent's path into constraints on every later agent."""
    out = [run.new_constraint(ANY_AGENT, (s.pose.x, s.pose.y), s.time, s.time) for s in path[:-1]]
    last = path[-1]
    out.append(run.new_constraint(ANY_AGENT, (last.pose.x, last.pose.y), last.time, FOREVER))
    return out
