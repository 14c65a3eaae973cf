"""Grid MAPF instantiation of the conflict-aware cache.

4-connected moves plus wait, unit costs, vertex and edge constraints. The
base heuristic is the exact earliest-arrival time in the time-expanded graph
under the agent's constraints, which makes the heuristic genuinely
context-dependent and gives exact oracles for testing.
"""
from __future__ import annotations

import heapq
import math
import time as _time
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import yaml

from .cahc import (EMPTY_FINGERPRINT, CacheStats, ConflictAwareCache, ConflictFingerprint,
                   RelevanceConfig, StateOnlyCache)
from .core import InstanceError

INF = math.inf
Cell = tuple[int, int]


class GridState(NamedTuple):
    cell: Cell
    time: int


@dataclass(frozen=True, slots=True)
class GridConstraint:
    """Vertex constraint when ``cell_from`` is None, else the edge ``cell_from -> cell`` arriving at ``time``."""

    id: int
    agent: int
    cell: Cell
    time: int
    cell_from: Cell | None = None

    @property
    def is_edge(self) -> bool:
        return self.cell_from is not None


@dataclass(frozen=True)
class GridInstance:
    width: int
    height: int
    obstacles: frozenset
    agents: tuple[tuple[Cell, Cell], ...]
    name: str = ""

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InstanceError("grid dimensions must be positive")
        for i, (s, g) in enumerate(self.agents):
            for what, c in (("start", s), ("goal", g)):
                if not self.inside(c):
                    raise InstanceError(f"agent {i} {what} {c} outside the grid")
                if c in self.obstacles:
                    raise InstanceError(f"agent {i} {what} {c} is an obstacle")

    def inside(self, c: Cell) -> bool:
        return 0 <= c[0] < self.height and 0 <= c[1] < self.width

    def free(self, c: Cell) -> bool:
        return self.inside(c) and c not in self.obstacles

    @cached_property
    def cells(self) -> list[Cell]:
        return [(r, c) for r in range(self.height) for c in range(self.width) if (r, c) not in self.obstacles]

    @cached_property
    def neighbors(self) -> dict[Cell, tuple[Cell, ...]]:
        out = {}
        for r, c in self.cells:
            out[(r, c)] = tuple(n for n in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)) if self.free(n))
        return out

    @cached_property
    def _dist(self) -> dict[Cell, dict[Cell, int]]:
        return {}

    def dist_from(self, src: Cell) -> dict[Cell, int]:
        """Static BFS distances from ``src`` (unreachable cells absent)."""
        d = self._dist.get(src)
        if d is None:
            d = {src: 0}
            q = deque([src])
            nb = self.neighbors
            while q:
                u = q.popleft()
                du = d[u] + 1
                for v in nb[u]:
                    if v not in d:
                        d[v] = du
                        q.append(v)
            self._dist[src] = d
        return d

    def dist(self, a: Cell, b: Cell) -> float:
        return self.dist_from(b).get(a, INF)


def parse_grid_instance(doc: dict, name: str = "") -> GridInstance:
    try:
        w, h = (int(v) for v in doc["map"]["dimensions"])
        obstacles = frozenset((int(r), int(c)) for r, c in (doc["map"].get("obstacles") or []))
        agents = tuple(((int(a["start"][0]), int(a["start"][1])), (int(a["goal"][0]), int(a["goal"][1])))
                       for a in doc["agents"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed grid instance: {exc}") from exc
    return GridInstance(w, h, obstacles, agents, name)


def write_grid_instance(inst: GridInstance, path) -> None:
    doc = {
        "grid": True,
        "map": {"dimensions": [inst.width, inst.height], "obstacles": [list(c) for c in sorted(inst.obstacles)]},
        "agents": [{"start": list(s), "goal": list(g)} for s, g in inst.agents],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


class _CIndex:
    """Constraint lookup sets for one agent."""

    __slots__ = ("vertex", "edge", "t_last")

    def __init__(self, constraints: Sequence[GridConstraint]):
        self.vertex = set()
        self.edge = set()
        last = -1
        for c in constraints:
            if c.cell_from is None:
                self.vertex.add((c.cell, c.time))
            else:
                self.edge.add((c.cell_from, c.cell, c.time))
            if c.time > last:
                last = c.time
        self.t_last = last

    def blocked(self, u: Cell, v: Cell, t: int) -> bool:
        """Moving (or waiting) from u to v, arriving at time t."""
        if (v, t) in self.vertex:
            return True
        return u != v and (u, v, t) in self.edge


def grid_base_h(grid: GridInstance, s: GridState, g: Cell, constraints: Sequence[GridConstraint]) -> float:
    """Earliest arrival time at ``g`` from ``s`` under the constraints, minus ``s.time``; INF if unreachable."""
    if s.cell == g:
        return 0
    ci = constraints if isinstance(constraints, _CIndex) else _CIndex(constraints)
    dg = grid.dist_from(g)
    nb = grid.neighbors
    frontier = {s.cell}
    t = s.time
    while True:
        if t >= ci.t_last:
            # no constraint affects arrivals after t_last
            best = min((dg.get(c, INF) for c in frontier), default=INF)
            return t - s.time + best
        t1 = t + 1
        nxt = set()
        for u in frontier:
            if not ci.blocked(u, u, t1):
                nxt.add(u)
            for v in nb[u]:
                if not ci.blocked(u, v, t1):
                    nxt.add(v)
        if g in nxt:
            return t1 - s.time
        if not nxt:
            return INF
        frontier = nxt
        t = t1


def greedy_upper_bound(grid: GridInstance, s: GridState, g: Cell, ci: _CIndex) -> float:
    """Cost of following static shortest-path next hops, waiting when blocked; INF if stuck."""
    dg = grid.dist_from(g)
    if s.cell not in dg:
        return INF
    nb = grid.neighbors
    cur = s.cell
    t = s.time
    while cur != g:
        t1 = t + 1
        step = None
        for v in nb[cur]:
            if dg.get(v, INF) == dg[cur] - 1:
                step = v
                break
        if step is not None and not ci.blocked(cur, step, t1):
            cur = step
        elif not ci.blocked(cur, cur, t1):
            pass
        else:
            return INF
        t = t1
        if t - s.time > dg[s.cell] + ci.t_last + 1:
            return INF
    return t - s.time


def grid_relevance(grid: GridInstance, s: GridState, g: Cell, constraints: Sequence[GridConstraint],
                   cfg: RelevanceConfig | None = None) -> ConflictFingerprint:
    """Constraints within the time window and the s-g corridor, widened so the filter stays sound.

    With static distances d and a feasible cost bound U, a path of cost <= U only
    visits (x, t) with d(s, x) + d(x, g) <= U and s.time < t <= s.time + U. The
    window is max(t_window, U) and the corridor slack max(tau_spatial, (U - d(s, g)) / 2);
    on an obstacle-free grid the corridor is the Manhattan distance to the s-g bounding box.
    """
    cfg = cfg or RelevanceConfig(20, 5.0)
    if not constraints:
        return EMPTY_FINGERPRINT
    ci = _CIndex(constraints)
    d0 = grid.dist(s.cell, g)
    U = greedy_upper_bound(grid, s, g, ci)
    if U == INF or d0 == INF:
        return ConflictFingerprint.from_ids(c.id for c in constraints)
    window = max(cfg.t_window, U)
    slack = 2.0 * max(cfg.tau_spatial, (U - d0) / 2.0)
    ds = grid.dist_from(s.cell)
    dg = grid.dist_from(g)
    picked = [c for c in constraints
              if abs(c.time - s.time) <= window
              and ds.get(c.cell, INF) + dg.get(c.cell, INF) <= d0 + slack]
    if not picked:
        return EMPTY_FINGERPRINT
    return ConflictFingerprint.from_ids(c.id for c in picked)


# ---------------------------------------------------------------- CBS

@dataclass(frozen=True)
class GridConfig:
    cache_mode: str = "off"  # off | conflict_aware | state_only
    relevance: RelevanceConfig = field(default_factory=lambda: RelevanceConfig(20, 5.0))
    cache_capacity: int = 100_000
    timeout: float = 60.0


class GridTimeout(RuntimeError):
    """Wall-clock budget exhausted."""


class GridNoSolution(RuntimeError):
    """No conflict-free solution exists."""


@dataclass
class GridSolution:
    paths: list[list[Cell]]  # index = time; agents park at the last cell
    costs: list[int]

    @property
    def cost(self) -> int:
        return sum(self.costs)


@dataclass
class GridStats:
    ct_expanded: int = 0
    low_level_calls: int = 0
    expansions: int = 0
    cache: CacheStats | None = None


class GridHeuristic:
    """Constraint-respecting base heuristic for one agent, optionally cached."""

    def __init__(self, grid: GridInstance, agent: int, constraints: Sequence[GridConstraint],
                 config: GridConfig, cache=None):
        self.grid = grid
        self.agent = agent
        self.goal = grid.agents[agent][1]
        self.constraints = list(constraints)
        self.ci = _CIndex(constraints)
        self.config = config
        self.cache = cache
        if config.cache_mode == "state_only":
            self.context = ConflictFingerprint.from_ids(c.id for c in constraints)

    def base(self, s: GridState) -> float:
        return grid_base_h(self.grid, s, self.goal, self.ci)

    def __call__(self, s: GridState) -> float:
        mode = self.config.cache_mode
        if mode == "off" or self.cache is None:
            return self.base(s)
        key = (self.agent, s.cell, s.time)
        if mode == "conflict_aware":
            fp = grid_relevance(self.grid, s, self.goal, self.constraints, self.config.relevance)
            return self.cache.get_or_compute(key, fp, lambda: self.base(s))
        return self.cache.get_or_compute(key, self.context, lambda: self.base(s))


def grid_plan_single(grid: GridInstance, agent: int, constraints: Sequence[GridConstraint],
                     config: GridConfig | None = None, cache=None, deadline: float | None = None):
    """Optimal path for one agent under its constraints; returns (cells by time, expansions) or None."""
    config = config or GridConfig()
    cons = [c for c in constraints if c.agent == agent]
    ci = _CIndex(cons)
    h = GridHeuristic(grid, agent, cons, config, cache)
    start, goal = grid.agents[agent]
    t_cap = ci.t_last + 1
    goal_blocked_after = max((t for (c, t) in ci.vertex if c == goal), default=-1)
    nb = grid.neighbors
    h0 = h(GridState(start, 0))
    if h0 == INF:
        return None, 0
    parent = {}
    best_g = {(start, 0): 0}
    openl = [(h0, 0, start, 0)]
    expansions = 0
    while openl:
        f, ng, cell, t = heapq.heappop(openl)
        g = -ng
        ck = (cell, min(t, t_cap))
        if best_g.get(ck, INF) < g:
            continue
        if cell == goal and t > goal_blocked_after:
            path = [cell]
            k = (cell, t)
            while k in parent:
                k = parent[k]
                path.append(k[0])
            path.reverse()
            return path, expansions
        expansions += 1
        if deadline is not None and (expansions & 255) == 0 and _time.perf_counter() > deadline:
            raise GridTimeout("deadline passed")
        t1 = t + 1
        tk = min(t1, t_cap)
        for v in (cell,) + nb[cell]:
            if ci.blocked(cell, v, t1):
                continue
            g2 = g + 1
            if best_g.get((v, tk), INF) <= g2:
                continue
            hv = h(GridState(v, t1))
            if hv == INF:
                continue
            best_g[(v, tk)] = g2
            parent[(v, t1)] = (cell, t)
            heapq.heappush(openl, (g2 + hv, -g2, v, t1))
    return None, expansions


def _at(path: list[Cell], t: int) -> Cell:
    return path[t] if t < len(path) else path[-1]


def grid_first_conflict(paths: Sequence[list[Cell]]):
    """Earliest conflict as ('vertex', i, j, cell, t) or ('edge', i, j, u, v, t); None if conflict-free."""
    T = max(len(p) for p in paths)
    n = len(paths)
    for t in range(T):
        for i in range(n):
            for j in range(i + 1, n):
                if _at(paths[i], t) == _at(paths[j], t):
                    return ("vertex", i, j, _at(paths[i], t), t)
                if t > 0 and _at(paths[i], t - 1) == _at(paths[j], t) and _at(paths[j], t - 1) == _at(paths[i], t) \
                        and _at(paths[i], t) != _at(paths[i], t - 1):
                    return ("edge", i, j, _at(paths[i], t - 1), _at(paths[i], t), t)
    return None


def _count_conflicts(paths) -> int:
    T = max(len(p) for p in paths)
    n = len(paths)
    k = 0
    for t in range(T):
        for i in range(n):
            for j in range(i + 1, n):
                if _at(paths[i], t) == _at(paths[j], t):
                    k += 1
                elif t > 0 and _at(paths[i], t - 1) == _at(paths[j], t) and _at(paths[j], t - 1) == _at(paths[i], t):
                    k += 1
    return k


def make_grid_cache(config: GridConfig):
    if config.cache_mode == "conflict_aware":
        return ConflictAwareCache(config.cache_capacity)
    if config.cache_mode == "state_only":
        return StateOnlyCache(config.cache_capacity)
    return None


def grid_cbs_solve(grid: GridInstance, config: GridConfig | None = None):
    """Optimal sum-of-costs CBS; returns (GridSolution, GridStats)."""
    config = config or GridConfig()
    deadline = _time.perf_counter() + config.timeout
    cache = make_grid_cache(config)
    stats = GridStats()
    n = len(grid.agents)
    next_id = 0

    def plan(a, cons):
        stats.low_level_calls += 1
        p, e = grid_plan_single(grid, a, cons, config, cache, deadline)
        stats.expansions += e
        return p

    paths = []
    for a in range(n):
        p = plan(a, ())
        if p is None:
            raise GridNoSolution(f"agent {a} cannot reach its goal")
        paths.append(p)
    root = ((), paths)
    openl = [(sum(len(p) - 1 for p in paths), _count_conflicts(paths), 0, root)]
    node_id = 1
    while openl:
        if _time.perf_counter() > deadline:
            raise GridTimeout("deadline passed")
        _, _, _, (cons, paths) = heapq.heappop(openl)
        stats.ct_expanded += 1
        conf = grid_first_conflict(paths)
        if conf is None:
            stats.cache = cache.stats if cache is not None else None
            return GridSolution([list(p) for p in paths], [len(p) - 1 for p in paths]), stats
        if conf[0] == "vertex":
            _, i, j, cell, t = conf
            new = [GridConstraint(next_id, i, cell, t), GridConstraint(next_id + 1, j, cell, t)]
        else:
            _, i, j, u, v, t = conf
            new = [GridConstraint(next_id, i, v, t, u), GridConstraint(next_id + 1, j, u, t, v)]
        next_id += 2
        for c in new:
            child = cons + (c,)
            p = plan(c.agent, child)
            if p is None:
                continue
            cpaths = list(paths)
            cpaths[c.agent] = p
            heapq.heappush(openl, (sum(len(q) - 1 for q in cpaths), _count_conflicts(cpaths), node_id,
                                   (child, cpaths)))
            node_id += 1
    raise GridNoSolution("constraint tree exhausted")
