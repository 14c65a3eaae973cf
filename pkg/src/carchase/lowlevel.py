"""Spatiotemporal hybrid-state A* for one car-like agent under disc constraints."""
from __future__ import annotations

import heapq
import math
import time as _time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

from . import kernels
from .approx import ApproxTable, HybridConfig, build_table, default_hybrid_config
from .cahc import (ConflictAwareCache, ConflictFingerprint, CarRelevance, RelevanceConfig,
                   StateOnlyCache)
from .core import (ANY_AGENT, FOREVER, TWO_PI, Constraint, Instance, Pose, Resolution,
                   TimedState, angle_diff, normalize_angle)
from .reeds_shepp import RSConfig, rs_sample, rs_shortest_path

_csearch = None
if kernels.BACKEND == "compiled":
    try:
        from . import _csearch
    except ImportError:  # kernels built without the search extension
        _csearch = None

SEARCH_BACKEND = "compiled" if _csearch is not None else "python"


class NoPathError(RuntimeError):
    """Open list exhausted."""


class BudgetExceededError(RuntimeError):
    """Node-expansion limit reached."""


class SearchTimeout(RuntimeError):
    """Wall-clock deadline passed."""


HEURISTIC_MODES = ("exact", "hybrid")
CACHE_MODES = ("off", "conflict_aware", "state_only")


@dataclass(frozen=True)
class PlannerConfig:
    resolution: Resolution = field(default_factory=Resolution)
    heuristic_mode: str = "exact"
    cache_mode: str = "off"
    relevance: RelevanceConfig = field(default_factory=RelevanceConfig)
    cache_capacity: int = 100_000
    wait_cost_factor: float = 0.5
    analytic_radius: float | None = None  # None: 2 x turning radius
    max_expansions: int = 300_000
    # approximation table; bounds always cover the map diagonal
    table_spacing: float = 1.5
    table_headings: int = 36
    table_samples: int = 100_000
    table_cache_dir: str | None = None

    def __post_init__(self):
        if self.heuristic_mode not in HEURISTIC_MODES:
            raise ValueError(f"heuristic_mode must be one of {HEURISTIC_MODES}")
        if self.cache_mode not in CACHE_MODES:
            raise ValueError(f"cache_mode must be one of {CACHE_MODES}")


@dataclass(frozen=True)
class MotionPrimitive:
    steering: int   # +1 left-max, 0 straight, -1 right-max
    direction: int  # +1 forward, -1 reverse
    arc_length: float

    def apply(self, x: float, y: float, th: float, turning_radius: float) -> tuple[float, float, float]:
        u = self.direction * self.arc_length
        if self.steering == 0:
            return x + u * math.cos(th), y + u * math.sin(th), th
        k = self.steering / turning_radius
        th2 = th + k * u
        return (x + (math.sin(th2) - math.sin(th)) / k,
                y - (math.cos(th2) - math.cos(th)) / k,
                normalize_angle(th2))

    def cost(self, reverse_penalty: float) -> float:
        return self.arc_length * (reverse_penalty if self.direction < 0 else 1.0)


def primitives(step_length: float) -> list[MotionPrimitive]:
    return [MotionPrimitive(s, d, step_length) for d in (1, -1) for s in (1, 0, -1)]


@dataclass
class SearchNode:
    state: TimedState
    g: float
    h: float
    parent: "SearchNode | None" = None

    @property
    def f(self) -> float:
        return self.g + self.h


@dataclass
class LowLevelResult:
    path: list[TimedState]
    cost: float
    expansions: int
    h_exact: int = 0
    h_approx: int = 0


class World:
    """Static obstacles bucketed on a coarse grid for clearance queries."""

    def __init__(self, inst: Instance, bucket: float = 2.0):
        self.inst = inst
        self.bucket = bucket
        R = inst.kinematics.footprint_radius
        self.xmin = R
        self.ymin = R
        self.xmax = inst.width - R
        self.ymax = inst.height - R
        grid: dict[tuple[int, int], list] = {}
        for (ox, oy), orad in inst.obstacles:
            lim = R + orad
            for bx in range(int(math.floor((ox - lim) / bucket)), int(math.floor((ox + lim) / bucket)) + 1):
                for by in range(int(math.floor((oy - lim) / bucket)), int(math.floor((oy + lim) / bucket)) + 1):
                    grid.setdefault((bx, by), []).append((ox, oy, lim * lim))
        self.grid = grid

    def free(self, x: float, y: float) -> bool:
        if not (self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax):
            return False
        cell = self.grid.get((int(x // self.bucket), int(y // self.bucket)))
        if cell:
            for ox, oy, l2 in cell:
                dx = x - ox
                dy = y - oy
                if dx * dx + dy * dy < l2:
                    return False
        return True


@lru_cache(maxsize=16)
def world_for(inst: Instance) -> World:
    return World(inst)


class ConstraintIndex:
    """Per-timestep lookup of the discs an agent must avoid."""

    def __init__(self, constraints: Sequence[Constraint]):
        self.by_time: dict[int, list[tuple[float, float, float]]] = {}
        self.forever: list[tuple[int, float, float, float]] = []
        self.all: list[tuple[int, int, float, float, float]] = []
        last = -1
        for c in constraints:
            cx, cy = c.center
            r2 = c.radius * c.radius
            self.all.append((c.t_begin, c.t_end, cx, cy, r2))
            if c.t_end >= FOREVER:
                self.forever.append((c.t_begin, cx, cy, r2))
                last = max(last, c.t_begin)
            else:
                for t in range(c.t_begin, c.t_end + 1):
                    self.by_time.setdefault(t, []).append((cx, cy, r2))
                last = max(last, c.t_end)
        self.t_last = last

    def violates(self, x: float, y: float, t: int) -> bool:
        discs = self.by_time.get(t)
        if discs:
            for cx, cy, r2 in discs:
                dx = x - cx
                dy = y - cy
                if dx * dx + dy * dy < r2:
                    return True
        for tb, cx, cy, r2 in self.forever:
            if t >= tb:
                dx = x - cx
                dy = y - cy
                if dx * dx + dy * dy < r2:
                    return True
        return False

    def parkable(self, x: float, y: float, t: int) -> bool:
        """True when no constraint covers (x, y) at any time after ``t``."""
        for tb, te, cx, cy, r2 in self.all:
            if te > t:
                dx = x - cx
                dy = y - cy
                if dx * dx + dy * dy < r2:
                    return False
        return True


@lru_cache(maxsize=8)
def _table_cached(rs: RSConfig, half: float, n: int, nt: int, samples: int, cache_dir) -> ApproxTable:
    return build_table(rs, (-half, half, -half, half), (n, n, nt), samples=samples, cache_dir=cache_dir)


def table_for(inst: Instance, config: PlannerConfig) -> ApproxTable:
    """Table covering every relative configuration on this map; memoized per configuration."""
    k = inst.kinematics
    half = float(math.ceil(inst.diagonal))
    n = int(math.ceil(2.0 * half / config.table_spacing)) + 1
    return _table_cached(RSConfig(k.turning_radius, k.reverse_penalty), half, n, config.table_headings,
                         config.table_samples, config.table_cache_dir)


def _agent_constraints(constraints: Sequence[Constraint], agent: int) -> list[Constraint]:
    return [c for c in constraints if c.agent == agent or c.agent == ANY_AGENT]


class _Expander:
    """Successor generation shared by ``expand`` and the search loop."""

    def __init__(self, inst: Instance, cindex: ConstraintIndex, config: PlannerConfig):
        kin = inst.kinematics
        self.world = world_for(inst)
        self.cindex = cindex
        self.r = kin.turning_radius
        self.prims = primitives(kin.step_length)
        self.costs = [p.cost(kin.reverse_penalty) for p in self.prims]
        self.wait_cost = kin.step_length * config.wait_cost_factor
        # local displacement of each primitive from a pose at heading 0
        self.local = []
        for p in self.prims:
            x, y, th = p.apply(0.0, 0.0, 0.0, self.r)
            dth = th if th <= math.pi else th - TWO_PI
            self.local.append((x, y, dth))

    def successors(self, x: float, y: float, th: float, t: int) -> list[tuple[float, float, float, float, int]]:
        """(x, y, theta, cost, primitive index or -1 for wait) for every legal successor at t+1."""
        out = []
        t1 = t + 1
        c = math.cos(th)
        s = math.sin(th)
        free = self.world.free
        viol = self.cindex.violates
        for i, (lx, ly, dth) in enumerate(self.local):
            nx = x + c * lx - s * ly
            ny = y + s * lx + c * ly
            if not free(nx, ny) or viol(nx, ny, t1):
                continue
            nth = th + dth
            if nth < 0.0:
                nth += TWO_PI
            elif nth >= TWO_PI:
                nth -= TWO_PI
            out.append((nx, ny, nth, self.costs[i], i))
        if not viol(x, y, t1):
            out.append((x, y, th, self.wait_cost, -1))
        return out


def expand(node: SearchNode, prims: Sequence[MotionPrimitive] | None, constraints: Sequence[Constraint],
           instance: Instance, config: PlannerConfig | None = None,
           heuristic: Callable[[TimedState], float] | None = None) -> list[SearchNode]:
    """Legal successors of ``node`` (primitives plus wait), each at time + 1."""
    config = config or PlannerConfig()
    ex = _Expander(instance, ConstraintIndex(constraints), config)
    if prims is not None:
        kin = instance.kinematics
        ex.prims = list(prims)
        ex.costs = [p.cost(kin.reverse_penalty) for p in ex.prims]
        ex.local = []
        for p in ex.prims:
            x, y, th = p.apply(0.0, 0.0, 0.0, ex.r)
            ex.local.append((x, y, th if th <= math.pi else th - TWO_PI))
    p = node.state.pose
    out = []
    for nx, ny, nth, cost, _ in ex.successors(p.x, p.y, p.theta, node.state.time):
        st = TimedState(Pose(nx, ny, nth), node.state.time + 1)
        out.append(SearchNode(st, node.g + cost, heuristic(st) if heuristic else 0.0, node))
    return out


class Heuristic:
    """Heuristic for one agent: exact or hybrid base value, optionally behind a cache.

    Values are evaluated at the representative pose of the state key (cell
    centre, heading-bin centre) so the value is a function of the key alone.
    """

    def __init__(self, inst: Instance, agent: int, constraints: Sequence[Constraint],
                 config: PlannerConfig, cache=None, table: ApproxTable | None = None):
        kin = inst.kinematics
        task = inst.agents[agent]
        self.agent = agent
        self.gx, self.gy, self.gth = task.goal.x, task.goal.y, task.goal.theta
        self.r = kin.turning_radius
        self.pen = kin.reverse_penalty
        self.cs = config.resolution.cell_size
        self.bw = config.resolution.bin_width
        self.mode = config.heuristic_mode
        self.cache_mode = config.cache_mode
        self.cache = cache
        self.n_exact = 0
        self.n_approx = 0
        if self.mode == "hybrid":
            rs = RSConfig(kin.turning_radius, kin.reverse_penalty)
            self.hcfg: HybridConfig = default_hybrid_config(inst.diagonal, task.start, task.goal, rs)
            self.table = table if table is not None else table_for(inst, config)
            self.cg = math.cos(self.gth)
            self.sg = math.sin(self.gth)
        if self.cache_mode == "conflict_aware":
            self.rel = CarRelevance(constraints, task.goal, config.relevance)
        elif self.cache_mode == "state_only":
            self.context = ConflictFingerprint.from_ids(c.id for c in constraints)

    def base(self, x: float, y: float, th: float, g: float) -> float:
        if self.mode == "hybrid":
            dx = x - self.gx
            dy = y - self.gy
            if math.sqrt(dx * dx + dy * dy) > self.hcfg.threshold(g):
                rx = self.cg * dx + self.sg * dy
                ry = -self.sg * dx + self.cg * dy
                rt = th - self.gth
                if rt < 0.0:
                    rt += TWO_PI
                v = self.table.lookup(rx, ry, rt)
                if v is not None:
                    self.n_approx += 1
                    return v
        self.n_exact += 1
        return kernels.rs_distance(x, y, th, self.gx, self.gy, self.gth, self.r, self.pen)

    def __call__(self, key: tuple[int, int, int, int], g: float) -> float:
        cx, cy, hb, t = key
        x = (cx + 0.5) * self.cs
        y = (cy + 0.5) * self.cs
        th = (hb + 0.5) * self.bw
        if self.cache_mode == "off":
            return self.base(x, y, th, g)
        ck = (self.agent, cx, cy, hb, t)
        if self.cache_mode == "conflict_aware":
            fp = self.rel.fingerprint(x, y, t)
            return self.cache.get_or_compute(ck, fp, lambda: self.base(x, y, th, g))
        return self.cache.get_or_compute(ck, self.context, lambda: self.base(x, y, th, g))


def make_cache(config: PlannerConfig):
    """Cache for one solver run: the compiled one when the compiled search is available."""
    if config.cache_mode == "off":
        return None
    if _csearch is not None:
        return _csearch.CarCache(config.cache_mode, config.cache_capacity)
    if config.cache_mode == "conflict_aware":
        return ConflictAwareCache(config.cache_capacity)
    return StateOnlyCache(config.cache_capacity)


def plan_single(instance: Instance, agent: int, constraints: Sequence[Constraint],
                config: PlannerConfig | None = None, *, cache=None, table: ApproxTable | None = None,
                deadline: float | None = None) -> LowLevelResult:
    """Plan one agent from start to goal avoiding obstacles and its constraints.

    Constraints addressed to other agents are ignored. ``cache`` is shared by
    every call of one solver run; a fresh one is made when caching is on and
    none is given. ``deadline`` is a ``time.perf_counter`` value.
    """
    config = config or PlannerConfig()
    if cache is None:
        cache = make_cache(config)
    cons = _agent_constraints(constraints, agent)
    if _csearch is not None and (cache is None or isinstance(cache, _csearch.CarCache)):
        if config.cache_mode == "off":
            cache = None
        return _plan_compiled(instance, agent, cons, config, cache, table, deadline)
    cindex = ConstraintIndex(cons)
    ex = _Expander(instance, cindex, config)
    heur = Heuristic(instance, agent, cons, config, cache, table)
    kin = instance.kinematics
    task = instance.agents[agent]
    rs_cfg = RSConfig(kin.turning_radius, kin.reverse_penalty)
    cs = config.resolution.cell_size
    nb = config.resolution.heading_bins
    bw = config.resolution.bin_width
    analytic = config.analytic_radius if config.analytic_radius is not None else 2.0 * kin.turning_radius
    gx, gy, gth = task.goal.x, task.goal.y, task.goal.theta
    step = kin.step_length
    r = kin.turning_radius
    pen = kin.reverse_penalty
    t_cap = cindex.t_last + 1
    free = ex.world.free
    viol = cindex.violates
    parkable = cindex.parkable

    inv_cs = 1.0 / cs
    floor = math.floor
    world = ex.world
    wgrid = world.grid
    wb = world.bucket
    xmin, xmax, ymin, ymax = world.xmin, world.xmax, world.ymin, world.ymax
    by_time = cindex.by_time
    has_forever = bool(cindex.forever)
    local = [(lx, ly, dth, cost) for (lx, ly, dth), cost in zip(ex.local, ex.costs)]
    local.append((0.0, 0.0, None, ex.wait_cost))

    def at_goal(x, y, th):
        dx = x - gx
        dy = y - gy
        return dx * dx + dy * dy <= cs * cs and angle_diff(th, gth) <= bw

    # nodes: (x, y, theta, t, parent); analytic tails keyed by terminal node index
    nodes: list[tuple] = []
    tail: dict[int, list[tuple[float, float, float]]] = {}
    terminal: set[int] = set()
    best_g: dict[tuple, float] = {}
    openl: list = []
    push = heapq.heappush
    pop = heapq.heappop

    sx, sy, sth = task.start.x, task.start.y, task.start.theta
    if not free(sx, sy):
        raise NoPathError(f"agent {agent}: start not free")
    if viol(sx, sy, 0):
        raise NoPathError(f"agent {agent}: start violates a constraint")
    k0 = (int(floor(sx * inv_cs)), int(floor(sy * inv_cs)), int(sth // bw) % nb, 0)
    nodes.append((sx, sy, sth, 0, -1))
    best_g[(k0[0], k0[1], k0[2], min(0, t_cap))] = 0.0
    if at_goal(sx, sy, sth) and parkable(sx, sy, 0):
        terminal.add(0)
        push(openl, (0.0, -0.0, k0, 0))
    else:
        push(openl, (heur(k0, 0.0), -0.0, k0, 0))
    expansions = 0
    budget = config.max_expansions
    inf = math.inf

    while openl:
        _, ng, key, nid = pop(openl)
        g = -ng
        if nid in terminal:
            path = _reconstruct(nid, nodes, tail)
            return LowLevelResult(path, g, expansions, heur.n_exact, heur.n_approx)
        x, y, th, t, _ = nodes[nid]
        ckey = (key[0], key[1], key[2], t if t < t_cap else t_cap)
        if g > best_g.get(ckey, inf):
            continue
        expansions += 1
        if expansions > budget:
            raise BudgetExceededError(f"agent {agent}: {budget} expansions")
        if deadline is not None and (expansions & 127) == 0 and _time.perf_counter() > deadline:
            raise SearchTimeout(f"agent {agent}: deadline passed")
        # analytic expansion to the exact goal pose
        dxg = x - gx
        dyg = y - gy
        if dxg * dxg + dyg * dyg < analytic * analytic:
            d = kernels.rs_distance(x, y, th, gx, gy, gth, r, pen)
            if d < analytic:
                poses = _try_connect(Pose(x, y, th), task.goal, rs_cfg, step, t, free, viol, parkable)
                if poses is not None:
                    tt = t + len(poses)
                    nodes.append((gx, gy, gth, tt, nid))
                    tid = len(nodes) - 1
                    terminal.add(tid)
                    tail[tid] = poses
                    kg = (int(floor(gx * inv_cs)), int(floor(gy * inv_cs)), int(gth // bw) % nb, tt)
                    push(openl, (g + d, -(g + d), kg, tid))
        t1 = t + 1
        tk = t1 if t1 < t_cap else t_cap
        discs = by_time.get(t1)
        c = math.cos(th)
        s = math.sin(th)
        for lx, ly, dth, cost in local:
            if dth is None:  # wait
                nx2, ny2, nth2 = x, y, th
            else:
                nx2 = x + c * lx - s * ly
                ny2 = y + s * lx + c * ly
                if not (xmin <= nx2 <= xmax and ymin <= ny2 <= ymax):
                    continue
                cell = wgrid.get((int(nx2 // wb), int(ny2 // wb)))
                if cell:
                    hit = False
                    for ox, oy, l2 in cell:
                        ddx = nx2 - ox
                        ddy = ny2 - oy
                        if ddx * ddx + ddy * ddy < l2:
                            hit = True
                            break
                    if hit:
                        continue
                nth2 = th + dth
                if nth2 < 0.0:
                    nth2 += TWO_PI
                elif nth2 >= TWO_PI:
                    nth2 -= TWO_PI
            if discs:
                hit = False
                for cx, cy, r2 in discs:
                    ddx = nx2 - cx
                    ddy = ny2 - cy
                    if ddx * ddx + ddy * ddy < r2:
                        hit = True
                        break
                if hit:
                    continue
            if has_forever and viol(nx2, ny2, t1):
                continue
            g2 = g + cost
            k0_ = int(floor(nx2 * inv_cs))
            k1_ = int(floor(ny2 * inv_cs))
            k2_ = int(nth2 // bw) % nb
            ck2 = (k0_, k1_, k2_, tk)
            if best_g.get(ck2, inf) <= g2:
                continue
            best_g[ck2] = g2
            nodes.append((nx2, ny2, nth2, t1, nid))
            cid = len(nodes) - 1
            k2 = (k0_, k1_, k2_, t1)
            if at_goal(nx2, ny2, nth2) and parkable(nx2, ny2, t1):
                terminal.add(cid)
                push(openl, (g2, -g2, k2, cid))
            else:
                push(openl, (g2 + heur(k2, g2), -g2, k2, cid))
    raise NoPathError(f"agent {agent}: open list exhausted after {expansions} expansions")


def _world_arrays(world: World):
    """Dense bucket layout of ``world.grid`` for the compiled search (memoized on the world)."""
    packed = getattr(world, "_packed", None)
    if packed is None:
        import numpy as np

        wb = world.bucket
        nbx = int(world.xmax // wb) + 1
        nby = int(world.ymax // wb) + 1
        starts = [0]
        discs: list[float] = []
        for bx in range(nbx):
            for by in range(nby):
                for ox, oy, l2 in world.grid.get((bx, by), ()):
                    discs.extend((ox, oy, l2))
                starts.append(len(discs) // 3)
        packed = (world.xmin, world.xmax, world.ymin, world.ymax, wb, nbx, nby,
                  np.asarray(starts, dtype=np.int64), np.asarray(discs, dtype=np.float64))
        world._packed = packed
    return packed


def _plan_compiled(instance: Instance, agent: int, cons: list[Constraint], config: PlannerConfig,
                   cache, table: ApproxTable | None, deadline: float | None) -> LowLevelResult:
    import numpy as np

    kin = instance.kinematics
    task = instance.agents[agent]
    res = config.resolution
    world = world_for(instance)
    ex = _Expander(instance, None, config)
    local = tuple((lx, ly, dth, cost) for (lx, ly, dth), cost in zip(ex.local, ex.costs))
    rows = sorted(cons, key=lambda c: c.id)
    cons_arrays = (np.asarray([c.id for c in rows], dtype=np.int64),
                   np.asarray([c.t_begin for c in rows], dtype=np.int64),
                   np.asarray([c.t_end for c in rows], dtype=np.int64),
                   np.asarray([c.center[0] for c in rows], dtype=np.float64),
                   np.asarray([c.center[1] for c in rows], dtype=np.float64),
                   np.asarray([c.radius for c in rows], dtype=np.float64), FOREVER)
    if config.heuristic_mode == "hybrid":
        rs = RSConfig(kin.turning_radius, kin.reverse_penalty)
        hc = default_hybrid_config(instance.diagonal, task.start, task.goal, rs)
        tab = table if table is not None else table_for(instance, config)
        x0, x1, y0, y1 = tab.bounds
        nx, ny, nt = tab.resolution
        heuristic = ("hybrid", hc.tau_init, hc.tau_final, hc.estimated_max_g, tab._flat,
                     x0, x1, y0, y1, tab.hx, tab.hy, nx, ny, nt, tab.min_radius)
    else:
        heuristic = ("exact",)
    analytic = config.analytic_radius if config.analytic_radius is not None else 2.0 * kin.turning_radius
    rs_cfg = RSConfig(kin.turning_radius, kin.reverse_penalty)
    checks = []

    def connect(x, y, th, t):
        # rare; the Python constraint index is built on first use
        if not checks:
            ci = ConstraintIndex(cons)
            checks.extend((ci.violates, ci.parkable))
        return _try_connect(Pose(x, y, th), task.goal, rs_cfg, kin.step_length, t, world.free, *checks)

    status, detail = _csearch.plan(
        (agent, task.start.x, task.start.y, task.start.theta, task.goal.x, task.goal.y, task.goal.theta),
        (kin.turning_radius, kin.reverse_penalty),
        (res.cell_size, res.heading_bins, res.bin_width, analytic),
        (local, ex.wait_cost), _world_arrays(world), cons_arrays, heuristic, cache,
        (config.relevance.t_window, config.relevance.tau_spatial), connect,
        config.max_expansions, math.inf if deadline is None else deadline)
    if status == "found":
        chain, cost, expansions, n_exact, n_approx = detail
        path: list[TimedState] = []
        for x, y, th, t, poses in chain:
            if poses is None:
                path.append(TimedState(Pose(x, y, th), t))
            else:
                t0 = path[-1].time
                for i, (px, py, pth) in enumerate(poses, start=1):
                    path.append(TimedState(Pose(px, py, pth), t0 + i))
        return LowLevelResult(path, cost, expansions, n_exact, n_approx)
    if status == "start_blocked":
        raise NoPathError(f"agent {agent}: start not free")
    if status == "start_violates":
        raise NoPathError(f"agent {agent}: start violates a constraint")
    if status == "budget":
        raise BudgetExceededError(f"agent {agent}: {config.max_expansions} expansions")
    if status == "timeout":
        raise SearchTimeout(f"agent {agent}: deadline passed")
    raise NoPathError(f"agent {agent}: open list exhausted after {detail} expansions")


def _try_connect(a: Pose, goal: Pose, rs_cfg: RSConfig, step: float, t: int, free, viol, parkable):
    path = rs_shortest_path(a, goal, rs_cfg)
    poses = rs_sample(a, path, step, rs_cfg.turning_radius)
    if not poses:
        return None
    poses[-1] = (goal.x, goal.y, goal.theta)
    for i, (x, y, _) in enumerate(poses, start=1):
        if not free(x, y) or viol(x, y, t + i):
            return None
    if not parkable(goal.x, goal.y, t + len(poses)):
        return None
    return poses


def _reconstruct(nid, nodes, tail) -> list[TimedState]:
    chain = []
    n = nid
    while n != -1:
        chain.append(n)
        n = nodes[n][4]
    chain.reverse()
    out = []
    for n in chain:
        if n in tail:
            t0 = out[-1].time
            for i, (x, y, th) in enumerate(tail[n], start=1):
                out.append(TimedState(Pose(x, y, th), t0 + i))
        else:
            x, y, th, t, _ = nodes[n]
            out.append(TimedState(Pose(x, y, th), t))
    return out
