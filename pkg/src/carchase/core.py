"""Domain types shared by the car-like solver, plus instance and solution I/O."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import NamedTuple, Sequence

import yaml

TWO_PI = 2.0 * math.pi
# t_end for constraints that never expire (parked agents of earlier batches)
FOREVER = 2**31 - 1
# Constraint.agent value meaning "applies to every agent it is handed to"
ANY_AGENT = -1


class InstanceError(ValueError):
    """Malformed or invalid instance file."""


def normalize_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:
        t = 0.0
    return t


def angle_diff(a: float, b: float) -> float:
    """Absolute wrapped difference of two headings, in [0, pi]."""
    d = abs(normalize_angle(a) - normalize_angle(b))
    return min(d, TWO_PI - d)


@dataclass(frozen=True, slots=True)
class Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite pose {self.x}, {self.y}")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)


@dataclass(frozen=True, slots=True)
class TimedState:
    pose: Pose
    time: int

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("time must be >= 0")


class StateKey(NamedTuple):
    cell_x: int
    cell_y: int
    heading_bin: int
    time: int


@dataclass(frozen=True)
class Resolution:
    cell_size: float = 1.0
    heading_bins: int = 72

    def __post_init__(self):
        if self.cell_size <= 0 or self.heading_bins < 4:
            raise ValueError("need cell_size > 0 and heading_bins >= 4")

    @property
    def bin_width(self) -> float:
        return TWO_PI / self.heading_bins


def discretize(state: TimedState, resolution: Resolution) -> StateKey:
    p = state.pose
    return discretize_xyt(p.x, p.y, p.theta, state.time, resolution.cell_size, resolution.heading_bins)


def discretize_xyt(x: float, y: float, theta: float, t: int, cell_size: float, bins: int) -> StateKey:
    hb = int(math.floor(normalize_angle(theta) / (TWO_PI / bins))) % bins
    return StateKey(int(math.floor(x / cell_size)), int(math.floor(y / cell_size)), hb, t)


def key_pose(key: StateKey, resolution: Resolution) -> Pose:
    """Representative pose of a key: cell center, heading-bin center."""
    cs = resolution.cell_size
    bw = resolution.bin_width
    return Pose((key.cell_x + 0.5) * cs, (key.cell_y + 0.5) * cs, (key.heading_bin + 0.5) * bw)


@dataclass(frozen=True, slots=True)
class Constraint:
    """Disc-shaped exclusion for one agent over an inclusive time interval."""

    id: int
    agent: int
    center: tuple[float, float]
    radius: float
    t_begin: int
    t_end: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("constraint radius must be > 0")
        if self.t_end < self.t_begin:
            raise ValueError("constraint t_end < t_begin")

    def active(self, t: int) -> bool:
        return self.t_begin <= t <= self.t_end

    def covers(self, x: float, y: float, t: int) -> bool:
        if not (self.t_begin <= t <= self.t_end):
            return False
        dx = x - self.center[0]
        dy = y - self.center[1]
        return dx * dx + dy * dy < self.radius * self.radius


@dataclass(frozen=True)
class Kinematics:
    turning_radius: float = 2.0
    step_length: float = 2.0 * math.pi / 6.0  # 30 degrees of heading per turning step
    reverse_penalty: float = 1.0
    # collision disc: half the diagonal of a 2.0 m x 1.0 m footprint
    footprint_radius: float = 0.5 * math.hypot(2.0, 1.0)

    def __post_init__(self):
        if self.turning_radius <= 0 or self.step_length <= 0:
            raise ValueError("turning_radius and step_length must be > 0")
        if self.reverse_penalty < 1.0:
            raise ValueError("reverse_penalty must be >= 1")


@dataclass(frozen=True)
class AgentTask:
    start: Pose
    goal: Pose


@dataclass(frozen=True)
class Instance:
    width: float
    height: float
    obstacles: tuple[tuple[tuple[float, float], float], ...]
    agents: tuple[AgentTask, ...]
    kinematics: Kinematics = field(default_factory=Kinematics)
    name: str = ""

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def in_bounds(self, x: float, y: float) -> bool:
        r = self.kinematics.footprint_radius
        return r <= x <= self.width - r and r <= y <= self.height - r

    def pose_free(self, x: float, y: float) -> bool:
        r = self.kinematics.footprint_radius
        for (ox, oy), orad in self.obstacles:
            lim = r + orad
            dx = x - ox
            dy = y - oy
            if dx * dx + dy * dy < lim * lim:
                return False
        return True


@dataclass
class Solution:
    paths: list[list[TimedState]]
    costs: list[float]

    @property
    def cost(self) -> float:
        return math.fsum(self.costs)


# ---------------------------------------------------------------- file I/O

def _pose_from(seq, what: str) -> Pose:
    if not isinstance(seq, (list, tuple)) or len(seq) != 3:
        raise InstanceError(f"{what} must be [x, y, theta]")
    try:
        return Pose(float(seq[0]), float(seq[1]), float(seq[2]))
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"bad {what}: {seq}") from exc


def parse_instance(doc: dict, *, obstacle_radius: float = 1.0, kinematics: Kinematics | None = None,
                   name: str = "") -> Instance:
    if not isinstance(doc, dict) or "map" not in doc or "agents" not in doc:
        raise InstanceError("instance needs 'map' and 'agents'")
    m = doc["map"]
    try:
        w, h = (float(v) for v in m["dimensions"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError("map.dimensions must be [W, H]") from exc
    if w <= 0 or h <= 0:
        raise InstanceError("map dimensions must be positive")
    orad = float(m.get("obstacle_radius", obstacle_radius))
    obstacles = []
    for ob in m.get("obstacles") or []:
        if not isinstance(ob, (list, tuple)) or len(ob) not in (2, 3):
            raise InstanceError(f"bad obstacle {ob}")
        r = float(ob[2]) if len(ob) == 3 else orad
        obstacles.append(((float(ob[0]), float(ob[1])), r))
    kin = kinematics
    if kin is None:
        kin = Kinematics(**doc["kinematics"]) if doc.get("kinematics") else Kinematics()
    agents = []
    for i, a in enumerate(doc["agents"] or []):
        try:
            agents.append(AgentTask(_pose_from(a["start"], f"agent {i} start"),
                                    _pose_from(a["goal"], f"agent {i} goal")))
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"agent {i} needs start and goal") from exc
    inst = Instance(w, h, tuple(obstacles), tuple(agents), kin, name)
    validate_instance(inst)
    return inst


def validate_instance(inst: Instance) -> None:
    for i, a in enumerate(inst.agents):
        for what, p in (("start", a.start), ("goal", a.goal)):
            if not inst.in_bounds(p.x, p.y):
                raise InstanceError(f"agent {i} {what} out of bounds")
            if not inst.pose_free(p.x, p.y):
                raise InstanceError(f"agent {i} {what} collides with an obstacle")
        if a.start == a.goal:
            warnings.warn(f"agent {i} start equals goal", stacklevel=2)


def load_instance(path, **kwargs):
    """Load a car-like instance, or a grid instance when the file carries ``grid: true``."""
    path = FsPath(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InstanceError(f"cannot parse {path}: {exc}") from exc
    if isinstance(doc, dict) and doc.get("grid"):
        from .grid import parse_grid_instance

        return parse_grid_instance(doc, name=path.stem)
    return parse_instance(doc, name=path.stem, **kwargs)


def instance_to_doc(inst: Instance) -> dict:
    k = inst.kinematics
    return {
        "map": {
            "dimensions": [inst.width, inst.height],
            "obstacles": [[c[0], c[1], r] for c, r in inst.obstacles],
        },
        "kinematics": {
            "turning_radius": k.turning_radius,
            "step_length": k.step_length,
            "reverse_penalty": k.reverse_penalty,
            "footprint_radius": k.footprint_radius,
        },
        "agents": [
            {"start": list(a.start.as_tuple()), "goal": list(a.goal.as_tuple())}
            for a in inst.agents
        ],
    }


def write_instance(inst: Instance, path) -> None:
    FsPath(path).write_text(yaml.safe_dump(instance_to_doc(inst), sort_keys=False))


def write_solution(solution: Solution, path) -> None:
    doc = {
        "cost": solution.cost,
        "agents": [
            {
                "agent": i,
                "cost": c,
                "states": [[s.pose.x, s.pose.y, s.pose.theta, s.time] for s in p],
            }
            for i, (p, c) in enumerate(zip(solution.paths, solution.costs))
        ],
    }
    # PyYAML writes floats with repr(), which round-trips exactly
    FsPath(path).write_text(yaml.safe_dump(doc, sort_keys=False, width=1000))


def load_solution(path) -> Solution:
    doc = yaml.safe_load(FsPath(path).read_text())
    paths, costs = [], []
    for block in doc["agents"]:
        paths.append([TimedState(Pose(x, y, th), int(t)) for x, y, th, t in block["states"]])
        costs.append(float(block["cost"]))
    return Solution(paths, costs)


# ---------------------------------------------------------------- validation

def validate_solution(inst: Instance, sol: Solution, resolution: Resolution | None = None,
                      *, tol: float = 1e-6) -> list[str]:
    """Independent checks on a car-like solution; returns a list of problems (empty if valid)."""
    from .kernels import rs_distance

    res = resolution or Resolution()
    kin = inst.kinematics
    problems = []
    if len(sol.paths) != len(inst.agents) or len(sol.costs) != len(inst.agents):
        return [f"expected {len(inst.agents)} paths"]
    for i, (path, task) in enumerate(zip(sol.paths, inst.agents)):
        if not path:
            problems.append(f"agent {i}: empty path")
            continue
        p0 = path[0].pose
        if path[0].time != 0 or math.hypot(p0.x - task.start.x, p0.y - task.start.y) > tol \
                or angle_diff(p0.theta, task.start.theta) > tol:
            problems.append(f"agent {i}: path does not begin at start")
        pl = path[-1].pose
        if math.hypot(pl.x - task.goal.x, pl.y - task.goal.y) > res.cell_size + tol \
                or angle_diff(pl.theta, task.goal.theta) > res.bin_width + tol:
            problems.append(f"agent {i}: path does not end at goal")
        for a, b in zip(path, path[1:]):
            if b.time != a.time + 1:
                problems.append(f"agent {i}: non-consecutive times {a.time}->{b.time}")
                break
            if a.pose != b.pose:
                d = rs_distance(a.pose.x, a.pose.y, a.pose.theta, b.pose.x, b.pose.y, b.pose.theta,
                                kin.turning_radius, 1.0)
                if d > kin.step_length + tol:
                    problems.append(f"agent {i}: illegal motion at t={a.time} ({d:.3f} m)")
                    break
        for s in path:
            if not inst.in_bounds(s.pose.x, s.pose.y):
                problems.append(f"agent {i}: out of bounds at t={s.time}")
                break
            if not inst.pose_free(s.pose.x, s.pose.y):
                problems.append(f"agent {i}: obstacle collision at t={s.time}")
                break
    if abs(sol.cost - math.fsum(sol.costs)) > tol:
        problems.append("total cost inconsistent")
    horizon = max(len(p) for p in sol.paths) if sol.paths else 0
    lim = 2.0 * kin.footprint_radius
    for t in range(horizon):
        pos = [p[min(t, len(p) - 1)].pose for p in sol.paths]
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if math.hypot(pos[i].x - pos[j].x, pos[i].y - pos[j].y) < lim - tol:
                    problems.append(f"agents {i},{j} collide at t={t}")
                    return problems
    return problems


def path_positions(paths: Sequence[Sequence[TimedState]], t: int) -> list[tuple[float, float]]:
    """Positions of every agent at ``t``; agents past their path end stay parked."""
    return [(p[min(t, len(p) - 1)].pose.x, p[min(t, len(p) - 1)].pose.y) for p in paths]
