"""Interpolated Reeds-Shepp lookup table and the distance-thresholded hybrid heuristic."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .core import Pose, normalize_angle
from .reeds_shepp import RSConfig, rs_exact

log = logging.getLogger(__name__)

TABLE_FORMAT = 1


@dataclass(frozen=True, eq=False)
class ApproxTable:
    """Exact distances to the origin sampled on a regular (dx, dy, dtheta) lattice.

    Queries are expressed in the goal frame. Below ``min_radius`` metres and
    outside ``bounds`` the exact distance is returned instead.
    """

    rs: RSConfig
    bounds: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    resolution: tuple[int, int, int]           # nx, ny, ntheta
    values: np.ndarray
    epsilon_table: float
    min_radius: float
    _flat: object = field(repr=False, default=None)

    def __post_init__(self):
        nx, ny, nt = self.resolution
        if min(nx, ny, nt) < 2:
            raise ValueError("table needs at least 2 nodes per axis")
        if self.values.shape != (nx, ny, nt):
            raise ValueError("values shape does not match resolution")
        if self.epsilon_table < 0:
            raise ValueError("epsilon_table must be >= 0")
        self.values.setflags(write=False)
        object.__setattr__(self, "_flat", kernels.as_flat(self.values))

    @property
    def hx(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / (self.resolution[0] - 1)

    @property
    def hy(self) -> float:
        return (self.bounds[3] - self.bounds[2]) / (self.resolution[1] - 1)

    def node_pose(self, i: int, j: int, k: int) -> tuple[float, float, float]:
        return (self.bounds[0] + i * self.hx, self.bounds[2] + j * self.hy,
                2.0 * math.pi * k / self.resolution[2])

    def lookup(self, rx: float, ry: float, rt: float) -> float | None:
        """Interpolated value at a goal-frame configuration, or None when it must fall back."""
        x0, x1, y0, y1 = self.bounds
        if not (x0 <= rx <= x1 and y0 <= ry <= y1):
            return None
        if rx * rx + ry * ry < self.min_radius * self.min_radius:
            return None
        nx, ny, nt = self.resolution
        return kernels.trilinear(self._flat, x0, y0, self.hx, self.hy, nx, ny, nt, rx, ry, rt)


def to_goal_frame(x: float, y: float, th: float, gx: float, gy: float, gth: float):
    c = math.cos(gth)
    s = math.sin(gth)
    dx = x - gx
    dy = y - gy
    return c * dx + s * dy, -s * dx + c * dy, normalize_angle(th - gth)


def rs_approx(a: Pose, b: Pose, table: ApproxTable) -> float:
    rx, ry, rt = to_goal_frame(a.x, a.y, a.theta, b.x, b.y, b.theta)
    v = table.lookup(rx, ry, rt)
    if v is None:
        return rs_exact(a, b, table.rs)
    return v


def _node_axes(bounds, resolution):
    nx, ny, nt = resolution
    xs = np.linspace(bounds[0], bounds[1], nx)
    ys = np.linspace(bounds[2], bounds[3], ny)
    ts = 2.0 * math.pi * np.arange(nt) / nt
    return xs, ys, ts


def measure_epsilon(table: ApproxTable, samples: int, seed: int) -> float:
    """Max relative overestimation of ``rs_approx`` over uniform goal-frame samples."""
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = table.bounds
    pts = np.column_stack([
        rng.uniform(x0, x1, samples),
        rng.uniform(y0, y1, samples),
        rng.uniform(0.0, 2.0 * math.pi, samples),
    ])
    r = table.rs.turning_radius
    pen = table.rs.reverse_penalty
    worst = 0.0
    for rx, ry, rt in pts.tolist():
        v = table.lookup(rx, ry, rt)
        if v is None:
            continue
        exact = kernels.rs_distance(rx, ry, rt, 0.0, 0.0, 0.0, r, pen)
        if exact > 0.0:
            ratio = v / exact - 1.0
            if ratio > worst:
                worst = ratio
    return worst


def _cache_name(header: dict) -> str:
    blob = json.dumps(header, sort_keys=True).encode()
    return "rs_table_" + hashlib.sha1(blob).hexdigest()[:16] + ".npz"


def build_table(cfg: RSConfig, bounds, resolution, *, min_radius: float | None = None,
                samples: int = 100_000, seed: int = 0, cache_dir=None) -> ApproxTable:
    """Tabulate exact distances on the lattice and measure the table's epsilon.

    ``min_radius`` defaults to twice the turning radius. When ``cache_dir`` is
    given the table is read from / written to a binary file whose header must
    match the requested configuration.
    """
    bounds = tuple(float(b) for b in bounds)
    resolution = tuple(int(n) for n in resolution)
    if min_radius is None:
        min_radius = 2.0 * cfg.turning_radius
    header = {
        "format": TABLE_FORMAT,
        "turning_radius": cfg.turning_radius,
        "reverse_penalty": cfg.reverse_penalty,
        "bounds": list(bounds),
        "resolution": list(resolution),
        "min_radius": float(min_radius),
        "samples": int(samples),
        "seed": int(seed),
    }
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / _cache_name(header)
        loaded = load_table(path, header)
        if loaded is not None:
            return loaded
    xs, ys, ts = _node_axes(bounds, resolution)
    values = kernels.rs_table_values(xs, ys, ts, cfg.turning_radius, cfg.reverse_penalty)
    table = ApproxTable(cfg, bounds, resolution, np.asarray(values, dtype=np.float64), 0.0, float(min_radius))
    eps = measure_epsilon(table, samples, seed) if samples > 0 else 0.0
    table = ApproxTable(cfg, bounds, resolution, table.values, eps, float(min_radius))
    if path is not None:
        save_table(table, path, header)
    return table


def save_table(table: ApproxTable, path, header: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    full = dict(header, epsilon_table=table.epsilon_table)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, header=np.frombuffer(json.dumps(full, sort_keys=True).encode(), dtype=np.uint8),
             values=np.asarray(table.values))
    tmp.replace(path)


def load_table(path, header: dict) -> ApproxTable | None:
    """Load a cached table; returns None when absent, unreadable or built for another config."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        with np.load(path) as data:
            stored = json.loads(bytes(data["header"]).decode())
            values = np.array(data["values"], dtype=np.float64)
    except (OSError, ValueError, KeyError) as exc:
        log.warning("ignoring unreadable table cache %s: %s", path, exc)
        return None
    eps = stored.pop("epsilon_table", None)
    if stored != header or eps is None or values.shape != tuple(header["resolution"]):
        log.info("table cache %s does not match requested config; rebuilding", path)
        return None
    cfg = RSConfig(header["turning_radius"], header["reverse_penalty"])
    return ApproxTable(cfg, tuple(header["bounds"]), tuple(header["resolution"]), values,
                       float(eps), header["min_radius"])


@dataclass(frozen=True)
class HybridConfig:
    tau_init: float
    tau_final: float
    estimated_max_g: float

    def __post_init__(self):
        if not (self.tau_init >= self.tau_final >= 0.0):
            raise ValueError("need tau_init >= tau_final >= 0")
        if not self.estimated_max_g > 0.0:
            raise ValueError("estimated_max_g must be > 0")

    def threshold(self, g_value: float) -> float:
        progress = min(1.0, g_value / self.estimated_max_g)
        return self.tau_init - (self.tau_init - self.tau_final) * progress


def default_hybrid_config(diagonal: float, start: Pose, goal: Pose, cfg: RSConfig) -> HybridConfig:
    tau_final = 2.0 * cfg.turning_radius
    tau_init = max(diagonal / 4.0, tau_final)
    est = 2.0 * rs_exact(start, goal, cfg)
    return HybridConfig(tau_init, tau_final, est if est > 0.0 else 1.0)


def hybrid_h(s: Pose, g: Pose, g_value: float, cfg: HybridConfig, table: ApproxTable,
             rs_cfg: RSConfig) -> float:
    d = math.hypot(s.x - g.x, s.y - g.y)
    if d > cfg.threshold(g_value):
        return rs_approx(s, g, table)
    return rs_exact(s, g, rs_cfg)
