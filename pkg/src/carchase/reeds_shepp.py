"""Exact Reeds-Shepp distance and path sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Pose, normalize_angle
from .kernels import WORDS, normalize_goal, rs_candidates, rs_distance, weighted_length


@dataclass(frozen=True)
class RSConfig:
    turning_radius: float = 2.0
    reverse_penalty: float = 1.0

    def __post_init__(self):
        if self.turning_radius <= 0:
            raise ValueError("turning_radius must be > 0")
        if self.reverse_penalty < 1.0:
            raise ValueError("reverse_penalty must be >= 1")


@dataclass(frozen=True)
class RSPath:
    word: str
    lengths: tuple[float, ...]  # signed, meters; negative = reverse
    cost: float                 # weighted length, meters

    @property
    def length(self) -> float:
        return sum(abs(u) for u in self.lengths)


def rs_exact(a: Pose, b: Pose, cfg: RSConfig) -> float:
    return rs_distance(a.x, a.y, a.theta, b.x, b.y, b.theta, cfg.turning_radius, cfg.reverse_penalty)


def rs_shortest_path(a: Pose, b: Pose, cfg: RSConfig) -> RSPath:
    r = cfg.turning_radius
    x, y, phi = normalize_goal(a.x, a.y, a.theta, b.x, b.y, b.theta, r)
    best = None
    best_w = math.inf
    for wid, lengths in rs_candidates(x, y, phi):
        w = weighted_length(lengths, cfg.reverse_penalty)
        if w < best_w:
            best_w = w
            best = (wid, lengths)
    if best is None:  # cannot happen for a complete family set
        raise RuntimeError("no Reeds-Shepp word found")
    wid, lengths = best
    word = WORDS[wid]
    lengths = tuple(u * r for u in lengths)
    # drop zero-length segments so sampling does not stall
    kept = [(c, u) for c, u in zip(word, lengths) if abs(u) > 1e-12]
    return RSPath("".join(c for c, _ in kept), tuple(u for _, u in kept), best_w * r)


def advance(x: float, y: float, th: float, letter: str, u: float, r: float) -> tuple[float, float, float]:
    """Drive signed arc length ``u`` along a segment of type L, R or S."""
    if letter == "S":
        return x + u * math.cos(th), y + u * math.sin(th), th
    k = (1.0 if letter == "L" else -1.0) / r
    th2 = th + k * u
    return (x + (math.sin(th2) - math.sin(th)) / k,
            y - (math.cos(th2) - math.cos(th)) / k,
            th2)


def rs_sample(a: Pose, path: RSPath, max_step: float, r: float) -> list[tuple[float, float, float]]:
    """Poses along ``path`` at equal arc spacing no larger than ``max_step``; excludes the start."""
    total = path.length
    if total <= 0.0:
        return []
    n = max(1, math.ceil(total / max_step - 1e-9))
    h = total / n
    out = []
    seg = 0
    seg_done = 0.0
    x, y, th = a.x, a.y, a.theta
    for step in range(1, n + 1):
        need = h
        while need > 1e-12 and seg < len(path.lengths):
            u = path.lengths[seg]
            left = abs(u) - seg_done
            take = min(need, left)
            x, y, th = advance(x, y, th, path.word[seg], math.copysign(take, u), r)
            need -= take
            seg_done += take
            if seg_done >= abs(u) - 1e-12:
                seg += 1
                seg_done = 0.0
        out.append((x, y, normalize_angle(th)))
    return out
