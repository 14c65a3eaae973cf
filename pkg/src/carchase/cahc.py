"""Conflict-aware heuristic cache.

Entries are keyed by ``(state key, fingerprint)`` where the fingerprint
identifies the subset of constraints that could influence the heuristic at
that state. The cache itself is domain-independent; adapters supply the
relevance filter and base heuristic.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

from .core import Constraint, Pose, Resolution, TimedState, discretize

ID_BITS = 256
_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# analytic byte model per entry
KEY_BYTES = 12
VALUE_BYTES = 8
SLOT_OVERHEAD = 32
BITSET_BYTES = ID_BITS // 8
HASH_BYTES = 8
OVERFLOW_ID_BYTES = 8
SUMMARY_BYTES = 16  # 12 B spatial (center, radius as float32) + 4 B temporal (two uint16)


def _mix64(h: int) -> int:
    # splitmix64 finalizer
    h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & _MASK64
    return h ^ (h >> 31)


def hash_ids(bits: int, overflow: tuple[int, ...]) -> int:
    h = _FNV_OFFSET
    for w in range(ID_BITS // 64):
        h = ((h ^ ((bits >> (64 * w)) & _MASK64)) * _FNV_PRIME) & _MASK64
    for i in overflow:
        h = ((h ^ (i & _MASK64)) * _FNV_PRIME) & _MASK64
    return _mix64(h)


class ConflictFingerprint:
    """Identity of the relevant-constraint id set, with per-constraint summaries.

    Equality and hashing use the id set only.
    """

    __slots__ = ("id_bits", "overflow", "spatial_summary", "temporal_summary", "cached_hash", "nbytes")

    def __init__(self, id_bits: int = 0, overflow: Iterable[int] = (), spatial_summary=(), temporal_summary=()):
        if id_bits < 0 or id_bits >> ID_BITS:
            raise ValueError("id_bits must fit in 256 bits")
        self.id_bits = id_bits
        self.overflow = tuple(sorted(set(overflow)))
        self.spatial_summary = tuple(spatial_summary)
        self.temporal_summary = tuple(temporal_summary)
        self.cached_hash = hash_ids(id_bits, self.overflow)
        self.nbytes = (BITSET_BYTES + HASH_BYTES + OVERFLOW_ID_BYTES * len(self.overflow)
                       + SUMMARY_BYTES * (id_bits.bit_count() + len(self.overflow)))

    @classmethod
    def from_ids(cls, ids: Iterable[int], spatial_summary=(), temporal_summary=()):
        bits = 0
        over = []
        for i in ids:
            if i < 0:
                raise ValueError("constraint ids must be >= 0")
            if i < ID_BITS:
                bits |= 1 << i
            else:
                over.append(i)
        return cls(bits, over, spatial_summary, temporal_summary)

    @classmethod
    def from_constraints(cls, constraints: Iterable[Constraint]):
        cs = sorted(constraints, key=lambda c: c.id)
        return cls.from_ids([c.id for c in cs],
                            [(c.center, c.radius) for c in cs],
                            [(c.t_begin, c.t_end) for c in cs])

    def ids(self) -> list[int]:
        out = []
        b = self.id_bits
        while b:
            low = b & -b
            out.append(low.bit_length() - 1)
            b ^= low
        out.extend(self.overflow)
        return out

    def __len__(self):
        return self.id_bits.bit_count() + len(self.overflow)

    def __hash__(self):
        return self.cached_hash

    def __eq__(self, other):
        if not isinstance(other, ConflictFingerprint):
            return NotImplemented
        return (self.cached_hash == other.cached_hash and self.id_bits == other.id_bits
                and self.overflow == other.overflow)

    def __repr__(self):
        return f"ConflictFingerprint(ids={self.ids()})"


EMPTY_FINGERPRINT = ConflictFingerprint()


def fingerprint_hash(fp: ConflictFingerprint) -> int:
    return fp.cached_hash


@dataclass(frozen=True)
class RelevanceConfig:
    t_window: int = 100
    tau_spatial: float = 10.0

    def __post_init__(self):
        if self.t_window < 0 or self.tau_spatial < 0:
            raise ValueError("t_window and tau_spatial must be >= 0")


def point_segment_distance(px, py, ax, ay, bx, by) -> float:
    dx = bx - ax
    dy = by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - ax, py - ay)
    u = ((px - ax) * dx + (py - ay) * dy) / L2
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    return math.hypot(px - (ax + u * dx), py - (ay + u * dy))


def relevant(sx, sy, st, gx, gy, c: Constraint, cfg: RelevanceConfig) -> bool:
    if c.t_begin > st + cfg.t_window or c.t_end < st - cfg.t_window:
        return False
    cx, cy = c.center
    if point_segment_distance(cx, cy, sx, sy, gx, gy) <= cfg.tau_spatial + c.radius:
        return True
    # forward cone: anything ahead of s along the direction to g
    return (cx - sx) * (gx - sx) + (cy - sy) * (gy - sy) > 0.0


def extract_fingerprint(s: TimedState, g: Pose, constraints: Sequence[Constraint],
                        cfg: RelevanceConfig) -> ConflictFingerprint:
    p = s.pose
    picked = [c for c in constraints if relevant(p.x, p.y, s.time, g.x, g.y, c, cfg)]
    if not picked:
        return EMPTY_FINGERPRINT
    return ConflictFingerprint.from_constraints(picked)


class CarRelevance:
    """Relevance filter bound to one agent's constraint list and goal, for the search loop.

    Keeps a parallel tuple layout of the constraints so the per-query scan
    avoids attribute lookups, and interns fingerprints by id set.
    """

    def __init__(self, constraints: Sequence[Constraint], goal: Pose, cfg: RelevanceConfig):
        self.cfg = cfg
        self.gx = goal.x
        self.gy = goal.y
        self.by_id = {c.id: c for c in constraints}
        self.rows = [(c.id, c.center[0], c.center[1], c.radius, c.t_begin, c.t_end)
                     for c in sorted(constraints, key=lambda c: c.id)]
        self._interned: dict[tuple, ConflictFingerprint] = {}

    def fingerprint(self, sx: float, sy: float, st: int) -> ConflictFingerprint:
        if not self.rows:
            return EMPTY_FINGERPRINT
        W = self.cfg.t_window
        tau = self.cfg.tau_spatial
        gx, gy = self.gx, self.gy
        dx = gx - sx
        dy = gy - sy
        L2 = dx * dx + dy * dy
        lo = st - W
        hi = st + W
        bits = 0
        over = []
        for cid, cx, cy, cr, tb, te in self.rows:
            if tb > hi or te < lo:
                continue
            px = cx - sx
            py = cy - sy
            dot = px * dx + py * dy
            if dot <= 0.0 or L2 == 0.0:
                # behind s (or s at g): only the segment-distance test can admit it
                lim = tau + cr
                if px * px + py * py > lim * lim:
                    continue
            # ahead of s: the cone admits it regardless of distance
            if cid < ID_BITS:
                bits |= 1 << cid
            else:
                over.append(cid)
        if not bits and not over:
            return EMPTY_FINGERPRINT
        k = (bits, tuple(over))
        fp = self._interned.get(k)
        if fp is None:
            cs = [self.by_id[i] for i in ConflictFingerprint(bits, over).ids()]
            fp = ConflictFingerprint.from_constraints(cs)
            self._interned[k] = fp
        return fp


@dataclass
class CacheStats:
    lookups: int = 0
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    entries: int = 0
    approx_bytes: int = 0
    peak_entries: int = 0

    @property
    def hit_rate(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0

    @property
    def bytes_per_entry(self) -> float:
        return self.approx_bytes / self.entries if self.entries else 0.0

    def as_dict(self) -> dict:
        return {
            "lookups": self.lookups, "hits": self.hits, "misses": self.misses,
            "hit_rate": self.hit_rate, "evictions": self.evictions, "entries": self.entries,
            "approx_bytes": self.approx_bytes, "peak_entries": self.peak_entries,
        }

    def dump(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def merge(self, other: "CacheStats") -> "CacheStats":
        return CacheStats(self.lookups + other.lookups, self.hits + other.hits,
                          self.misses + other.misses, self.evictions + other.evictions,
                          self.entries + other.entries, self.approx_bytes + other.approx_bytes,
                          max(self.peak_entries, other.peak_entries))


def entry_bytes(fp: ConflictFingerprint) -> int:
    return KEY_BYTES + fp.nbytes + VALUE_BYTES + SLOT_OVERHEAD


class ConflictAwareCache:
    """Bounded map from (state key, fingerprint) to heuristic value, with clear-half eviction."""

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: dict[tuple[Hashable, ConflictFingerprint], float] = {}
        self.stats = CacheStats()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def evict_if_full(self) -> None:
        """Before an insert: at capacity, drop oldest entries so the insert leaves at most half."""
        n = len(self.entries)
        if n < self.capacity:
            return
        drop = n - max(self.capacity // 2 - 1, 0)
        st = self.stats
        for k in list(self.entries.keys())[:drop]:
            del self.entries[k]
            st.approx_bytes -= entry_bytes(k[1])
        st.evictions += drop
        st.entries = len(self.entries)

    def get_or_compute(self, state_key: Hashable, fp: ConflictFingerprint, compute: Callable[[], float]) -> float:
        k = (state_key, fp)
        entries = self.entries
        st = self.stats
        st.lookups += 1
        v = entries.get(k)
        if v is not None:
            st.hits += 1
            return v
        st.misses += 1
        v = compute()
        if len(entries) >= self.capacity:
            self.evict_if_full()
        entries[k] = v
        st.approx_bytes += KEY_BYTES + VALUE_BYTES + SLOT_OVERHEAD + fp.nbytes
        n = len(entries)
        st.entries = n
        if n > st.peak_entries:
            st.peak_entries = n
        return v

    def distinct_fingerprints_per_key(self) -> float:
        keys = {}
        for sk, fp in self.entries:
            keys.setdefault(sk, set()).add(fp)
        return sum(len(v) for v in keys.values()) / len(keys) if keys else 0.0


class StateOnlyCache:
    """Control cache keyed by state alone.

    Each slot remembers the full constraint context it was computed under; a
    lookup only counts as a hit when that context matches the current one,
    otherwise the value is recomputed and the slot overwritten. This keeps the
    control run correct while measuring how often a state-only key would have
    been reusable.
    """

    CONTEXT_BYTES = 8

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: dict[Hashable, tuple[Hashable, float]] = {}
        self.stats = CacheStats()

    def __len__(self):
        return len(self.entries)

    def evict_if_full(self) -> None:
        n = len(self.entries)
        if n < self.capacity:
            return
        keep = self.capacity // 2 - 1
        drop = n - max(keep, 0)
        for k in list(self.entries.keys())[:drop]:
            del self.entries[k]
        self.stats.evictions += drop
        self._sync()

    def _sync(self):
        st = self.stats
        st.entries = len(self.entries)
        st.approx_bytes = st.entries * (KEY_BYTES + self.CONTEXT_BYTES + VALUE_BYTES + SLOT_OVERHEAD)
        if st.entries > st.peak_entries:
            st.peak_entries = st.entries

    def get_or_compute(self, state_key: Hashable, context: Hashable, compute: Callable[[], float]) -> float:
        st = self.stats
        st.lookups += 1
        slot = self.entries.get(state_key)
        if slot is not None and slot[0] == context:
            st.hits += 1
            return slot[1]
        st.misses += 1
        v = compute()
        if slot is None:
            self.evict_if_full()
        self.entries[state_key] = (context, v)
        self._sync()
        return v


def cached_h(s: TimedState, g: Pose, constraints: Sequence[Constraint], cache: ConflictAwareCache,
             base_h: Callable[[TimedState, Pose, Sequence[Constraint]], float], *,
             relevance: RelevanceConfig | None = None, resolution: Resolution | None = None,
             fingerprint: Callable[..., ConflictFingerprint] | None = None) -> float:
    """Cache-wrapped heuristic: look up (key(s), fingerprint) and compute ``base_h`` on a miss."""
    res = resolution or Resolution()
    if fingerprint is None:
        fp = extract_fingerprint(s, g, constraints, relevance or RelevanceConfig())
    else:
        fp = fingerprint(s, g, constraints)
    return cache.get_or_compute(discretize(s, res), fp, lambda: base_h(s, g, constraints))
