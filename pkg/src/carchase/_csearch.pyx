# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled low-level search and heuristic cache.

Mirrors ``lowlevel.plan_single`` and the Python caches operation for
operation: the same float expressions in the same order, the same open-list
ordering and the same cache bookkeeping, so both backends return identical
paths, costs and counters.
"""
from cython.operator cimport dereference as deref
from libc.math cimport copysign
from libc.stdint cimport int32_t, int64_t
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector
from posix.time cimport CLOCK_MONOTONIC, clock_gettime, timespec

import numpy as np

from .cahc import CacheStats

include "_rscore.pxi"


cdef extern from "_search_support.h":
    cdef cppclass SKey:
        int32_t cx, cy, hb, t

    cdef cppclass CKey:
        int32_t agent, cx, cy, hb, t, ctx

    cdef cppclass OpenItem:
        double f, ng
        int32_t cx, cy, hb, t, nid

    cdef cppclass OpenList:
        bint empty()
        void push(const OpenItem&)
        OpenItem pop()

    cdef cppclass CacheCore:
        int mode
        int64_t capacity
        int64_t lookups, hits, misses, evictions, entries, approx_bytes, peak
        int32_t intern(const vector[int64_t]&)
        bint find(const CKey&, double*)
        void store(const CKey&, double)
        int64_t size()
        double distinct_per_key()


cdef struct Node:
    double x, y, th
    int32_t t, parent
    bint terminal


cdef struct Disc:
    double cx, cy, r2


cdef struct Row:
    int64_t id, tb, te
    double cx, cy, cr, r2


cdef inline double py_floordiv(double vx, double wx) noexcept nogil:
    # float floor division exactly as the interpreter does it
    cdef double mod = fmod(vx, wx)
    cdef double div = (vx - mod) / wx
    cdef double fd
    if mod:
        if (wx < 0) != (mod < 0):
            mod += wx
            div -= 1.0
    if div:
        fd = floor(div)
        if div - fd > 0.5:
            fd += 1.0
    else:
        fd = copysign(0.0, vx / wx)
    return fd


cdef inline int64_t py_mod(int64_t a, int64_t n) noexcept nogil:
    cdef int64_t m = a % n
    if m < 0:
        m += n
    return m


cdef inline double norm_angle(double th) noexcept nogil:
    cdef double t = fmod(th, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:
        t = 0.0
    return t


cdef inline double angle_diff(double a, double b) noexcept nogil:
    cdef double d = fabs(norm_angle(a) - norm_angle(b))
    cdef double e = TWO_PI - d
    return e if e < d else d


cdef inline double now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return ts.tv_sec + ts.tv_nsec * 1e-9


cdef class CarCache:
    """Compiled counterpart of ``ConflictAwareCache`` / ``StateOnlyCache`` for the car-like search."""

    cdef CacheCore core
    cdef readonly str mode

    def __cinit__(self, str mode, long capacity=100_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if mode == "conflict_aware":
            self.core.mode = 1
        elif mode == "state_only":
            self.core.mode = 2
        else:
            raise ValueError(f"unknown cache mode {mode!r}")
        self.mode = mode
        self.core.capacity = capacity

    @property
    def capacity(self):
        return self.core.capacity

    @property
    def stats(self):
        c = self.core
        return CacheStats(c.lookups, c.hits, c.misses, c.evictions, c.entries, c.approx_bytes, c.peak)

    def __len__(self):
        return self.core.size()

    def distinct_fingerprints_per_key(self):
        return self.core.distinct_per_key()


cdef class _Search:
    # kinematics and resolution
    cdef int32_t agent
    cdef double gx, gy, gth, r, pen, cs, inv_cs, bw, analytic
    cdef int64_t nb
    # primitives: 6 motions then wait
    cdef vector[double] lx, ly, dth, cost
    cdef double wait_cost
    # static obstacles on a dense bucket grid
    cdef double xmin, xmax, ymin, ymax, wb
    cdef int64_t nbx, nby
    cdef vector[int64_t] bucket_start
    cdef vector[Disc] bucket_discs
    # constraints
    cdef vector[vector[Disc]] by_time
    cdef vector[Row] forever
    cdef vector[Row] rows
    cdef int64_t t_last
    # heuristic
    cdef bint hybrid
    cdef double tau_init, tau_final, est_g, cg, sg
    cdef double tx0, tx1, ty0, ty1, thx, thy, tmin_r
    cdef int tnx, tny, tnt
    cdef const double[::1] table
    cdef int cache_mode
    cdef CarCache cache
    cdef int64_t rel_window
    cdef double rel_tau
    cdef int32_t context
    cdef vector[int64_t] scratch
    cdef public long n_exact, n_approx

    cdef bint free(self, double x, double y) noexcept:
        if not (self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax):
            return False
        cdef int64_t bx = <int64_t>py_floordiv(x, self.wb)
        cdef int64_t by = <int64_t>py_floordiv(y, self.wb)
        if bx < 0 or by < 0 or bx >= self.nbx or by >= self.nby:
            return True
        cdef int64_t b = bx * self.nby + by
        cdef int64_t i
        cdef double ddx, ddy
        for i in range(self.bucket_start[b], self.bucket_start[b + 1]):
            ddx = x - self.bucket_discs[i].cx
            ddy = y - self.bucket_discs[i].cy
            if ddx * ddx + ddy * ddy < self.bucket_discs[i].r2:
                return False
        return True

    cdef bint hits_discs(self, double x, double y, int64_t t) noexcept:
        if t < 0 or t >= <int64_t>self.by_time.size():
            return False
        cdef vector[Disc]* ds = &self.by_time[t]
        cdef size_t i
        cdef double ddx, ddy
        for i in range(ds.size()):
            ddx = x - ds[0][i].cx
            ddy = y - ds[0][i].cy
            if ddx * ddx + ddy * ddy < ds[0][i].r2:
                return True
        return False

    cdef bint hits_forever(self, double x, double y, int64_t t) noexcept:
        cdef size_t i
        cdef double ddx, ddy
        for i in range(self.forever.size()):
            if t >= self.forever[i].tb:
                ddx = x - self.forever[i].cx
                ddy = y - self.forever[i].cy
                if ddx * ddx + ddy * ddy < self.forever[i].r2:
                    return True
        return False

    cdef bint parkable(self, double x, double y, int64_t t) noexcept:
        cdef size_t i
        cdef double ddx, ddy
        for i in range(self.rows.size()):
            if self.rows[i].te > t:
                ddx = x - self.rows[i].cx
                ddy = y - self.rows[i].cy
                if ddx * ddx + ddy * ddy < self.rows[i].r2:
                    return False
        return True

    cdef bint at_goal(self, double x, double y, double th) noexcept:
        cdef double dx = x - self.gx
        cdef double dy = y - self.gy
        return dx * dx + dy * dy <= self.cs * self.cs and angle_diff(th, self.gth) <= self.bw

    cdef double base(self, double x, double y, double th, double g) noexcept:
        cdef double dx, dy, progress, thr, rx, ry, rt
        if self.hybrid:
            dx = x - self.gx
            dy = y - self.gy
            progress = g / self.est_g
            if not (progress < 1.0):
                progress = 1.0
            thr = self.tau_init - (self.tau_init - self.tau_final) * progress
            if sqrt(dx * dx + dy * dy) > thr:
                rx = self.cg * dx + self.sg * dy
                ry = -self.sg * dx + self.cg * dy
                rt = th - self.gth
                if rt < 0.0:
                    rt += TWO_PI
                if (self.tx0 <= rx <= self.tx1 and self.ty0 <= ry <= self.ty1
                        and not (rx * rx + ry * ry < self.tmin_r * self.tmin_r)):
                    self.n_approx += 1
                    return _trilinear(&self.table[0], self.tx0, self.ty0, self.thx, self.thy,
                                      self.tnx, self.tny, self.tnt, rx, ry, rt)
        self.n_exact += 1
        return _rs_distance(x, y, th, self.gx, self.gy, self.gth, self.r, self.pen)

    cdef int32_t fingerprint(self, double sx, double sy, int64_t st) noexcept:
        cdef double dx = self.gx - sx
        cdef double dy = self.gy - sy
        cdef double L2 = dx * dx + dy * dy
        cdef int64_t lo = st - self.rel_window
        cdef int64_t hi = st + self.rel_window
        cdef double px, py, dot, lim
        cdef size_t i
        self.scratch.clear()
        for i in range(self.rows.size()):
            if self.rows[i].tb > hi or self.rows[i].te < lo:
                continue
            px = self.rows[i].cx - sx
            py = self.rows[i].cy - sy
            dot = px * dx + py * dy
            if dot <= 0.0 or L2 == 0.0:
                lim = self.rel_tau + self.rows[i].cr
                if px * px + py * py > lim * lim:
                    continue
            if self.scratch.size() and self.scratch.back() == self.rows[i].id:
                continue
            self.scratch.push_back(self.rows[i].id)
        return self.cache.core.intern(self.scratch)

    cdef double heur(self, int32_t cx, int32_t cy, int32_t hb, int32_t t, double g) noexcept:
        cdef double x = (cx + 0.5) * self.cs
        cdef double y = (cy + 0.5) * self.cs
        cdef double th = (hb + 0.5) * self.bw
        cdef CKey k
        cdef double v
        if self.cache_mode == 0:
            return self.base(x, y, th, g)
        k.agent = self.agent
        k.cx = cx
        k.cy = cy
        k.hb = hb
        k.t = t
        k.ctx = self.fingerprint(x, y, t) if self.cache_mode == 1 else self.context
        if self.cache.core.find(k, &v):
            return v
        v = self.base(x, y, th, g)
        self.cache.core.store(k, v)
        return v

    cdef int32_t key_heading(self, double th) noexcept:
        return <int32_t>py_mod(<int64_t>py_floordiv(th, self.bw), self.nb)


def plan(tuple task, tuple kin, tuple res, tuple prims, tuple world, tuple cons, tuple heuristic,
         CarCache cache, tuple relevance, object connect, long budget, double deadline):
    """Run one low-level search; see ``lowlevel._plan_compiled`` for the argument layout.

    Returns ``(status, detail)`` with status ``found``, ``exhausted``,
    ``budget``, ``timeout``, ``start_blocked`` or ``start_violates``. On success ``detail`` is
    ``(chain, cost, expansions, n_exact, n_approx)`` where ``chain`` lists
    ``(x, y, theta, t, tail_poses_or_None)`` from start to goal.
    """
    cdef _Search S = _Search()
    cdef int64_t i, j, n, t
    agent, sx_, sy_, sth_, gx_, gy_, gth_ = task
    S.agent = agent
    S.gx, S.gy, S.gth = gx_, gy_, gth_
    S.r, S.pen = kin
    S.cs, S.nb, S.bw, S.analytic = res
    S.inv_cs = 1.0 / S.cs
    local, S.wait_cost = prims
    for lx, ly, dth, c in local:
        S.lx.push_back(lx)
        S.ly.push_back(ly)
        S.dth.push_back(dth)
        S.cost.push_back(c)

    S.xmin, S.xmax, S.ymin, S.ymax, S.wb, S.nbx, S.nby, starts, discs = world
    cdef const int64_t[::1] vs = starts
    cdef const double[::1] vd = discs
    cdef Disc d
    for i in range(vs.shape[0]):
        S.bucket_start.push_back(vs[i])
    for i in range(vd.shape[0] // 3):
        d.cx = vd[3 * i]
        d.cy = vd[3 * i + 1]
        d.r2 = vd[3 * i + 2]
        S.bucket_discs.push_back(d)

    # constraint rows sorted by id
    cdef Row row
    cdef int64_t last = -1
    cdef int64_t forever_t
    ids_, tbs, tes, cxs, cys, rads, forever_t = cons
    cdef const int64_t[::1] cid = ids_
    cdef const int64_t[::1] ctb = tbs
    cdef const int64_t[::1] cte = tes
    cdef const double[::1] ccx = cxs
    cdef const double[::1] ccy = cys
    cdef const double[::1] crad = rads
    cdef vector[int64_t] all_ids
    for i in range(cid.shape[0]):
        row.id = cid[i]
        row.tb = ctb[i]
        row.te = cte[i]
        row.cx = ccx[i]
        row.cy = ccy[i]
        row.cr = crad[i]
        row.r2 = crad[i] * crad[i]
        S.rows.push_back(row)
        if all_ids.size() == 0 or all_ids.back() != row.id:
            all_ids.push_back(row.id)
        if row.te >= forever_t:
            S.forever.push_back(row)
            if row.tb > last:
                last = row.tb
        else:
            if row.te + 1 > <int64_t>S.by_time.size():
                S.by_time.resize(row.te + 1)
            d.cx = row.cx
            d.cy = row.cy
            d.r2 = row.r2
            for t in range(row.tb if row.tb > 0 else 0, row.te + 1):
                S.by_time[t].push_back(d)
            if row.te > last:
                last = row.te
    S.t_last = last
    cdef int64_t t_cap = last + 1

    S.hybrid = heuristic[0] == "hybrid"
    if S.hybrid:
        (_, S.tau_init, S.tau_final, S.est_g, flat, S.tx0, S.tx1, S.ty0, S.ty1,
         S.thx, S.thy, S.tnx, S.tny, S.tnt, S.tmin_r) = heuristic
        S.table = flat
        S.cg = cos(S.gth)
        S.sg = sin(S.gth)
    S.cache_mode = 0
    if cache is not None:
        S.cache = cache
        S.cache_mode = cache.core.mode
        S.rel_window, S.rel_tau = relevance
    return _run(S, sx_, sy_, sth_, t_cap, all_ids, cache, connect, budget, deadline)


cdef object _run(_Search S, double sx, double sy, double sth, int64_t t_cap, vector[int64_t]& all_ids,
                 CarCache cache, object connect, long budget, double deadline):
    cdef vector[Node] nodes
    cdef unordered_map[SKey, double] best_g
    cdef OpenList openl
    cdef OpenItem it
    cdef Node nd
    cdef SKey sk
    cdef double INF = INFINITY
    cdef long expansions = 0
    cdef double g, g2, x, y, th, dxg, dyg, dd, c, s, nx2, ny2, nth2
    cdef int64_t t, t1, tk, tt
    cdef int32_t nid, tid, k0_, k1_, k2_
    cdef size_t pi, npr = S.lx.size()
    cdef bint has_forever = S.forever.size() > 0
    cdef bint has_deadline = deadline < INF
    tails = {}

    if S.cache_mode == 2:
        S.context = cache.core.intern(all_ids)

    if not S.free(sx, sy):
        return "start_blocked", None
    if S.hits_discs(sx, sy, 0) or S.hits_forever(sx, sy, 0):
        return "start_violates", None
    it.cx = <int32_t>floor(sx * S.inv_cs)
    it.cy = <int32_t>floor(sy * S.inv_cs)
    it.hb = S.key_heading(sth)
    it.t = 0
    it.nid = 0
    nd.x = sx
    nd.y = sy
    nd.th = sth
    nd.t = 0
    nd.parent = -1
    nd.terminal = False
    nodes.push_back(nd)
    sk.cx = it.cx
    sk.cy = it.cy
    sk.hb = it.hb
    sk.t = 0 if 0 < t_cap else <int32_t>t_cap
    best_g[sk] = 0.0
    it.ng = -0.0
    if S.at_goal(sx, sy, sth) and S.parkable(sx, sy, 0):
        nodes[0].terminal = True
        it.f = 0.0
    else:
        it.f = S.heur(it.cx, it.cy, it.hb, 0, 0.0)
    openl.push(it)

    cdef double an2 = S.analytic * S.analytic
    cdef unordered_map[SKey, double].iterator found
    while not openl.empty():
        it = openl.pop()
        g = -it.ng
        nid = it.nid
        if nodes[nid].terminal:
            return "found", (_chain(nodes, nid, tails), g, expansions, S.n_exact, S.n_approx)
        x = nodes[nid].x
        y = nodes[nid].y
        th = nodes[nid].th
        t = nodes[nid].t
        sk.cx = it.cx
        sk.cy = it.cy
        sk.hb = it.hb
        sk.t = <int32_t>(t if t < t_cap else t_cap)
        found = best_g.find(sk)
        if found != best_g.end() and g > deref(found).second:
            continue
        expansions += 1
        if expansions > budget:
            return "budget", expansions
        if has_deadline and (expansions & 127) == 0 and now() > deadline:
            return "timeout", expansions
        dxg = x - S.gx
        dyg = y - S.gy
        if dxg * dxg + dyg * dyg < an2:
            dd = _rs_distance(x, y, th, S.gx, S.gy, S.gth, S.r, S.pen)
            if dd < S.analytic:
                poses = connect(x, y, th, t)
                if poses is not None:
                    tt = t + len(poses)
                    nd.x = S.gx
                    nd.y = S.gy
                    nd.th = S.gth
                    nd.t = <int32_t>tt
                    nd.parent = nid
                    nd.terminal = True
                    nodes.push_back(nd)
                    tid = <int32_t>(nodes.size() - 1)
                    tails[tid] = poses
                    it.f = g + dd
                    it.ng = -(g + dd)
                    it.cx = <int32_t>floor(S.gx * S.inv_cs)
                    it.cy = <int32_t>floor(S.gy * S.inv_cs)
                    it.hb = S.key_heading(S.gth)
                    it.t = <int32_t>tt
                    it.nid = tid
                    openl.push(it)
        t1 = t + 1
        tk = t1 if t1 < t_cap else t_cap
        c = cos(th)
        s = sin(th)
        for pi in range(npr + 1):
            if pi == npr:
                nx2 = x
                ny2 = y
                nth2 = th
            else:
                nx2 = x + c * S.lx[pi] - s * S.ly[pi]
                ny2 = y + s * S.lx[pi] + c * S.ly[pi]
                if not S.free(nx2, ny2):
                    continue
                nth2 = th + S.dth[pi]
                if nth2 < 0.0:
                    nth2 += TWO_PI
                elif nth2 >= TWO_PI:
                    nth2 -= TWO_PI
            if S.hits_discs(nx2, ny2, t1):
                continue
            if has_forever and S.hits_forever(nx2, ny2, t1):
                continue
            g2 = g + (S.wait_cost if pi == npr else S.cost[pi])
            k0_ = <int32_t>floor(nx2 * S.inv_cs)
            k1_ = <int32_t>floor(ny2 * S.inv_cs)
            k2_ = S.key_heading(nth2)
            sk.cx = k0_
            sk.cy = k1_
            sk.hb = k2_
            sk.t = <int32_t>tk
            found = best_g.find(sk)
            if found != best_g.end() and deref(found).second <= g2:
                continue
            best_g[sk] = g2
            nd.x = nx2
            nd.y = ny2
            nd.th = nth2
            nd.t = <int32_t>t1
            nd.parent = nid
            nd.terminal = False
            it.ng = -g2
            it.cx = k0_
            it.cy = k1_
            it.hb = k2_
            it.t = <int32_t>t1
            it.nid = <int32_t>nodes.size()
            if S.at_goal(nx2, ny2, nth2) and S.parkable(nx2, ny2, t1):
                nd.terminal = True
                it.f = g2
            else:
                it.f = g2 + S.heur(k0_, k1_, k2_, <int32_t>t1, g2)
            nodes.push_back(nd)
            openl.push(it)
    return "exhausted", expansions


cdef list _chain(vector[Node]& nodes, int32_t nid, dict tails):
    out = []
    cdef int32_t n = nid
    while n != -1:
        out.append((nodes[n].x, nodes[n].y, nodes[n].th, nodes[n].t, tails.get(n)))
        n = nodes[n].parent
    out.reverse()
    return out
