"""Pure-Python Reeds-Shepp and table kernels.

Mirrors ``_ckernels.pyx`` operation for operation so both backends return
bit-identical floats. Formulas follow the classic Reeds-Shepp word
construction (CSC, CCC, CCCC, CCSC, CCSCC with time-flip and reflection).
All lengths are in units of the turning radius; a negative segment length
means the segment is driven in reverse.
"""
import math

PI = math.pi
TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
ZERO = 10.0 * 2.220446049250313e-16

BACKEND = "python"

# segment letters of each word, indexed by word id
WORDS = (
    "LRL", "RLR", "LRLR", "RLRL", "LRSL", "RLSR", "LSRL", "RSLR", "LRSR",
    "RLSL", "RSRL", "LSLR", "LSR", "RSL", "LSL", "RSR", "LRSLR", "RLSRL",
)


def mod2pi(x):
    v = math.fmod(x, TWO_PI)
    if v < -PI:
        v += TWO_PI
    elif v > PI:
        v -= TWO_PI
    return v


def _lp_sp_lp(x, y, phi):
    xi = x - math.sin(phi)
    eta = y - 1.0 + math.cos(phi)
    u = math.sqrt(xi * xi + eta * eta)
    t = math.atan2(eta, xi)
    if t >= -ZERO:
        v = mod2pi(phi - t)
        if v >= -ZERO:
            return (t, u, v)
    return None


def _lp_sp_rp(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    u1 = xi * xi + eta * eta
    t1 = math.atan2(eta, xi)
    if u1 >= 4.0:
        u = math.sqrt(u1 - 4.0)
        theta = math.atan2(2.0, u)
        t = mod2pi(t1 + theta)
        v = mod2pi(t - phi)
        if t >= -ZERO and v >= -ZERO:
            return (t, u, v)
    return None


def _lp_rm_l(x, y, phi):
    xi = x - math.sin(phi)
    eta = y - 1.0 + math.cos(phi)
    u1 = math.sqrt(xi * xi + eta * eta)
    theta = math.atan2(eta, xi)
    if u1 <= 4.0:
        u = -2.0 * math.asin(0.25 * u1)
        t = mod2pi(theta + 0.5 * u + PI)
        v = mod2pi(phi - t + u)
        if t >= -ZERO and u <= ZERO:
            return (t, u, v)
    return None


def _tau_omega(u, v, xi, eta, phi):
    delta = mod2pi(u - v)
    a = math.sin(u) - math.sin(delta)
    b = math.cos(u) - math.cos(delta) - 1.0
    t1 = math.atan2(eta * a - xi * b, xi * a + eta * b)
    t2 = 2.0 * (math.cos(delta) - math.cos(v) - math.cos(u)) + 3.0
    if t2 < 0:
        tau = mod2pi(t1 + PI)
    else:
        tau = mod2pi(t1)
    omega = mod2pi(tau - u + v - phi)
    return tau, omega


def _lp_rup_lum_rm(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho = 0.25 * (2.0 + math.sqrt(xi * xi + eta * eta))
    if rho <= 1.0:
        u = math.acos(rho)
        t, v = _tau_omega(u, -u, xi, eta, phi)
        if t >= -ZERO and v <= ZERO:
            return (t, u, v)
    return None


def _lp_rum_lum_rp(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho = (20.0 - xi * xi - eta * eta) / 16.0
    if 0.0 <= rho <= 1.0:
        u = -math.acos(rho)
        if u >= -HALF_PI:
            t, v = _tau_omega(u, u, xi, eta, phi)
            if t >= -ZERO and v >= -ZERO:
                return (t, u, v)
    return None


def _lp_rm_sm_lm(x, y, phi):
    xi = x - math.sin(phi)
    eta = y - 1.0 + math.cos(phi)
    rho = math.sqrt(xi * xi + eta * eta)
    theta = math.atan2(eta, xi)
    if rho >= 2.0:
        r = math.sqrt(rho * rho - 4.0)
        u = 2.0 - r
        t = mod2pi(theta + math.atan2(r, -2.0))
        v = mod2pi(phi - HALF_PI - t)
        if t >= -ZERO and u <= ZERO and v <= ZERO:
            return (t, u, v)
    return None


def _lp_rm_sm_rm(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho = math.sqrt(eta * eta + xi * xi)
    theta = math.atan2(xi, -eta)
    if rho >= 2.0:
        t = theta
        u = 2.0 - rho
        v = mod2pi(t + HALF_PI - phi)
        if t >= -ZERO and u <= ZERO and v <= ZERO:
            return (t, u, v)
    return None


def _lp_rm_s_lm_rp(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho = math.sqrt(xi * xi + eta * eta)
    if rho >= 2.0:
        u = 4.0 - math.sqrt(rho * rho - 4.0)
        if u <= ZERO:
            t = mod2pi(math.atan2((4.0 - u) * xi - 2.0 * eta, -2.0 * xi + (u - 4.0) * eta))
            v = mod2pi(t - phi)
            if t >= -ZERO and v >= -ZERO:
                return (t, u, v)
    return None


def rs_candidates(x, y, phi):
    """All feasible words for the normalized goal ``(x, y, phi)``.

    Returns a list of ``(word_id, signed_lengths)`` in a fixed order.
    """
    out = []
    add = out.append
    # CSC
    for fn, w_pos, w_ref in ((_lp_sp_lp, 14, 15), (_lp_sp_rp, 12, 13)):
        r = fn(x, y, phi)
        if r:
            add((w_pos, (r[0], r[1], r[2])))
        r = fn(-x, y, -phi)
        if r:
            add((w_pos, (-r[0], -r[1], -r[2])))
        r = fn(x, -y, -phi)
        if r:
            add((w_ref, (r[0], r[1], r[2])))
        r = fn(-x, -y, phi)
        if r:
            add((w_ref, (-r[0], -r[1], -r[2])))
    # CCC
    r = _lp_rm_l(x, y, phi)
    if r:
        add((0, (r[0], r[1], r[2])))
    r = _lp_rm_l(-x, y, -phi)
    if r:
        add((0, (-r[0], -r[1], -r[2])))
    r = _lp_rm_l(x, -y, -phi)
    if r:
        add((1, (r[0], r[1], r[2])))
    r = _lp_rm_l(-x, -y, phi)
    if r:
        add((1, (-r[0], -r[1], -r[2])))
    xb = x * math.cos(phi) + y * math.sin(phi)
    yb = x * math.sin(phi) - y * math.cos(phi)
    r = _lp_rm_l(xb, yb, phi)
    if r:
        add((0, (r[2], r[1], r[0])))
    r = _lp_rm_l(-xb, yb, -phi)
    if r:
        add((0, (-r[2], -r[1], -r[0])))
    r = _lp_rm_l(xb, -yb, -phi)
    if r:
        add((1, (r[2], r[1], r[0])))
    r = _lp_rm_l(-xb, -yb, phi)
    if r:
        add((1, (-r[2], -r[1], -r[0])))
    # CCCC
    r = _lp_rup_lum_rm(x, y, phi)
    if r:
        add((2, (r[0], r[1], -r[1], r[2])))
    r = _lp_rup_lum_rm(-x, y, -phi)
    if r:
        add((2, (-r[0], -r[1], r[1], -r[2])))
    r = _lp_rup_lum_rm(x, -y, -phi)
    if r:
        add((3, (r[0], r[1], -r[1], r[2])))
    r = _lp_rup_lum_rm(-x, -y, phi)
    if r:
        add((3, (-r[0], -r[1], r[1], -r[2])))
    r = _lp_rum_lum_rp(x, y, phi)
    if r:
        add((2, (r[0], r[1], r[1], r[2])))
    r = _lp_rum_lum_rp(-x, y, -phi)
    if r:
        add((2, (-r[0], -r[1], -r[1], -r[2])))
    r = _lp_rum_lum_rp(x, -y, -phi)
    if r:
        add((3, (r[0], r[1], r[1], r[2])))
    r = _lp_rum_lum_rp(-x, -y, phi)
    if r:
        add((3, (-r[0], -r[1], -r[1], -r[2])))
    # CCSC and its reverse CSCC
    for fn, w_pos, w_ref, wb_pos, wb_ref in (
        (_lp_rm_sm_lm, 4, 5, 6, 7),
        (_lp_rm_sm_rm, 8, 9, 10, 11),
    ):
        r = fn(x, y, phi)
        if r:
            add((w_pos, (r[0], -HALF_PI, r[1], r[2])))
        r = fn(-x, y, -phi)
        if r:
            add((w_pos, (-r[0], HALF_PI, -r[1], -r[2])))
        r = fn(x, -y, -phi)
        if r:
            add((w_ref, (r[0], -HALF_PI, r[1], r[2])))
        r = fn(-x, -y, phi)
        if r:
            add((w_ref, (-r[0], HALF_PI, -r[1], -r[2])))
        r = fn(xb, yb, phi)
        if r:
            add((wb_pos, (r[2], r[1], -HALF_PI, r[0])))
        r = fn(-xb, yb, -phi)
        if r:
            add((wb_pos, (-r[2], -r[1], HALF_PI, -r[0])))
        r = fn(xb, -yb, -phi)
        if r:
            add((wb_ref, (r[2], r[1], -HALF_PI, r[0])))
        r = fn(-xb, -yb, phi)
        if r:
            add((wb_ref, (-r[2], -r[1], HALF_PI, -r[0])))
    # CCSCC
    r = _lp_rm_s_lm_rp(x, y, phi)
    if r:
        add((16, (r[0], -HALF_PI, r[1], -HALF_PI, r[2])))
    r = _lp_rm_s_lm_rp(-x, y, -phi)
    if r:
        add((16, (-r[0], HALF_PI, -r[1], HALF_PI, -r[2])))
    r = _lp_rm_s_lm_rp(x, -y, -phi)
    if r:
        add((17, (r[0], -HALF_PI, r[1], -HALF_PI, r[2])))
    r = _lp_rm_s_lm_rp(-x, -y, phi)
    if r:
        add((17, (-r[0], HALF_PI, -r[1], HALF_PI, -r[2])))
    return out


def weighted_length(lengths, reverse_penalty):
    total = 0.0
    for u in lengths:
        if u < 0.0:
            total += -u * reverse_penalty
        else:
            total += u
    return total


def normalize_goal(x1, y1, t1, x2, y2, t2, turning_radius):
    dx = x2 - x1
    dy = y2 - y1
    c = math.cos(t1)
    s = math.sin(t1)
    return ((c * dx + s * dy) / turning_radius,
            (-s * dx + c * dy) / turning_radius,
            t2 - t1)


def rs_distance(x1, y1, t1, x2, y2, t2, turning_radius, reverse_penalty):
    """Weighted Reeds-Shepp length between two poses, in meters."""
    x, y, phi = normalize_goal(x1, y1, t1, x2, y2, t2, turning_radius)
    best = math.inf
    for _, lengths in rs_candidates(x, y, phi):
        w = weighted_length(lengths, reverse_penalty)
        if w < best:
            best = w
    return best * turning_radius


def rs_table_values(xs, ys, thetas, turning_radius, reverse_penalty):
    """Exact distances from every node ``(xs[i], ys[j], thetas[k])`` to the origin."""
    import numpy as np

    out = np.empty((len(xs), len(ys), len(thetas)), dtype=np.float64)
    for i in range(len(xs)):
        xi = float(xs[i])
        for j in range(len(ys)):
            yj = float(ys[j])
            for k in range(len(thetas)):
                out[i, j, k] = rs_distance(xi, yj, float(thetas[k]), 0.0, 0.0, 0.0,
                                           turning_radius, reverse_penalty)
    return out


def _snap(f):
    r = math.floor(f + 0.5)
    if abs(f - r) < 1e-9:
        return r
    return f


def trilinear(flat, x0, y0, hx, hy, nx, ny, nt, rx, ry, rt):
    """Interpolate the flattened ``(nx, ny, nt)`` table at ``(rx, ry, rt)``.

    Heading wraps at 2*pi. Caller guarantees ``(rx, ry)`` lies inside the
    table bounds and ``rt`` is already in [0, 2*pi).
    """
    fx = _snap((rx - x0) / hx)
    fy = _snap((ry - y0) / hy)
    ft = _snap(rt / (TWO_PI / nt))
    i = int(math.floor(fx))
    if i > nx - 2:
        i = nx - 2
    if i < 0:
        i = 0
    j = int(math.floor(fy))
    if j > ny - 2:
        j = ny - 2
    if j < 0:
        j = 0
    kf = math.floor(ft)
    tx = fx - i
    ty = fy - j
    tt = ft - kf
    k0 = int(kf) % nt
    k1 = (k0 + 1) % nt
    b00 = (i * ny + j) * nt
    b10 = b00 + ny * nt
    b01 = b00 + nt
    b11 = b10 + nt
    c00 = flat[b00 + k0] * (1.0 - tx) + flat[b10 + k0] * tx
    c10 = flat[b01 + k0] * (1.0 - tx) + flat[b11 + k0] * tx
    c01 = flat[b00 + k1] * (1.0 - tx) + flat[b10 + k1] * tx
    c11 = flat[b01 + k1] * (1.0 - tx) + flat[b11 + k1] * tx
    c0 = c00 * (1.0 - ty) + c10 * ty
    c1 = c01 * (1.0 - ty) + c11 * ty
    return c0 * (1.0 - tt) + c1 * tt
