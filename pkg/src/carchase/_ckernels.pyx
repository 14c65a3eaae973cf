# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Reeds-Shepp and table kernels.

Same arithmetic, in the same order, as ``_pykernels`` so results agree to the
last bit. Do not build with -ffast-math.
"""
import numpy as np

BACKEND = "compiled"

include "_rscore.pxi"


def rs_distance(double x1, double y1, double t1, double x2, double y2, double t2,
                double turning_radius, double reverse_penalty):
    """Weighted Reeds-Shepp length between two poses, in meters."""
    return _rs_distance(x1, y1, t1, x2, y2, t2, turning_radius, reverse_penalty)


def rs_table_values(xs, ys, thetas, double turning_radius, double reverse_penalty):
    """Exact distances from every node ``(xs[i], ys[j], thetas[k])`` to the origin."""
    cdef double[::1] vx = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] vy = np.ascontiguousarray(ys, dtype=np.float64)
    cdef double[::1] vt = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef Py_ssize_t nx = vx.shape[0], ny = vy.shape[0], nt = vt.shape[0]
    out = np.empty((nx, ny, nt), dtype=np.float64)
    cdef double[:, :, ::1] vo = out
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nt):
                    vo[i, j, k] = _rs_distance(vx[i], vy[j], vt[k], 0.0, 0.0, 0.0,
                                               turning_radius, reverse_penalty)
    return out


def trilinear(const double[::1] flat, double x0, double y0, double hx, double hy,
              int nx, int ny, int nt, double rx, double ry, double rt):
    """Interpolate the flattened ``(nx, ny, nt)`` table; heading wraps at 2*pi."""
    return _trilinear(&flat[0], x0, y0, hx, hy, nx, ny, nt, rx, ry, rt)
