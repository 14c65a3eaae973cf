import math
import random

import numpy as np
import pytest

from carchase import _pykernels, kernels


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")


def _compiled():
    try:
        from carchase import _ckernels
    except ImportError:
        pytest.skip("compiled extension not built")
    return _ckernels


def test_compiled_matches_python_bitwise():
    ck = _compiled()
    rng = random.Random(11)
    for _ in range(3000):
        args = [rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-4, 4),
                rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-4, 4),
                rng.choice([1.0, 2.0, 3.5]), rng.choice([1.0, 1.5])]
        assert ck.rs_distance(*args) == _pykernels.rs_distance(*args)


def test_compiled_table_and_trilinear_match():
    ck = _compiled()
    xs = np.linspace(-6, 6, 7)
    ys = np.linspace(-6, 6, 5)
    ts = 2 * math.pi * np.arange(8) / 8
    a = np.asarray(ck.rs_table_values(xs, ys, ts, 2.0, 1.0))
    b = np.asarray(_pykernels.rs_table_values(xs, ys, ts, 2.0, 1.0))
    assert np.array_equal(a, b)
    flat = np.ascontiguousarray(a).ravel()
    rng = random.Random(3)
    for _ in range(500):
        q = (rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(0, 2 * math.pi))
        args = (-6.0, -6.0, 2.0, 3.0, 7, 5, 8) + q
        assert ck.trilinear(flat, *args) == _pykernels.trilinear(flat.tolist(), *args)


def test_trilinear_reproduces_nodes_and_wraps_heading():
    vals = np.arange(2 * 2 * 4, dtype=float).reshape(2, 2, 4)
    flat = vals.ravel().tolist()
    for i in range(2):
        for j in range(2):
            for k in range(4):
                v = _pykernels.trilinear(flat, 0.0, 0.0, 1.0, 1.0, 2, 2, 4, float(i), float(j), k * math.pi / 2)
                assert v == vals[i, j, k]
    mid = _pykernels.trilinear(flat, 0.0, 0.0, 1.0, 1.0, 2, 2, 4, 0.0, 0.0, 7 * math.pi / 4)
    assert mid == pytest.approx(0.5 * (vals[0, 0, 3] + vals[0, 0, 0]))
