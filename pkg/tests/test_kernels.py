import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monotest import _pykernels, kernels

_ck = pytest.importorskip("monotest._ckernels") if kernels.BACKEND == "cython" else None

TOL = 1e-12


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_switch():
    env = dict(os.environ, MONOTEST_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from monotest import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_collision_counts_by_hand():
    s = np.array([1, 1, 2, 3, 3, 3, 7])
    counts, pairs = _pykernels.interval_collisions(s, [1, 3, 4, 8], [3, 3, 7, 9])
    assert counts.tolist() == [6, 3, 1, 0]
    assert pairs.tolist() == [1 + 3, 3, 0, 0]


@pytest.mark.skipif(_ck is None, reason="compiled kernels not built")
@settings(max_examples=60)
@given(st.lists(st.integers(1, 40), max_size=200), st.integers(0, 2**31))
def test_backends_agree_on_collisions(samples, seed):
    r = np.random.default_rng(seed)
    s = np.sort(np.asarray(samples, dtype=np.int64))
    a = r.integers(1, 41, size=10)
    b = np.minimum(a + r.integers(0, 20, size=10), 40)
    for x, y in zip(_pykernels.interval_collisions(s, a, b), _ck.interval_collisions(s, a, b)):
        assert np.array_equal(np.asarray(x), np.asarray(y))


@pytest.mark.skipif(_ck is None, reason="compiled kernels not built")
@settings(max_examples=60)
@given(st.integers(1, 30), st.floats(1.0, 3.0), st.integers(0, 2**31))
def test_backends_agree_on_fixup(ell, r, seed):
    w = np.random.default_rng(seed).random(ell) ** 3
    w /= w.sum()
    ratios = np.full(max(ell - 1, 0), r)
    a = _pykernels.fixup_weights(w.copy(), ratios)
    b = _ck.fixup_weights(w.copy(), ratios)
    assert np.allclose(np.asarray(a), np.asarray(b), atol=TOL, rtol=0)
