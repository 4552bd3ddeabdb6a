import os
import subprocess
import sys

import numpy as np
import pytest

from okselect import _pycore, core

_core = pytest.importorskip("okselect._core")


def test_compiled_backend_is_selected():
    assert core.BACKEND == "cython"


def test_pure_python_override():
    env = dict(os.environ, OKSELECT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from okselect import core; print(core.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_expansion_predict_agrees():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (64, 5))
    coefs = rng.normal(size=64)
    x = rng.uniform(-1, 1, 5)
    for n in (0, 1, 17, 64):
        a = _core.expansion_predict(pts, coefs, n, x, 0.7)
        b = _pycore.expansion_predict(pts, coefs, n, x, 0.7)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-14)


def test_gram_row_agrees():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, (40, 3))
    x = rng.uniform(-1, 1, 3)
    a, b = np.zeros(40), np.zeros(40)
    _core.gram_row(pts, 30, x, 2.0, a)
    _pycore.gram_row(pts, 30, x, 2.0, b)
    np.testing.assert_allclose(a, b, rtol=1e-13)
    assert not a[30:].any()


def test_rff_features_agree():
    rng = np.random.default_rng(2)
    W = rng.normal(size=(400, 10))
    b = rng.uniform(0, 2 * np.pi, 400)
    x = rng.uniform(-1, 1, 10)
    u, v = np.empty(400), np.empty(400)
    _core.rff_features(W, b, x, 0.1, u)
    _pycore.rff_features(W, b, x, 0.1, v)
    np.testing.assert_allclose(u, v, rtol=1e-10, atol=1e-13)
