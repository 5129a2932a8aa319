import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from camlens import kernels
from camlens.resample import GaussianParams, degrade_gaussian, resize_bicubic
from camlens.srnet import SrModel

needs_ext = pytest.mark.skipif(not kernels.compiled_available(), reason="compiled extension not built")
PY = kernels.get_backend("python")


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 30), st.integers(1, 25), st.integers(1, 6),
       st.integers(1, 5))
def test_apply_taps_bit_identical(seed, A, n_in, n_out, T, B):
    r = np.random.default_rng(seed)
    src = r.normal(size=(A, n_in, B))
    idx = r.integers(0, n_in, size=(n_out, T)).astype(np.intp)
    w = r.normal(size=(n_out, T))
    C = kernels.get_backend("compiled")
    np.testing.assert_array_equal(C.apply_taps(src, idx, w), PY.apply_taps(src, idx, w))


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("shape", [(1, 1, 1, 1), (2, 3, 4, 5), (3, 2, 1, 7), (4, 1, 9, 2)])
def test_im2col_col2im_bit_identical(rng, dtype, shape):
    C = kernels.get_backend("compiled")
    x = rng.normal(size=shape).astype(dtype)
    np.testing.assert_array_equal(C.im2col3x3(x), PY.im2col3x3(x))
    cols = rng.normal(size=(shape[0], 9) + shape[1:]).astype(dtype)
    np.testing.assert_array_equal(C.col2im3x3(cols), PY.col2im3x3(cols))


@pytest.mark.parametrize("name", ["compiled", "python"])
def test_tap_index_checked(name):
    if name == "compiled" and not kernels.compiled_available():
        pytest.skip("compiled extension not built")
    B = kernels.get_backend(name)
    with pytest.raises(IndexError):
        B.apply_taps(np.zeros((1, 3, 1)), np.array([[3]], dtype=np.intp), np.ones((1, 1)))


def test_col2im_is_adjoint_of_im2col(rng):
    x = rng.normal(size=(2, 3, 5, 4))
    y = rng.normal(size=(2, 9, 3, 5, 4))
    for B in {kernels.BACKEND, "python"}:
        K = kernels.get_backend(B)
        assert np.sum(K.im2col3x3(x) * y) == pytest.approx(np.sum(x * K.col2im3x3(y)), rel=1e-12)


@needs_ext
def test_pipelines_identical_across_backends(rng, monkeypatch):
    img = rng.uniform(size=(58, 87, 3))
    model = SrModel.init(3, 3, 5, seed=1, zero_last=False)
    x = rng.random((1, 3, 12, 12)).astype(np.float32)
    ref = (resize_bicubic(img, 40, 33), degrade_gaussian(img, GaussianParams(7, 1.55), 2.9), model.forward(x))
    for name in ("apply_taps", "im2col3x3", "col2im3x3"):
        monkeypatch.setattr(kernels, name, getattr(PY, name))
    got = (resize_bicubic(img, 40, 33), degrade_gaussian(img, GaussianParams(7, 1.55), 2.9), model.forward(x))
    for a, b in zip(ref, got):
        np.testing.assert_array_equal(a, b)


def test_env_var_forces_fallback():
    env = dict(os.environ, CAMLENS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import camlens; print(camlens.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
