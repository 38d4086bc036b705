"""Numba/numpy kernel agreement and backend selection."""

import numpy as np
import pytest

from currlab import nn
from currlab.nn import backend, kernels_numpy

numba_available = True
try:
    from currlab.nn import kernels_numba
except ImportError:  # pragma: no cover - numba should be installed
    numba_available = False

needs_numba = pytest.mark.skipif(not numba_available,
                                 reason="numba not installed")


@pytest.fixture()
def restore_backend():
    prev = backend.get_backend()
    yield
    backend.set_backend(prev)


def test_backend_selection(restore_backend):
    backend.set_backend("numpy")
    assert backend.get_backend() == "numpy"
    assert nn.kernels() is kernels_numpy
    with pytest.raises(ValueError):
        backend.set_backend("cuda")


@needs_numba
def test_backend_numba_selectable(restore_backend):
    backend.set_backend("numba")
    assert nn.kernels() is kernels_numba


@needs_numba
@pytest.mark.parametrize("seed", range(4))
def test_conv_forward_backward_agree(seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(3, 2, 8, 8))
    w = r.normal(size=(5, 2, 3, 3))
    b = r.normal(size=5)
    dy = r.normal(size=(3, 5, 8, 8))
    y_np = kernels_numpy.conv2d_forward(x, w, b)
    y_nb = kernels_numba.conv2d_forward(x, w, b)
    assert np.allclose(y_np, y_nb, rtol=1e-12, atol=1e-12)
    dx_np, dw_np, db_np = kernels_numpy.conv2d_backward(x, w, dy)
    dx_nb, dw_nb, db_nb = kernels_numba.conv2d_backward(x, w, dy)
    assert np.allclose(dx_np, dx_nb, rtol=1e-12, atol=1e-12)
    assert np.allclose(dw_np, dw_nb, rtol=1e-12, atol=1e-12)
    assert np.allclose(db_np, db_nb, rtol=1e-12, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("seed", range(4))
def test_maxpool_agree(seed):
    r = np.random.default_rng(seed + 50)
    x = r.normal(size=(3, 4, 8, 8))
    dy = r.normal(size=(3, 4, 4, 4))
    y_np, arg_np = kernels_numpy.maxpool2_forward(x)
    y_nb, arg_nb = kernels_numba.maxpool2_forward(x)
    assert np.allclose(y_np, y_nb)
    assert np.array_equal(arg_np, arg_nb)
    assert np.allclose(kernels_numpy.maxpool2_backward(arg_np, dy, 8, 8),
                       kernels_numba.maxpool2_backward(arg_nb, dy, 8, 8))


@needs_numba
def test_maxpool_tie_goes_to_first_occurrence():
    """All-equal windows: gradient must land on the top-left cell."""
    x = np.ones((1, 1, 4, 4))
    dy = np.ones((1, 1, 2, 2))
    for mod in (kernels_numpy, kernels_numba):
        y, arg = mod.maxpool2_forward(x)
        assert np.all(y == 1.0)
        assert np.all(arg == 0)
        dx = mod.maxpool2_backward(arg, dy, 4, 4)
        expect = np.zeros((1, 1, 4, 4))
        expect[0, 0, ::2, ::2] = 1.0
        assert np.array_equal(dx, expect)


@needs_numba
def test_full_model_grads_agree_across_backends(restore_backend):
    arch = nn.ArchSpec("small_conv", 10, conv_channels=(4, 8),
                       kernel_size=3, pool=(True, True), in_shape=(1, 8, 8))
    model = nn.init_model(arch, 4)
    r = np.random.default_rng(9)
    batch = nn.Batch(np.arange(6), r.normal(size=(6, 64)),
                     r.integers(0, 10, size=6))
    backend.set_backend("numpy")
    loss_np, _, g_np = nn.loss_and_grad(model, batch)
    backend.set_backend("numba")
    loss_nb, _, g_nb = nn.loss_and_grad(model, batch)
    assert loss_np == pytest.approx(loss_nb, rel=1e-12)
    assert np.allclose(g_np, g_nb, rtol=1e-10, atol=1e-12)


def test_env_var_selects_backend(tmp_path):
    import subprocess
    import sys
    code = ("import currlab.nn as nn; "
            "print(nn.get_backend())")
    out = subprocess.run([sys.executable, "-c", code],
                         env={"PATH": "/usr/bin:/bin",
                              "CURRLAB_BACKEND": "numpy"},
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "numpy"
