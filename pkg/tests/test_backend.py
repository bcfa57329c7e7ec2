import numpy as np
import pytest

from fopid_avr import BACKEND, _backend, _kernels_py

try:
    from fopid_avr import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def _system(n, p, seed):
    rng = np.random.default_rng(seed)
    phi = np.eye(n) * 0.99 + 0.001 * rng.normal(size=(n, n))
    return (
        np.ascontiguousarray(phi),
        rng.normal(size=n),
        np.ascontiguousarray(rng.normal(size=(p, n))),
        rng.normal(size=p),
        rng.normal(size=500),
        rng.normal(size=n),
    )


def test_backend_selected():
    assert BACKEND in ("cython", "python")
    assert _backend.BACKEND == BACKEND


@needs_ext
@pytest.mark.parametrize("n,p", [(0, 1), (1, 1), (4, 3), (9, 2)])
def test_propagate_agrees(n, p):
    args = _system(n, p, n + p)
    y1, x1, b1 = compiled.propagate(*args, 1e12)
    y2, x2, b2 = _kernels_py.propagate(*args, 1e12)
    np.testing.assert_allclose(y1, y2, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(x1, x2, rtol=1e-12, atol=1e-12)
    assert b1 == b2 == -1


@needs_ext
def test_divergence_index_agrees():
    phi = np.array([[1.5]])
    args = (phi, np.ones(1), np.ones((1, 1)), np.zeros(1), np.ones(200), np.zeros(1), 1e6)
    assert compiled.propagate(*args)[2] == _kernels_py.propagate(*args)[2] >= 0


@needs_ext
def test_gl_convolve_agrees():
    rng = np.random.default_rng(3)
    f, w = rng.normal(size=1000), rng.normal(size=1000)
    np.testing.assert_allclose(compiled.gl_convolve(f, w), _kernels_py.gl_convolve(f, w), rtol=1e-9, atol=1e-9)


@needs_ext
def test_read_only_inputs_accepted():
    args = _system(3, 1, 0)
    for a in args:
        a.setflags(write=False)
    compiled.propagate(*args, 1e12)
