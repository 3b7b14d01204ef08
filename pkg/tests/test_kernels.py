import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvlab import kernels
from curvlab.kernels import backends

BACKENDS = backends()


def _tensor(rng, d):
    # algebraic curvature tensor built from symmetric forms: R = Σ (A∧A)
    R = np.zeros((d, d, d, d))
    for _ in range(3):
        A = rng.standard_normal((d, d))
        A = A + A.T
        R += (np.einsum("il,jk->ijkl", A, A) - np.einsum("ik,jl->ijkl", A, A))
    return R


def _frame(rng, d, s):
    return np.linalg.qr(rng.standard_normal((d, s)))[0]


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_backends_agree(d, seed):
    rng = np.random.default_rng(seed)
    s = int(rng.integers(2, d + 1))
    T = _tensor(rng, d)
    E = _frame(rng, d, s)
    W = 1.0 - np.eye(s)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    assert cy.objective(T, E, W) == pytest.approx(py.objective(T, E, W), rel=1e-12, abs=1e-12)
    fp, gp = py.objective_grad(T, E, W)
    fc, gc = cy.objective_grad(T, E, W)
    np.testing.assert_allclose(gc, gp, rtol=1e-11, atol=1e-11)
    Es = np.stack([_frame(rng, d, s) for _ in range(9)])
    np.testing.assert_allclose(cy.objective_batch(T, Es, W), py.objective_batch(T, Es, W),
                               rtol=1e-11, atol=1e-11)
    np.testing.assert_allclose(cy.retract(E + 0.1), py.retract(E + 0.1), atol=1e-13)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_gradient_matches_fd(name):
    k = BACKENDS[name]
    rng = np.random.default_rng(11)
    T = _tensor(rng, 4)
    E = _frame(rng, 4, 3)
    W = 1.0 - np.eye(3)
    _, G = k.objective_grad(T, E, W)
    h = 1e-6
    fd = np.zeros_like(E)
    for idx in np.ndindex(E.shape):
        Ep, Em = E.copy(), E.copy()
        Ep[idx] += h
        Em[idx] -= h
        fd[idx] = (k.objective(T, Ep, W) - k.objective(T, Em, W)) / (2 * h)
    np.testing.assert_allclose(G, fd, rtol=1e-6, atol=1e-7)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_retract_is_orthonormal(name):
    Y = np.random.default_rng(2).standard_normal((5, 3))
    Q = BACKENDS[name].retract(Y)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-13)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_ascent_improves_and_stays_on_stiefel(name):
    k = BACKENDS[name]
    rng = np.random.default_rng(5)
    T = _tensor(rng, 5)
    W = 1.0 - np.eye(2)
    E0 = _frame(rng, 5, 2)
    E, f, gnorm, iters, conv = k.ascend(T, E0, W, 1.0, 500, 1e-9)
    assert f >= k.objective(T, E0, W) - 1e-12
    np.testing.assert_allclose(E.T @ E, np.eye(2), atol=1e-12)
    # stationarity up to the resolution of f in double precision
    assert gnorm <= 1e-5 * np.abs(T).max()
    Emin, fmin, *_ = k.ascend(T, E0, W, -1.0, 500, 1e-9)
    assert fmin <= k.objective(T, E0, W) + 1e-12


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
def test_ascent_backends_follow_same_path():
    rng = np.random.default_rng(8)
    T = _tensor(rng, 4)
    W = 1.0 - np.eye(3)
    E0 = rng.standard_normal((4, 3))
    a = BACKENDS["python"].ascend(T, E0, W, 1.0, 200, 1e-8)
    b = BACKENDS["cython"].ascend(T, E0, W, 1.0, 200, 1e-8)
    assert a[1] == pytest.approx(b[1], rel=1e-10)
    np.testing.assert_allclose(a[0], b[0], atol=1e-8)


def test_env_forces_python_backend(monkeypatch):
    import importlib
    monkeypatch.setenv("CURVLAB_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("CURVLAB_PURE_PYTHON")
        importlib.reload(kernels)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_ascent_stops_when_stalled(name):
    # a tensor with large entries stalls above the tolerance; the loop must not spin to max_iter
    rng = np.random.default_rng(0)
    for d, s in [(4, 3), (6, 4), (6, 6)]:
        T = _tensor(rng, d)
        E0 = _frame(rng, d, s)
        W = 1.0 - np.eye(s)
        E, f, gnorm, iters, conv = BACKENDS[name].ascend(T, E0, W, 1.0, 500, 1e-12)
        assert iters < 500
        assert gnorm <= 1e-5 * np.max(np.abs(T))
