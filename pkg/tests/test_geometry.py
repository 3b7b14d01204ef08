import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvlab.errors import GeometryError
from curvlab.geometry import (MetricChart, christoffels, curvature_batch, curvature_point,
                              sectional)

INTRINSIC = ["flat_t2", "flat_t3", "warped_torus", "conformal_torus", "sphere_s2", "sphere_s3",
             "sphere_s4", "s2_x_s1", "torus_circle", "warped_t3", "torus_of_revolution",
             "clifford_torus"]


# -- independent finite-difference oracle on metric values only -------------

def _fd_christoffel(chart, x, h=1e-5):
    n = chart.dim
    dg = np.zeros((n, n, n))  # dg[l, i, j] = ∂_l g_ij
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dg[l] = (chart.metric_at(x + e) - chart.metric_at(x - e)) / (2 * h)
    # indexed [i, j, l]: ∂_i g_jl + ∂_j g_il − ∂_l g_ij
    A = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
    return 0.5 * np.einsum("kl,ijl->kij", np.linalg.inv(chart.metric_at(x)), A)


def _fd_riemann(chart, x, h=1e-4):
    n = chart.dim
    gam = _fd_christoffel(chart, x)
    dgam = np.zeros((n,) + gam.shape)  # dgam[m, k, i, j] = ∂_m Γ^k_ij
    for m in range(n):
        e = np.zeros(n)
        e[m] = h
        dgam[m] = (_fd_christoffel(chart, x + e) - _fd_christoffel(chart, x - e)) / (2 * h)
    # R(∂i,∂j)∂k = R^l_ijk ∂_l
    R = (np.einsum("iljk->ijkl", dgam) - np.einsum("jlik->ijkl", dgam)
         + np.einsum("mjk,lim->ijkl", gam, gam) - np.einsum("mik,ljm->ijkl", gam, gam))
    return np.einsum("ijkm,ml->ijkl", R, chart.metric_at(x))


def test_fd_oracle_christoffel_formula():
    # sanity of the oracle itself on the sphere closed form
    chart = MetricChart.from_sources("s2", ["1", "sin(x1)^2"], [[0.3, 2.8], [0, 6.2]])
    x = np.array([0.9, 1.0])
    gam = _fd_christoffel(chart, x)
    assert gam[0, 1, 1] == pytest.approx(-math.sin(0.9) * math.cos(0.9), abs=1e-8)
    assert gam[1, 0, 1] == pytest.approx(1 / math.tan(0.9), abs=1e-8)


@pytest.mark.parametrize("name", ["warped_t3", "sphere_s3", "conformal_torus", "s2_x_s1"])
def test_curvature_matches_fd_oracle(registry, name):
    chart = registry.chart(name)
    for x in chart.sample(3, seed=4):
        cp = curvature_point(chart, x)
        np.testing.assert_allclose(cp.gamma, _fd_christoffel(chart, x), atol=1e-7)
        np.testing.assert_allclose(cp.riemann, _fd_riemann(chart, x), atol=2e-5)


# -- frozen closed forms ----------------------------------------------------

def test_euclidean_christoffels_vanish(registry):
    assert np.all(christoffels(registry.chart("r3"), [0.1, 0.2, 0.3]) == 0)


@pytest.mark.parametrize("x1", [0.5, 1.2, 2.4])
def test_sphere_christoffels(registry, x1):
    gam = christoffels(registry.chart("sphere_s2"), [x1, 1.0])
    assert gam[0, 1, 1] == pytest.approx(-math.sin(x1) * math.cos(x1), abs=1e-14)
    assert gam[1, 0, 1] == pytest.approx(math.cos(x1) / math.sin(x1), abs=1e-14)
    assert gam[1, 1, 0] == gam[1, 0, 1]


def test_torus_christoffel(registry):
    x1 = 0.7
    gam = christoffels(registry.chart("warped_torus"), [x1, 2.0])
    assert gam[0, 1, 1] == pytest.approx((2 + math.cos(x1)) * math.sin(x1), abs=1e-14)


def test_euclidean_curvature_vanishes(registry):
    cp = curvature_point(registry.chart("r4"), [1.0, 2.0, -3.0, 0.5])
    assert np.all(cp.riemann == 0) and cp.scalar == 0


@pytest.mark.parametrize("name,dim", [("sphere_s2", 2), ("sphere_s3", 3), ("sphere_s4", 4)])
def test_round_sphere_scalar(registry, name, dim):
    chart = registry.chart(name)
    batch = curvature_batch(chart, chart.sample(20, seed=1))
    np.testing.assert_allclose(batch.scalar, dim * (dim - 1), atol=1e-10)


@pytest.mark.parametrize("x1", [math.pi / 2, 0.3, 2.0, 4.0])
def test_surface_of_revolution_gauss_curvature(registry, x1):
    cp = curvature_point(registry.chart("warped_torus"), [x1, 1.0])
    K = sectional(cp, [1, 0], [0, 1])
    assert K == pytest.approx(math.cos(x1) / (2 + math.cos(x1)), abs=1e-14)


def test_product_mixed_plane_is_flat(registry):
    cp = curvature_point(registry.chart("s2_x_s1"), [1.0, 2.0, 3.0])
    assert sectional(cp, [1, 0, 0], [0, 0, 1]) == pytest.approx(0.0, abs=1e-14)
    assert sectional(cp, [0, 1, 0], [0, 0, 1]) == pytest.approx(0.0, abs=1e-14)


# -- invariants -------------------------------------------------------------

@pytest.mark.parametrize("name", INTRINSIC)
def test_curvature_symmetries(registry, name):
    chart = registry.chart(name)
    b = curvature_batch(chart, chart.sample(100, seed=2))
    R = b.riemann
    scale = max(1.0, float(np.max(np.abs(R))))
    assert np.max(np.abs(R + R.transpose(0, 2, 1, 3, 4))) <= 1e-9 * scale
    assert np.max(np.abs(R + R.transpose(0, 1, 2, 4, 3))) <= 1e-9 * scale
    assert np.max(np.abs(R - R.transpose(0, 3, 4, 1, 2))) <= 1e-9 * scale
    bianchi = R + R.transpose(0, 2, 3, 1, 4) + R.transpose(0, 3, 1, 2, 4)
    assert np.max(np.abs(bianchi)) <= 1e-9 * scale
    assert np.max(np.abs(b.ricci - b.ricci.transpose(0, 2, 1))) <= 1e-9 * scale
    trace = np.einsum("pij,pij->p", b.ginv, b.ricci)
    np.testing.assert_allclose(b.scalar, trace, rtol=1e-10, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6),
       st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_sectional_invariant_under_basis_change(vec, mix):
    chart = MetricChart.from_sources("wt3", ["1", "(2+cos(x1))^2", "(2+sin(x1)+0.5*cos(x2))^2"],
                                     [[0, 6.28]] * 3, [True] * 3)
    cp = curvature_point(chart, [0.4, 1.3, 2.2])
    X, Y = np.array(vec[:3]), np.array(vec[3:])
    a, b, c, d = mix
    gram = cp.inner(X, X) * cp.inner(Y, Y) - cp.inner(X, Y) ** 2
    det = a * d - b * c
    if gram < 1e-3 or abs(det) < 1e-2:
        return
    K = sectional(cp, X, Y)
    K2 = sectional(cp, a * X + b * Y, c * X + d * Y)
    assert K2 == pytest.approx(K, rel=1e-9, abs=1e-10)


def test_degenerate_plane_raises(registry):
    cp = curvature_point(registry.chart("sphere_s2"), [1.0, 1.0])
    with pytest.raises(GeometryError):
        sectional(cp, [1, 0], [2, 0])


# -- chart validation -------------------------------------------------------

def test_asymmetric_metric_rejected():
    with pytest.raises(GeometryError):
        MetricChart.from_sources("bad", [["1", "x1"], ["0", "1"]], [[0, 1], [0, 1]])


def test_non_positive_metric_rejected():
    chart = MetricChart.from_sources("bad", ["1", "x1 - 0.5"], [[0, 1], [0, 1]])
    with pytest.raises(GeometryError):
        chart.metric_at([0.2, 0.5])


def test_boundary_points_rejected(registry):
    chart = registry.chart("sphere_s2")
    with pytest.raises(GeometryError):
        chart.check_points([0.3, 1.0])
    # periodic axes accept any coordinate
    chart.check_points([1.0, 100.0])


def test_periodicity_checked():
    chart = MetricChart.from_sources("np", ["1", "(2+cos(0.5*x1))^2"],
                                     [[0, 2 * math.pi], [0, 2 * math.pi]], [True, True])
    with pytest.raises(GeometryError):
        chart.check_periodic()


def test_grid_requires_periodic(registry):
    with pytest.raises(GeometryError):
        registry.chart("sphere_s2").grid(8)
    pts, cell = registry.chart("flat_t2").grid(8)
    assert pts.shape == (64, 2)
    assert cell * 64 == pytest.approx(4 * math.pi ** 2)
