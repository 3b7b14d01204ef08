import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvlab.adapted import (DistributionSet, adapted_frame, fundamental_data, ricci_q,
                             shape_operator)
from curvlab.errors import GeometryError
from curvlab.geometry import MetricChart, curvature_point

SETS = [("flat_t3", ("t3_e1", "t3_e2", "t3_e3")), ("warped_torus", ("wt_line",)),
        ("conformal_torus", ("ct_tilted",)), ("torus_circle", ("tc_e1", "tc_e2", "tc_e3")),
        ("s2_x_s1", ("s2s1_sphere",)), ("warped_t3", ("wt3_e2",)),
        ("torus_circle", ("tc_plane",))]


def _ds(registry, names):
    return registry.distribution_set(names)


# -- frames -----------------------------------------------------------------

def test_flat_frame_is_coordinate_basis(registry):
    af = adapted_frame(_ds(registry, ("t3_e1", "t3_e2", "t3_e3")), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(af.vectors[0], np.eye(3))


@pytest.mark.parametrize("x1", [0.4, math.pi / 2, 2.5])
def test_normalized_frames(x1):
    torus = MetricChart.from_sources("t", ["1", "(2+cos(x1))^2"], [[0, 2 * math.pi]] * 2,
                                     [True, True])
    af = adapted_frame(DistributionSet.from_sources(torus, {"d": [["0", "1"]]}), [x1, 1.0])
    np.testing.assert_allclose(af.block(0)[0, 0], [0.0, 1 / (2 + math.cos(x1))], atol=1e-15)
    sphere = MetricChart.from_sources("s", ["1", "sin(x1)^2"], [[0.3, 2.8], [0, 2 * math.pi]],
                                      [False, True])
    af = adapted_frame(DistributionSet.from_sources(sphere, {"d": [["0", "1"]]}), [x1, 1.0])
    np.testing.assert_allclose(af.block(0)[0, 0], [0.0, 1 / math.sin(x1)], atol=1e-15)


@pytest.mark.parametrize("chart,names", SETS)
def test_frames_orthonormal_and_adapted(registry, chart, names):
    ds = _ds(registry, names)
    x = registry.chart(chart).sample(40, seed=9)
    af = adapted_frame(ds, x)
    E, g = af.vectors, af.metric.v
    G = np.einsum("pai,pij,pbj->pab", E, g, E)
    assert np.max(np.abs(G - np.eye(ds.chart.dim))) <= 1e-10
    spans = ds.span_jets(x, order=0)
    for i, span in enumerate(spans):
        # each declared spanning field lies in its block
        block = af.block(i)
        coef = np.einsum("pai,pij,pmj->pam", block, g, span.v)
        resid = span.v - np.einsum("pam,pai->pmi", coef, block)
        assert np.max(np.abs(resid)) <= 1e-10


@pytest.mark.parametrize("chart,names", SETS[:4])
def test_frame_derivatives_match_fd(registry, chart, names):
    ds = _ds(registry, names)
    x0 = registry.chart(chart).sample(2, seed=3)
    af = adapted_frame(ds, x0)
    h = 1e-6
    for k in range(ds.chart.dim):
        e = np.zeros(ds.chart.dim)
        e[k] = h
        fd = (adapted_frame(ds, x0 + e).vectors - adapted_frame(ds, x0 - e).vectors) / (2 * h)
        np.testing.assert_allclose(af.frame.d[..., k], fd, atol=1e-8)


def test_rank_deficiency_raises(registry):
    chart = registry.chart("flat_t2")
    ds = DistributionSet.from_sources(chart, {"d": [["1", "0"], ["2", "0"]]})
    with pytest.raises(GeometryError):
        adapted_frame(ds, [1.0, 1.0])


def test_non_orthogonal_declaration_raises(registry):
    chart = registry.chart("flat_t2")
    ds = DistributionSet.from_sources(chart, {"a": [["1", "0"]], "b": [["1", "1"]]})
    with pytest.raises(GeometryError):
        adapted_frame(ds, [1.0, 1.0])


# -- fundamental data -------------------------------------------------------

def test_flat_splitting_is_trivial(registry):
    ds = _ds(registry, ("t3_e1", "t3_e2", "t3_e3"))
    fd = fundamental_data(ds, registry.chart("flat_t3").sample(10, seed=1))
    for b in range(3):
        sp = fd.split([b])
        for key, val in sp.norms.items():
            assert np.all(val == 0), key
        assert np.all(sp.Q == 0)


def test_torus_meridian_mean_curvatures(registry):
    ds = _ds(registry, ("wt_meridian",))
    sp = fundamental_data(ds, [math.pi / 2, 1.0]).split([0])
    assert np.sqrt(sp.norms["H"][0]) == pytest.approx(0.0, abs=1e-15)
    assert np.sqrt(sp.norms["H_perp"][0]) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("x1", [0.3, 1.0, 2.0, 4.0])
def test_torus_meridian_closed_form(registry, x1):
    sp = fundamental_data(_ds(registry, ("wt_meridian",)), [x1, 0.5]).split([0])
    assert np.sqrt(sp.norms["H_perp"][0]) == pytest.approx(
        abs(math.sin(x1)) / (2 + math.cos(x1)), abs=1e-14)


@pytest.mark.parametrize("chart,names", SETS)
def test_tensor_symmetries(registry, chart, names):
    ds = _ds(registry, names)
    fd = fundamental_data(ds, registry.chart(chart).sample(30, seed=5))
    for b in range(len(ds.names)):
        sp = fd.split(range(fd.frame.blocks[b].start, fd.frame.blocks[b].stop))
        assert np.max(np.abs(sp.h - np.swapaxes(sp.h, 1, 2))) <= 1e-9
        assert np.max(np.abs(sp.T + np.swapaxes(sp.T, 1, 2))) <= 1e-9
        assert np.max(np.abs(sp.H - np.einsum("paac->pc", sp.h))) <= 1e-10
        if ds.ranks[b] == 1:
            assert np.all(sp.T == 0)
        q = sp.norms
        expected = q["h"] + q["h_perp"] - q["H"] - q["H_perp"] - q["T"] - q["T_perp"]
        np.testing.assert_array_equal(sp.Q, expected)


@pytest.mark.parametrize("chart,names", SETS)
def test_frame_choice_independence(registry, chart, names):
    ds = _ds(registry, names)
    x = registry.chart(chart).sample(12, seed=6)
    alt = ds.recombined(np.random.default_rng(17))
    fd, fd2 = fundamental_data(ds, x), fundamental_data(alt, x)
    for b in range(len(ds.names)):
        idx = range(fd.frame.blocks[b].start, fd.frame.blocks[b].stop)
        s1, s2 = fd.split(idx), fd2.split(idx)
        for key in s1.norms:
            np.testing.assert_allclose(s1.norms[key], s2.norms[key], atol=1e-8)
        np.testing.assert_allclose(s1.Q, s2.Q, atol=1e-8)
        np.testing.assert_allclose(fd.div(s1.H_field + s1.H_perp_field),
                                   fd2.div(s2.H_field + s2.H_perp_field), atol=1e-8)


def test_divergence_matches_coordinate_formula(registry):
    # Div X = (1/√g) ∂_i(√g X^i) checked by finite differences
    chart = registry.chart("warped_t3")
    ds = _ds(registry, ("wt3_e1", "wt3_e2", "wt3_e3"))
    x0 = chart.sample(3, seed=8)
    fd = fundamental_data(ds, x0)
    X = fd.split([0]).H_perp_field
    div = fd.div(X)

    def sqrtg_X(p):
        f = fundamental_data(ds, p[None, :], order=1).split([0]).H_perp_field.v[0]
        return math.sqrt(np.linalg.det(chart.metric_at(p))) * f

    h = 1e-5
    for p, dv in zip(x0, div):
        acc = 0.0
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            acc += (sqrtg_X(p + e)[i] - sqrtg_X(p - e)[i]) / (2 * h)
        assert dv == pytest.approx(acc / math.sqrt(np.linalg.det(chart.metric_at(p))), abs=1e-7)


# -- shape operator ---------------------------------------------------------

def test_flat_shape_operator_vanishes(registry):
    A, sig = shape_operator(_ds(registry, ("t2_e2",)), [1.0, 2.0])
    assert np.all(A == 0)
    np.testing.assert_array_equal(sig, [1.0, 0.0])


@pytest.mark.parametrize("x1", [math.pi / 2, 1.0, 2.2])
def test_torus_circle_leaves(x1):
    torus = MetricChart.from_sources("t", ["1", "(2+cos(x1))^2"], [[0, 2 * math.pi]] * 2,
                                     [True, True])
    _, sig = shape_operator(DistributionSet.from_sources(torus, {"leaf": [["0", "1"]]}),
                            [x1, 0.3])
    assert abs(sig[1]) == pytest.approx(abs(math.sin(x1)) / (2 + math.cos(x1)), abs=1e-14)


def test_equator_is_geodesic(registry):
    sphere = registry.chart("sphere_s2")
    ds = DistributionSet.from_sources(sphere, {"lat": [["0", "1"]]})
    _, sig = shape_operator(ds, [math.pi / 2, 0.7])
    assert sig[1] == pytest.approx(0.0, abs=1e-15)
    _, sig = shape_operator(ds, [1.0, 0.7])
    assert abs(sig[1]) == pytest.approx(abs(math.cos(1.0) / math.sin(1.0)), abs=1e-14)


def test_shape_operator_requires_corank_one(registry):
    with pytest.raises(GeometryError):
        shape_operator(_ds(registry, ("s2s1_theta",)), [1.0, 1.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.4, 2.7), st.floats(0, 6.2), st.floats(0, 6.2))
def test_sigma2_from_characteristic_polynomial(a, b, c):
    chart = MetricChart.from_sources("s3", ["1", "sin(x1)^2", "sin(x1)^2*sin(x2)^2"],
                                     [[0.3, 2.84], [0.3, 2.84], [0, 2 * math.pi]],
                                     [False, False, True])
    ds = DistributionSet.from_sources(chart, {"leaf": [["0", "1", "0"], ["0", "0", "1"]]})
    b = min(max(b, 0.4), 2.7)
    A, sig = shape_operator(ds, [a, b, c])
    tr = np.trace(A)
    assert sig[1] == pytest.approx(tr, abs=1e-12)
    assert sig[2] == pytest.approx(0.5 * (tr * tr - np.trace(A @ A)), abs=1e-12)


# -- Ricci_q ----------------------------------------------------------------

def test_ricci_q_examples(registry):
    cp = curvature_point(registry.chart("r3"), [0.0, 0.0, 0.0])
    assert ricci_q(cp, np.eye(3)) == 0.0
    cp = curvature_point(registry.chart("sphere_s3"), [1.0, 1.2, 0.5])
    from curvlab.geometry import orthonormal_basis
    V = orthonormal_basis(cp.g)
    assert ricci_q(cp, V) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("name", ["warped_t3", "s2_x_s1", "torus_circle"])
def test_ricci_q_top_degree_is_ricci(registry, name):
    chart = registry.chart(name)
    from curvlab.geometry import orthonormal_basis
    for x in chart.sample(5, seed=2):
        cp = curvature_point(chart, x)
        V = orthonormal_basis(cp.g)
        e0 = V[:, 0]
        assert ricci_q(cp, V) == pytest.approx(float(e0 @ cp.ricci @ e0), abs=1e-9)


def test_ricci_q_rejects_non_orthonormal(registry):
    cp = curvature_point(registry.chart("sphere_s2"), [1.0, 1.0])
    with pytest.raises(GeometryError):
        ricci_q(cp, np.eye(2))
