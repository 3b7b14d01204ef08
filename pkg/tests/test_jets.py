import numpy as np
from hypothesis import given, settings, strategies as st

from curvlab.jets import Jet, einsum2, jet_einsum

from conftest import central_fd

LETTERS = "abcdeij"


@st.composite
def _einsum_case(draw):
    # two operands sharing a leading batch axis, random index sets
    pool = list(LETTERS)
    la = draw(st.lists(st.sampled_from(pool), min_size=0, max_size=3, unique=True))
    lb = draw(st.lists(st.sampled_from(pool), min_size=0, max_size=3, unique=True))
    letters = sorted(set(la) | set(lb))
    out = [c for c in letters if draw(st.booleans())]
    out = draw(st.permutations(out))
    sizes = {c: draw(st.integers(1, 4)) for c in letters}
    spec = f"p{''.join(la)},p{''.join(lb)}->p{''.join(out)}"
    return spec, sizes, la, lb


@settings(max_examples=200, deadline=None)
@given(_einsum_case(), st.integers(0, 2**31 - 1))
def test_einsum2_matches_numpy(case, seed):
    spec, sizes, la, lb = case
    rng = np.random.default_rng(seed)
    x = rng.standard_normal([5] + [sizes[c] for c in la])
    y = rng.standard_normal([5] + [sizes[c] for c in lb])
    np.testing.assert_allclose(einsum2(spec, x, y), np.einsum(spec, x, y), atol=1e-12)


def test_einsum2_falls_back_on_diagonals():
    a = np.arange(2 * 3 * 3, dtype=float).reshape(2, 3, 3)
    b = np.ones((2, 3))
    np.testing.assert_array_equal(einsum2("pii,pi->p", a, b), np.einsum("pii,pi->p", a, b))


def _field(x):
    # a small matrix-valued and a vector-valued function of two variables
    A = Jet.variable(x)
    u, v = A[:, 0], A[:, 1]
    M = [[u * v, u.sin()], [v.exp(), u * u + v]]
    w = [v.cos(), u * v * v]
    from curvlab.jets import stack
    Mj = stack([stack(row, axis=1) for row in M], axis=1)
    wj = stack(w, axis=1)
    return Mj, wj


def test_jet_einsum_product_rule_against_fd():
    x0 = np.array([0.3, -0.7])

    def contracted(p):
        M, w = _field(np.asarray(p)[None, :])
        return jet_einsum("pij,pj->pi", M, w)

    out = contracted(x0)
    for comp in range(2):
        grad, hess = central_fd(lambda p: contracted(p).v[0, comp], x0, h=1e-4)
        np.testing.assert_allclose(out.d[0, comp], grad, rtol=1e-6, atol=1e-7)
        np.testing.assert_allclose(out.dd[0, comp], hess, rtol=1e-5, atol=1e-6)


def test_jet_inverse_and_sqrt():
    x = np.array([[0.4, 1.1]])
    A = Jet.variable(x)
    u = A[:, 0] * A[:, 0] + A[:, 1] + 2.0
    r = u.sqrt().reciprocal()
    grad, _ = central_fd(lambda p: 1 / np.sqrt(p[0] ** 2 + p[1] + 2.0), x[0], h=1e-6)
    np.testing.assert_allclose(r.d[0], grad, rtol=1e-8)
