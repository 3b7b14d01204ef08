"""Adapted orthonormal frames for declared distributions and their extrinsic data.

A frame is built as a jet field: spanning vector fields are evaluated with
exact second derivatives, orthonormalized by Gram-Schmidt in declaration
order (arithmetic on jets), and completed by a pivoted Gram-Schmidt pass over
the coordinate vectors.  Covariant derivatives of frame vectors therefore
come out exactly, never by differencing orthonormalized frames.

Frame jets carry two orders, connection coefficients one, and divergences of
vector fields built from them are plain values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GeometryError
from .expr import ScalarField
from .geometry import CurvaturePoint, MetricChart, christoffel_jet, riemann_from
from .jets import Jet, jet_einsum, stack, where

RANK_TOL = 1e-10
ORTHO_TOL = 1e-9


# ------------------------------------------------------------ declarations
@dataclass(frozen=True)
class DistributionSet:
    """Pairwise orthogonal distributions on a chart, each given by spanning fields."""

    chart: MetricChart
    names: tuple[str, ...]
    fields: tuple[tuple[tuple[ScalarField, ...], ...], ...]

    def __post_init__(self):
        n = self.chart.dim
        if len(self.names) != len(self.fields) or not self.fields:
            raise GeometryError("need at least one named distribution")
        if len(set(self.names)) != len(self.names):
            raise GeometryError(f"duplicate distribution names in {self.names}")
        for name, vecs in zip(self.names, self.fields):
            if not vecs:
                raise GeometryError(f"distribution {name!r} has no spanning fields")
            for v in vecs:
                if len(v) != n:
                    raise GeometryError(f"distribution {name!r}: vector fields need {n} components")
        if sum(self.ranks) > n:
            raise GeometryError(f"total rank {sum(self.ranks)} exceeds dimension {n}")

    @classmethod
    def from_sources(cls, chart: MetricChart, named: dict[str, list[list[str]]]) -> "DistributionSet":
        names = tuple(named)
        fields = tuple(
            tuple(tuple(ScalarField.from_source(str(c), chart.dim) for c in vec) for vec in named[k])
            for k in names
        )
        return cls(chart, names, fields)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.fields)

    @property
    def corank(self) -> int:
        return self.chart.dim - sum(self.ranks)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise GeometryError(f"unknown distribution {name!r}") from None

    def subset(self, names) -> "DistributionSet":
        idx = [self.index(n) for n in names]
        return DistributionSet(self.chart, tuple(self.names[i] for i in idx),
                               tuple(self.fields[i] for i in idx))

    def recombined(self, rng: np.random.Generator) -> "DistributionSet":
        """Same distributions, spanned by random constant recombinations of the fields."""
        from .expr import Const, add, mul
        out = []
        for vecs in self.fields:
            m = len(vecs)
            A = rng.standard_normal((m, m)) + 2.0 * np.eye(m)
            new = []
            for r in range(m):
                comps = []
                for c in range(self.chart.dim):
                    node = Const(0.0)
                    for s in range(m):
                        node = add(node, mul(Const(float(A[r, s])), vecs[s][c].ast))
                    comps.append(ScalarField(node, self.chart.dim))
                new.append(tuple(comps))
            out.append(tuple(new))
        return DistributionSet(self.chart, self.names, tuple(out))

    def span_jets(self, x: np.ndarray, order: int = 2) -> list[Jet]:
        """Spanning vectors as jets of value shape ``(P, m_i, n)``, one per distribution."""
        out = []
        for vecs in self.fields:
            rows = [stack([c.jet(x, order) for c in v], axis=1) for v in vecs]
            out.append(stack(rows, axis=1))
        return out

    def validate(self, x) -> None:
        """Raise unless spans have full rank and distinct distributions are g-orthogonal."""
        x = self.chart.check_points(x)
        g = self.chart.metric_at(x).reshape(-1, self.chart.dim, self.chart.dim)
        spans = [j.v for j in self.span_jets(x, order=0)]
        V = np.concatenate(spans, axis=1)                       # (P, m, n)
        G = np.einsum("pai,pij,pbj->pab", V, g, V)
        nrm = np.sqrt(np.einsum("paa->pa", G))
        if np.any(nrm <= RANK_TOL):
            raise GeometryError("a spanning field vanishes")
        Gn = G / nrm[:, :, None] / nrm[:, None, :]
        smallest = np.linalg.eigvalsh(Gn)[:, 0]
        if np.any(smallest <= RANK_TOL):
            p = int(np.argmin(smallest))
            raise GeometryError(f"spanning fields are rank deficient at {x[p].tolist()}")
        owner = []
        for i, m in enumerate(self.ranks):
            owner += [i] * m
        owner = np.array(owner)
        cross = owner[:, None] != owner[None, :]
        worst = np.max(np.abs(Gn[:, cross]), initial=0.0) if cross.any() else 0.0
        if worst > ORTHO_TOL:
            raise GeometryError(f"declared distributions are not orthogonal (|cos| = {worst:.2e})")


# ------------------------------------------------------------------ frames
def _inner(g: Jet, u: Jet, v: Jet) -> Jet:
    return jet_einsum("pj,pj->p", _lower(g, u), v)


def _lower(g: Jet, u: Jet) -> Jet:
    return jet_einsum("pij,pi->pj", g, u)


def _unit(g: Jet, v: Jet) -> tuple[Jet, Jet]:
    """Unit vector along ``v`` and its lowered form."""
    gv = _lower(g, v)
    scale = jet_einsum("pj,pj->p", gv, v).sqrt().reciprocal().expand(1)
    return v * scale, gv * scale


def _project_out(v: Jet, basis: list[Jet], lowered: list[Jet]) -> Jet:
    for u, ul in zip(basis, lowered):
        v = v - u * jet_einsum("pj,pj->p", ul, v).expand(1)
    return v


@dataclass
class AdaptedFrame:
    """Orthonormal frame field at a batch of points.

    ``frame.v[p, a]`` is the coordinate vector ``e_a`` at point ``p``; rows are
    grouped into the declared blocks followed by the complement block.
    """

    x: np.ndarray
    metric: Jet
    frame: Jet
    blocks: tuple[slice, ...]
    names: tuple[str, ...]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def vectors(self) -> np.ndarray:
        return self.frame.v

    def block(self, i: int) -> np.ndarray:
        return self.frame.v[:, self.blocks[i]]

    @property
    def complement(self) -> slice:
        return self.blocks[-1]


def adapted_frame(ds: DistributionSet, x, check: bool = True, order: int = 2) -> AdaptedFrame:
    """Frame adapted to ``ds`` at points ``x`` (shape ``(n,)`` or ``(P, n)``).

    Declared blocks come from Gram-Schmidt of the spanning fields in
    declaration order; the complement is completed from the coordinate vectors,
    at each step taking the candidate with the largest relative residual.
    """
    chart = ds.chart
    x = chart.check_points(x)
    if check:
        ds.validate(x)
    n, P = chart.dim, x.shape[0]
    g = chart.metric_jet(x, order=order, check=False)
    basis: list[Jet] = []
    lowered: list[Jet] = []
    blocks = []
    for span in ds.span_jets(x, order=order):
        start = len(basis)
        for r in range(span.shape[1]):
            col = span[:, r]
            v = _project_out(col, basis, lowered)
            ref = np.einsum("pij,pi,pj->p", g.v, col.v, col.v)
            if np.any(np.einsum("pij,pi,pj->p", g.v, v.v, v.v) <= RANK_TOL * ref):
                raise GeometryError("spanning fields are rank deficient")
            e, el = _unit(g, v)
            basis.append(e)
            lowered.append(el)
        blocks.append(slice(start, len(basis)))
    start = len(basis)
    eye = np.eye(n)
    gdiag = np.einsum("pii->pi", g.v)
    while len(basis) < n:
        res = [_project_out(Jet.constant(np.broadcast_to(eye[i], (P, n)), n, order), basis, lowered)
               for i in range(n)]
        score = np.stack([np.einsum("pij,pi,pj->p", g.v, r.v, r.v) for r in res], axis=-1) / gdiag
        choice = np.argmax(score, axis=-1)                       # ties: lowest index
        chosen = res[n - 1]
        for i in range(n - 2, -1, -1):
            chosen = where((choice == i)[:, None], res[i], chosen)
        e, el = _unit(g, chosen)
        basis.append(e)
        lowered.append(el)
    blocks.append(slice(start, n))
    frame = stack(basis, axis=1)
    return AdaptedFrame(x, g, frame, tuple(blocks), ds.names)


# --------------------------------------------------------- extrinsic data
@dataclass
class SplitData:
    """Second fundamental form, integrability tensor and mean curvature of one
    index block ``I`` of the frame and of its complement ``J``.

    Tensor components are frame components: ``h[p, a, b, c] = g(h(e_a, e_b), e_c)``
    with ``a, b`` in ``I`` and ``c`` in ``J``.
    """

    index: np.ndarray
    comp: np.ndarray
    h: np.ndarray
    T: np.ndarray
    H: np.ndarray
    h_perp: np.ndarray
    T_perp: np.ndarray
    H_perp: np.ndarray
    H_field: Jet
    H_perp_field: Jet

    @staticmethod
    def _sq(a: np.ndarray) -> np.ndarray:
        return np.sum(a.reshape(a.shape[0], -1) ** 2, axis=1)

    @cached_property
    def norms(self) -> dict[str, np.ndarray]:
        return {
            "h": self._sq(self.h), "h_perp": self._sq(self.h_perp),
            "T": self._sq(self.T), "T_perp": self._sq(self.T_perp),
            "H": self._sq(self.H), "H_perp": self._sq(self.H_perp),
        }

    @cached_property
    def Q(self) -> np.ndarray:
        q = self.norms
        return q["h"] + q["h_perp"] - q["H"] - q["H_perp"] - q["T"] - q["T_perp"]


@dataclass
class FundamentalData:
    """Connection and curvature of an adapted frame at a batch of points."""

    frame: AdaptedFrame
    gamma: Jet                  # Γ^k_ij, value axes [p, k, i, j]
    nabla: Jet                  # ∇_{e_a} e_b, value axes [p, a, b, k]
    coeff: Jet                  # g(∇_{e_a} e_b, e_c), value axes [p, a, b, c]
    riemann: np.ndarray         # coordinate Rm_ijkl
    splits: list[SplitData] = field(default_factory=list)

    @property
    def x(self) -> np.ndarray:
        return self.frame.x

    @cached_property
    def frame_riemann(self) -> np.ndarray:
        E = self.frame.vectors
        return np.einsum("pijkl,pai,pbj,pck,pdl->pabcd", self.riemann, E, E, E, E, optimize=True)

    @cached_property
    def sectional_table(self) -> np.ndarray:
        """K(e_a, e_b) for all frame pairs (zero on the diagonal)."""
        return np.einsum("pabba->pab", self.frame_riemann)

    @cached_property
    def scalar(self) -> np.ndarray:
        return self.sectional_table.sum(axis=(1, 2))

    def mutual(self, I, J) -> np.ndarray:
        """Σ_{a∈I, b∈J} K(e_a, e_b)."""
        K = self.sectional_table
        return K[:, np.asarray(I)][:, :, np.asarray(J)].sum(axis=(1, 2))

    def ricci_frame(self, a: int) -> np.ndarray:
        return self.sectional_table[:, a].sum(axis=1)

    def split(self, I) -> SplitData:
        n = self.frame.dim
        I = np.asarray(sorted(I), dtype=int)
        J = np.setdiff1d(np.arange(n), I)
        C = self.coeff
        Cv = C.v
        h = 0.5 * (Cv[:, I][:, :, I][:, :, :, J] + np.swapaxes(Cv[:, I][:, :, I][:, :, :, J], 1, 2))
        T = 0.5 * (Cv[:, I][:, :, I][:, :, :, J] - np.swapaxes(Cv[:, I][:, :, I][:, :, :, J], 1, 2))
        hp = 0.5 * (Cv[:, J][:, :, J][:, :, :, I] + np.swapaxes(Cv[:, J][:, :, J][:, :, :, I], 1, 2))
        Tp = 0.5 * (Cv[:, J][:, :, J][:, :, :, I] - np.swapaxes(Cv[:, J][:, :, J][:, :, :, I], 1, 2))
        H_field = self._trace_field(I, J)
        Hp_field = self._trace_field(J, I)
        H = np.einsum("paac->pc", Cv[:, I][:, :, I][:, :, :, J])
        Hp = np.einsum("paac->pc", Cv[:, J][:, :, J][:, :, :, I])
        return SplitData(I, J, h, T, H, hp, Tp, Hp, H_field, Hp_field)

    def _trace_field(self, I, J) -> Jet:
        """Σ_{a∈I} (∇_{e_a} e_a)^{J-part} as a coordinate vector jet of order 1."""
        P, n = self.x.shape
        C = self.coeff
        if len(I) == 0 or len(J) == 0:
            return Jet.constant(np.zeros((P, n)), n, C.order)
        Ef = self.frame.frame.truncate(C.order)
        acc = None
        for a in I:
            coeffs = C[:, int(a), int(a)]                        # (P, n) over c
            part = jet_einsum("pc,pck->pk", coeffs[:, J], Ef[:, J])
            acc = part if acc is None else acc + part
        return acc

    def field_from_frame(self, coeffs: Jet, rows) -> Jet:
        """Coordinate jet of Σ_c coeffs[c] e_{rows[c]}."""
        return jet_einsum("pc,pck->pk", coeffs, self.frame.frame.truncate(coeffs.order)[:, np.asarray(rows)])

    def div(self, X: Jet) -> np.ndarray:
        """Div X = Σ_a g(∇_{e_a} X, e_a) over the full frame."""
        if X.order < 1:
            raise ValueError("divergence needs a field with first derivatives")
        E = self.frame.vectors
        g = self.frame.metric.v
        dX = X.d                                                 # [p, k, i] = ∂_i X^k
        cov = dX + np.einsum("pkij,pj->pki", self.gamma.v, X.v)
        return np.einsum("pai,pki,pkl,pal->p", E, cov, g, E, optimize=True)

    def corank_one(self, normal: int) -> "ShapeOperator":
        """Shape operator of the leaves orthogonal to the unit frame field ``e_normal``."""
        n = self.frame.dim
        leaf = np.array([a for a in range(n) if a != normal])
        C = self.coeff
        # A_N(e_a) = -∇_{e_a} N ; components along leaf vector e_b are -g(∇_{e_a} N, e_b)
        A = -C.v[:, leaf][:, :, normal][:, :, leaf]              # [p, a, b]
        A = np.swapaxes(A, 1, 2)                                 # matrix acting on columns
        sigma1 = -C[:, int(leaf[0]), normal][:, int(leaf[0])]
        for a in leaf[1:]:
            sigma1 = sigma1 - C[:, int(a), normal][:, int(a)]
        nn = self.nabla[:, normal, normal]                       # ∇_N N, order 1
        Nf = self.frame.frame.truncate(1)[:, normal]
        return ShapeOperator(A, sigma1, nn, Nf)


@dataclass
class ShapeOperator:
    A: np.ndarray               # [p, b, a]: A_N e_a = Σ_b A[b, a] e_b
    sigma1_jet: Jet             # tr A_N as an order-1 jet
    nabla_NN: Jet               # ∇_N N
    N: Jet

    @cached_property
    def sigmas(self) -> np.ndarray:
        """σ_0..σ_m: coefficients of det(id + t A_N) in t."""
        out = []
        for A in self.A:
            c = np.poly(A)                                       # det(λ - A) coefficients
            out.append(c * (-1.0) ** np.arange(len(c)))
        return np.array(out)

    @property
    def sigma1(self) -> np.ndarray:
        return np.trace(self.A, axis1=1, axis2=2)

    @property
    def sigma2(self) -> np.ndarray:
        tr = self.sigma1
        tr2 = np.einsum("pab,pba->p", self.A, self.A)
        return 0.5 * (tr * tr - tr2)

    def field(self) -> Jet:
        """∇_N N + σ_1 N, the field whose divergence enters the corank-one identity."""
        return self.nabla_NN + self.N * self.sigma1_jet.expand(1)


def _connection(frame: AdaptedFrame) -> tuple[Jet, Jet, Jet]:
    g = frame.metric
    gamma = christoffel_jet(g)                                   # order 1
    E2 = frame.frame
    E1 = E2.truncate(E2.order - 1)
    dE = E2.partial()                                            # [p, b, k, i] = ∂_i e_b^k
    t1 = jet_einsum("pai,pbki->pabk", E1, dE)
    tmp = jet_einsum("pkij,pbj->pbki", gamma, E1)
    t2 = jet_einsum("pai,pbki->pabk", E1, tmp)
    nabla = t1 + t2
    low = jet_einsum("pabk,pkl->pabl", nabla, g.truncate(nabla.order))
    coeff = jet_einsum("pabl,pcl->pabc", low, E1)
    return gamma, nabla, coeff


def fundamental_data(ds: DistributionSet, x, check: bool = True, order: int = 2) -> FundamentalData:
    """Frame, connection coefficients, curvature and per-distribution split data.

    ``order=1`` builds first-order frames only: enough for h, T, H and their
    norms, but divergences and curvature are then unavailable.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    frame = adapted_frame(ds, x, check, order)
    gamma, nabla, coeff = _connection(frame)
    riemann = riemann_from(frame.metric.v, gamma) if order == 2 else None
    fd = FundamentalData(frame, gamma, nabla, coeff, riemann)
    fd.splits = [fd.split(range(sl.start, sl.stop)) for sl in frame.blocks[:-1]]
    return fd


def shape_operator(ds: DistributionSet, x) -> tuple[np.ndarray, np.ndarray]:
    """(A_N, σ_0..σ_m) for a declared distribution of corank one; N spans the complement."""
    if ds.corank != 1:
        raise GeometryError(f"shape operator needs corank 1, got {ds.corank}")
    fd = fundamental_data(ds, x)
    so = fd.corank_one(fd.frame.dim - 1)
    single = np.asarray(x).ndim == 1
    return (so.A[0], so.sigmas[0]) if single else (so.A, so.sigmas)


def ricci_q(cp: CurvaturePoint, V) -> float:
    """q-th Ricci curvature Σ_{i=1..q} K(e_0, e_i) for g-orthonormal columns e_0..e_q."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != cp.dim or V.shape[1] < 2:
        raise GeometryError("ricci_q needs at least two vectors")
    G = V.T @ cp.g @ V
    if np.max(np.abs(G - np.eye(V.shape[1]))) > 1e-9:
        raise GeometryError("vectors are not g-orthonormal")
    e0 = V[:, 0]
    return float(np.einsum("ijkl,i,jb,kb,l->", cp.riemann, e0, V[:, 1:], V[:, 1:], e0))
