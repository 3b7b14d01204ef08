"""Metric charts and pointwise intrinsic curvature.

Conventions: ``R(X,Y) = [∇_X, ∇_Y] - ∇_[X,Y]``, the covariant tensor is
``Rm(X,Y,Z,W) = g(R(X,Y)Z, W)`` so that the sectional curvature of the plane
``X∧Y`` is ``Rm(X,Y,Y,X) / (|X|²|Y|² - g(X,Y)²)``; ``Ric(Y,Z) = tr(X ↦ R(X,Y)Z)``.

The Riemann tensor is assembled from Christoffel symbols and their first
derivatives; both come out of jet arithmetic on the exact second derivatives
of the metric entries, so no finite differencing is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import GeometryError
from .expr import ScalarField
from .jets import Jet, jet_einsum

EIG_TOL = 1e-10
PLANE_TOL = 1e-12
BOUNDARY_MARGIN = 1e-6
PERIOD_TOL = 1e-9


@dataclass(frozen=True)
class MetricChart:
    """A coordinate box with a symmetric matrix of metric fields."""

    name: str
    dim: int
    box: np.ndarray                      # (dim, 2) lower/upper bounds
    periodic: tuple[bool, ...]
    metric: tuple[tuple[ScalarField, ...], ...]
    eig_tol: float = EIG_TOL

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float).reshape(self.dim, 2)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
        if len(self.periodic) != self.dim:
            raise GeometryError(f"{self.name}: periodic flags do not match dimension")
        if np.any(box[:, 1] <= box[:, 0]):
            raise GeometryError(f"{self.name}: empty coordinate box")
        if len(self.metric) != self.dim or any(len(r) != self.dim for r in self.metric):
            raise GeometryError(f"{self.name}: metric must be {self.dim}x{self.dim}")
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                if self.metric[i][j].ast != self.metric[j][i].ast:
                    raise GeometryError(f"{self.name}: metric entries g{i + 1}{j + 1} and "
                                        f"g{j + 1}{i + 1} differ")

    @classmethod
    def from_sources(cls, name: str, sources, box, periodic=None) -> "MetricChart":
        """Build from expression strings; a flat list is read as a diagonal."""
        dim = len(sources)
        if all(isinstance(s, (str, int, float)) for s in sources):
            rows = [[str(sources[i]) if i == j else "0" for j in range(dim)] for i in range(dim)]
        else:
            rows = [[str(s) for s in row] for row in sources]
        metric = tuple(tuple(ScalarField.from_source(s, dim) for s in row) for row in rows)
        if periodic is None:
            periodic = (False,) * dim
        return cls(name, dim, np.asarray(box, dtype=float), tuple(periodic), metric)

    @property
    def fully_periodic(self) -> bool:
        return all(self.periodic)

    @property
    def constant_metric(self) -> bool:
        return all(f.is_constant for row in self.metric for f in row)

    # -------------------------------------------------------------- points
    def check_points(self, x) -> np.ndarray:
        """Return points as a ``(P, dim)`` array or raise if any is outside the chart."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise GeometryError(f"{self.name}: expected {self.dim} coordinates")
        if not np.all(np.isfinite(x)):
            raise GeometryError(f"{self.name}: non-finite point")
        lo, hi = self.box[:, 0], self.box[:, 1]
        margin = BOUNDARY_MARGIN * (hi - lo)
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            bad = (x[:, i] < lo[i] + margin[i]) | (x[:, i] > hi[i] - margin[i])
            if np.any(bad):
                raise GeometryError(f"{self.name}: point {x[bad][0].tolist()} is outside the "
                                    f"chart interior along axis {i + 1}")
        return x

    def sample(self, count: int, seed: int = 0, margin: float = 0.05) -> np.ndarray:
        """Scrambled Halton points; non-periodic axes keep ``margin`` of the box clear."""
        u = qmc.Halton(d=self.dim, scramble=True, seed=seed).random(count)
        lo, hi = self.box[:, 0].copy(), self.box[:, 1].copy()
        width = hi - lo
        for i in range(self.dim):
            if not self.periodic[i]:
                lo[i] += margin * width[i]
                hi[i] -= margin * width[i]
        return lo + u * (hi - lo)

    def grid(self, resolution: int) -> tuple[np.ndarray, float]:
        """Tensor-product periodic trapezoid nodes and the cell volume."""
        if not self.fully_periodic:
            raise GeometryError(f"{self.name}: quadrature needs a fully periodic chart")
        axes = [np.linspace(a, b, resolution, endpoint=False) for a, b in self.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        cell = float(np.prod((self.box[:, 1] - self.box[:, 0]) / resolution))
        return pts, cell

    def check_periodic(self, count: int = 16, seed: int = 0, tol: float = PERIOD_TOL) -> None:
        """Metric entries must repeat with the box width along every periodic axis."""
        x = self.sample(count, seed=seed)
        g0 = self.metric_jet(x, order=0, check=False).v
        scale = max(1.0, float(np.max(np.abs(g0))))
        for i in range(self.dim):
            if not self.periodic[i]:
                continue
            shifted = x.copy()
            shifted[:, i] += self.box[i, 1] - self.box[i, 0]
            err = float(np.max(np.abs(self.metric_jet(shifted, order=0, check=False).v - g0)))
            if err > tol * scale:
                raise GeometryError(f"{self.name}: metric is not periodic along axis {i + 1} "
                                    f"(mismatch {err:.2e})")

    # -------------------------------------------------------------- metric
    def metric_jet(self, x, order: int = 2, check: bool = True) -> Jet:
        """Jet of the metric matrix at points ``x``: value shape ``(P, n, n)``."""
        x = self.check_points(x) if check else np.atleast_2d(np.asarray(x, dtype=float))
        n = self.dim
        cache: dict[tuple[int, int], Jet] = {}
        for i in range(n):
            for j in range(i, n):
                cache[(i, j)] = self.metric[i][j].jet(x, order)
        rows = []
        for i in range(n):
            rows.append([cache[(min(i, j), max(i, j))] for j in range(n)])
        v = np.stack([np.stack([r.v for r in row], -1) for row in rows], -2)
        d = dd = None
        if order >= 1:
            d = np.stack([np.stack([r.d for r in row], -2) for row in rows], -3)
        if order >= 2:
            dd = np.stack([np.stack([r.dd for r in row], -3) for row in rows], -4)
        g = Jet(v, d, dd)
        if check:
            self._check_spd(x, g.v)
        return g

    def metric_at(self, x) -> np.ndarray:
        g = self.metric_jet(x, order=0).v
        return g[0] if np.asarray(x).ndim == 1 else g

    def _check_spd(self, x: np.ndarray, g: np.ndarray) -> None:
        eig = np.linalg.eigvalsh(g)
        bad = eig[:, 0] <= self.eig_tol
        if np.any(bad):
            raise GeometryError(f"{self.name}: metric is not positive definite at "
                                f"{x[bad][0].tolist()} (smallest eigenvalue {eig[bad][0, 0]:.3e})")


# ------------------------------------------------------------ connection
def christoffel_jet(g: Jet) -> Jet:
    """Γ^k_ij (value axes ``p, k, i, j``) from a metric jet, one order lower."""
    dg = g.partial()                       # dg[p, a, b, c] = ∂_c g_ab
    A = dg.transpose(0, 2, 3, 1)           # ∂_i g_jl at [p, l, i, j]
    B = dg.transpose(0, 2, 1, 3)           # ∂_j g_il
    C = dg.transpose(0, 3, 1, 2)           # ∂_l g_ij
    low = (A + B - C) * 0.5
    ginv = g.truncate(g.order - 1).inv()
    return jet_einsum("pkl,plij->pkij", ginv, low)


def riemann_from(g: np.ndarray, gamma: Jet) -> np.ndarray:
    """Covariant Rm_ijkl = g(R(∂_i, ∂_j)∂_k, ∂_l) from an order-1 Christoffel jet."""
    G = gamma.v                            # [p, l, a, b]
    dG = gamma.d                           # [p, l, a, b, c] = ∂_c Γ^l_ab
    # R^l_{k i j} = ∂_i Γ^l_jk - ∂_j Γ^l_ik + Γ^l_im Γ^m_jk - Γ^l_jm Γ^m_ik
    term = np.einsum("plkji->plkij", dG)   # ∂_i Γ^l_jk   (Γ symmetric in lower pair)
    up = term - np.swapaxes(term, -1, -2)
    quad = np.einsum("plim,pmjk->plkij", G, G)
    up = up + quad - np.swapaxes(quad, -1, -2)
    return np.einsum("plm,pmkij->pijkl", g, up)


@dataclass
class CurvaturePoint:
    """All pointwise intrinsic curvature data at one chart point."""

    x: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray        # Γ^k_ij at [k, i, j]
    riemann: np.ndarray      # Rm_ijkl
    ricci: np.ndarray
    scalar: float
    chart: str = ""

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def inner(self, X, Y) -> float:
        return float(np.asarray(X) @ self.g @ np.asarray(Y))

    def sectional(self, X, Y) -> float:
        return sectional(self, X, Y)


@dataclass
class CurvatureBatch:
    """Curvature data for many points at once (leading axis = point)."""

    x: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    chart: str = ""
    gamma_jet: Jet | None = field(default=None, repr=False)
    metric_jet: Jet | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.x.shape[0]

    def point(self, i: int) -> CurvaturePoint:
        return CurvaturePoint(self.x[i], self.g[i], self.ginv[i], self.gamma[i],
                              self.riemann[i], self.ricci[i], float(self.scalar[i]), self.chart)

    def points(self) -> list[CurvaturePoint]:
        return [self.point(i) for i in range(len(self))]


def curvature_batch(chart: MetricChart, x) -> CurvatureBatch:
    g = chart.metric_jet(x, order=2)
    gamma = christoffel_jet(g)
    ginv = np.linalg.inv(g.v)
    Rm = riemann_from(g.v, gamma)
    ric = np.einsum("pil,pijkl->pjk", ginv, Rm)
    tau = np.einsum("pjk,pjk->p", ginv, ric)
    return CurvatureBatch(np.atleast_2d(np.asarray(x, dtype=float)), g.v, ginv, gamma.v, Rm,
                          ric, tau, chart.name, gamma_jet=gamma, metric_jet=g)


def christoffels(chart: MetricChart, x) -> np.ndarray:
    """Γ^k_ij at a single point, indexed ``[k, i, j]``."""
    return christoffel_jet(chart.metric_jet(x, order=1)).v[0]


def curvature_point(chart: MetricChart, x) -> CurvaturePoint:
    return curvature_batch(chart, np.asarray(x, dtype=float)[None, :]).point(0)


def sectional(cp: CurvaturePoint, X, Y, plane_tol: float = PLANE_TOL) -> float:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    xx, yy, xy = cp.inner(X, X), cp.inner(Y, Y), cp.inner(X, Y)
    gram = xx * yy - xy * xy
    if gram <= plane_tol:
        raise GeometryError(f"degenerate plane (Gram determinant {gram:.3e})")
    num = np.einsum("ijkl,i,j,k,l->", cp.riemann, X, Y, Y, X)
    return float(num / gram)


def orthonormalize(cp_g: np.ndarray, vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Gram–Schmidt of the columns of ``vectors`` in the metric ``cp_g``."""
    out = []
    for v in np.asarray(vectors, dtype=float).T:
        w = v.copy()
        for e in out:
            w = w - (e @ cp_g @ w) * e
        nrm2 = w @ cp_g @ w
        if nrm2 <= tol:
            raise GeometryError("vectors are linearly dependent")
        out.append(w / np.sqrt(nrm2))
    return np.array(out).T.reshape(len(vectors), len(out))


def orthonormal_basis(g: np.ndarray) -> np.ndarray:
    """Columns form a g-orthonormal basis of the tangent space."""
    return orthonormalize(g, np.eye(g.shape[0]))
