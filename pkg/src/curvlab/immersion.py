"""Isometric immersions between charts and their second fundamental form.

The induced metric is assembled symbolically: the ambient metric entries are
composed with the immersion and multiplied by the partial derivatives of its
components, which yields a source metric whose jets carry the exact third
derivatives of the immersion that intrinsic curvature needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapted import DistributionSet, adapted_frame
from .errors import GeometryError
from .expr import Const, ScalarField, add, diff, mul, substitute
from .geometry import MetricChart, christoffel_jet, curvature_point
from .invariants import (DEFAULT_BUDGET, Budget, InvariantResult, SubspaceTuple, block_slices,
                         optimize_frames, oracle_extreme)
from .jets import stack

ISOMETRY_TOL = 1e-9
ADAPTED_TOL = 1e-9
RANK_TOL = 1e-10


def induced_metric(ambient: MetricChart, components: tuple[ScalarField, ...], dim: int):
    """Entries of f*ḡ as scalar fields of the source coordinates."""
    N = ambient.dim
    comps = [c.ast for c in components]
    dfs = [[diff(comps[a], i + 1) for i in range(dim)] for a in range(N)]
    gbar = [[substitute(ambient.metric[a][b].ast, comps) for b in range(N)] for a in range(N)]
    rows = []
    for i in range(dim):
        row = []
        for j in range(dim):
            node = Const(0.0)
            for a in range(N):
                for b in range(N):
                    if isinstance(gbar[a][b], Const) and gbar[a][b].value == 0.0:
                        continue
                    node = add(node, mul(gbar[a][b], mul(dfs[a][i], dfs[b][j])))
            row.append(node)
        rows.append(row)
    for i in range(dim):
        for j in range(i):
            rows[i][j] = rows[j][i]
    return tuple(tuple(ScalarField(rows[i][j], dim) for j in range(dim)) for i in range(dim))


@dataclass(frozen=True)
class ImmersionSpec:
    """A map ``f`` from the source chart into the ambient chart.

    ``distributions`` are declared on the source and ``ambient_distribution``
    (a single named distribution D̄) on the ambient chart.
    """

    name: str
    source: MetricChart
    ambient: MetricChart
    components: tuple[ScalarField, ...]
    distributions: DistributionSet | None = None
    ambient_distribution: DistributionSet | None = None
    induced: bool = True

    def __post_init__(self):
        if len(self.components) != self.ambient.dim:
            raise GeometryError(f"{self.name}: need {self.ambient.dim} component functions")
        if self.ambient.dim <= self.source.dim:
            raise GeometryError(f"{self.name}: ambient dimension must exceed source dimension")
        if any(c.dim != self.source.dim for c in self.components):
            raise GeometryError(f"{self.name}: components must be functions of the source chart")

    @classmethod
    def build(cls, name: str, ambient: MetricChart, components, box, periodic=None,
              metric=None, source_name: str | None = None) -> "ImmersionSpec":
        """Create the source chart with the induced metric (or a declared one)."""
        dim = len(box)
        comps = tuple(ScalarField.from_source(str(c), dim) for c in components)
        periodic = tuple(periodic) if periodic is not None else (False,) * dim
        if metric is None or metric == "induced":
            rows = induced_metric(ambient, comps, dim)
            source = MetricChart(source_name or name, dim, np.asarray(box, float), periodic, rows)
            return cls(name, source, ambient, comps, induced=True)
        source = MetricChart.from_sources(source_name or name, metric, box, periodic)
        return cls(name, source, ambient, comps, induced=False)

    def with_distributions(self, ds: DistributionSet | None,
                           ambient_ds: DistributionSet | None = None) -> "ImmersionSpec":
        return ImmersionSpec(self.name, self.source, self.ambient, self.components, ds, ambient_ds,
                             self.induced)

    @property
    def dim(self) -> int:
        return self.source.dim

    @property
    def codim(self) -> int:
        return self.ambient.dim - self.source.dim

    def image(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.stack([c.jet(x, 0).v for c in self.components], axis=-1)

    # --------------------------------------------------------- validation
    def validate(self, x) -> None:
        """Rank, isometry (declared metrics) and adaptedness (declared D̄) checks."""
        data = _extrinsic_batch(self, x)
        if not self.induced:
            g_decl = self.source.metric_at(data.x).reshape(data.g.shape)
            err = np.max(np.abs(g_decl - data.g))
            if err > ISOMETRY_TOL * max(1.0, np.max(np.abs(data.g))):
                raise GeometryError(f"{self.name}: declared metric differs from the pullback "
                                    f"(max error {err:.2e})")
        if self.ambient_distribution is not None and self.distributions is not None:
            self.check_adapted(data.x)

    def check_adapted(self, x) -> float:
        """Largest relative component of f_*(D) normal to D̄ along f(M)."""
        x = self.source.check_points(x)
        y = self.image(x)
        gbar = self.ambient.metric_at(y).reshape(-1, self.ambient.dim, self.ambient.dim)
        df = _jacobian(self, x)
        spans = np.concatenate([s.v for s in self.distributions.span_jets(x, 0)], axis=1)
        pushed = np.einsum("pai,pmi->pma", df, spans)             # (P, m, N)
        dbar = np.concatenate([s.v for s in self.ambient_distribution.span_jets(y, 0)], axis=1)
        worst = 0.0
        for p in range(x.shape[0]):
            B = dbar[p].T
            G = B.T @ gbar[p] @ B
            coef = np.linalg.solve(G, B.T @ gbar[p] @ pushed[p].T)
            resid = pushed[p].T - B @ coef
            nr = np.sqrt(np.einsum("im,ij,jm->m", resid, gbar[p], resid))
            nv = np.sqrt(np.einsum("im,ij,jm->m", pushed[p].T, gbar[p], pushed[p].T))
            worst = max(worst, float(np.max(nr / nv)))
        if worst > ADAPTED_TOL:
            raise GeometryError(f"{self.name}: f_*(D) leaves the ambient distribution "
                                f"(relative normal part {worst:.2e})")
        return worst


def _jacobian(spec: ImmersionSpec, x: np.ndarray) -> np.ndarray:
    return np.stack([c.jet(x, 1).d for c in spec.components], axis=1)   # (P, N, n)


@dataclass
class _Batch:
    x: np.ndarray
    y: np.ndarray
    df: np.ndarray          # (P, N, n)
    B: np.ndarray           # (P, N, n, n)  ∇̄_{∂i} df(∂j) as ambient vectors
    gbar: np.ndarray        # (P, N, N)
    g: np.ndarray           # (P, n, n) pullback metric
    hvec: np.ndarray        # (P, N, n, n)  normal part of B


def _extrinsic_batch(spec: ImmersionSpec, x) -> _Batch:
    x = spec.source.check_points(x)
    jets = [c.jet(x, 2) for c in spec.components]
    F = stack(jets, axis=1)
    y = F.v
    df = F.d
    d2 = F.dd
    if spec.ambient.constant_metric:
        gbar = spec.ambient.metric_jet(y, order=0, check=False).v
        B = d2
    else:
        gj = spec.ambient.metric_jet(y, order=1)
        gbar = gj.v
        gam = christoffel_jet(gj).v                               # (P, a, b, c)
        B = d2 + np.einsum("pabc,pbi,pcj->paij", gam, df, df, optimize=True)
    g = np.einsum("pai,pab,pbj->pij", df, gbar, df, optimize=True)
    sv = np.linalg.eigvalsh(g)[:, 0]
    if np.any(sv <= RANK_TOL):
        p = int(np.argmin(sv))
        raise GeometryError(f"{spec.name}: differential is rank deficient at {x[p].tolist()}")
    # tangential part: df g^{-1} df^T ḡ B
    rhs = np.einsum("pai,pab,pbjk->pijk", df, gbar, B, optimize=True)
    coef = np.linalg.solve(g, rhs.reshape(x.shape[0], spec.dim, -1))
    coef = coef.reshape(x.shape[0], spec.dim, spec.dim, spec.dim)
    tang = np.einsum("pai,pijk->pajk", df, coef)
    return _Batch(x, y, df, B, gbar, g, B - tang)


def normal_frame(gbar: np.ndarray, df: np.ndarray) -> np.ndarray:
    """ḡ-orthonormal basis (columns) of the normal space of ``df``.

    Coordinate vectors are orthogonalized against the tangent space; at each
    step the candidate with the largest relative residual is taken (lowest index
    on ties).
    """
    N, n = df.shape
    basis = []
    for v in df.T:
        w = v.copy()
        for e in basis:
            w -= (e @ gbar @ w) * e
        basis.append(w / np.sqrt(w @ gbar @ w))
    normals = []
    while len(normals) < N - n:
        best, best_score = None, -1.0
        for i in range(N):
            w = np.eye(N)[i]
            for e in basis + normals:
                w = w - (e @ gbar @ w) * e
            for e in basis + normals:
                w = w - (e @ gbar @ w) * e
            score = (w @ gbar @ w) / gbar[i, i]
            if score > best_score + 1e-14:
                best, best_score = w, score
        normals.append(best / np.sqrt(best @ gbar @ best))
    return np.array(normals).T


@dataclass
class ExtrinsicPoint:
    """Second fundamental form of an immersion at one point.

    ``hbar[a, b]`` holds the normal-frame components of h̄(e_a, e_b) for the
    tangent frame columns ``tangent[:, a]``; ``blocks`` index the declared
    source distributions within that frame.
    """

    x: np.ndarray
    y: np.ndarray
    g: np.ndarray
    df: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    coord_h: np.ndarray          # h̄(∂_i, ∂_j) in the normal frame, (n, n, m)
    hbar: np.ndarray             # (n, n, m)
    blocks: tuple[slice, ...]

    def h(self, X, Y) -> np.ndarray:
        return np.einsum("i,j,ijr->r", np.asarray(X, float), np.asarray(Y, float), self.coord_h)

    @property
    def H(self) -> np.ndarray:
        return np.einsum("aar->r", self.hbar)

    @property
    def block_means(self) -> list[np.ndarray]:
        return [np.einsum("aar->r", self.hbar[sl, sl]) for sl in self.blocks]

    @property
    def h_norm2(self) -> float:
        return float(np.sum(self.hbar ** 2))

    def mixed_norm2(self, i: int, j: int) -> float:
        return float(np.sum(self.hbar[self.blocks[i], self.blocks[j]] ** 2))

    def mean_of(self, V) -> np.ndarray:
        V = _orthonormal_check(self.g, V)
        return np.einsum("ia,ja,ijr->r", V, V, self.coord_h)

    def restricted_norm2(self, V) -> float:
        """‖h̄_V‖² over a g-orthonormal basis of V."""
        V = _orthonormal_check(self.g, V)
        hv = np.einsum("ia,jb,ijr->abr", V, V, self.coord_h)
        return float(np.sum(hv ** 2))


def _orthonormal_check(g: np.ndarray, V) -> np.ndarray:
    V = np.asarray(V, dtype=float).reshape(g.shape[0], -1)
    if np.max(np.abs(V.T @ g @ V - np.eye(V.shape[1]))) > 1e-9:
        raise GeometryError("subspace basis is not g-orthonormal")
    return V


def second_fundamental(spec: ImmersionSpec, x, frame: np.ndarray | None = None) -> ExtrinsicPoint:
    """h̄ at ``x``; the tangent frame is adapted to ``spec.distributions`` when declared."""
    x = np.asarray(x, dtype=float).reshape(-1)
    b = _extrinsic_batch(spec, x[None, :])
    if not spec.induced:
        g_decl = spec.source.metric_at(x)
        if np.max(np.abs(g_decl - b.g[0])) > ISOMETRY_TOL * max(1.0, np.max(np.abs(b.g[0]))):
            raise GeometryError(f"{spec.name}: declared metric is not the pullback at {x.tolist()}")
    blocks: tuple[slice, ...] = ()
    if frame is not None:
        E = np.asarray(frame, dtype=float)
    elif spec.distributions is not None:
        af = adapted_frame(spec.distributions, x)
        E = af.vectors[0].T
        blocks = af.blocks
    else:
        from .geometry import orthonormal_basis
        E = orthonormal_basis(b.g[0])
    nu = normal_frame(b.gbar[0], b.df[0])
    coord_h = np.einsum("aij,ab,br->ijr", b.hvec[0], b.gbar[0], nu)
    hbar = np.einsum("ia,jb,ijr->abr", E, E, coord_h)
    if not blocks:
        blocks = (slice(0, spec.dim),)
    return ExtrinsicPoint(x, b.y[0], b.g[0], b.df[0], E, nu, coord_h, hbar, tuple(blocks))


def gauss_residual(spec: ImmersionSpec, x, X, Y, Z, U, ep: ExtrinsicPoint | None = None,
                   cps=None) -> float:
    """|R̄(Y,Z,U,X) − R(Y,Z,U,X) − ⟨h̄(Y,U), h̄(Z,X)⟩ + ⟨h̄(Z,U), h̄(Y,X)⟩|."""
    ep = ep or second_fundamental(spec, x)
    cp, cpbar = cps or (curvature_point(spec.source, ep.x), curvature_point(spec.ambient, ep.y))
    X, Y, Z, U = (np.asarray(v, dtype=float) for v in (X, Y, Z, U))
    dX, dY, dZ, dU = (ep.df @ v for v in (X, Y, Z, U))
    Rbar = np.einsum("ijkl,i,j,k,l->", cpbar.riemann, dY, dZ, dU, dX)
    R = np.einsum("ijkl,i,j,k,l->", cp.riemann, Y, Z, U, X)
    return float(abs(Rbar - R - ep.h(Y, U) @ ep.h(Z, X) + ep.h(Z, U) @ ep.h(Y, X)))


def partial_mean_curvature(spec: ImmersionSpec, x, V) -> np.ndarray:
    """Normal-frame components of H̄_V = Σ h̄(e_i, e_i) for a g-orthonormal basis of V."""
    return second_fundamental(spec, x).mean_of(V)


def mean_curvature_tensor(ep: ExtrinsicPoint, host: np.ndarray) -> np.ndarray:
    """T_ijkl = ⟨h̄_il, h̄_jk⟩ in the host basis; ½Σ_ab T(e_a,e_b,e_b,e_a) = ½‖H̄_V‖²."""
    hh = np.einsum("ia,jb,ijr->abr", host, host, ep.coord_h)
    return np.ascontiguousarray(np.einsum("ilr,jkr->ijkl", hh, hh))


def host_for(spec: ImmersionSpec, ep: ExtrinsicPoint, names=None) -> np.ndarray:
    """Orthonormal basis of D_x: the listed source distributions (all if ``None``)."""
    if spec.distributions is None:
        return ep.tangent
    idx = range(len(spec.distributions.names)) if names is None else \
        [spec.distributions.index(n) for n in names]
    return np.concatenate([ep.tangent[:, ep.blocks[i]] for i in idx], axis=1)


def cal_H(spec: ImmersionSpec, x, s: int, host: np.ndarray | None = None,
          budget: Budget = DEFAULT_BUDGET, seed: int = 0, oracle: bool = True,
          ep: ExtrinsicPoint | None = None) -> InvariantResult:
    """max ‖H̄_V‖ over s-dimensional V inside the host (D_x by default)."""
    ep = ep or second_fundamental(spec, x)
    host = host_for(spec, ep) if host is None else np.asarray(host, dtype=float)
    d = host.shape[1]
    if not 0 < s <= d:
        raise ValueError(f"s must satisfy 0 < s <= {d}")
    if s == d:
        val = float(np.linalg.norm(ep.mean_of(host)))
        return InvariantResult("cal_H", (s,), ep.x, val,
                               SubspaceTuple(host, (s,), np.eye(d)), 0, True, 0.0,
                               val if oracle else None, 0.0 if oracle else None)
    T = mean_curvature_tensor(ep, host)
    W = np.ones((s, s))
    best = optimize_frames(T, W, d, s, 1.0, budget, seed, f"cal_H{s}", ep.x)
    val = float(np.sqrt(max(2.0 * best["value"], 0.0)))
    res = InvariantResult("cal_H", (s,), ep.x, val, SubspaceTuple(host, (s,), best["E"]),
                          budget.restarts, best["converged_any"], best["grad_norm"])
    if oracle:
        ov = oracle_extreme(T, W, d, s, 1.0, budget.oracle_draws, seed, f"cal_H{s}", ep.x)
        res.oracle_value = float(np.sqrt(max(2.0 * ov, 0.0)))
        res.oracle_gap = res.value - res.oracle_value
    return res


def mixed_tg_defect(spec: ImmersionSpec, x, tup: SubspaceTuple,
                    ep: ExtrinsicPoint | None = None) -> float:
    """Σ_{i<j} ‖h̄^mix_ij‖² for the tuple (host given in source coordinates)."""
    ep = ep or second_fundamental(spec, x)
    V = tup.vectors()
    hv = np.einsum("ia,jb,ijr->abr", V, V, ep.coord_h)
    total = 0.0
    sl = block_slices(tup.partition)
    for i in range(len(sl)):
        for j in range(i + 1, len(sl)):
            total += float(np.sum(hv[sl[i], sl[j]] ** 2))
    return total


def block_mean_dispersion(ep: ExtrinsicPoint, tup: SubspaceTuple) -> float:
    """max_{i<j} ‖H̄_i − H̄_j‖ for the blocks of a tuple."""
    V = tup.vectors()
    means = [np.einsum("ia,ja,ijr->r", V[:, sl], V[:, sl], ep.coord_h)
             for sl in block_slices(tup.partition)]
    worst = 0.0
    for i in range(len(means)):
        for j in range(i + 1, len(means)):
            worst = max(worst, float(np.linalg.norm(means[i] - means[j])))
    return worst


def mean_curvature_sq(spec: ImmersionSpec, x, host_names=None, batch=None) -> np.ndarray:
    """‖H̄_D‖² at a batch of points (all of TM when no distributions are named)."""
    b = batch if batch is not None else _extrinsic_batch(spec, x)
    if host_names is None or spec.distributions is None:
        ginv = np.linalg.inv(b.g)
        H = np.einsum("pij,paij->pa", ginv, b.hvec)
    else:
        af = adapted_frame(spec.distributions, b.x, check=False, order=0)
        idx = [spec.distributions.index(n) for n in host_names]
        rows = np.concatenate([np.arange(af.blocks[i].start, af.blocks[i].stop) for i in idx])
        E = af.vectors[:, rows]                                  # (P, d, n)
        H = np.einsum("pdi,pdj,paij->pa", E, E, b.hvec)
    return np.einsum("pa,pab,pb->p", H, b.gbar, H)


__all__ = [
    "ImmersionSpec", "ExtrinsicPoint", "induced_metric", "second_fundamental", "gauss_residual",
    "partial_mean_curvature", "cal_H", "mixed_tg_defect", "normal_frame", "mean_curvature_sq",
    "block_mean_dispersion", "host_for", "mean_curvature_tensor",
]
