"""Mutual curvature of subspace tuples and the extremal invariants built on it.

All objectives are evaluated in an orthonormal basis of the host subspace
``D_x`` (``host`` is an ``n x d`` matrix whose columns are g-orthonormal
coordinate vectors).  A tuple ``V_1, ..., V_k`` is a ``d x s`` matrix with
orthonormal columns split into blocks of widths ``n_1 >= ... >= n_k``.

Extrema are found by multi-start projected gradient ascent on the Stiefel
manifold (:mod:`curvlab.kernels`) and cross-checked by an independent
sampling oracle that never looks at the optimizer.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .adapted import ricci_q  # noqa: F401  (re-exported)
from .errors import GeometryError
from .geometry import CurvaturePoint, orthonormalize

KINDS = ("delta_plus_m", "delta_minus_m", "delta_chen", "delta_chen_hat",
         "max_sectional", "min_sectional", "sup_ricci", "inf_ricci")


@dataclass(frozen=True)
class Budget:
    restarts: int = 32
    max_iter: int = 500
    tol: float = 1e-7
    oracle_draws: int = 20_000

    def replace(self, **kw) -> "Budget":
        vals = {**self.__dict__, **{k: v for k, v in kw.items() if v is not None}}
        return Budget(**vals)


DEFAULT_BUDGET = Budget()


# ------------------------------------------------------------- partitions
def canonical_partition(partition) -> tuple[int, ...]:
    """Unordered tuples are stored in non-increasing order."""
    p = tuple(sorted((int(n) for n in partition), reverse=True))
    if not p or min(p) < 1:
        raise ValueError(f"partition entries must be positive: {partition}")
    return p


def partitions(d: int, k: int) -> list[tuple[int, ...]]:
    """S(d, k): non-increasing k-tuples of positive integers with sum <= d."""
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], remaining: int, cap: int):
        if len(prefix) == k:
            out.append(prefix)
            return
        slots = k - len(prefix) - 1
        for n in range(min(cap, remaining - slots), 0, -1):
            rec(prefix + (n,), remaining - n, n)

    rec((), d, d)
    return sorted(out)


def block_slices(partition) -> list[slice]:
    out, start = [], 0
    for n in partition:
        out.append(slice(start, start + n))
        start += n
    return out


def pair_count(partition) -> int:
    """Σ_{i<j} n_i n_j."""
    return sum(a * b for a, b in combinations(partition, 2))


def mutual_weights(partition) -> np.ndarray:
    s = sum(partition)
    W = np.ones((s, s))
    for sl in block_slices(partition):
        W[sl, sl] = 0.0
    return W


def block_scalar_weights(partition) -> np.ndarray:
    s = sum(partition)
    W = np.zeros((s, s))
    for sl in block_slices(partition):
        W[sl, sl] = 2.0
    np.fill_diagonal(W, 0.0)
    return W


# --------------------------------------------------------------- tensors
def host_basis(cp: CurvaturePoint, spans=None) -> np.ndarray:
    """g-orthonormal basis (columns) of the span of ``spans`` or of T_xM."""
    if spans is None:
        spans = np.eye(cp.dim)
    return orthonormalize(cp.g, np.asarray(spans, dtype=float))


def host_tensor(cp: CurvaturePoint, host: np.ndarray) -> np.ndarray:
    """Curvature tensor in the host basis: T[a,b,c,e] = Rm(h_a, h_b, h_c, h_e)."""
    return np.ascontiguousarray(
        np.einsum("ijkl,ia,jb,kc,ld->abcd", cp.riemann, host, host, host, host, optimize=True))


def _check_orthonormal(cp: CurvaturePoint, V: np.ndarray, tol: float = 1e-9) -> None:
    G = V.T @ cp.g @ V
    if np.max(np.abs(G - np.eye(V.shape[1])), initial=0.0) > tol:
        raise GeometryError("vectors are not g-orthonormal")


@dataclass
class SubspaceTuple:
    """Mutually orthogonal subspaces V_1..V_k of a host subspace."""

    host: np.ndarray                  # n x d, g-orthonormal columns
    partition: tuple[int, ...]
    coeffs: np.ndarray                # d x s, orthonormal columns

    def __post_init__(self):
        self.partition = tuple(int(n) for n in self.partition)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        d, s = self.coeffs.shape
        if sum(self.partition) != s:
            raise ValueError("block widths do not match the coefficient matrix")
        if d != self.host.shape[1]:
            raise ValueError("coefficient rows do not match the host dimension")
        err = np.max(np.abs(self.coeffs.T @ self.coeffs - np.eye(s)), initial=0.0)
        if err > 1e-10:
            raise ValueError(f"coefficient matrix is not orthonormal (error {err:.2e})")

    @property
    def k(self) -> int:
        return len(self.partition)

    def vectors(self) -> np.ndarray:
        """All frame vectors as coordinate columns (n x s)."""
        return self.host @ self.coeffs

    def blocks(self) -> list[np.ndarray]:
        V = self.vectors()
        return [V[:, sl] for sl in block_slices(self.partition)]


@dataclass
class InvariantResult:
    kind: str
    partition: tuple[int, ...]
    x: np.ndarray
    value: float
    tuple: SubspaceTuple | None
    restarts: int = 0
    converged: bool = True
    grad_norm: float = 0.0
    oracle_value: float | None = None
    oracle_gap: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "partition": list(self.partition),
            "point": [float(v) for v in self.x],
            "value": float(self.value),
            "restarts": self.restarts,
            "converged": bool(self.converged),
            "grad_norm": float(self.grad_norm),
            "oracle_value": None if self.oracle_value is None else float(self.oracle_value),
            "oracle_gap": None if self.oracle_gap is None else float(self.oracle_gap),
            **({"extra": self.extra} if self.extra else {}),
        }


# ----------------------------------------------------- pointwise invariants
def _sum_sectional_pairs(cp: CurvaturePoint, A: np.ndarray, B: np.ndarray) -> float:
    # Σ K(a, b) = Σ Rm(a, b, b, a) for orthonormal a ⟂ b
    return float(np.einsum("ijkl,ia,jb,kb,la->", cp.riemann, A, B, B, A, optimize=True))


def mutual_curvature(cp: CurvaturePoint, tup: SubspaceTuple) -> float:
    """S_m(V_1..V_k): sectional curvatures summed over planes with legs in distinct V_i."""
    T = host_tensor(cp, tup.host)
    return kernels.objective(T, tup.coeffs, mutual_weights(tup.partition))


def mixed_scalar(cp: CurvaturePoint, blocks: list[np.ndarray], complementary: bool = False) -> float:
    """Mutual curvature summed over all pairs of the given orthonormal blocks."""
    V = np.concatenate(blocks, axis=1)
    _check_orthonormal(cp, V)
    if complementary and V.shape[1] != cp.dim:
        raise GeometryError("blocks do not span the tangent space")
    total = 0.0
    for i, j in combinations(range(len(blocks)), 2):
        total += _sum_sectional_pairs(cp, blocks[i], blocks[j])
    return total


def scalar_on_subspace(cp: CurvaturePoint, V: np.ndarray) -> float:
    """τ(V) = Σ_{a≠b} K(e_a, e_b) over an orthonormal basis of V."""
    V = np.asarray(V, dtype=float).reshape(cp.dim, -1)
    _check_orthonormal(cp, V)
    if V.shape[1] < 2:
        return 0.0
    return float(np.einsum("ijkl,ia,jb,kb,la->", cp.riemann, V, V, V, V, optimize=True))


# ------------------------------------------------------------- optimizer
def _point_key(x) -> int:
    return zlib.crc32(np.ascontiguousarray(np.asarray(x, dtype=float)).tobytes())


def _rng(seed: int, tag: str, x, index: int) -> np.random.Generator:
    # counter-based stream per (invariant, point, restart): independent of scheduling
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(tag.encode()),
                                 _point_key(x), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def optimize_frames(T: np.ndarray, W: np.ndarray, d: int, s: int, sign: float,
                    budget: Budget, seed: int, tag: str, x) -> dict:
    """Best of ``budget.restarts`` Stiefel ascents of ``sign * f``.

    Ties within 1e-10 keep the lowest restart index.
    """
    best = None
    converged_any = False
    for r in range(budget.restarts):
        E0 = _rng(seed, tag, x, r).standard_normal((d, s))
        E, f, gnorm, iters, conv = kernels.ascend(T, E0, W, sign, budget.max_iter, budget.tol)
        converged_any |= bool(conv)
        if best is None or sign * f > sign * best["value"] + 1e-10:
            best = {"value": float(f), "E": np.asarray(E), "grad_norm": float(gnorm),
                    "iterations": int(iters), "restart": r, "converged": bool(conv)}
    best["converged_any"] = converged_any
    return best


def random_frames(rng: np.random.Generator, draws: int, d: int, s: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((draws, d, s)))
    sg = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    sg[sg == 0] = 1.0
    return Q * sg[:, None, :]


def oracle_extreme(T: np.ndarray, W: np.ndarray, d: int, s: int, sign: float,
                   draws: int, seed: int, tag: str, x) -> float:
    """Extremal objective over ``draws`` orthonormalized Gaussian frames."""
    if draws < 1:
        raise ValueError("draws must be >= 1")
    rng = _rng(seed, "oracle:" + tag, x, 0)
    best = None
    step = 4096
    for start in range(0, draws, step):
        frames = random_frames(rng, min(step, draws - start), d, s)
        vals = kernels.objective_batch(T, frames, W)
        cand = float(vals.max() if sign > 0 else vals.min())
        if best is None or sign * cand > sign * best:
            best = cand
    return best


def _sign(sign) -> float:
    if sign in ("max", "+", 1, 1.0, "plus"):
        return 1.0
    if sign in ("min", "-", -1, -1.0, "minus"):
        return -1.0
    raise ValueError(f"sign must be 'max' or 'min', got {sign!r}")


def _check_partition(partition, d: int, kmin: int) -> tuple[int, ...]:
    p = canonical_partition(partition)
    if len(p) < kmin:
        raise ValueError(f"partition {partition} needs at least {kmin} entries")
    if sum(p) > d:
        raise ValueError(f"partition {partition} does not fit in a host of dimension {d}")
    return p


def _extremize(cp, host, partition, sign, weights, kind, budget, seed, oracle) -> InvariantResult:
    host = np.asarray(host, dtype=float)
    d, s = host.shape[1], sum(partition)
    T = host_tensor(cp, host)
    W = weights(partition)
    best = optimize_frames(T, W, d, s, sign, budget, seed, kind + str(partition), cp.x)
    res = InvariantResult(kind, partition, cp.x, best["value"],
                          SubspaceTuple(host, partition, best["E"]), budget.restarts,
                          best["converged_any"], best["grad_norm"])
    if oracle:
        ov = oracle_extreme(T, W, d, s, sign, budget.oracle_draws, seed, kind + str(partition), cp.x)
        res.oracle_value = ov
        res.oracle_gap = best["value"] - ov
    return res


def delta_m(cp: CurvaturePoint, host, partition, sign="max", budget: Budget = DEFAULT_BUDGET,
            seed: int = 0, oracle: bool = True) -> InvariantResult:
    """δ±_{m,D}(n_1..n_k): extremal mutual curvature over tuples inside the host."""
    sg = _sign(sign)
    host = host_basis(cp) if host is None else np.asarray(host, dtype=float)
    p = _check_partition(partition, host.shape[1], 2)
    kind = "delta_plus_m" if sg > 0 else "delta_minus_m"
    return _extremize(cp, host, p, sg, mutual_weights, kind, budget, seed, oracle)


def sample_oracle(cp: CurvaturePoint, host, partition, sign="max", draws: int = 20_000,
                  seed: int = 0) -> float:
    """Independent sampling estimate of δ±_m over ``draws`` random tuples."""
    sg = _sign(sign)
    host = host_basis(cp) if host is None else np.asarray(host, dtype=float)
    p = _check_partition(partition, host.shape[1], 2)
    kind = "delta_plus_m" if sg > 0 else "delta_minus_m"
    return oracle_extreme(host_tensor(cp, host), mutual_weights(p), host.shape[1], sum(p), sg,
                          draws, seed, kind + str(p), cp.x)


def host_scalar(cp: CurvaturePoint, host) -> float:
    """τ(D_x) from the host basis (computed once, never optimized)."""
    return scalar_on_subspace(cp, host)


def delta_chen(cp: CurvaturePoint, host, partition, sign="max", budget: Budget = DEFAULT_BUDGET,
               seed: int = 0, oracle: bool = True) -> InvariantResult:
    """Chen-type δ_D (``sign='max'``) or δ̂_D (``sign='min'``).

    2δ_D = τ(D_x) - min Σ τ(V_i) and 2δ̂_D = τ(D_x) - max Σ τ(V_i).
    """
    sg = _sign(sign)
    host = host_basis(cp) if host is None else np.asarray(host, dtype=float)
    p = _check_partition(partition, host.shape[1], 1)
    kind = "delta_chen" if sg > 0 else "delta_chen_hat"
    tau_host = host_scalar(cp, host)
    # δ_D minimizes Σ τ(V_i), i.e. maximizes its negative
    inner = _extremize(cp, host, p, -sg, block_scalar_weights, kind, budget, seed, oracle)
    res = InvariantResult(kind, p, cp.x, 0.5 * (tau_host - inner.value), inner.tuple,
                          inner.restarts, inner.converged, inner.grad_norm,
                          extra={"tau_host": tau_host, "block_scalar_sum": inner.value})
    if oracle:
        res.oracle_value = 0.5 * (tau_host - inner.oracle_value)
        res.oracle_gap = res.value - res.oracle_value
    return res


def max_sectional_on(cp: CurvaturePoint, host, sign="max", budget: Budget = DEFAULT_BUDGET,
                     seed: int = 0, oracle: bool = True) -> InvariantResult:
    """Extremal sectional curvature over 2-planes of the host."""
    sg = _sign(sign)
    host = host_basis(cp) if host is None else np.asarray(host, dtype=float)
    if host.shape[1] < 2:
        raise ValueError("host must have dimension >= 2")
    kind = "max_sectional" if sg > 0 else "min_sectional"
    return _extremize(cp, host, (1, 1), sg, mutual_weights, kind, budget, seed, oracle)


def sup_intermediate_ricci(cp: CurvaturePoint, host, q: int, sign="max",
                           budget: Budget = DEFAULT_BUDGET, seed: int = 0,
                           oracle: bool = True) -> InvariantResult:
    """Extremal q-th Ricci curvature over (e_0, V) inside the host."""
    sg = _sign(sign)
    host = host_basis(cp) if host is None else np.asarray(host, dtype=float)
    d = host.shape[1]
    if not 1 <= q < d:
        raise ValueError(f"q must satisfy 1 <= q < {d}")
    kind = "sup_ricci" if sg > 0 else "inf_ricci"
    # S_m(span e_0, V) = Ric_q; keep e_0 as the first column for reporting
    p = (1, q)
    res = _extremize(cp, host, p, sg, mutual_weights, kind, budget, seed, oracle)
    res.partition = (q, 1) if q > 1 else (1, 1)
    return res


@dataclass
class ChainResult:
    """The four δ values at one point, plus the sign of curvature along the host."""

    partition: tuple[int, ...]
    delta_hat: float
    delta_minus: float
    delta_plus: float
    delta: float
    min_sectional: float
    max_sectional: float

    @property
    def curvature_sign(self) -> int:
        """+1 for nonnegative, -1 for nonpositive, 0 for mixed sectional curvature."""
        if self.min_sectional >= -CURVATURE_SIGN_TOL:
            return 1
        if self.max_sectional <= CURVATURE_SIGN_TOL:
            return -1
        return 0

    def stated_links(self) -> list[tuple[str, float]]:
        """Slacks of δ̂ <= δ- <= δ+ <= δ (reversed for nonpositive curvature)."""
        chain = [("delta_hat", self.delta_hat), ("delta_minus_m", self.delta_minus),
                 ("delta_plus_m", self.delta_plus), ("delta_chen", self.delta)]
        sg = -1.0 if self.curvature_sign < 0 else 1.0
        return [(f"{a} {'<=' if sg > 0 else '>='} {b}", sg * (vb - va))
                for (a, va), (b, vb) in zip(chain, chain[1:])]

    def holds(self, tol: float) -> bool:
        return all(slack >= -tol for _, slack in self.stated_links())

    def derived_links(self) -> list[tuple[str, float]]:
        """Slacks of δ- <= δ̂ and δ+ <= δ, which follow from the scalar splitting when K >= 0."""
        return [("delta_minus_m <= delta_hat", self.delta_hat - self.delta_minus),
                ("delta_plus_m <= delta_chen", self.delta - self.delta_plus)]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["curvature_sign"] = self.curvature_sign
        return out


CURVATURE_SIGN_TOL = 1e-8


def corollary_chain(cp: CurvaturePoint, host, partition, budget: Budget = DEFAULT_BUDGET,
                    seed: int = 0) -> ChainResult:
    """Evaluate δ̂_D, δ-_m, δ+_m and δ_D for one partition at one point."""
    host = host_basis(cp) if host is None else np.asarray(host, dtype=float)
    p = _check_partition(partition, host.shape[1], 2)
    return ChainResult(
        p,
        delta_chen(cp, host, p, "min", budget, seed, oracle=False).value,
        delta_m(cp, host, p, "min", budget, seed, oracle=False).value,
        delta_m(cp, host, p, "max", budget, seed, oracle=False).value,
        delta_chen(cp, host, p, "max", budget, seed, oracle=False).value,
        max_sectional_on(cp, host, "min", budget, seed, oracle=False).value,
        max_sectional_on(cp, host, "max", budget, seed, oracle=False).value,
    )


def invariant(cp: CurvaturePoint, host, partition, kind: str, budget: Budget = DEFAULT_BUDGET,
              seed: int = 0, oracle: bool = True) -> InvariantResult:
    """Dispatch by invariant name (used by configuration-driven requests)."""
    if kind == "delta_plus_m":
        return delta_m(cp, host, partition, "max", budget, seed, oracle)
    if kind == "delta_minus_m":
        return delta_m(cp, host, partition, "min", budget, seed, oracle)
    if kind == "delta_chen":
        return delta_chen(cp, host, partition, "max", budget, seed, oracle)
    if kind == "delta_chen_hat":
        return delta_chen(cp, host, partition, "min", budget, seed, oracle)
    if kind in ("max_sectional", "min_sectional"):
        return max_sectional_on(cp, host, "max" if kind == "max_sectional" else "min",
                                budget, seed, oracle)
    if kind in ("sup_ricci", "inf_ricci"):
        q = int(partition[0]) if len(partition) == 1 else int(max(partition))
        return sup_intermediate_ricci(cp, host, q, "max" if kind == "sup_ricci" else "min",
                                      budget, seed, oracle)
    raise ValueError(f"unknown invariant kind {kind!r}; expected one of {KINDS}")


__all__ = [
    "KINDS", "Budget", "DEFAULT_BUDGET", "SubspaceTuple", "InvariantResult", "canonical_partition",
    "partitions", "block_slices", "pair_count", "mutual_weights", "block_scalar_weights",
    "host_basis", "host_tensor", "mutual_curvature", "mixed_scalar", "scalar_on_subspace",
    "ricci_q", "optimize_frames", "random_frames", "oracle_extreme", "delta_m", "sample_oracle",
    "host_scalar", "delta_chen", "max_sectional_on", "sup_intermediate_ricci", "invariant",
    "ChainResult", "corollary_chain", "CURVATURE_SIGN_TOL",
]
