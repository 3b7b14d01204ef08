"""Pointwise identity checks, inequality slack reports and quadrature checks.

Every check resolves its targets through a :class:`~curvlab.registry.Registry`
and returns a :class:`CheckReport`.  Engine failures inside a check are caught
and recorded on the report so that one broken configuration never aborts a
whole suite.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .adapted import DistributionSet, adapted_frame, fundamental_data
from .errors import ConfigError, CurvlabError
from .geometry import curvature_point, orthonormalize
from .immersion import (ImmersionSpec, _extrinsic_batch, block_mean_dispersion, cal_H, host_for,
                        mean_curvature_sq, mixed_tg_defect, second_fundamental)
from .invariants import (DEFAULT_BUDGET, Budget, SubspaceTuple, canonical_partition, delta_chen,
                         delta_m, host_basis, max_sectional_on, mixed_scalar, pair_count,
                         partitions, sup_intermediate_ricci)
from .registry import Registry

IDENTITY_IDS = ("WAL2", "WAL2B", "IF3", "IFL2", "EX24")
INEQUALITY_IDS = ("INEQ-D", "INEQ-K", "INEQ-K3", "INEQ-K2", "INEQ-C", "PROP34", "SANDWICH")
INTEGRAL_IDS = ("INT-WAL2", "INT-IF3", "INT-IFL2", "INT-C45", "INT-C47", "INT-C414")
CHECK_IDS = IDENTITY_IDS + INEQUALITY_IDS + INTEGRAL_IDS
IMMERSION_IDS = ("INEQ-D", "INEQ-K", "INEQ-K3", "INEQ-K2", "INEQ-C", "INT-C45", "INT-C47",
                 "INT-C414")

EQUALITY_TOL = 1e-6
DEFECT_TOL = 1e-8
DISPERSION_TOL = 1e-6
ATTAIN_TOL = 1e-4
PROP_EQ_TOL = 1e-4
RICHARDSON_MIN = 1e3


@dataclass(frozen=True)
class Settings:
    seed: int = 12345
    samples: int = 100
    inequality_samples: int = 25
    resolution: int = 48
    identity_tol: float = 1e-6
    inequality_tol: float = 1e-6
    integral_tol: float = 1e-8
    ambient_samples: int = 16
    chunk: int = 4096
    budget: Budget = DEFAULT_BUDGET


@dataclass(frozen=True)
class CheckSpec:
    id: str
    target: str
    distributions: tuple[str, ...] = ()
    partitions: tuple[tuple[int, ...], ...] = ()
    samples: int | None = None
    resolution: int | None = None
    tolerance: float | None = None
    swap: bool = False
    label: str | None = None

    def __post_init__(self):
        if self.id not in CHECK_IDS:
            raise ConfigError(f"unknown check identifier {self.id!r}")
        object.__setattr__(self, "distributions", tuple(self.distributions))
        object.__setattr__(self, "partitions",
                           tuple(canonical_partition(p) for p in self.partitions))

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        dists = ",".join(self.distributions)
        return f"{self.id}:{self.target}" + (f"[{dists}]" if dists else "")


@dataclass
class CheckReport:
    id: str
    name: str
    target: str
    kind: str
    passed: bool
    tolerance: float
    residual: float | None = None
    slack: float | None = None
    location: list[float] | None = None
    value: float | None = None
    resolution: int | None = None
    richardson: dict | None = None
    diagnostics: dict = field(default_factory=dict)
    relations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    error: str | None = None
    error_kind: str | None = None

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _kind(check_id: str) -> str:
    if check_id in IDENTITY_IDS:
        return "identity"
    if check_id in INEQUALITY_IDS:
        return "inequality"
    return "integral"


def _tolerance(spec: CheckSpec, settings: Settings) -> float:
    if spec.tolerance is not None:
        return float(spec.tolerance)
    return {"identity": settings.identity_tol, "inequality": settings.inequality_tol,
            "integral": settings.integral_tol}[_kind(spec.id)]


# ------------------------------------------------------------------ arity
def _need(cond: bool, spec: CheckSpec, message: str) -> None:
    if not cond:
        raise ConfigError(f"{spec.name}: {message}")


def _check_arity(spec: CheckSpec, ds: DistributionSet) -> None:
    n, r = ds.chart.dim, ds.ranks
    cid = spec.id.replace("INT-", "")
    if cid == "WAL2":
        _need(len(r) in (1, 2), spec, "needs one distribution (or a complementary pair)")
        _need(len(r) == 1 or sum(r) == n, spec, "the pair must be complementary")
        _need(r[0] < n, spec, "the distribution must be proper")
    elif cid == "WAL2B":
        _need(ds.corank == 1, spec, "needs distributions of total corank one")
    elif cid in ("IF3", "IFL2", "C47"):
        _need(len(r) == 3 and sum(r) == n, spec, "needs exactly 3 complementary distributions")
    elif cid == "EX24":
        _need(n == 3 and r == (1, 1, 1), spec, "needs three line fields on a 3-manifold")
    elif cid == "C45":
        _need(len(r) in (1, 2) and r[0] < n, spec, "needs one proper distribution")
        _need(len(r) == 1 or sum(r) == n, spec, "the pair must be complementary")
    elif cid in ("C414",):
        _need(len(r) == 3 and sum(r) == n, spec, "needs D1, D2 and the complement D3")


# -------------------------------------------------------------- identities
def _identity_sides(check_id: str, fd) -> tuple[np.ndarray, np.ndarray]:
    n = fd.frame.dim
    sp = fd.splits
    if check_id == "WAL2":
        s = sp[0]
        q = s.norms
        lhs = fd.div(s.H_field + s.H_perp_field)
        rhs = (fd.mutual(s.index, s.comp) + q["h"] + q["h_perp"] - q["H"] - q["H_perp"]
               - q["T"] - q["T_perp"])
        return lhs, rhs
    if check_id == "WAL2B":
        so = fd.corank_one(n - 1)
        return fd.div(so.field()), fd.ricci_frame(n - 1) - 2.0 * so.sigma2
    if check_id in ("IF3", "IFL2"):
        X = [s.H_field + s.H_perp_field for s in sp]
        if check_id == "IF3":
            smix = (fd.mutual(sp[0].index, sp[1].index) + fd.mutual(sp[0].index, sp[2].index)
                    + fd.mutual(sp[1].index, sp[2].index))
            return 2.0 * smix, fd.div(X[0] + X[1] + X[2]) - sp[0].Q - sp[1].Q - sp[2].Q
        # factor 2: this is the WAL2 identity summed with signs (+, +, -)
        lhs = 2.0 * fd.mutual(sp[0].index, sp[1].index)
        return lhs, fd.div(X[0] + X[1] - X[2]) - sp[0].Q - sp[1].Q + sp[2].Q
    if check_id == "EX24":
        total, sig2 = None, 0.0
        for a in range(3):
            so = fd.corank_one(a)
            f = so.field()
            total = f if total is None else total + f
            sig2 = sig2 + so.sigma2
        # summing the corank-one identity over the three normals
        return fd.div(total), fd.scalar - 2.0 * sig2
    raise ValueError(check_id)


def check_identity(spec: CheckSpec, registry: Registry, settings: Settings = Settings()) -> CheckReport:
    """Worst pointwise |LHS − RHS| of an identity over quasi-random interior points."""
    tol = _tolerance(spec, settings)
    ds = registry.distribution_set(spec.distributions, spec.target)
    _check_arity(spec, ds)
    count = spec.samples or settings.samples
    pts = ds.chart.sample(count, seed=settings.seed)
    fd = fundamental_data(ds, pts)
    lhs, rhs = _identity_sides(spec.id, fd)
    res = np.abs(lhs - rhs)
    worst = int(np.argmax(res))
    return CheckReport(spec.id, spec.name, spec.target, "identity", bool(res[worst] <= tol), tol,
                       residual=float(res[worst]), location=pts[worst].tolist(),
                       diagnostics={"samples": count, "max_abs_lhs": float(np.max(np.abs(lhs))),
                                    "max_abs_rhs": float(np.max(np.abs(rhs)))})


# ------------------------------------------------------------- inequalities
@dataclass
class _Rel:
    name: str
    lhs: float
    rhs: float
    tol: float | None = None
    equality: bool = False

    def slack(self, swap: bool) -> float:
        if self.equality:
            return -abs(self.rhs - self.lhs)
        return (self.lhs - self.rhs) if swap else (self.rhs - self.lhs)


def _ambient_host(spec: ImmersionSpec, y: np.ndarray, gbar: np.ndarray) -> np.ndarray:
    if spec.ambient_distribution is None:
        return host_basis_for(gbar)
    spans = np.concatenate([s.v[0] for s in spec.ambient_distribution.span_jets(y[None, :], 0)])
    return orthonormalize(gbar, spans.T)


def host_basis_for(g: np.ndarray) -> np.ndarray:
    return orthonormalize(g, np.eye(g.shape[0]))


@dataclass
class _ImmPoint:
    x: np.ndarray
    ep: object
    cp: object
    cpbar: object
    host: np.ndarray
    hostbar: np.ndarray
    blocks: list


def _imm_point(spec: ImmersionSpec, x: np.ndarray) -> _ImmPoint:
    ep = second_fundamental(spec, x)
    cp = curvature_point(spec.source, ep.x)
    cpbar = curvature_point(spec.ambient, ep.y)
    host = host_for(spec, ep)
    hostbar = _ambient_host(spec, ep.y, cpbar.g)
    blocks = [ep.tangent[:, sl] for sl in ep.blocks]
    return _ImmPoint(ep.x, ep, cp, cpbar, host, hostbar, blocks)


def _pushed_mutual(ip: _ImmPoint, tup: SubspaceTuple) -> float:
    return mixed_scalar(ip.cpbar, [ip.ep.df @ B for B in tup.blocks()])


def _default_partitions(spec: CheckSpec, d: int) -> list[tuple[int, ...]]:
    if spec.partitions:
        return list(spec.partitions)
    out = []
    for k in range(2, min(d, 3) + 1):
        out += partitions(d, k)
    return out


def _immersion_relations(spec: CheckSpec, ip: _ImmPoint, imm: ImmersionSpec,
                         settings: Settings, oracle: bool = False):
    """Relations (and their equality-case tuples) at one point of an immersion check."""
    b, seed = settings.budget, settings.seed
    ep, cp, cpbar = ip.ep, ip.cp, ip.cpbar
    rels, tuples = [], []
    d = ip.host.shape[1]
    HD = ep.mean_of(ip.host)
    HD2 = float(HD @ HD)
    if spec.id == "INEQ-D":
        for p in _default_partitions(spec, d):
            k, s = len(p), sum(p)
            lhs = delta_m(cp, ip.host, p, "max", b, seed, oracle)
            amb = delta_m(cpbar, ip.hostbar, p, "max", b, seed, oracle)
            Hs = cal_H(imm, ip.x, s, ip.host, b, seed, oracle, ep=ep).value if s < d else None
            term = Hs ** 2 if s < d else HD2
            rels.append(_Rel(f"{p}", lhs.value, amb.value + (k - 1) / (2 * k) * term))
            tuples.append({"tuple": lhs.tuple, "ambient": amb, "cal_H": Hs, "lhs": lhs})
    elif spec.id in ("INEQ-K", "INEQ-K2", "INEQ-K3"):
        B1, B2 = ip.blocks[0], ip.blocks[1]
        n1, n2 = B1.shape[1], B2.shape[1]
        tup = SubspaceTuple(np.concatenate([B1, B2], axis=1), (n1, n2), np.eye(n1 + n2))
        if spec.id == "INEQ-K":
            lhs = mixed_scalar(cp, [B1, B2])
            amb = delta_m(cpbar, ip.hostbar, (n1, n2), "max", b, seed, oracle)
            rels.append(_Rel(f"({n1},{n2})", lhs, 0.25 * HD2 + amb.value))
            tuples.append({"tuple": tup, "ambient": amb})
        elif spec.id == "INEQ-K2":
            lhs = mixed_scalar(cp, [B1, B2])
            r = sup_intermediate_ricci(cpbar, ip.hostbar, d - 1, "max", b, seed, oracle)
            rels.append(_Rel(f"Ric_(N,N) along D, q={d - 1}", lhs, 0.25 * HD2 + r.value))
            tuples.append({"tuple": tup, "ambient": r})
        else:
            Bc = ep.tangent[:, ep.blocks[-1]]
            dp = Bc.shape[1]
            lhs = mixed_scalar(cp, [B1, B2, Bc])
            H = ep.H
            full = host_basis_for(cpbar.g)
            amb = delta_m(cpbar, full, (n1, n2, dp), "max", b, seed, oracle)
            rels.append(_Rel(f"({n1},{n2},{dp})", lhs, float(H @ H) / 3.0 + amb.value))
            tup3 = SubspaceTuple(np.concatenate([B1, B2, Bc], axis=1), (n1, n2, dp),
                                 np.eye(n1 + n2 + dp))
            tuples.append({"tuple": tup3, "ambient": amb})
    elif spec.id == "INEQ-C":
        kmax = max_sectional_on(cpbar, ip.hostbar, "max", b, seed, oracle)
        for p in _default_partitions(spec, d):
            k, s = len(p), sum(p)
            lhs = delta_chen(cp, ip.host, p, "max", b, seed, oracle)
            coef = (d + k - 1 - s) / (2.0 * (d + k - s))
            curv = 0.5 * (d * (d - 1) - sum(m * (m - 1) for m in p)) * kmax.value
            rels.append(_Rel(f"{p}", lhs.value, coef * HD2 + curv))
            tuples.append({"tuple": lhs.tuple, "ambient": kmax, "lhs": lhs})
    return rels, tuples


def _manifold_relations(spec: CheckSpec, cp, host: np.ndarray, settings: Settings,
                        oracle: bool = False):
    b, seed = settings.budget, settings.seed
    d = host.shape[1]
    rels, tuples = [], []
    if spec.id == "SANDWICH":
        c = max_sectional_on(cp, host, "min", b, seed, oracle).value
        C = max_sectional_on(cp, host, "max", b, seed, oracle).value
        for p in _default_partitions(spec, d):
            lo = delta_m(cp, host, p, "min", b, seed, oracle)
            hi = delta_m(cp, host, p, "max", b, seed, oracle)
            w = pair_count(p)
            rels += [_Rel(f"{p}: c*sum n_i n_j <= delta-", c * w, lo.value),
                     _Rel(f"{p}: delta- <= delta+", lo.value, hi.value),
                     _Rel(f"{p}: delta+ <= C*sum n_i n_j", hi.value, C * w)]
            tuples += [{"tuple": lo.tuple}, {"tuple": hi.tuple}, {"tuple": hi.tuple}]
    elif spec.id == "PROP34":
        for p in _default_partitions(spec, d):
            s = sum(p)
            dp_ = delta_m(cp, host, p, "max", b, seed, oracle).value
            dm_ = delta_m(cp, host, p, "min", b, seed, oracle).value
            dc = delta_chen(cp, host, p, "max", b, seed, oracle).value
            dh = delta_chen(cp, host, p, "min", b, seed, oracle).value
            if s == d:
                rels += [_Rel(f"{p}: delta_hat = delta-", dh, dm_, PROP_EQ_TOL, True),
                         _Rel(f"{p}: delta+ = delta", dp_, dc, PROP_EQ_TOL, True),
                         _Rel(f"{p}: delta- <= delta+", dm_, dp_)]
                tuples += [{}, {}, {}]
                continue
            ds_ = delta_chen(cp, host, (s,), "max", b, seed, oracle).value
            dhs = delta_chen(cp, host, (s,), "min", b, seed, oracle).value
            rels += [_Rel(f"{p}: delta+ >= delta - delta({s})", dc - ds_, dp_),
                     _Rel(f"{p}: delta- <= delta_hat - delta_hat({s})", dm_, dh - dhs)]
            tuples += [{}, {}]
            if s == d - 1:
                rmax = sup_intermediate_ricci(cp, host, d - 1, "max", b, seed, oracle).value
                rmin = sup_intermediate_ricci(cp, host, d - 1, "min", b, seed, oracle).value
                rels += [_Rel(f"{p}: delta+ >= delta - max Ric_{d - 1}", dc - rmax, dp_),
                         _Rel(f"{p}: delta- <= delta_hat - min Ric_{d - 1}", dm_, dh - rmin)]
                tuples += [{}, {}]
    return rels, tuples


def check_inequality(spec: CheckSpec, registry: Registry,
                     settings: Settings = Settings()) -> CheckReport:
    """Minimal slack RHS − LHS over sampled points, with equality-case diagnostics."""
    tol = _tolerance(spec, settings)
    count = spec.samples or settings.inequality_samples
    immersion = spec.id in IMMERSION_IDS
    if immersion:
        imm = registry.immersion_with(spec.target, spec.distributions)
        _need(imm.distributions is not None or spec.id in ("INEQ-D", "INEQ-C"), spec,
              "needs source distributions")
        if spec.id in ("INEQ-K", "INEQ-K2", "INEQ-K3"):
            _need(len(imm.distributions.ranks) == 2, spec, "needs exactly two distributions D1, D2")
        if spec.id == "INEQ-K2":
            _need(imm.distributions.ranks[0] == 1, spec, "D1 must be a line field")
            _need(sum(imm.distributions.ranks) >= 2, spec, "D must have rank >= 2")
        if spec.id == "INEQ-K3":
            _need(imm.distributions.corank >= 1, spec, "D must be a proper distribution")
        chart = imm.source
        pts = chart.sample(count, seed=settings.seed)
        imm.validate(pts)
    else:
        chart = registry.chart(spec.target)
        ds = registry.distribution_set(spec.distributions, spec.target) if spec.distributions else None
        pts = chart.sample(count, seed=settings.seed)
        if ds is not None:
            ds.validate(pts)

    def evaluate(x, oracle=False):
        if immersion:
            ip = _imm_point(imm, x)
            return _immersion_relations(spec, ip, imm, settings, oracle) + (ip,)
        cp = curvature_point(chart, x)
        if ds is None:
            host = host_basis(cp)
        else:
            af = adapted_frame(ds, x)
            host = np.concatenate([af.block(i)[0].T for i in range(len(ds.ranks))], axis=1)
        return _manifold_relations(spec, cp, host, settings, oracle) + (cp,)

    worst, ok = None, True
    for i, x in enumerate(pts):
        rels, _, _ = evaluate(x)
        for j, r in enumerate(rels):
            sl = r.slack(spec.swap)
            rtol = r.tol if r.tol is not None else tol
            ok = ok and sl >= -rtol
            if worst is None or sl + rtol < worst[0]:
                worst = (sl + rtol, sl, i, j)
    _, slack, wi, wj = worst
    # re-evaluate the critical point with oracles for the diagnostic block
    rels, tuples, ctx = evaluate(pts[wi], oracle=True)
    rel = rels[wj]
    diag = {"relation": rel.name, "lhs": rel.lhs, "rhs": rel.rhs, "samples": count,
            "swapped": spec.swap}
    warnings = []
    if immersion:
        diag.update(_equality_diagnostics(spec, ctx, tuples[wj], slack))
    diag.update(_oracle_block(tuples[wj]))
    if diag.get("converged") is False:
        warnings.append("optimizer did not reach the gradient tolerance at the critical point")
    relations = [{"name": r.name, "lhs": r.lhs, "rhs": r.rhs, "slack": r.slack(spec.swap),
                  "equality": r.equality, "tolerance": r.tol if r.tol is not None else tol}
                 for r in rels]
    passed = ok
    return CheckReport(spec.id, spec.name, spec.target, "inequality", bool(passed), tol,
                       slack=float(slack), location=pts[wi].tolist(), diagnostics=diag,
                       relations=relations, warnings=warnings)


def _oracle_block(info: dict) -> dict:
    out = {}
    for key in ("lhs", "ambient"):
        r = info.get(key)
        if r is not None and getattr(r, "oracle_gap", None) is not None:
            out[f"{key}_oracle_gap"] = float(r.oracle_gap)
            out[f"{key}_converged"] = bool(r.converged)
    if out and not all(v for k, v in out.items() if k.endswith("_converged")):
        out["converged"] = False
    return out


def _equality_diagnostics(spec: CheckSpec, ip: _ImmPoint, info: dict, slack: float) -> dict:
    tup = info.get("tuple")
    if tup is None:
        return {}
    ep = ip.ep
    defect = mixed_tg_defect(None, ip.x, tup, ep=ep)
    disp = block_mean_dispersion(ep, tup)
    out = {"equality": bool(abs(slack) <= EQUALITY_TOL), "mixed_tg_defect": defect,
           "mean_dispersion": disp}
    amb = info.get("ambient")
    if amb is not None and spec.id != "INEQ-C":
        sbar = _pushed_mutual(ip, tup) if spec.id != "INEQ-K2" else None
        if sbar is not None:
            out["ambient_mutual"] = sbar
            out["ambient_attained"] = bool(abs(sbar - amb.value) <= ATTAIN_TOL)
    if info.get("cal_H") is not None:
        hv = float(np.linalg.norm(ep.mean_of(tup.vectors())))
        out["mean_norm_V"] = hv
        out["cal_H_attained"] = bool(abs(hv - info["cal_H"]) <= ATTAIN_TOL)
    out["diagnostics_hold"] = bool(defect <= DEFECT_TOL and disp <= DISPERSION_TOL)
    # one-directional: equality must imply the diagnostic conditions
    out["equality_consistent"] = bool((not out["equality"]) or out["diagnostics_hold"])
    return out


# ---------------------------------------------------------------- integrals
_CACHE: dict = {}


def clear_cache() -> None:
    _CACHE.clear()


def _ds_key(ds: DistributionSet) -> tuple:
    """Cache key covering the chart geometry and the spanning fields, not only names."""
    c = ds.chart
    metric = tuple(f.source for row in c.metric for f in row)
    fields = tuple(tuple(tuple(f.source for f in vec) for vec in d) for d in ds.fields)
    return (c.name, metric, tuple(map(float, c.box.ravel())), ds.names, fields)


def _div_integrands(ds: DistributionSet, resolution: int, chunk: int) -> dict:
    """Σ over the grid of √det g·cell times Div(H_i + H_i^⊥) per declared distribution."""
    key = ("div", _ds_key(ds), resolution, chunk)
    if key in _CACHE:
        return _CACHE[key]
    pts, cell = ds.chart.grid(resolution)
    m = len(ds.ranks)
    sums = np.zeros(m)
    absum = 0.0
    vol = 0.0
    for start in range(0, len(pts), chunk):
        x = pts[start:start + chunk]
        fd = fundamental_data(ds, x, check=False)
        w = np.sqrt(np.linalg.det(fd.frame.metric.v)) * cell
        for i, s in enumerate(fd.splits):
            dv = fd.div(s.H_field + s.H_perp_field)
            sums[i] += float(np.sum(w * dv))
            absum += float(np.sum(w * np.abs(dv)))
        vol += float(np.sum(w))
    out = {"div": sums, "abs": absum, "volume": vol}
    _CACHE[key] = out
    return out


def _split_integrands(imm: ImmersionSpec, resolution: int, chunk: int, host_names) -> dict:
    """Integrals of Q_i, the corollary-4.5 density, ‖H̄‖² and ‖H̄_D‖² over a periodic source."""
    ds = imm.distributions
    key = ("split", imm.name, _ds_key(ds), tuple(c.source for c in imm.components),
           imm.ambient.name, tuple(f.source for row in imm.ambient.metric for f in row),
           tuple(host_names or ()), resolution, chunk)
    if key in _CACHE:
        return _CACHE[key]
    pts, cell = imm.source.grid(resolution)
    m = len(ds.ranks)
    Q = np.zeros(m)
    dens = 0.0
    H2 = HD2 = vol = 0.0
    for start in range(0, len(pts), chunk):
        x = pts[start:start + chunk]
        fd = fundamental_data(ds, x, check=False, order=1)
        w = np.sqrt(np.linalg.det(fd.frame.metric.v)) * cell
        for i, s in enumerate(fd.splits):
            Q[i] += float(np.sum(w * s.Q))
        q = fd.splits[0].norms
        dens += float(np.sum(w * (q["H"] + q["H_perp"] + q["T"] + q["T_perp"]
                                  - q["h"] - q["h_perp"])))
        batch = _extrinsic_batch(imm, x)
        H2 += float(np.sum(w * mean_curvature_sq(imm, x, batch=batch)))
        if host_names:
            HD2 += float(np.sum(w * mean_curvature_sq(imm, x, host_names, batch)))
        vol += float(np.sum(w))
    out = {"Q": Q, "c45": dens, "H2": H2, "HD2": HD2, "volume": vol}
    _CACHE[key] = out
    return out


def _richardson(coarse: float, fine: float, scale: float) -> dict:
    floor = 1e-12 * max(1.0, scale)
    e24, e48 = abs(coarse), abs(fine)
    if e24 <= floor:
        return {"coarse_error": e24, "fine_error": e48, "ratio": None, "status": "saturated",
                "floor": floor}
    ratio = e24 / max(e48, 1e-300)
    status = "converged" if ratio > RICHARDSON_MIN else "slow"
    return {"coarse_error": e24, "fine_error": e48, "ratio": ratio, "status": status,
            "floor": floor}


def _ambient_sup(imm: ImmersionSpec, partition, settings: Settings, use_dbar: bool) -> float:
    """Supremum of δ̄+_m over the images of sampled source points."""
    xs = imm.source.sample(settings.ambient_samples, seed=settings.seed)
    best = -np.inf
    for y in imm.image(xs):
        cpbar = curvature_point(imm.ambient, y)
        if use_dbar and imm.ambient_distribution is not None:
            host = _ambient_host(imm, y, cpbar.g)
        else:
            host = host_basis_for(cpbar.g)
        r = delta_m(cpbar, host, partition, "max", settings.budget, settings.seed, oracle=False)
        best = max(best, r.value)
    return float(best)


def integral_check(spec: CheckSpec, registry: Registry,
                   settings: Settings = Settings()) -> CheckReport:
    """Quadrature checks on fully periodic charts (trapezoid rule with √det g)."""
    tol = _tolerance(spec, settings)
    N = spec.resolution or settings.resolution
    coarse = max(N // 2, 2)
    if spec.id in ("INT-WAL2", "INT-IF3", "INT-IFL2"):
        ds = registry.distribution_set(spec.distributions, spec.target)
        _check_arity(spec, ds)
        if not ds.chart.fully_periodic:
            raise ConfigError(f"{spec.name}: quadrature needs a fully periodic chart")
        ds.validate(ds.chart.sample(16, seed=settings.seed))
        vals = {}
        for res in (coarse, N):
            data = _div_integrands(ds, res, settings.chunk)
            dv = data["div"]
            if spec.id == "INT-WAL2":
                vals[res] = dv[0]
            elif spec.id == "INT-IF3":
                vals[res] = dv.sum()
            else:
                vals[res] = dv[0] + dv[1] - dv[2]
        value = float(vals[N])
        rich = _richardson(vals[coarse], vals[N], data["abs"])
        rich.update({"coarse_resolution": coarse, "resolution": N})
        return CheckReport(spec.id, spec.name, spec.target, "integral", bool(abs(value) <= tol),
                           tol, residual=abs(value), value=value, resolution=N, richardson=rich,
                           diagnostics={"volume": data["volume"], "abs_integral": data["abs"]})
    # corollaries on immersions
    imm = registry.immersion_with(spec.target, spec.distributions)
    if imm.distributions is None:
        raise ConfigError(f"{spec.name}: needs source distributions")
    ds = imm.distributions
    _check_arity(spec, ds)
    if not imm.source.fully_periodic:
        raise ConfigError(f"{spec.name}: quadrature needs a fully periodic chart")
    probe = imm.source.sample(16, seed=settings.seed)
    if spec.id == "INT-C414":
        # adaptedness concerns D = D1 + D2 only; D3 is its complement
        imm.with_distributions(ds.subset(ds.names[:2]), imm.ambient_distribution).validate(probe)
    else:
        imm.validate(probe)
    r = ds.ranks
    n = imm.dim
    host_names = list(ds.names[:2]) if spec.id == "INT-C414" else None
    sides = {}
    for res in (coarse, N):
        data = _split_integrands(imm, res, settings.chunk, host_names)
        if spec.id == "INT-C45":
            sides[res] = (data["c45"], 0.25 * data["H2"], data["volume"])
        elif spec.id == "INT-C47":
            sides[res] = (-0.5 * float(np.sum(data["Q"])), data["H2"] / 3.0, data["volume"])
        else:
            # the integrated identity gives 2 * int S_m(D1, D2) = int (Q3 - Q1 - Q2)
            Q = data["Q"]
            sides[res] = (0.5 * float(Q[2] - Q[0] - Q[1]), 0.25 * data["HD2"], data["volume"])
    if spec.id == "INT-C45":
        d = r[0]
        part, use_dbar = (d, n - d), False
    elif spec.id == "INT-C47":
        part, use_dbar = tuple(r), False
    else:
        part, use_dbar = (r[0], r[1]), True
    amb = _ambient_sup(imm, canonical_partition(part), settings, use_dbar)
    lhs, hterm, vol = sides[N]
    rhs = hterm + amb * vol
    slack = (lhs - rhs) if spec.swap else (rhs - lhs)
    extra = {}
    if spec.id == "INT-C414":
        extra = {"unhalved_lhs": 2.0 * lhs, "unhalved_slack": rhs - 2.0 * lhs}
    lc, hc, vc = sides[coarse]
    est = abs((rhs - lhs) - ((hc + amb * vc) - lc))
    return CheckReport(spec.id, spec.name, spec.target, "integral", bool(slack >= -tol), tol,
                       slack=float(slack), value=float(lhs), resolution=N,
                       richardson={"coarse_resolution": coarse, "resolution": N,
                                   "slack_change": est},
                       diagnostics={"lhs": lhs, "rhs": rhs, "mean_curvature_term": hterm,
                                    "ambient_delta_plus": amb, "volume": vol,
                                    "ambient_delta_rule": "supremum over "
                                    f"{settings.ambient_samples} sampled image points",
                                    "swapped": spec.swap, **extra})


# ----------------------------------------------------------------- dispatch
def run_check(spec: CheckSpec, registry: Registry, settings: Settings = Settings()) -> CheckReport:
    """Run one check; engine and configuration errors are recorded, not raised."""
    try:
        kind = _kind(spec.id)
        if kind == "identity":
            return check_identity(spec, registry, settings)
        if kind == "inequality":
            return check_inequality(spec, registry, settings)
        return integral_check(spec, registry, settings)
    except (CurvlabError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        kind = "config" if isinstance(exc, ConfigError) else "engine"
        return CheckReport(spec.id, spec.name, spec.target, _kind(spec.id), False,
                           _tolerance(spec, settings), error=f"{type(exc).__name__}: {exc}",
                           error_kind=kind)


__all__ = [
    "CHECK_IDS", "CheckSpec", "CheckReport", "Settings", "check_identity", "check_inequality",
    "integral_check", "run_check", "clear_cache",
]
