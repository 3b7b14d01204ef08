"""JSON run configurations: parsing, validation and resolution into a registry.

Top-level keys are ``manifolds``, ``distributions``, ``immersions``,
``invariants``, ``checks`` and ``settings``.  Every expression is a string in
the :mod:`curvlab.expr` grammar; box bounds and points may also be constant
expressions such as ``"2*pi"``.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .adapted import DistributionSet
from .errors import ConfigError, CurvlabError
from .expr import ScalarField
from .geometry import MetricChart
from .harness import CheckSpec, Settings, _check_arity, _kind
from .immersion import ImmersionSpec, induced_metric
from .invariants import KINDS, Budget, canonical_partition
from .registry import DistributionRecord, Registry

TOP_KEYS = ("manifolds", "distributions", "immersions", "invariants", "checks", "settings")
SEED_ENV = "CURVLAB_SEED"

# setting -> (type, lower, upper)
SETTING_RANGES = {
    "seed": (int, 0, 2**63 - 1),
    "samples": (int, 1, 100_000),
    "inequality_samples": (int, 1, 10_000),
    "resolution": (int, 4, 512),
    "identity_tol": (float, 0.0, 1.0),
    "inequality_tol": (float, 0.0, 1.0),
    "integral_tol": (float, 0.0, 1.0),
    "ambient_samples": (int, 1, 10_000),
    "chunk": (int, 16, 1_000_000),
    "restarts": (int, 1, 10_000),
    "max_iter": (int, 1, 100_000),
    "opt_tol": (float, 0.0, 1.0),
    "oracle_draws": (int, 1, 10_000_000),
    "jobs": (int, 1, 1024),
}
BUDGET_KEYS = {"restarts": "restarts", "max_iter": "max_iter", "opt_tol": "tol",
               "oracle_draws": "oracle_draws"}


@dataclass(frozen=True)
class InvariantRequest:
    manifold: str
    point: tuple[float, ...]
    partition: tuple[int, ...]
    kind: str
    distributions: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"manifold": self.manifold, "point": list(self.point),
                "partition": list(self.partition), "kind": self.kind,
                "distributions": list(self.distributions)}


@dataclass
class RunConfig:
    raw: dict
    registry: Registry
    checks: list[CheckSpec]
    invariants: list[InvariantRequest]
    settings: Settings
    jobs: int = 1
    digest: str = ""
    source: str | None = None
    manifold_records: dict = field(default_factory=dict)

    def with_overrides(self, seed=None, resolution=None, jobs=None) -> "RunConfig":
        s = self.settings
        if seed is not None:
            s = replace(s, seed=_ranged("seed", seed, "command line"))
        if resolution is not None:
            s = replace(s, resolution=_ranged("resolution", resolution, "command line"))
        out = replace(self, settings=s)
        if jobs is not None:
            out.jobs = _ranged("jobs", jobs, "command line")
        return out


# ---------------------------------------------------------------- helpers
def _where(section: str, i: int, rec) -> str:
    name = rec.get("name") if isinstance(rec, dict) else None
    return f"{section}[{i}]" + (f" {name!r}" if name else "")


def _constant(value, where: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            f = ScalarField.from_source(value, 1)
        except CurvlabError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if not f.is_constant:
            raise ConfigError(f"{where}: {value!r} is not a constant")
        return float(f(np.zeros(1)))
    raise ConfigError(f"{where}: expected a number or constant expression, got {value!r}")


def _ranged(key: str, value, where: str):
    typ, lo, hi = SETTING_RANGES[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: setting {key!r} must be a number")
    if typ is int and float(value) != int(value):
        raise ConfigError(f"{where}: setting {key!r} must be an integer")
    value = typ(value)
    if not lo <= value <= hi:
        raise ConfigError(f"{where}: setting {key!r}={value} outside [{lo}, {hi}]")
    return value


def _require(rec, keys, where):
    if not isinstance(rec, dict):
        raise ConfigError(f"{where}: expected an object")
    missing = [k for k in keys if k not in rec]
    if missing:
        raise ConfigError(f"{where}: missing field(s) {missing}")


def _names_unique(items, section):
    seen = set()
    for i, rec in enumerate(items):
        _require(rec, ["name"], f"{section}[{i}]")
        name = rec["name"]
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{section}[{i}]: name must be a non-empty string")
        if name in seen:
            raise ConfigError(f"{section}[{i}]: duplicate name {name!r}")
        seen.add(name)


def parse_settings(raw: dict, env=None) -> tuple[Settings, int]:
    env = os.environ if env is None else env
    if not isinstance(raw, dict):
        raise ConfigError("settings: expected an object")
    unknown = sorted(set(raw) - set(SETTING_RANGES))
    if unknown:
        raise ConfigError(f"settings: unknown key(s) {unknown}")
    vals = {k: _ranged(k, v, "settings") for k, v in raw.items()}
    if "seed" not in vals and env.get(SEED_ENV):
        try:
            vals["seed"] = _ranged("seed", int(env[SEED_ENV]), SEED_ENV)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: not an integer: {env[SEED_ENV]!r}") from None
    budget = Budget(**{BUDGET_KEYS[k]: vals.pop(k) for k in list(vals) if k in BUDGET_KEYS})
    jobs = vals.pop("jobs", 1)
    return Settings(budget=budget, **vals), jobs


# ------------------------------------------------------------------ build
def _chart(rec: dict, where: str, metric) -> MetricChart:
    dim = rec["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ConfigError(f"{where}: dim must be a positive integer")
    box = rec["box"]
    if not isinstance(box, list) or len(box) != dim or \
            any(not isinstance(b, list) or len(b) != 2 for b in box):
        raise ConfigError(f"{where}: box must list {dim} [low, high] pairs")
    box = [[_constant(v, f"{where} box") for v in b] for b in box]
    if any(lo >= hi for lo, hi in box):
        raise ConfigError(f"{where}: every box interval needs low < high")
    periodic = rec.get("periodic", [False] * dim)
    if not isinstance(periodic, list) or len(periodic) != dim or \
            any(not isinstance(p, bool) for p in periodic):
        raise ConfigError(f"{where}: periodic must list {dim} booleans")
    try:
        if isinstance(metric, tuple):
            chart = MetricChart(rec["name"], dim, np.asarray(box, float), tuple(periodic), metric)
        else:
            if not isinstance(metric, list) or len(metric) != dim:
                raise ConfigError(f"{where}: metric must have {dim} rows "
                                  f"(or {dim} diagonal entries)")
            for row in metric:
                if isinstance(row, list) and len(row) != dim:
                    raise ConfigError(f"{where}: metric rows need {dim} entries")
            chart = MetricChart.from_sources(rec["name"], metric, box, periodic)
        chart.check_periodic()
        return chart
    except ConfigError:
        raise
    except CurvlabError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _comps(rec, where, dim):
    comps = rec["components"]
    if not isinstance(comps, list) or not comps:
        raise ConfigError(f"{where}: components must be a non-empty list")
    try:
        return tuple(ScalarField.from_source(str(c), dim) for c in comps)
    except CurvlabError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_config(raw, source: str | None = None, text: bytes | None = None,
                 env=None) -> RunConfig:
    """Validate a parsed configuration and resolve it into engine objects."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(raw) - set(TOP_KEYS))
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {unknown}; expected {list(TOP_KEYS)}")
    for key in TOP_KEYS[:-1]:
        if not isinstance(raw.get(key, []), list):
            raise ConfigError(f"{key}: expected an array")
    mans = raw.get("manifolds", [])
    dists = raw.get("distributions", [])
    imms = raw.get("immersions", [])
    for section, items in (("manifolds", mans), ("distributions", dists), ("immersions", imms)):
        _names_unique(items, section)
    settings, jobs = parse_settings(raw.get("settings", {}), env)

    reg = Registry()
    man_recs = {}
    for i, rec in enumerate(mans):
        where = _where("manifolds", i, rec)
        _require(rec, ["name", "dim", "box", "metric"], where)
        man_recs[rec["name"]] = (i, rec)
        if rec["metric"] != "induced":
            reg.charts[rec["name"]] = _chart(rec, where, rec["metric"])

    # immersions provide the metrics of "induced" sources
    induced_by: dict[str, str] = {}
    for i, rec in enumerate(imms):
        where = _where("immersions", i, rec)
        _require(rec, ["name", "source", "ambient", "components"], where)
        for key in ("source", "ambient"):
            if rec[key] not in man_recs:
                raise ConfigError(f"{where}: unknown {key} manifold {rec[key]!r}")
        amb_i, amb = man_recs[rec["ambient"]]
        if amb["metric"] == "induced":
            raise ConfigError(f"{where}: ambient {rec['ambient']!r} cannot have an induced metric")
        ambient = reg.charts[rec["ambient"]]
        si, src = man_recs[rec["source"]]
        swhere = _where("manifolds", si, src)
        comps = _comps(rec, where, src["dim"])
        if src["metric"] == "induced":
            if rec["source"] in induced_by:
                raise ConfigError(f"{where}: induced manifold {rec['source']!r} is already "
                                  f"induced by {induced_by[rec['source']]!r}")
            induced_by[rec["source"]] = rec["name"]
            try:
                rows = induced_metric(ambient, comps, src["dim"])
            except CurvlabError as exc:
                raise ConfigError(f"{where}: {exc}") from None
            reg.charts[rec["source"]] = _chart(src, swhere, rows)
    for name, (i, rec) in man_recs.items():
        if name not in reg.charts:
            raise ConfigError(f"{_where('manifolds', i, rec)}: induced metric but no immersion "
                              "uses it as a source")

    for i, rec in enumerate(dists):
        where = _where("distributions", i, rec)
        _require(rec, ["name", "manifold", "fields"], where)
        if rec["manifold"] not in reg.charts:
            raise ConfigError(f"{where}: unknown manifold {rec['manifold']!r}")
        chart = reg.charts[rec["manifold"]]
        fields = rec["fields"]
        if not isinstance(fields, list) or not fields or \
                any(not isinstance(v, list) or len(v) != chart.dim for v in fields):
            raise ConfigError(f"{where}: fields must be a non-empty list of {chart.dim}-vectors")
        try:
            ds = DistributionSet.from_sources(chart, {rec["name"]: fields})
        except CurvlabError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        reg.distributions[rec["name"]] = DistributionRecord(rec["name"], rec["manifold"],
                                                            ds.fields[0])

    for i, rec in enumerate(imms):
        where = _where("immersions", i, rec)
        src = reg.charts[rec["source"]]
        comps = _comps(rec, where, src.dim)
        induced = induced_by.get(rec["source"]) == rec["name"]
        amb_name = rec.get("ambient_distribution")
        if amb_name is not None:
            if amb_name not in reg.distributions:
                raise ConfigError(f"{where}: unknown ambient distribution {amb_name!r}")
            if reg.distributions[amb_name].manifold != rec["ambient"]:
                raise ConfigError(f"{where}: ambient distribution {amb_name!r} is not declared "
                                  f"on {rec['ambient']!r}")
        try:
            spec = ImmersionSpec(rec["name"], src, reg.charts[rec["ambient"]], comps,
                                 induced=induced)
            if not induced:
                spec.validate(src.sample(8, seed=0))
        except CurvlabError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        reg.immersions[rec["name"]] = spec
        reg.immersion_ambient_distribution[rec["name"]] = amb_name

    invariants = [_invariant_request(i, rec, reg) for i, rec in enumerate(raw.get("invariants", []))]
    checks = [_check_spec(i, rec, reg) for i, rec in enumerate(raw.get("checks", []))]
    digest = hashlib.sha256(text if text is not None else
                            json.dumps(raw, sort_keys=True).encode()).hexdigest()
    return RunConfig(raw, reg, checks, invariants, settings, jobs, digest, source, man_recs)


def _invariant_request(i: int, rec, reg: Registry) -> InvariantRequest:
    where = f"invariants[{i}]"
    _require(rec, ["manifold", "point", "partition", "kind"], where)
    if rec["manifold"] not in reg.charts:
        raise ConfigError(f"{where}: unknown manifold {rec['manifold']!r}")
    chart = reg.charts[rec["manifold"]]
    if rec["kind"] not in KINDS:
        raise ConfigError(f"{where}: unknown kind {rec['kind']!r}; expected one of {list(KINDS)}")
    pt = rec["point"]
    if not isinstance(pt, list) or len(pt) != chart.dim:
        raise ConfigError(f"{where}: point needs {chart.dim} coordinates")
    point = tuple(_constant(v, where) for v in pt)
    try:
        chart.check_points(np.asarray(point))
        part = canonical_partition(rec["partition"])
    except (CurvlabError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    names = tuple(rec.get("distributions", ()))
    if names:
        try:
            reg.distribution_set(names, rec["manifold"])
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return InvariantRequest(rec["manifold"], point, part, rec["kind"], names)


CHECK_FIELDS = {"id", "target", "distributions", "partitions", "samples", "resolution",
                "tolerance", "swap", "label"}


def _check_spec(i: int, rec, reg: Registry) -> CheckSpec:
    where = f"checks[{i}]"
    _require(rec, ["id", "target"], where)
    where = f"checks[{i}] {rec['id']}:{rec['target']}"
    unknown = sorted(set(rec) - CHECK_FIELDS)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {unknown}")
    try:
        spec = CheckSpec(rec["id"], rec["target"], tuple(rec.get("distributions", ())),
                         tuple(tuple(p) for p in rec.get("partitions", ())),
                         rec.get("samples"), rec.get("resolution"), rec.get("tolerance"),
                         bool(rec.get("swap", False)), rec.get("label"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    for key in ("samples", "resolution"):
        v = getattr(spec, key)
        if v is not None:
            _ranged(key if key == "resolution" else "samples", v, where)
    if spec.tolerance is not None and not (isinstance(spec.tolerance, (int, float))
                                           and spec.tolerance >= 0):
        raise ConfigError(f"{where}: tolerance must be a non-negative number")
    _check_targets(spec, reg, where)
    return spec


def _check_targets(spec: CheckSpec, reg: Registry, where: str) -> None:
    from .harness import IMMERSION_IDS
    try:
        if spec.id in IMMERSION_IDS:
            imm = reg.immersion_with(spec.target, spec.distributions)
            if spec.id.startswith("INT-"):
                _check_arity(spec, imm.distributions) if imm.distributions else None
            return
        reg.chart(spec.target)
        if spec.distributions:
            ds = reg.distribution_set(spec.distributions, spec.target)
            _check_arity(spec, ds)
        elif _kind(spec.id) != "inequality":
            raise ConfigError("needs distributions")
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None


# ------------------------------------------------------------------- load
def load_config(path, env=None) -> RunConfig:
    """Read, parse and validate a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text ({exc.reason})") from None
    try:
        return build_config(raw, str(path), text, env)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def loads_config(text: str, env=None) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<string>:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return build_config(raw, None, text.encode(), env)


__all__ = ["RunConfig", "InvariantRequest", "load_config", "loads_config", "build_config",
           "parse_settings", "SEED_ENV"]
