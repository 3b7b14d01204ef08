"""Run orchestration: invariant requests and check suites into one JSON report."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .adapted import adapted_frame
from .config import InvariantRequest, RunConfig, build_config
from .errors import ConfigError, CurvlabError
from .geometry import curvature_point
from .harness import _jsonable, run_check
from .invariants import host_basis, invariant

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ENGINE = 0, 1, 2, 3


@dataclass
class RunReport:
    version: str
    config_digest: str
    seed: int
    settings: dict
    invariants: list[dict]
    checks: list[dict]
    passed: bool
    timings: dict = field(default_factory=dict)

    def body(self) -> dict:
        """Everything except wall-clock timings (the determinism contract)."""
        out = asdict(self)
        out.pop("timings")
        return _jsonable(out)

    def body_json(self) -> str:
        return json.dumps(self.body(), sort_keys=True, indent=2)

    def to_json(self) -> str:
        out = self.body()
        out["timings"] = _jsonable(self.timings)
        return json.dumps(out, sort_keys=True, indent=2) + "\n"

    @property
    def exit_code(self) -> int:
        kinds = {c.get("error_kind") for c in self.checks if not c["passed"]}
        kinds |= {"engine" for r in self.invariants if r.get("error")}
        if "config" in kinds:
            return EXIT_CONFIG
        if "engine" in kinds:
            return EXIT_ENGINE
        return EXIT_PASS if self.passed else EXIT_FAIL

    def summary_table(self) -> str:
        rows = [("check", "kind", "result", "residual/slack")]
        for c in self.checks:
            if c["error"]:
                metric = c["error"]
            elif c["kind"] == "identity" or c.get("residual") is not None:
                metric = f"residual {c['residual']:.3e}"
            else:
                metric = f"slack {c['slack']:.3e}"
            rows.append((c["name"], c["kind"], "pass" if c["passed"] else "FAIL", metric))
        for r in self.invariants:
            val = r["error"] if r.get("error") else f"{r['result']['value']:.10g}"
            rows.append((f"{r['request']['kind']}:{r['request']['manifold']}", "invariant", "-",
                         val))
        widths = [max(len(str(r[i])) for r in rows) for i in range(3)]
        lines = ["  ".join(str(r[i]).ljust(widths[i]) for i in range(3)) + "  " + str(r[3])
                 for r in rows]
        lines.insert(1, "-" * max(len(line) for line in lines))
        n_fail = sum(not c["passed"] for c in self.checks)
        lines.append(f"{len(self.checks) - n_fail}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def evaluate_request(cfg: RunConfig, req: InvariantRequest) -> dict:
    """One invariant query: host is T_xM or the span of the listed distributions."""
    chart = cfg.registry.chart(req.manifold)
    x = np.asarray(req.point, dtype=float)
    cp = curvature_point(chart, x)
    if req.distributions:
        ds = cfg.registry.distribution_set(req.distributions, req.manifold)
        af = adapted_frame(ds, x)
        host = np.concatenate([af.block(i)[0].T for i in range(len(ds.names))], axis=1)
    else:
        host = host_basis(cp)
    s = cfg.settings
    return invariant(cp, host, req.partition, req.kind, s.budget, s.seed, oracle=True).to_dict()


# worker state: one resolved configuration per process
_WORKER: dict = {}


def _init_worker(raw: dict, settings) -> None:
    cfg = build_config(raw, env={})
    cfg.settings = settings
    _WORKER["cfg"] = cfg


def _run_job(job: tuple[str, int]) -> tuple[str, int, dict, float]:
    return _execute(_WORKER["cfg"], job)


def _execute(cfg: RunConfig, job: tuple[str, int]) -> tuple[str, int, dict, float]:
    kind, i = job
    t0 = time.perf_counter()
    if kind == "check":
        rep = run_check(cfg.checks[i], cfg.registry, cfg.settings)
        out = rep.to_dict()
    else:
        req = cfg.invariants[i]
        try:
            out = {"request": req.to_dict(), "result": evaluate_request(cfg, req), "error": None}
        except (CurvlabError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            out = {"request": req.to_dict(), "result": None,
                   "error": f"{type(exc).__name__}: {exc}"}
        out = _jsonable(out)
    return kind, i, out, time.perf_counter() - t0


def run(cfg: RunConfig, jobs: int | None = None) -> RunReport:
    """Execute every invariant request and check; reports merge in configuration order."""
    jobs = cfg.jobs if jobs is None else int(jobs)
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    work = [("inv", i) for i in range(len(cfg.invariants))] + \
           [("check", i) for i in range(len(cfg.checks))]
    t0 = time.perf_counter()
    if jobs == 1 or len(work) <= 1:
        results = [_execute(cfg, job) for job in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(cfg.raw, cfg.settings)) as pool:
            results = list(pool.map(_run_job, work))
    inv = [None] * len(cfg.invariants)
    chk = [None] * len(cfg.checks)
    timings = {"jobs": {}, "total_seconds": 0.0}
    for kind, i, out, dt in results:
        if kind == "inv":
            inv[i] = out
            timings["jobs"][f"invariant[{i}]"] = dt
        else:
            chk[i] = out
            timings["jobs"][f"check[{i}] {out['name']}"] = dt
    timings["total_seconds"] = time.perf_counter() - t0
    timings["workers"] = jobs
    passed = all(c["passed"] for c in chk) and not any(r["error"] for r in inv)
    settings = asdict(cfg.settings)
    return RunReport(__version__, cfg.digest, cfg.settings.seed, _jsonable(settings), inv, chk,
                     passed, timings)


__all__ = ["RunReport", "run", "evaluate_request", "EXIT_PASS", "EXIT_FAIL", "EXIT_CONFIG",
           "EXIT_ENGINE"]
