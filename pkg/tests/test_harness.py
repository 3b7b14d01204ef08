import json
import math

import numpy as np
import pytest

from curvlab import harness
from curvlab.adapted import fundamental_data
from curvlab.errors import ConfigError, GeometryError
from curvlab.harness import (CHECK_IDS, CheckSpec, Settings, check_identity, check_inequality,
                             integral_check, run_check)
from curvlab.invariants import Budget

FAST = Settings(samples=20, inequality_samples=2, resolution=16, ambient_samples=2,
                budget=Budget(restarts=6, oracle_draws=500))


@pytest.fixture(scope="module")
def suite_reports(suite_cfg):
    harness.clear_cache()
    return [(spec, run_check(spec, suite_cfg.registry, FAST)) for spec in suite_cfg.checks]


def test_gallery_covers_every_check_id(suite_cfg):
    assert {c.id for c in suite_cfg.checks} == set(CHECK_IDS)


def test_every_check_runs_cleanly(suite_reports):
    for spec, rep in suite_reports:
        assert rep.error is None, (spec.name, rep.error)
        assert rep.kind == harness._kind(spec.id)
        json.dumps(rep.to_dict())


def test_identities_hold_at_reduced_sampling(suite_reports):
    for spec, rep in suite_reports:
        if rep.kind == "identity":
            assert rep.passed, (spec.name, rep.residual)
            assert rep.residual <= 1e-6


def test_inequalities_report_worst_relation(suite_reports):
    for spec, rep in suite_reports:
        if rep.kind == "inequality":
            names = [r["name"] for r in rep.relations]
            assert rep.diagnostics["relation"] in names
            worst = rep.relations[names.index(rep.diagnostics["relation"])]
            assert worst["slack"] == rep.slack


# -- identities -------------------------------------------------------------

def test_ifl2_needs_factor_two(registry):
    ds = registry.distribution_set(("tc_e1", "tc_e2", "tc_e3"), "torus_circle")
    fd = fundamental_data(ds, ds.chart.sample(30, seed=3))
    lhs, rhs = harness._identity_sides("IFL2", fd)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9
    # the mutual curvature is not identically zero, so halving the left side breaks it
    assert np.max(np.abs(0.5 * lhs - rhs)) > 1e-3


@pytest.mark.parametrize("target,names", [
    ("s2_x_s1", ("s2s1_theta", "s2s1_phi", "s2s1_circle")),
    ("warped_t3", ("wt3_e1", "wt3_e2", "wt3_e3")),
])
def test_ex24_sign(registry, target, names):
    # the divergence equals τ − 2Σσ₂; the opposite sign is far off on curved entries
    ds = registry.distribution_set(names, target)
    fd = fundamental_data(ds, ds.chart.sample(30, seed=1))
    lhs, rhs = harness._identity_sides("EX24", fd)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9
    assert np.max(np.abs(lhs + rhs)) > 1.0


def test_wal2_residual_location_reported(registry):
    rep = check_identity(CheckSpec("WAL2", "warped_torus", ("wt_line",)), registry, FAST)
    assert rep.passed and len(rep.location) == 2
    assert rep.diagnostics["samples"] == 20


@pytest.mark.parametrize("cid,target,dists", [
    ("WAL2", "flat_t3", ("t3_e1", "t3_e2")),
    ("EX24", "s2_x_s1", ("s2s1_sphere", "s2s1_circle")),
    ("IF3", "flat_t3", ("t3_e1", "t3_e2")),
    ("WAL2B", "flat_t3", ("t3_e1",)),
])
def test_arity_violations_are_config_errors(registry, cid, target, dists):
    rep = run_check(CheckSpec(cid, target, dists), registry, FAST)
    assert not rep.passed and rep.error_kind == "config"


def test_unknown_check_id():
    with pytest.raises(ConfigError):
        CheckSpec("NOPE", "flat_t3")


def test_unknown_target_is_config_error(registry):
    rep = run_check(CheckSpec("WAL2", "nowhere", ("t3_e1",)), registry, FAST)
    assert rep.error_kind == "config"


def test_engine_errors_are_recorded(registry, monkeypatch):
    def boom(*a, **k):
        raise GeometryError("frame degenerates")
    monkeypatch.setattr(harness, "check_identity", boom)
    rep = run_check(CheckSpec("WAL2", "flat_t3", ("t3_e1",)), registry, FAST)
    assert not rep.passed and rep.error_kind == "engine"
    assert "frame degenerates" in rep.error


# -- inequalities -----------------------------------------------------------

def test_sphere_chen_equality_diagnostics(registry):
    spec = CheckSpec("INEQ-C", "sphere_in_r3", partitions=((1, 1),), samples=3)
    rep = check_inequality(spec, registry, FAST)
    d = rep.diagnostics
    assert rep.passed
    assert abs(rep.slack) <= 1e-6
    assert d["equality"] and d["diagnostics_hold"] and d["equality_consistent"]
    assert d["mixed_tg_defect"] <= 1e-8 and d["mean_dispersion"] <= 1e-6
    assert "lhs_oracle_gap" in d


def test_swap_turns_strict_inequality_into_failure(registry):
    spec = CheckSpec("INEQ-D", "torus_in_r3", samples=2)
    plain = check_inequality(spec, registry, FAST)
    swapped = check_inequality(CheckSpec("INEQ-D", "torus_in_r3", samples=2, swap=True),
                               registry, FAST)
    assert plain.passed and plain.slack > 1e-3
    assert not swapped.passed and swapped.diagnostics["swapped"]


def test_prop34_equalities_on_full_partitions(registry):
    rep = check_inequality(CheckSpec("PROP34", "sphere_s3", partitions=((2, 1),), samples=2),
                           registry, FAST)
    eq = [r for r in rep.relations if r["equality"]]
    assert len(eq) == 2 and all(abs(r["slack"]) <= 1e-4 for r in eq)


def test_sandwich_on_sphere_is_tight(registry):
    rep = check_inequality(CheckSpec("SANDWICH", "sphere_s3", samples=2), registry, FAST)
    assert rep.passed
    assert all(abs(r["slack"]) <= 1e-8 for r in rep.relations)


# -- integrals --------------------------------------------------------------

def test_richardson_classification():
    assert harness._richardson(1e-20, 1e-21, 1.0)["status"] == "saturated"
    assert harness._richardson(1e-3, 1e-9, 1.0)["status"] == "converged"
    assert harness._richardson(1e-3, 5e-4, 1.0)["status"] == "slow"
    # the floor scales with the magnitude of the integrand
    assert harness._richardson(1e-11, 1e-12, 1e3)["status"] == "saturated"


def test_conformal_torus_divergence_converges(registry):
    harness.clear_cache()
    rep = integral_check(CheckSpec("INT-WAL2", "conformal_torus", ("ct_tilted",)), registry,
                         Settings(resolution=48))
    assert rep.passed
    assert rep.richardson["status"] == "converged"
    assert rep.richardson["coarse_resolution"] == 24


def test_integral_needs_periodic_chart(registry):
    rep = run_check(CheckSpec("INT-WAL2", "sphere_s2", ("s2_theta",)), registry, FAST)
    assert rep.error_kind == "config"


def test_c414_reports_unhalved_form(registry):
    spec = CheckSpec("INT-C414", "flat_t3_in_r6_dbar", ("t3_e1", "t3_e2", "t3_e3"))
    rep = integral_check(spec, registry, FAST)
    d = rep.diagnostics
    assert d["unhalved_lhs"] == pytest.approx(2 * d["lhs"])
    assert d["unhalved_slack"] == pytest.approx(d["rhs"] - 2 * d["lhs"])
    assert rep.slack == pytest.approx(d["rhs"] - d["lhs"])


def test_c45_on_clifford_torus(registry):
    rep = integral_check(CheckSpec("INT-C45", "clifford_in_r4", ("cl_u",)), registry, FAST)
    d = rep.diagnostics
    # flat ambient; ‖H̄‖² = 4 on a torus of area 2π²
    assert d["ambient_delta_plus"] == pytest.approx(0.0, abs=1e-12)
    assert d["volume"] == pytest.approx(2 * math.pi ** 2, rel=1e-12)
    assert d["mean_curvature_term"] == pytest.approx(0.25 * 4 * 2 * math.pi ** 2, rel=1e-10)
    assert rep.passed
