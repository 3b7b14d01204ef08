"""Built-in manifolds, distributions, immersions and check suites.

Each gallery entry is a self-contained run configuration (plain JSON data).
:func:`suite` merges every entry into the single configuration used by the
acceptance tests.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

TWO_PI = "2*pi"
PERIOD = [0, TWO_PI]
POLAR = [0.3, "pi-0.3"]

MANIFOLDS = {
    "flat_t2": {"dim": 2, "box": [PERIOD, PERIOD], "periodic": [True, True], "metric": ["1", "1"]},
    "flat_t3": {"dim": 3, "box": [PERIOD] * 3, "periodic": [True] * 3, "metric": ["1", "1", "1"]},
    "warped_torus": {"dim": 2, "box": [PERIOD, PERIOD], "periodic": [True, True],
                     "metric": ["1", "(2+cos(x1))^2"]},
    "conformal_torus": {"dim": 2, "box": [PERIOD, PERIOD], "periodic": [True, True],
                        "metric": ["(1.5+cos(x1))^2", "(1.5+cos(x1))^2"]},
    "sphere_s2": {"dim": 2, "box": [POLAR, PERIOD], "periodic": [False, True],
                  "metric": ["1", "sin(x1)^2"]},
    "sphere_s3": {"dim": 3, "box": [POLAR, POLAR, PERIOD], "periodic": [False, False, True],
                  "metric": ["1", "sin(x1)^2", "sin(x1)^2*sin(x2)^2"]},
    "sphere_s4": {"dim": 4, "box": [POLAR, POLAR, POLAR, PERIOD],
                  "periodic": [False, False, False, True],
                  "metric": ["1", "sin(x1)^2", "sin(x1)^2*sin(x2)^2",
                             "sin(x1)^2*sin(x2)^2*sin(x3)^2"]},
    "s2_x_s1": {"dim": 3, "box": [POLAR, PERIOD, PERIOD], "periodic": [False, True, True],
                "metric": ["1", "sin(x1)^2", "1"]},
    "torus_circle": {"dim": 3, "box": [PERIOD] * 3, "periodic": [True] * 3,
                     "metric": ["1", "(2+cos(x1))^2", "1"]},
    "warped_t3": {"dim": 3, "box": [PERIOD] * 3, "periodic": [True] * 3,
                  "metric": ["1", "(2+cos(x1))^2", "(2+sin(x1)+0.5*cos(x2))^2"]},
    "sphere_s2_induced": {"dim": 2, "box": [POLAR, PERIOD], "periodic": [False, True],
                          "metric": "induced"},
    "clifford_torus": {"dim": 2, "box": [PERIOD, PERIOD], "periodic": [True, True],
                       "metric": "induced"},
    "torus_of_revolution": {"dim": 2, "box": [PERIOD, PERIOD], "periodic": [True, True],
                            "metric": "induced"},
    "plane": {"dim": 2, "box": [[-1, 1], [-1, 1]], "periodic": [False, False],
              "metric": "induced"},
}
for _n in range(3, 7):
    MANIFOLDS[f"r{_n}"] = {"dim": _n, "box": [[-10, 10]] * _n, "periodic": [False] * _n,
                           "metric": ["1"] * _n}


def _coord(dim: int, i: int) -> list[str]:
    return ["1" if j == i else "0" for j in range(dim)]


DISTRIBUTIONS = {
    "t3_e1": {"manifold": "flat_t3", "fields": [_coord(3, 0)]},
    "t3_e2": {"manifold": "flat_t3", "fields": [_coord(3, 1)]},
    "t3_e3": {"manifold": "flat_t3", "fields": [_coord(3, 2)]},
    "t2_e1": {"manifold": "flat_t2", "fields": [_coord(2, 0)]},
    "t2_e2": {"manifold": "flat_t2", "fields": [_coord(2, 1)]},
    "wt_meridian": {"manifold": "warped_torus", "fields": [_coord(2, 0)]},
    "wt_line": {"manifold": "warped_torus", "fields": [["1", "1"]]},
    "ct_meridian": {"manifold": "conformal_torus", "fields": [_coord(2, 0)]},
    "ct_line": {"manifold": "conformal_torus", "fields": [["1", "1"]]},
    "ct_tilted": {"manifold": "conformal_torus", "fields": [["1", "2+sin(x1)"]]},
    "s2_theta": {"manifold": "sphere_s2", "fields": [_coord(2, 0)]},
    "s2s1_sphere": {"manifold": "s2_x_s1", "fields": [_coord(3, 0), _coord(3, 1)]},
    "s2s1_theta": {"manifold": "s2_x_s1", "fields": [_coord(3, 0)]},
    "s2s1_phi": {"manifold": "s2_x_s1", "fields": [_coord(3, 1)]},
    "s2s1_circle": {"manifold": "s2_x_s1", "fields": [_coord(3, 2)]},
    "tc_e1": {"manifold": "torus_circle", "fields": [["cos(x2)", "0", "sin(x2)"]]},
    "tc_e2": {"manifold": "torus_circle", "fields": [_coord(3, 1)]},
    "tc_e3": {"manifold": "torus_circle", "fields": [["-sin(x2)", "0", "cos(x2)"]]},
    "tc_plane": {"manifold": "torus_circle", "fields": [["cos(x2)", "0", "sin(x2)"], _coord(3, 1)]},
    "wt3_e1": {"manifold": "warped_t3", "fields": [_coord(3, 0)]},
    "wt3_e2": {"manifold": "warped_t3", "fields": [_coord(3, 1)]},
    "wt3_e3": {"manifold": "warped_t3", "fields": [_coord(3, 2)]},
    "s2i_theta": {"manifold": "sphere_s2_induced", "fields": [_coord(2, 0)]},
    "s2i_phi": {"manifold": "sphere_s2_induced", "fields": [_coord(2, 1)]},
    "cl_u": {"manifold": "clifford_torus", "fields": [_coord(2, 0)]},
    "cl_v": {"manifold": "clifford_torus", "fields": [_coord(2, 1)]},
    "tr_u": {"manifold": "torus_of_revolution", "fields": [_coord(2, 0)]},
    "tr_v": {"manifold": "torus_of_revolution", "fields": [_coord(2, 1)]},
    "pl_e1": {"manifold": "plane", "fields": [_coord(2, 0)]},
    "pl_e2": {"manifold": "plane", "fields": [_coord(2, 1)]},
    "r6_first4": {"manifold": "r6", "fields": [_coord(6, i) for i in range(4)]},
}

_R = "sqrt(0.5)"
IMMERSIONS = {
    "sphere_in_r3": {"source": "sphere_s2_induced", "ambient": "r3",
                     "components": ["sin(x1)*cos(x2)", "sin(x1)*sin(x2)", "cos(x1)"]},
    "clifford_in_r4": {"source": "clifford_torus", "ambient": "r4",
                       "components": [f"{_R}*cos(x1)", f"{_R}*sin(x1)", f"{_R}*cos(x2)",
                                      f"{_R}*sin(x2)"]},
    "torus_in_r3": {"source": "torus_of_revolution", "ambient": "r3",
                    "components": ["(2+cos(x1))*cos(x2)", "(2+cos(x1))*sin(x2)", "sin(x1)"]},
    "plane_in_r3": {"source": "plane", "ambient": "r3", "components": ["x1", "x2", "0"]},
    "flat_t3_in_r6": {"source": "flat_t3", "ambient": "r6",
                      "components": ["cos(x1)", "sin(x1)", "cos(x2)", "sin(x2)", "cos(x3)",
                                     "sin(x3)"]},
    "flat_t3_in_r6_dbar": {"source": "flat_t3", "ambient": "r6",
                           "components": ["cos(x1)", "sin(x1)", "cos(x2)", "sin(x2)", "cos(x3)",
                                          "sin(x3)"],
                           "ambient_distribution": "r6_first4"},
    "torus_circle_in_r5": {"source": "torus_circle", "ambient": "r5",
                           "components": ["(2+cos(x1))*cos(x2)", "(2+cos(x1))*sin(x2)", "sin(x1)",
                                          "cos(x3)", "sin(x3)"]},
}


def _check(cid, target, dists=(), **kw):
    out = {"id": cid, "target": target}
    if dists:
        out["distributions"] = list(dists)
    out.update(kw)
    return out


T3 = ("t3_e1", "t3_e2", "t3_e3")
TC = ("tc_e1", "tc_e2", "tc_e3")
WT3 = ("wt3_e1", "wt3_e2", "wt3_e3")

# entry name -> (checks, invariant requests)
ENTRIES: dict[str, dict] = {
    "flat_t3": {
        "checks": [
            _check("IF3", "flat_t3", T3), _check("IFL2", "flat_t3", T3),
            _check("EX24", "flat_t3", T3), _check("WAL2", "flat_t3", ["t3_e1"]),
            _check("WAL2B", "flat_t3", ["t3_e1", "t3_e2"]),
            _check("INT-IF3", "flat_t3", T3), _check("INT-IFL2", "flat_t3", T3),
            _check("SANDWICH", "flat_t3"), _check("PROP34", "flat_t3"),
        ],
        "invariants": [{"manifold": "flat_t3", "point": [1.0, 2.0, 3.0], "partition": [1, 2],
                        "kind": "delta_plus_m"}],
    },
    "flat_t2": {"checks": [_check("WAL2", "flat_t2", ["t2_e1", "t2_e2"]),
                           _check("INT-WAL2", "flat_t2", ["t2_e1"])]},
    "warped_torus": {
        "checks": [
            _check("WAL2", "warped_torus", ["wt_meridian"]),
            _check("WAL2", "warped_torus", ["wt_line"]),
            _check("WAL2B", "warped_torus", ["wt_meridian"]),
            _check("INT-WAL2", "warped_torus", ["wt_meridian"]),
            _check("INT-WAL2", "warped_torus", ["wt_line"]),
        ],
        "invariants": [{"manifold": "warped_torus", "point": [0.5, 1.0], "partition": [1, 1],
                        "kind": "delta_plus_m"}],
    },
    "conformal_torus": {"checks": [_check("WAL2", "conformal_torus", ["ct_tilted"]),
                                   _check("WAL2B", "conformal_torus", ["ct_line"]),
                                   _check("INT-WAL2", "conformal_torus", ["ct_meridian"]),
                                   _check("INT-WAL2", "conformal_torus", ["ct_line"]),
                                   _check("INT-WAL2", "conformal_torus", ["ct_tilted"])]},
    "spheres": {
        "checks": [
            _check("WAL2", "sphere_s2", ["s2_theta"]), _check("WAL2B", "sphere_s2", ["s2_theta"]),
            _check("SANDWICH", "sphere_s3"), _check("PROP34", "sphere_s3"),
            _check("SANDWICH", "sphere_s4"), _check("PROP34", "sphere_s4"),
        ],
        "invariants": [{"manifold": "sphere_s4", "point": [1.0, 1.2, 1.4, 0.3],
                        "partition": [2, 2], "kind": "delta_plus_m"}],
    },
    "s2_x_s1": {
        "checks": [
            _check("WAL2", "s2_x_s1", ["s2s1_sphere", "s2s1_circle"]),
            _check("WAL2B", "s2_x_s1", ["s2s1_sphere"]),
            _check("IF3", "s2_x_s1", ["s2s1_theta", "s2s1_phi", "s2s1_circle"]),
            _check("IFL2", "s2_x_s1", ["s2s1_theta", "s2s1_phi", "s2s1_circle"]),
            _check("EX24", "s2_x_s1", ["s2s1_theta", "s2s1_phi", "s2s1_circle"]),
            _check("SANDWICH", "s2_x_s1"), _check("PROP34", "s2_x_s1"),
        ],
    },
    "torus_circle": {
        "checks": [
            _check("IF3", "torus_circle", TC), _check("IFL2", "torus_circle", TC),
            _check("WAL2", "torus_circle", ["tc_e1"]),
            _check("WAL2", "torus_circle", ["tc_plane"]),
            _check("WAL2B", "torus_circle", ["tc_e1", "tc_e2"]),
            _check("INT-IF3", "torus_circle", TC), _check("INT-IFL2", "torus_circle", TC),
            _check("INT-WAL2", "torus_circle", ["tc_plane"]),
        ],
    },
    "warped_t3": {
        "checks": [
            _check("EX24", "warped_t3", WT3), _check("IF3", "warped_t3", WT3),
            _check("WAL2B", "warped_t3", ["wt3_e1", "wt3_e2"]),
            _check("INT-IF3", "warped_t3", WT3),
            _check("SANDWICH", "warped_t3"), _check("PROP34", "warped_t3"),
        ],
    },
    "sphere_in_r3": {
        "checks": [
            _check("INEQ-C", "sphere_in_r3", partitions=[[1, 1]]),
            _check("INEQ-D", "sphere_in_r3"),
            _check("INEQ-K", "sphere_in_r3", ["s2i_theta", "s2i_phi"]),
            _check("INEQ-K2", "sphere_in_r3", ["s2i_theta", "s2i_phi"]),
        ],
    },
    "clifford_in_r4": {
        "checks": [
            _check("INEQ-K", "clifford_in_r4", ["cl_u", "cl_v"]),
            _check("INEQ-K2", "clifford_in_r4", ["cl_u", "cl_v"]),
            _check("INEQ-D", "clifford_in_r4"), _check("INEQ-C", "clifford_in_r4"),
            _check("INT-C45", "clifford_in_r4", ["cl_u"]),
        ],
    },
    "torus_in_r3": {
        "checks": [
            _check("INEQ-D", "torus_in_r3"), _check("INEQ-C", "torus_in_r3"),
            _check("INEQ-K", "torus_in_r3", ["tr_u", "tr_v"]),
            _check("INEQ-K2", "torus_in_r3", ["tr_u", "tr_v"]),
            _check("INT-C45", "torus_in_r3", ["tr_u"]),
            _check("INT-WAL2", "torus_of_revolution", ["tr_u"]),
        ],
    },
    "plane_in_r3": {
        "checks": [_check("INEQ-D", "plane_in_r3"), _check("INEQ-C", "plane_in_r3"),
                   _check("INEQ-K", "plane_in_r3", ["pl_e1", "pl_e2"])],
    },
    "flat_t3_in_r6": {
        "checks": [
            _check("INEQ-D", "flat_t3_in_r6"), _check("INEQ-C", "flat_t3_in_r6"),
            _check("INEQ-K3", "flat_t3_in_r6", ["t3_e1", "t3_e2"]),
            _check("INEQ-K2", "flat_t3_in_r6", ["t3_e1", "t3_e2"]),
            _check("INT-C45", "flat_t3_in_r6", ["t3_e1"]),
            _check("INT-C47", "flat_t3_in_r6", T3),
            _check("INT-C414", "flat_t3_in_r6_dbar", T3),
            _check("INEQ-K", "flat_t3_in_r6_dbar", ["t3_e1", "t3_e2"]),
        ],
    },
    "torus_circle_in_r5": {
        "checks": [
            _check("INEQ-D", "torus_circle_in_r5"), _check("INEQ-C", "torus_circle_in_r5"),
            _check("INEQ-K3", "torus_circle_in_r5", ["tc_e1", "tc_e2"]),
            _check("INEQ-K2", "torus_circle_in_r5", ["tc_e1", "tc_e2"]),
            _check("INEQ-K", "torus_circle_in_r5", ["tc_e1", "tc_e2"]),
            _check("INT-C45", "torus_circle_in_r5", ["tc_e1"]),
            _check("INT-C47", "torus_circle_in_r5", TC),
        ],
    },
}


def _closure(entry: dict) -> tuple[list[str], list[str], list[str]]:
    """Manifolds, distributions and immersions an entry refers to."""
    imms, dists, mans = [], [], []

    def add(seq, name):
        if name not in seq:
            seq.append(name)

    for chk in entry.get("checks", []):
        tgt = chk["target"]
        if tgt in IMMERSIONS:
            add(imms, tgt)
        else:
            add(mans, tgt)
        for d in chk.get("distributions", []):
            add(dists, d)
    for req in entry.get("invariants", []):
        add(mans, req["manifold"])
    for name in imms:
        rec = IMMERSIONS[name]
        add(mans, rec["source"])
        add(mans, rec["ambient"])
        if rec.get("ambient_distribution"):
            add(dists, rec["ambient_distribution"])
    for d in dists:
        add(mans, DISTRIBUTIONS[d]["manifold"])
    order = list(MANIFOLDS)
    mans.sort(key=order.index)
    return mans, dists, imms


def config(name: str) -> dict:
    """The self-contained configuration of one gallery entry."""
    if name not in ENTRIES:
        raise KeyError(f"unknown gallery entry {name!r}; known: {sorted(ENTRIES)}")
    entry = ENTRIES[name]
    mans, dists, imms = _closure(entry)
    return copy.deepcopy({
        "manifolds": [{"name": m, **MANIFOLDS[m]} for m in mans],
        "distributions": [{"name": d, **DISTRIBUTIONS[d]} for d in dists],
        "immersions": [{"name": i, **IMMERSIONS[i]} for i in imms],
        "invariants": entry.get("invariants", []),
        "checks": entry.get("checks", []),
        "settings": {},
    })


def suite(names=None) -> dict:
    """Merge gallery entries (all by default) into one configuration."""
    names = list(ENTRIES) if names is None else list(names)
    merged = {"manifolds": [], "distributions": [], "immersions": [], "invariants": [],
              "checks": [], "settings": {}}
    seen: dict[str, set] = {k: set() for k in ("manifolds", "distributions", "immersions")}
    for n in names:
        cfg = config(n)
        for key in seen:
            for rec in cfg[key]:
                if rec["name"] not in seen[key]:
                    seen[key].add(rec["name"])
                    merged[key].append(rec)
        merged["invariants"] += cfg["invariants"]
        merged["checks"] += cfg["checks"]
    order = list(MANIFOLDS)
    merged["manifolds"].sort(key=lambda r: order.index(r["name"]))
    return merged


def write_gallery(directory) -> list[Path]:
    """Write every entry plus the merged suite as JSON files; returns the paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ENTRIES:
        p = out / f"{name}.json"
        p.write_text(json.dumps(config(name), indent=2) + "\n")
        paths.append(p)
    p = out / "suite.json"
    p.write_text(json.dumps(suite(), indent=2) + "\n")
    paths.append(p)
    return paths


__all__ = ["MANIFOLDS", "DISTRIBUTIONS", "IMMERSIONS", "ENTRIES", "config", "suite",
           "write_gallery"]
