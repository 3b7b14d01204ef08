"""Compare the compiled and NumPy frame-objective kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each row times one kernel on a random curvature-like tensor (host dimension
``d``, frame width ``s``) for every importable backend and reports the
speedup of the compiled kernel over the NumPy one.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from curvlab.invariants import mutual_weights
from curvlab.kernels import backends

CASES = [(3, (1, 1)), (4, (2, 1)), (4, (1, 1, 1)), (6, (2, 2)), (6, (3, 2, 1))]


def curvature_like(d: int, rng: np.random.Generator) -> np.ndarray:
    """A tensor with the algebraic symmetries of a Riemann tensor."""
    # a sum of Kulkarni-Nomizu squares of symmetric matrices
    T = np.zeros((d, d, d, d))
    for _ in range(3):
        S = rng.normal(size=(d, d))
        S = S + S.T
        T += (np.einsum("il,jk->ijkl", S, S) - np.einsum("ik,jl->ijkl", S, S))
    return T


def _cases(rng):
    for d, p in CASES:
        T = curvature_like(d, rng)
        W = mutual_weights(p)
        s = sum(p)
        E = np.linalg.qr(rng.normal(size=(d, s)))[0]
        Es = np.linalg.qr(rng.normal(size=(4096, d, s)))[0]
        yield d, p, T, W, E, Es


def bench(repeat: int, seed: int) -> list[dict]:
    impls = backends()
    rows = []
    for d, p, T, W, E, Es in _cases(np.random.default_rng(seed)):
        jobs = {
            "objective_grad": lambda m: m.objective_grad(T, E, W),
            "objective_batch[4096]": lambda m: m.objective_batch(T, Es, W),
            "ascend": lambda m: m.ascend(T, E, W, 1.0, 500, 1e-7),
        }
        for kernel, call in jobs.items():
            row = {"d": d, "partition": list(p), "kernel": kernel}
            for name, mod in impls.items():
                timer = timeit.Timer(lambda: call(mod))
                n, _ = timer.autorange()
                row[name] = min(timer.repeat(repeat, n)) / n
            if "cython" in row:
                row["speedup"] = row["python"] / row["cython"]
            rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write the rows as JSON")
    args = ap.parse_args(argv)
    rows = bench(args.repeat, args.seed)
    print(f"{'d':>2} {'partition':<10} {'kernel':<22} {'python':>11} {'cython':>11} {'speedup':>8}")
    for r in rows:
        cy = f"{r['cython'] * 1e6:9.1f}us" if "cython" in r else "        n/a"
        sp = f"{r['speedup']:7.1f}x" if "speedup" in r else "     n/a"
        print(f"{r['d']:>2} {str(tuple(r['partition'])):<10} {r['kernel']:<22} "
              f"{r['python'] * 1e6:9.1f}us {cy} {sp}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
