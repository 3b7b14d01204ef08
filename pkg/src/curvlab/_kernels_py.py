"""Pure-NumPy implementation of the frame-objective kernels.

Every objective optimized over subspace tuples has the form

    f(E) = 1/2 * sum_{a,b} W[a, b] * T(e_a, e_b, e_b, e_a)

for a 4-tensor ``T`` expressed in an orthonormal host basis, a ``d x s``
matrix ``E`` with orthonormal columns and a symmetric weight matrix ``W``.
``T`` must make ``Q(x, y) = T(x, y, y, x)`` symmetric in ``x, y`` and the
matrices ``M(y)_il = T_ijkl y^j y^k`` symmetric; curvature tensors and the
``<B_il, B_jk>`` tensor built from a second fundamental form both qualify.
The Euclidean gradient column ``a`` is then ``2 * sum_b W[a, b] M(e_b) e_a``.

This module is the fallback when the compiled extension is unavailable and
the reference the extension is tested against.
"""

from __future__ import annotations

import numpy as np

# iterations without a new smallest gradient norm before giving up
STALL_ITERS = 25

__all__ = ["objective", "objective_grad", "objective_batch", "ascend", "retract"]


def _moments(T: np.ndarray, E: np.ndarray) -> np.ndarray:
    return np.einsum("ijkl,jb,kb->bil", T, E, E)


def objective(T: np.ndarray, E: np.ndarray, W: np.ndarray) -> float:
    M = _moments(T, E)
    Q = np.einsum("ia,bil,la->ab", E, M, E)
    return 0.5 * float(np.sum(W * Q))


def objective_grad(T: np.ndarray, E: np.ndarray, W: np.ndarray) -> tuple[float, np.ndarray]:
    M = _moments(T, E)
    Q = np.einsum("ia,bil,la->ab", E, M, E)
    G = 2.0 * np.einsum("ab,bil,la->ia", W, M, E)
    return 0.5 * float(np.sum(W * Q)), G


def objective_batch(T: np.ndarray, Es: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Objective for a stack of frames ``Es`` of shape ``(N, d, s)``."""
    out = np.empty(Es.shape[0])
    step = 2048
    for start in range(0, Es.shape[0], step):
        chunk = Es[start:start + step]
        M = np.einsum("ijkl,njb,nkb->nbil", T, chunk, chunk, optimize=True)
        Q = np.einsum("nia,nbil,nla->nab", chunk, M, chunk, optimize=True)
        out[start:start + step] = 0.5 * np.einsum("ab,nab->n", W, Q)
    return out


def retract(Y: np.ndarray) -> np.ndarray:
    """Q factor of ``Y`` with a positive-diagonal R."""
    Q, R = np.linalg.qr(Y)
    sg = np.sign(np.diag(R))
    sg[sg == 0] = 1.0
    return Q * sg


def _riemannian_grad(E: np.ndarray, G: np.ndarray) -> np.ndarray:
    EtG = E.T @ G
    return G - E @ (0.5 * (EtG + EtG.T))


def ascend(T, E0, W, sign=1.0, max_iter=500, tol=1e-7, step0=1.0, shrink=0.5,
           armijo=0.5):
    """Projected gradient ascent of ``sign * f`` with QR retraction.

    Each iteration backtracks from ``step0`` by ``shrink`` until the Armijo
    condition holds.  Returns ``(E, f, grad_norm, iterations, converged)``
    where ``f`` is the unsigned objective at ``E`` and ``grad_norm`` the
    Riemannian gradient norm there.
    """
    E = retract(np.array(E0, dtype=float))
    f, G = objective_grad(T, E, W)
    f, G = sign * f, sign * G
    xi = _riemannian_grad(E, G)
    gnorm = float(np.linalg.norm(xi))
    best, since = gnorm, 0
    iterations = 0
    while gnorm >= tol and iterations < max_iter:
        t = step0
        while True:
            En = retract(E + t * xi)
            fn = sign * objective(T, En, W)
            if fn >= f + armijo * t * gnorm * gnorm:
                break
            t *= shrink
            if t < 1e-16:
                break
        if t < 1e-16:
            # no ascent step is resolvable in floating point
            break
        E = En
        f, G = objective_grad(T, E, W)
        f, G = sign * f, sign * G
        xi = _riemannian_grad(E, G)
        gnorm = float(np.linalg.norm(xi))
        iterations += 1
        if gnorm < best:
            best, since = gnorm, 0
        else:
            since += 1
            if since >= STALL_ITERS:
                # accepted steps are driven by roundoff in the objective
                break
    return E, sign * f, gnorm, iterations, gnorm < tol
