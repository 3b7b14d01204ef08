# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled frame-objective kernels.

Same contract as :mod:`curvlab._kernels_py`; see that module for the
objective and gradient formulas.  The whole ascent loop runs without the GIL.
"""

import numpy as np

from libc.math cimport sqrt

cdef enum:
    STALL_ITERS = 25


cdef void _moments(const double[:, :, :, ::1] T, const double[:, ::1] E,
                   double[:, :, ::1] M) noexcept nogil:
    # M[b, i, l] = T[i, j, k, l] E[j, b] E[k, b]
    cdef Py_ssize_t d = E.shape[0], s = E.shape[1]
    cdef Py_ssize_t b, i, j, k, l
    cdef double ej, ejk
    for b in range(s):
        for i in range(d):
            for l in range(d):
                M[b, i, l] = 0.0
        for i in range(d):
            for j in range(d):
                ej = E[j, b]
                if ej == 0.0:
                    continue
                for k in range(d):
                    ejk = ej * E[k, b]
                    if ejk == 0.0:
                        continue
                    for l in range(d):
                        M[b, i, l] += T[i, j, k, l] * ejk


cdef double _value(const double[:, :, :, ::1] T, const double[:, ::1] E,
                   const double[:, ::1] W, double[:, :, ::1] M,
                   double[:, ::1] G, bint want_grad) noexcept nogil:
    cdef Py_ssize_t d = E.shape[0], s = E.shape[1]
    cdef Py_ssize_t a, b, i, l
    cdef double f = 0.0, w, q, acc
    _moments(T, E, M)
    if want_grad:
        for i in range(d):
            for a in range(s):
                G[i, a] = 0.0
    for a in range(s):
        for b in range(s):
            w = W[a, b]
            if w == 0.0:
                continue
            q = 0.0
            for i in range(d):
                acc = 0.0
                for l in range(d):
                    acc += M[b, i, l] * E[l, a]
                q += E[i, a] * acc
                if want_grad:
                    G[i, a] += 2.0 * w * acc
            f += 0.5 * w * q
    return f


cdef void _retract(double[:, ::1] Y, double[:, ::1] Q) noexcept nogil:
    # modified Gram-Schmidt, two passes; Q has positive-diagonal R by construction
    cdef Py_ssize_t d = Y.shape[0], s = Y.shape[1]
    cdef Py_ssize_t a, c, i, rep
    cdef double dot, nrm
    for a in range(s):
        for i in range(d):
            Q[i, a] = Y[i, a]
        for rep in range(2):
            for c in range(a):
                dot = 0.0
                for i in range(d):
                    dot += Q[i, c] * Q[i, a]
                for i in range(d):
                    Q[i, a] -= dot * Q[i, c]
        nrm = 0.0
        for i in range(d):
            nrm += Q[i, a] * Q[i, a]
        nrm = sqrt(nrm)
        for i in range(d):
            Q[i, a] /= nrm


cdef double _riemannian_grad(const double[:, ::1] E, const double[:, ::1] G,
                             double[:, ::1] S, double[:, ::1] xi) noexcept nogil:
    cdef Py_ssize_t d = E.shape[0], s = E.shape[1]
    cdef Py_ssize_t a, b, i
    cdef double acc, nrm = 0.0
    for a in range(s):
        for b in range(s):
            acc = 0.0
            for i in range(d):
                acc += E[i, a] * G[i, b]
            S[a, b] = acc
    for i in range(d):
        for b in range(s):
            acc = G[i, b]
            for a in range(s):
                acc -= E[i, a] * 0.5 * (S[a, b] + S[b, a])
            xi[i, b] = acc
            nrm += acc * acc
    return sqrt(nrm)


def _contig(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def objective(T, E, W):
    cdef double[:, :, :, ::1] Tv = _contig(T)
    cdef double[:, ::1] Ev = _contig(E)
    cdef double[:, ::1] Wv = _contig(W)
    cdef double[:, :, ::1] M = np.empty((Ev.shape[1], Ev.shape[0], Ev.shape[0]))
    cdef double[:, ::1] G = np.empty((1, 1))
    return _value(Tv, Ev, Wv, M, G, False)


def objective_grad(T, E, W):
    cdef double[:, :, :, ::1] Tv = _contig(T)
    cdef double[:, ::1] Ev = _contig(E)
    cdef double[:, ::1] Wv = _contig(W)
    cdef double[:, :, ::1] M = np.empty((Ev.shape[1], Ev.shape[0], Ev.shape[0]))
    G = np.empty((Ev.shape[0], Ev.shape[1]))
    cdef double[:, ::1] Gv = G
    f = _value(Tv, Ev, Wv, M, Gv, True)
    return f, G


def objective_batch(T, Es, W):
    cdef double[:, :, :, ::1] Tv = _contig(T)
    cdef double[:, :, ::1] Esv = _contig(Es)
    cdef double[:, ::1] Wv = _contig(W)
    cdef Py_ssize_t n = Esv.shape[0], d = Esv.shape[1], s = Esv.shape[2], p
    cdef double[:, :, ::1] M = np.empty((s, d, d))
    cdef double[:, ::1] G = np.empty((1, 1))
    out = np.empty(n)
    cdef double[::1] ov = out
    with nogil:
        for p in range(n):
            ov[p] = _value(Tv, Esv[p], Wv, M, G, False)
    return out


def retract(Y):
    cdef double[:, ::1] Yv = _contig(Y)
    Q = np.empty_like(np.asarray(Yv))
    cdef double[:, ::1] Qv = Q
    _retract(Yv, Qv)
    return Q


def ascend(T, E0, W, double sign=1.0, Py_ssize_t max_iter=500, double tol=1e-7,
           double step0=1.0, double shrink=0.5, double armijo=0.5):
    cdef double[:, :, :, ::1] Tv = _contig(T)
    cdef double[:, ::1] Wv = _contig(W)
    cdef double[:, ::1] Y0 = _contig(E0)
    cdef Py_ssize_t d = Y0.shape[0], s = Y0.shape[1], i, a, iterations = 0
    E = np.empty((d, s))
    cdef double[:, ::1] Ev = E
    cdef double[:, ::1] En = np.empty((d, s))
    cdef double[:, ::1] Yt = np.empty((d, s))
    cdef double[:, ::1] G = np.empty((d, s))
    cdef double[:, ::1] xi = np.empty((d, s))
    cdef double[:, ::1] S = np.empty((s, s))
    cdef double[:, :, ::1] M = np.empty((s, d, d))
    cdef double f, fn, t, gnorm
    cdef double best
    cdef Py_ssize_t since = 0
    with nogil:
        _retract(Y0, Ev)
        f = sign * _value(Tv, Ev, Wv, M, G, True)
        for i in range(d):
            for a in range(s):
                G[i, a] *= sign
        gnorm = _riemannian_grad(Ev, G, S, xi)
        best = gnorm
        while gnorm >= tol and iterations < max_iter:
            t = step0
            while True:
                for i in range(d):
                    for a in range(s):
                        Yt[i, a] = Ev[i, a] + t * xi[i, a]
                _retract(Yt, En)
                fn = sign * _value(Tv, En, Wv, M, G, False)
                if fn >= f + armijo * t * gnorm * gnorm:
                    break
                t *= shrink
                if t < 1e-16:
                    break
            if t < 1e-16:
                break
            Ev[:, :] = En
            f = sign * _value(Tv, Ev, Wv, M, G, True)
            for i in range(d):
                for a in range(s):
                    G[i, a] *= sign
            gnorm = _riemannian_grad(Ev, G, S, xi)
            iterations += 1
            if gnorm < best:
                best = gnorm
                since = 0
            else:
                since += 1
                if since >= STALL_ITERS:
                    break
    return E, sign * f, gnorm, iterations, gnorm < tol
