"""Truncated second-order Taylor jets over batches of points.

A :class:`Jet` carries a value array together with its first and (optionally)
second partial derivatives with respect to the ``n`` chart coordinates.  The
layout is ``v[S]``, ``d[S + (n,)]``, ``dd[S + (n, n)]`` where ``S`` is the
value shape (leading axes are usually a batch of points followed by tensor
indices).  Derivative axes always trail, so indexing and contracting the
leading axes never touches them.

The order of a jet is the highest derivative it carries.  Arithmetic between
jets of different orders truncates to the lower one and :meth:`Jet.partial`
trades one order for an extra tensor axis.  Mixed second derivatives are
assembled so that ``dd`` stays bitwise symmetric.
"""

from __future__ import annotations

import string

import numpy as np

__all__ = ["Jet", "jet_einsum", "stack", "where"]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


def _sym_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # a_y b_z + b_y a_z, bitwise symmetric in (y, z)
    x = _outer(a, b)
    return x + np.swapaxes(x, -1, -2)


class Jet:
    __slots__ = ("v", "d", "dd")
    __array_priority__ = 100.0

    def __init__(self, v, d=None, dd=None):
        self.v = np.asarray(v, dtype=float)
        self.d = d
        self.dd = dd if d is not None else None

    # ------------------------------------------------------------------ basics
    @property
    def order(self) -> int:
        if self.d is None:
            return 0
        return 1 if self.dd is None else 2

    @property
    def shape(self) -> tuple:
        return self.v.shape

    @property
    def ndim(self) -> int:
        return self.v.ndim

    @classmethod
    def constant(cls, value, n: int, order: int = 2) -> "Jet":
        v = np.asarray(value, dtype=float)
        d = np.zeros(v.shape + (n,)) if order >= 1 else None
        dd = np.zeros(v.shape + (n, n)) if order >= 2 else None
        return cls(v, d, dd)

    @classmethod
    def variable(cls, x: np.ndarray, order: int = 2) -> "Jet":
        """Coordinate jets for points ``x`` of shape ``(P, n)``.

        Returns a jet of value shape ``(P, n)`` whose ``i``-th component is
        the coordinate function ``x_i``.
        """
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        d = np.broadcast_to(np.eye(n), x.shape + (n,)).copy() if order >= 1 else None
        dd = np.zeros(x.shape + (n, n)) if order >= 2 else None
        return cls(x, d, dd)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        if order == 0:
            return Jet(self.v)
        return Jet(self.v, self.d)

    def partial(self) -> "Jet":
        """Gradient as a jet one order lower; the new axis is the last value axis."""
        if self.d is None:
            raise ValueError("cannot differentiate an order-0 jet")
        return Jet(self.d, self.dd)

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, order={self.order})"

    # -------------------------------------------------------------- structure
    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            raise IndexError("Jet indexing does not support Ellipsis")
        v = self.v[key]
        d = self.d[key] if self.d is not None else None
        dd = self.dd[key] if self.dd is not None else None
        return Jet(v, d, dd)

    def transpose(self, *axes) -> "Jet":
        r = self.ndim
        axes = tuple(axes) if axes else tuple(reversed(range(r)))
        v = self.v.transpose(axes)
        d = self.d.transpose(axes + (r,)) if self.d is not None else None
        dd = self.dd.transpose(axes + (r, r + 1)) if self.dd is not None else None
        return Jet(v, d, dd)

    def swapaxes(self, a: int, b: int) -> "Jet":
        perm = list(range(self.ndim))
        perm[a], perm[b] = perm[b], perm[a]
        return self.transpose(*perm)

    def expand(self, axis: int) -> "Jet":
        """Insert a length-one value axis at a non-negative position."""
        v = np.expand_dims(self.v, axis)
        d = np.expand_dims(self.d, axis) if self.d is not None else None
        dd = np.expand_dims(self.dd, axis) if self.dd is not None else None
        return Jet(v, d, dd)

    def sum(self, axis: int) -> "Jet":
        if axis < 0:
            axis += self.ndim
        v = self.v.sum(axis)
        d = self.d.sum(axis) if self.d is not None else None
        dd = self.dd.sum(axis) if self.dd is not None else None
        return Jet(v, d, dd)

    # ------------------------------------------------------------- arithmetic
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet(np.asarray(other, dtype=float))

    def __add__(self, other):
        if not isinstance(other, Jet):
            v = self.v + np.asarray(other, dtype=float)
            d = np.broadcast_to(self.d, v.shape + self.d.shape[-1:]) if self.d is not None else None
            dd = (np.broadcast_to(self.dd, v.shape + self.dd.shape[-2:])
                  if self.dd is not None else None)
            return Jet(v, d, dd)
        order = min(self.order, other.order)
        v = self.v + other.v
        d = self.d + other.d if order >= 1 else None
        dd = self.dd + other.dd if order >= 2 else None
        return Jet(v, d, dd)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v,
                   -self.d if self.d is not None else None,
                   -self.dd if self.dd is not None else None)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            return Jet(self.v * c,
                       self.d * c[..., None] if self.d is not None else None,
                       self.dd * c[..., None, None] if self.dd is not None else None)
        a, b = self, other
        order = min(a.order, b.order)
        v = a.v * b.v
        d = dd = None
        if order >= 1:
            d = a.d * b.v[..., None] + a.v[..., None] * b.d
        if order >= 2:
            dd = (a.dd * b.v[..., None, None] + _sym_outer(a.d, b.d)
                  + a.v[..., None, None] * b.dd)
        return Jet(v, d, dd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def chain(self, f0, f1, f2) -> "Jet":
        """Compose a scalar function with known derivatives ``f0, f1, f2``."""
        d = dd = None
        if self.order >= 1:
            d = f1[..., None] * self.d
        if self.order >= 2:
            dd = f2[..., None, None] * _outer(self.d, self.d) + f1[..., None, None] * self.dd
        return Jet(f0, d, dd)

    def reciprocal(self) -> "Jet":
        r = 1.0 / self.v
        return self.chain(r, -r * r, 2.0 * r * r * r)

    def sqrt(self) -> "Jet":
        s = np.sqrt(self.v)
        return self.chain(s, 0.5 / s, -0.25 / (s * self.v))

    def sin(self) -> "Jet":
        s, c = np.sin(self.v), np.cos(self.v)
        return self.chain(s, c, -s)

    def cos(self) -> "Jet":
        s, c = np.sin(self.v), np.cos(self.v)
        return self.chain(c, -s, -c)

    def tan(self) -> "Jet":
        t = np.tan(self.v)
        sec2 = 1.0 + t * t
        return self.chain(t, sec2, 2.0 * t * sec2)

    def exp(self) -> "Jet":
        e = np.exp(self.v)
        return self.chain(e, e, e)

    def log(self) -> "Jet":
        r = 1.0 / self.v
        return self.chain(np.log(self.v), r, -r * r)

    def abs(self) -> "Jet":
        sg = np.sign(self.v)
        return self.chain(np.abs(self.v), sg, np.zeros_like(self.v))

    def ipow(self, k: int) -> "Jet":
        """Integer power by repeated multiplication (square-and-multiply)."""
        if k < 0:
            return self.ipow(-k).reciprocal()
        result = None
        base = self
        while k:
            if k & 1:
                result = base if result is None else result * base
            k >>= 1
            if k:
                base = base * base
        if result is None:
            return Jet.constant(np.ones_like(self.v), self._n(), self.order)
        return result

    def _n(self) -> int:
        return self.d.shape[-1] if self.d is not None else 0

    # --------------------------------------------------------- linear algebra
    def inv(self) -> "Jet":
        """Inverse of a batch of square matrices held in the last two value axes."""
        A = np.linalg.inv(self.v)
        d = dd = None
        if self.order >= 1:
            # A dG_y A, so that d_y(G^-1) = -M_y
            M = np.einsum("...ik,...kly,...lj->...ijy", A, self.d, A)
            d = -M
        if self.order >= 2:
            # d_y d_z G^-1 = A (dG_y A dG_z + dG_z A dG_y - ddG_yz) A
            X = np.einsum("...iky,...klz,...lj->...ijyz", M, self.d, A)
            corr = np.einsum("...ik,...klyz,...lj->...ijyz", A, self.dd, A)
            dd = (X + np.swapaxes(X, -1, -2)) - corr
        return Jet(A, d, dd)


def _free_letters(spec: str, count: int) -> list[str]:
    used = set(spec)
    return [c for c in string.ascii_letters if c not in used][:count]


def einsum2(spec: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Two-operand ``np.einsum`` routed through batched ``matmul``.

    Small contractions over a long batch axis are an order of magnitude faster
    this way; repeated letters and broadcasting fall back to ``np.einsum``.
    """
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    if (len(set(sa)) != len(sa) or len(set(sb)) != len(sb) or x.ndim != len(sa)
            or y.ndim != len(sb)):
        return np.einsum(spec, x, y)
    size = {}
    for letters, arr in ((sa, x), (sb, y)):
        for c, n in zip(letters, arr.shape):
            if size.setdefault(c, n) != n:
                return np.einsum(spec, x, y)
    # letters private to one operand and absent from the output are summed first
    drop_a = [i for i, c in enumerate(sa) if c not in sb and c not in out]
    if drop_a:
        x = x.sum(axis=tuple(drop_a))
        sa = "".join(c for i, c in enumerate(sa) if i not in drop_a)
    drop_b = [i for i, c in enumerate(sb) if c not in sa and c not in out]
    if drop_b:
        y = y.sum(axis=tuple(drop_b))
        sb = "".join(c for i, c in enumerate(sb) if i not in drop_b)
    batch = [c for c in sa if c in sb and c in out]
    contr = [c for c in sa if c in sb and c not in out]
    ka = [c for c in sa if c not in sb]
    kb = [c for c in sb if c not in sa]

    def prod(letters):
        return int(np.prod([size[c] for c in letters], dtype=np.int64))

    X = x.transpose([sa.index(c) for c in batch + ka + contr]).reshape(
        prod(batch), prod(ka), prod(contr))
    Y = y.transpose([sb.index(c) for c in batch + contr + kb]).reshape(
        prod(batch), prod(contr), prod(kb))
    Z = np.matmul(X, Y).reshape([size[c] for c in batch + ka + kb])
    order = batch + ka + kb
    return Z.transpose([order.index(c) for c in out])


def jet_einsum(spec: str, a: Jet, b: Jet) -> Jet:
    """Two-operand ``einsum`` on the value axes with the product rule applied.

    ``spec`` is written for the value axes only, e.g. ``"pij,pj->pi"``.
    """
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    y, z = _free_letters(spec, 2)
    order = min(a.order, b.order)
    v = einsum2(spec, a.v, b.v)
    d = dd = None
    if order >= 1:
        d = (einsum2(f"{sa}{y},{sb}->{out}{y}", a.d, b.v)
             + einsum2(f"{sa},{sb}{y}->{out}{y}", a.v, b.d))
    if order >= 2:
        cross = einsum2(f"{sa}{y},{sb}{z}->{out}{y}{z}", a.d, b.d)
        dd = (einsum2(f"{sa}{y}{z},{sb}->{out}{y}{z}", a.dd, b.v)
              + (cross + np.swapaxes(cross, -1, -2))
              + einsum2(f"{sa},{sb}{y}{z}->{out}{y}{z}", a.v, b.dd))
    return Jet(v, d, dd)


def stack(jets: list[Jet], axis: int) -> Jet:
    """Stack jets along a new non-negative value axis."""
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    v = np.stack([j.v for j in jets], axis=axis)
    d = np.stack([j.d for j in jets], axis=axis) if order >= 1 else None
    dd = np.stack([j.dd for j in jets], axis=axis) if order >= 2 else None
    return Jet(v, d, dd)


def where(mask: np.ndarray, a: Jet, b: Jet) -> Jet:
    """Pointwise selection; ``mask`` broadcasts against the value shape."""
    order = min(a.order, b.order)
    a, b = a.truncate(order), b.truncate(order)
    v = np.where(mask, a.v, b.v)
    d = np.where(mask[..., None], a.d, b.d) if order >= 1 else None
    dd = np.where(mask[..., None, None], a.dd, b.dd) if order >= 2 else None
    return Jet(v, d, dd)
