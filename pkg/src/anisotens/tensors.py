"""Symmetric tensors in three dimensions, stored by multiset of indices.

An order-``n`` symmetric tensor has ``(n+1)(n+2)/2`` independent entries.
The entry keyed by ``(k1, k2, k3)`` is the component whose index list holds
``k1`` ones, ``k2`` twos and ``k3`` threes.

Internally every operation goes through the polynomial picture: ``U`` is
identified with ``u(x) = U . x^n``, whose coefficient on ``x^k`` is
``multinomial(n; k) * U_k``.  The symmetrised product of tensors becomes the
product of polynomials and the identity tensor becomes ``|x|^2``.

Components may be floats or exact ``fractions.Fraction`` values (any exact
number type closed under ``+`` and ``*`` works).  Exact tensors use an
object-dtype array.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def multisets(n: int) -> tuple:
    """All ``(k1, k2, k3)`` with ``k1 + k2 + k3 = n``, in storage order."""
    return tuple(
        (k1, k2, n - k1 - k2) for k1 in range(n, -1, -1) for k2 in range(n - k1, -1, -1)
    )


@lru_cache(maxsize=None)
def multiset_index(n: int) -> dict:
    return {k: i for i, k in enumerate(multisets(n))}


def n_components(n: int) -> int:
    return (n + 1) * (n + 2) // 2


def multinomial(k) -> int:
    n = sum(k)
    return factorial(n) // (factorial(k[0]) * factorial(k[1]) * factorial(k[2]))


@lru_cache(maxsize=None)
def _multinomials_int(n: int) -> np.ndarray:
    out = np.empty(n_components(n), dtype=object)
    out[:] = [multinomial(k) for k in multisets(n)]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def multinomials(n: int) -> np.ndarray:
    out = np.array([multinomial(k) for k in multisets(n)], dtype=float)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _product_table(n1: int, n2: int):
    idx = multiset_index(n1 + n2)
    i1, i2, out = [], [], []
    for a, ka in enumerate(multisets(n1)):
        for b, kb in enumerate(multisets(n2)):
            i1.append(a)
            i2.append(b)
            out.append(idx[(ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2])])
    return np.array(i1), np.array(i2), np.array(out)


@lru_cache(maxsize=None)
def _trace_table(n: int):
    idx = multiset_index(n)
    rows = []
    for k in multisets(n - 2):
        rows.append(
            [
                idx[(k[0] + 2, k[1], k[2])],
                idx[(k[0], k[1] + 2, k[2])],
                idx[(k[0], k[1], k[2] + 2)],
            ]
        )
    return np.array(rows).reshape(-1, 3)


@lru_cache(maxsize=None)
def dense_index_map(n: int) -> np.ndarray:
    """Array of shape ``(3,)*n`` giving the storage index of each full index tuple."""
    idx = multiset_index(n)
    out = np.empty((3,) * n, dtype=np.intp)
    for t in np.ndindex(*out.shape):
        out[t] = idx[(t.count(0), t.count(1), t.count(2))]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _dense_representatives(n: int) -> np.ndarray:
    """Flat dense positions of one representative index tuple per multiset."""
    reps = []
    for k in multisets(n):
        t = (0,) * k[0] + (1,) * k[1] + (2,) * k[2]
        reps.append(np.ravel_multi_index(t, (3,) * n) if n else 0)
    return np.array(reps, dtype=np.intp)


def _is_exact_scalar(x) -> bool:
    return not isinstance(x, (float, complex, np.floating, np.complexfloating, np.ndarray))


def _to_exact(values) -> np.ndarray:
    out = np.empty(len(values), dtype=object)
    out[:] = [v if not isinstance(v, (int, np.integer)) else Fraction(int(v)) for v in values]
    return out


class SymTensor:
    """Immutable symmetric tensor of a given order."""

    __slots__ = ("order", "comps")
    __array_priority__ = 100

    def __init__(self, order: int, comps):
        if order < 0:
            raise ValueError("order must be non-negative")
        arr = np.asarray(comps)
        if arr.dtype != object:
            arr = np.array(arr, dtype=float)
        if arr.shape != (n_components(order),):
            raise ValueError(
                f"order {order} needs {n_components(order)} components, got shape {arr.shape}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "order", int(order))
        object.__setattr__(self, "comps", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SymTensor is immutable")

    # construction ---------------------------------------------------------
    @classmethod
    def zeros(cls, order: int, exact: bool = False) -> "SymTensor":
        if exact:
            return cls(order, _to_exact([0] * n_components(order)))
        return cls(order, np.zeros(n_components(order)))

    @classmethod
    def scalar(cls, value) -> "SymTensor":
        if _is_exact_scalar(value):
            return cls(0, _to_exact([value]))
        return cls(0, [float(value)])

    @classmethod
    def from_dict(cls, order: int, entries: dict, exact: bool | None = None) -> "SymTensor":
        if exact is None:
            exact = all(_is_exact_scalar(v) for v in entries.values())
        t = cls.zeros(order, exact=exact)
        comps = t.comps.copy()
        idx = multiset_index(order)
        for k, v in entries.items():
            k = tuple(int(x) for x in k)
            if k not in idx:
                raise KeyError(f"multiset {k} does not belong to order {order}")
            comps[idx[k]] = Fraction(v) if exact and isinstance(v, int) else v
        return cls(order, comps)

    @classmethod
    def from_dense(cls, arr) -> "SymTensor":
        arr = np.asarray(arr)
        n = arr.ndim
        flat = arr.reshape(-1)
        return cls(n, flat[_dense_representatives(n)])

    def to_dense(self) -> np.ndarray:
        return self.comps[dense_index_map(self.order)]

    def to_dict(self, drop_zeros: bool = True) -> dict:
        return {
            k: v for k, v in zip(multisets(self.order), self.comps) if not (drop_zeros and v == 0)
        }

    @property
    def exact(self) -> bool:
        return self.comps.dtype == object

    def to_float(self) -> "SymTensor":
        if not self.exact:
            return self
        return SymTensor(self.order, np.array([float(v) for v in self.comps]))

    def __getitem__(self, k) -> object:
        return self.comps[multiset_index(self.order)[tuple(k)]]

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other: "SymTensor"):
        a, b = self.comps, other.comps
        if a.dtype == object and b.dtype != object:
            a = np.array([float(v) for v in a])
        elif b.dtype == object and a.dtype != object:
            b = np.array([float(v) for v in b])
        return a, b

    def __add__(self, other):
        if not isinstance(other, SymTensor):
            if other == 0:
                return self
            return NotImplemented
        if other.order != self.order:
            raise ValueError(f"cannot add orders {self.order} and {other.order}")
        a, b = self._coerce(other)
        return SymTensor(self.order, a + b)

    __radd__ = __add__

    def __neg__(self):
        return SymTensor(self.order, -self.comps)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, SymTensor):
            return sym_product(self, other)
        if not self.exact:
            return SymTensor(self.order, self.comps * float(other))
        if not _is_exact_scalar(other):
            return SymTensor(self.order, self.to_float().comps * float(other))
        if isinstance(other, (int, np.integer)):
            other = Fraction(int(other))
        return SymTensor(self.order, self.comps * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not self.exact:
            return SymTensor(self.order, self.comps / float(other))
        if not _is_exact_scalar(other):
            return SymTensor(self.order, self.to_float().comps / float(other))
        if isinstance(other, (int, np.integer)):
            other = Fraction(int(other))
        return SymTensor(self.order, self.comps / other)

    def __pow__(self, k: int):
        out = SymTensor.scalar(Fraction(1) if self.exact else 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, SymTensor):
            return NotImplemented
        return self.order == other.order and bool(np.all(self.comps == other.comps))

    __hash__ = None

    def allclose(self, other: "SymTensor", rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        if self.order != other.order:
            return False
        a, b = self.to_float().comps, other.to_float().comps
        return bool(np.allclose(a, b, rtol=rtol, atol=atol))

    def norm(self) -> float:
        return float(np.sqrt(float(dot(self, self))))

    def __repr__(self) -> str:
        entries = ", ".join(f"{k}: {v}" for k, v in self.to_dict().items())
        return f"SymTensor(order={self.order}, {{{entries}}})"


def poly_coeffs(U: SymTensor) -> np.ndarray:
    """Coefficients of ``U . x^n`` on the monomials ``x^k``."""
    m = _multinomials_int(U.order) if U.exact else multinomials(U.order)
    return U.comps * m


def from_poly_coeffs(n: int, coeffs) -> SymTensor:
    coeffs = np.asarray(coeffs)
    if coeffs.dtype == object:
        m = _multinomials_int(n)
        return SymTensor(n, np.array([Fraction(c) / d if isinstance(c, int) else c / d
                                      for c, d in zip(coeffs, m)], dtype=object))
    return SymTensor(n, coeffs / multinomials(n))


def sym_product(U: SymTensor, V: SymTensor) -> SymTensor:
    """Symmetrised tensor product, the product of the associated polynomials."""
    a, b = U._coerce(V)
    U = SymTensor(U.order, a)
    V = SymTensor(V.order, b)
    i1, i2, out = _product_table(U.order, V.order)
    n = U.order + V.order
    pu, pv = poly_coeffs(U), poly_coeffs(V)
    if U.exact:
        acc = _to_exact([0] * n_components(n))
    else:
        acc = np.zeros(n_components(n))
    np.add.at(acc, out, pu[i1] * pv[i2])
    return from_poly_coeffs(n, acc)


def dot(U: SymTensor, V: SymTensor):
    """Full contraction ``sum_k multinomial(n; k) U_k V_k``."""
    if U.order != V.order:
        raise ValueError(f"cannot contract orders {U.order} and {V.order}")
    a, b = U._coerce(V)
    m = _multinomials_int(U.order) if a.dtype == object else multinomials(U.order)
    return (a * b * m).sum() if len(a) else 0


def trace(U: SymTensor) -> SymTensor:
    """Contract the last two indices."""
    if U.order < 2:
        raise ValueError("trace needs order >= 2")
    t = _trace_table(U.order)
    c = U.comps
    return SymTensor(U.order - 2, c[t[:, 0]] + c[t[:, 1]] + c[t[:, 2]])


def identity(exact: bool = True) -> SymTensor:
    one = Fraction(1) if exact else 1.0
    return SymTensor.from_dict(2, {(2, 0, 0): one, (0, 2, 0): one, (0, 0, 2): one}, exact=exact)


def identity_multiply(l: int, U: SymTensor) -> SymTensor:
    """``U`` multiplied by ``l`` copies of the identity tensor."""
    out = U
    eye = identity(exact=U.exact)
    for _ in range(l):
        out = out * eye
    return out


def monomial(k1: int, k2: int, k3: int, frame=None) -> SymTensor:
    """Symmetrised product ``m1^k1 m2^k2 m3^k3``.

    Without a frame the standard axes are used and the result is exact,
    with value ``k1! k2! k3! / n!`` at the single multiset ``(k1, k2, k3)``.
    """
    n = k1 + k2 + k3
    if frame is None:
        return SymTensor.from_dict(n, {(k1, k2, k3): Fraction(1, multinomial((k1, k2, k3)))})
    frame = np.asarray(frame, dtype=float)
    vecs = [frame[:, 0]] * k1 + [frame[:, 1]] * k2 + [frame[:, 2]] * k3
    return sym_outer(vecs)


def vector(v) -> SymTensor:
    if isinstance(v, SymTensor):
        if v.order != 1:
            raise ValueError(f"expected an order-1 tensor, got order {v.order}")
        return v
    v = list(v)
    if all(_is_exact_scalar(x) for x in v):
        return SymTensor(1, _to_exact(v))
    return SymTensor(1, np.asarray(v, dtype=float))


def sym_outer(vectors) -> SymTensor:
    """Symmetrised outer product of a list of 3-vectors."""
    out = SymTensor.scalar(1.0)
    for v in vectors:
        out = out * vector(v)
    return out


def apply_on_axes(p: np.ndarray, dense: np.ndarray) -> np.ndarray:
    """Apply matrix ``p`` on every axis of a dense tensor."""
    out = dense
    for ax in range(dense.ndim):
        out = np.moveaxis(np.tensordot(p, out, axes=([1], [ax])), 0, ax)
    return out


def apply_on_axes_batch(P: np.ndarray, dense: np.ndarray, batched: bool = False) -> np.ndarray:
    """Apply each matrix of ``P`` (shape ``(B, 3, 3)``) on every axis of a dense tensor.

    ``dense`` is a single tensor ``(3,)*n``, or a batch ``(B,) + (3,)*n``
    when ``batched`` is true.
    """
    if not batched:
        dense = np.broadcast_to(dense, (len(P),) + dense.shape)
    out = dense
    for ax in range(1, dense.ndim):
        moved = np.moveaxis(out, ax, 1)
        out = np.moveaxis(np.einsum("bij,bj...->bi...", P, moved), 1, ax)
    return out


def rotate(p, U: SymTensor) -> SymTensor:
    """Replace every axis ``e_i`` by column ``i`` of ``p``."""
    p = np.asarray(p)
    if p.dtype != object and not U.exact:
        p = np.asarray(p, dtype=float)
    elif p.dtype != object and U.exact:
        U = U.to_float()
        p = np.asarray(p, dtype=float)
    if U.order == 0:
        return U
    return SymTensor.from_dense(apply_on_axes(p, U.to_dense()))


def rotate_batch(P: np.ndarray, U: SymTensor) -> np.ndarray:
    """Rotate ``U`` by every rotation in ``P``; returns components of shape ``(B, N)``."""
    P = np.asarray(P, dtype=float)
    U = U.to_float()
    if U.order == 0:
        return np.broadcast_to(U.comps, (len(P), 1)).copy()
    dense = apply_on_axes_batch(P, U.to_dense())
    return dense.reshape(len(P), -1)[:, _dense_representatives(U.order)]


def sqrt_weights(n: int) -> np.ndarray:
    """Weights making the contraction Euclidean: ``dot(U, V) = (w*U) . (w*V)``."""
    return np.sqrt(multinomials(n))


def as_vector(U: SymTensor) -> np.ndarray:
    """Float coordinates in which the contraction is the Euclidean inner product."""
    return U.to_float().comps * sqrt_weights(U.order)


def from_vector(n: int, v) -> SymTensor:
    return SymTensor(n, np.asarray(v, dtype=float) / sqrt_weights(n))


def is_traceless(U: SymTensor, tol: float = 0.0) -> bool:
    if U.order < 2:
        return True
    t = trace(U)
    if U.exact and tol == 0.0:
        return all(v == 0 for v in t.comps)
    return bool(np.max(np.abs(t.to_float().comps)) <= tol * max(1.0, U.norm()))


def traceless_project(U: SymTensor) -> SymTensor:
    """The unique traceless ``U - i V``, computed monomial by monomial."""
    if U.order < 2:
        return U
    P = projection_matrix(U.order, exact=U.exact)
    if U.exact:
        return SymTensor(U.order, P.dot(U.comps))
    return SymTensor(U.order, P @ U.comps)


@lru_cache(maxsize=None)
def projection_matrix(n: int, exact: bool = True) -> np.ndarray:
    """Matrix of the traceless projection acting on storage components."""
    from .bases import monomial_traceless

    N = n_components(n)
    m = _multinomials_int(n)
    cols = [monomial_traceless(*k).comps * m[j] for j, k in enumerate(multisets(n))]
    P = np.empty((N, N), dtype=object)
    for j, c in enumerate(cols):
        P[:, j] = c
    if not exact:
        P = P.astype(float)
    P.setflags(write=False)
    return P


class MonomialExpr:
    """Formal polynomial in the frame tensors ``m1, m2, m3`` and the identity.

    Keys are ``(k1, k2, k3, l)`` for ``m1^k1 m2^k2 m3^k3 i^l``; values are
    exact coefficients.  Only homogeneous expressions are meaningful as
    tensors.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for k, v in (terms or {}).items():
            if v != 0:
                clean[tuple(k)] = v
        self.terms = clean

    @classmethod
    def one(cls) -> "MonomialExpr":
        return cls({(0, 0, 0, 0): Fraction(1)})

    @classmethod
    def axis(cls, i: int) -> "MonomialExpr":
        k = [0, 0, 0, 0]
        k[i - 1] = 1
        return cls({tuple(k): Fraction(1)})

    @classmethod
    def identity(cls) -> "MonomialExpr":
        return cls({(0, 0, 0, 1): Fraction(1)})

    @property
    def order(self) -> int:
        orders = {k[0] + k[1] + k[2] + 2 * k[3] for k in self.terms}
        if len(orders) > 1:
            raise ValueError(f"inhomogeneous expression with orders {sorted(orders)}")
        return orders.pop() if orders else 0

    def __add__(self, other):
        if not isinstance(other, MonomialExpr):
            if other == 0:
                return self
            other = MonomialExpr({(0, 0, 0, 0): other})
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return MonomialExpr(out)

    __radd__ = __add__

    def __neg__(self):
        return MonomialExpr({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, MonomialExpr):
            out: dict = {}
            for ka, va in self.terms.items():
                for kb, vb in other.terms.items():
                    k = tuple(a + b for a, b in zip(ka, kb))
                    out[k] = out.get(k, 0) + va * vb
            return MonomialExpr(out)
        return MonomialExpr({k: v * other for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = MonomialExpr.one()
        for _ in range(k):
            out = out * self
        return out

    def tensor(self, frame=None) -> SymTensor:
        """Evaluate with ``m_i`` the axes of ``frame`` (standard axes if None)."""
        n = self.order
        if frame is None:
            out = SymTensor.zeros(n, exact=True)
            for (k1, k2, k3, l), v in self.terms.items():
                out = out + identity_multiply(l, monomial(k1, k2, k3)) * v
            return out
        return rotate(frame, self.tensor().to_float())

    def __repr__(self) -> str:
        return f"MonomialExpr({self.terms})"
