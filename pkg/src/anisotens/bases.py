"""Bases of symmetric traceless tensors.

Two bases are built for each order ``n``, both exact over the rationals:

* the monomial basis ``(e1^k1 e2^k2 e3^k3)_0`` with ``k3`` in ``{0, 1}``;
* the orthogonal basis built from scaled Jacobi and Chebyshev polynomials
  evaluated on tensors, ``P_k(e1, i) T_m(e2, i - e1^2)`` and
  ``P_k(e1, i) U_{m-1}(e2, i - e1^2) e3`` with ``m = n - k``.

The polynomial families are generic: their arguments can be plain numbers,
:class:`~anisotens.tensors.SymTensor` objects (multiplied by the symmetrised
product) or :class:`~anisotens.tensors.MonomialExpr` formal expressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .tensors import (
    MonomialExpr,
    SymTensor,
    as_vector,
    dot,
)


def double_factorial(k: int) -> int:
    if k < -1:
        raise ValueError("double factorial defined for k >= -1")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def trzero_coefficient(k1: int, k2: int, k3: int, j1: int, j2: int) -> Fraction:
    """Coefficient of ``e1^(k1-2j1) e2^(k2-2j2) e3^k3 i^(j1+j2)`` in the traceless monomial."""
    n = k1 + k2 + k3
    j = j1 + j2
    num = (-1) ** j * comb(j, j1) * factorial(k1) * factorial(k2) * double_factorial(2 * n - 1 - 2 * j)
    den = (
        factorial(k1 - 2 * j1)
        * factorial(k2 - 2 * j2)
        * double_factorial(2 * n - 1)
        * double_factorial(2 * j)
    )
    return Fraction(num, den)


@lru_cache(maxsize=None)
def _traceless_low(k1: int, k2: int, k3: int) -> MonomialExpr:
    assert k3 in (0, 1)
    terms = {}
    for j1 in range(k1 // 2 + 1):
        for j2 in range(k2 // 2 + 1):
            terms[(k1 - 2 * j1, k2 - 2 * j2, k3, j1 + j2)] = trzero_coefficient(k1, k2, k3, j1, j2)
    return MonomialExpr(terms)


@lru_cache(maxsize=None)
def monomial_traceless_expr(k1: int, k2: int, k3: int) -> MonomialExpr:
    """``(e1^k1 e2^k2 e3^k3)_0`` as a combination of ``e^k i^l`` terms.

    For ``k3 >= 2`` the factor ``e3^(2j)`` is traded for ``(-e1^2 - e2^2)^j``,
    which leaves the traceless part unchanged.
    """
    if min(k1, k2, k3) < 0:
        raise ValueError("exponents must be non-negative")
    if k3 <= 1:
        return _traceless_low(k1, k2, k3)
    j, r = divmod(k3, 2)
    out = MonomialExpr()
    for t in range(j + 1):
        c = (-1) ** j * comb(j, t)
        out = out + _traceless_low(k1 + 2 * t, k2 + 2 * (j - t), r) * Fraction(c)
    return out


@lru_cache(maxsize=None)
def monomial_traceless(k1: int, k2: int, k3: int) -> SymTensor:
    return monomial_traceless_expr(k1, k2, k3).tensor()


@dataclass(frozen=True)
class TensorSpace:
    """A list of tensors of one order, optionally with labels and metadata."""

    order: int
    members: tuple
    labels: tuple = ()
    exprs: tuple = ()
    meta: tuple = ()
    orthogonal: bool = False
    name: str = ""
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def dim(self) -> int:
        return len(self.members)

    def matrix(self) -> np.ndarray:
        """Rows are members in coordinates where the contraction is Euclidean."""
        if "matrix" not in self._cache:
            if self.members:
                self._cache["matrix"] = np.array([as_vector(X) for X in self.members])
            else:
                n = (self.order + 1) * (self.order + 2) // 2
                self._cache["matrix"] = np.zeros((0, n))
        return self._cache["matrix"]

    def gram(self, exact: bool = False) -> np.ndarray:
        if exact:
            G = np.empty((self.dim, self.dim), dtype=object)
            for i, a in enumerate(self.members):
                for j, b in enumerate(self.members):
                    G[i, j] = dot(a, b)
            return G
        M = self.matrix()
        return M @ M.T

    def label_index(self, label: str) -> int:
        return self.labels.index(label)


def monomial_basis(n: int) -> TensorSpace:
    keys = [(k1, n - k1, 0) for k1 in range(n, -1, -1)]
    keys += [(k1, n - 1 - k1, 1) for k1 in range(n - 1, -1, -1)]
    return TensorSpace(
        order=n,
        members=tuple(monomial_traceless(*k) for k in keys),
        labels=tuple(f"m{k[0]}{k[1]}{k[2]}" for k in keys),
        exprs=tuple(monomial_traceless_expr(*k) for k in keys),
        meta=tuple({"multiset": k} for k in keys),
        orthogonal=False,
        name=f"monomial-{n}",
    )


# polynomial families ---------------------------------------------------------


def _one_like(y):
    if isinstance(y, MonomialExpr):
        return MonomialExpr.one()
    if isinstance(y, SymTensor):
        return SymTensor.scalar(Fraction(1) if y.exact else 1.0)
    return 1


def _power(y, k: int):
    out = _one_like(y)
    for _ in range(k):
        out = out * y
    return out


def cheb_t_tilde(n: int, y, z):
    """``z^(n/2) T_n(y / sqrt(z))`` written as a polynomial in ``y`` and ``z``."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    w = y * y - z
    out = 0
    for k in range(n // 2 + 1):
        out = out + _power(y, n - 2 * k) * _power(w, k) * Fraction(comb(n, 2 * k))
    return out


def cheb_u_tilde(n: int, y, z):
    """``z^(n/2) U_n(y / sqrt(z))`` written as a polynomial in ``y`` and ``z``."""
    if n < 0:
        return 0
    w = y * y - z
    out = 0
    for k in range(n // 2 + 1):
        out = out + _power(y, n - 2 * k) * _power(w, k) * Fraction(comb(n + 1, 2 * k + 1))
    return out


@lru_cache(maxsize=None)
def jacobi_coefficients(k: int, a: int, b: int) -> tuple:
    """Exact power-basis coefficients of the Jacobi polynomial ``P_k^(a,b)``."""
    coeffs = [Fraction(0)] * (k + 1)
    for s in range(k + 1):
        c = Fraction(comb(k + a, k - s) * comb(k + b, s), 2**k)
        # (x - 1)^s (x + 1)^(k - s)
        poly = [Fraction(1)]
        for root, times in ((-1, s), (1, k - s)):
            for _ in range(times):
                nxt = [Fraction(0)] * (len(poly) + 1)
                for i, v in enumerate(poly):
                    nxt[i + 1] += v
                    nxt[i] += root * v
                poly = nxt
        for i, v in enumerate(poly):
            coeffs[i] += c * v
    return tuple(coeffs)


def jacobi_eval(k: int, a: int, b: int, x):
    c = jacobi_coefficients(k, a, b)
    return np.polynomial.polynomial.polyval(x, [float(v) for v in c])


def jacobi_tilde(k: int, a: int, y, z):
    """``z^(k/2) P_k^(a,a)(y / sqrt(z))`` as a polynomial in ``y`` and ``z``."""
    coeffs = jacobi_coefficients(k, a, a)
    out = 0
    for i, c in enumerate(coeffs):
        if c == 0:
            continue
        if (k - i) % 2:
            raise ArithmeticError("symmetric Jacobi polynomial lost its parity")
        out = out + _power(y, i) * _power(z, (k - i) // 2) * c
    return out


def _orthogonal_exprs(n: int):
    e1, e2, e3 = (MonomialExpr.axis(i) for i in (1, 2, 3))
    ii = MonomialExpr.identity()
    rest = ii - e1 * e1
    out = []
    for k in range(n, -1, -1):
        m = n - k
        expr = jacobi_tilde(k, m, e1, ii) * cheb_t_tilde(m, e2, rest)
        out.append((expr, {"family": "T", "k": k, "m": m}))
    for k in range(n - 1, -1, -1):
        m = n - k
        expr = jacobi_tilde(k, m, e1, ii) * cheb_u_tilde(m - 1, e2, rest) * e3
        out.append((expr, {"family": "U", "k": k, "m": m}))
    return out


@lru_cache(maxsize=None)
def orthogonal_basis(n: int) -> TensorSpace:
    """Orthogonal basis ordered as the ``T`` family ``k = n..0`` then the ``U`` family ``k = n-1..0``."""
    items = _orthogonal_exprs(n)
    return TensorSpace(
        order=n,
        members=tuple(e.tensor() for e, _ in items),
        labels=tuple(f"{d['family']}{d['k']}" for _, d in items),
        exprs=tuple(e for e, _ in items),
        meta=tuple(d for _, d in items),
        orthogonal=True,
        name=f"orthogonal-{n}",
    )


def expand(U: SymTensor, space: TensorSpace, tol: float = 1e-10):
    """Coordinates of ``U`` in ``space`` and the least-squares residual norm.

    Orthogonal spaces are handled exactly, others by least squares.
    """
    if U.order != space.order:
        raise ValueError(f"order {U.order} tensor cannot be expanded in an order {space.order} space")
    if space.orthogonal:
        coeffs = [dot(X, U) / dot(X, X) for X in space.members]
        approx = sum((X * c for X, c in zip(space.members, coeffs)), SymTensor.zeros(U.order, U.exact))
        r = U - approx
        resid = r.norm()
        if not U.exact:
            coeffs = np.array([float(c) for c in coeffs])
        return coeffs, resid
    M = space.matrix()
    u = as_vector(U)
    c, *_ = np.linalg.lstsq(M.T, u, rcond=None)
    resid = float(np.linalg.norm(M.T @ c - u))
    return c, resid


# rotational Laplacian ------------------------------------------------------


def laplacian_monomial(k1: int, k2: int, k3: int, l: int) -> MonomialExpr:
    """``-L^2`` applied to the tensor-valued function ``m1^k1 m2^k2 m3^k3 i^l``.

    The identity is rotation invariant, so only the frame factor is
    differentiated; its degree ``d = k1 + k2 + k3`` sets the diagonal term.
    """
    d = k1 + k2 + k3
    terms = {(k1, k2, k3, l): Fraction(d * (d + 1))}
    for i, ki in enumerate((k1, k2, k3)):
        if ki >= 2:
            k = [k1, k2, k3]
            k[i] -= 2
            key = (k[0], k[1], k[2], l + 1)
            terms[key] = terms.get(key, 0) - ki * (ki - 1)
    return MonomialExpr(terms)


def laplacian(expr: MonomialExpr) -> MonomialExpr:
    out = MonomialExpr()
    for key, c in expr.terms.items():
        out = out + laplacian_monomial(*key) * c
    return out


# Wigner functions --------------------------------------------------------------


def _wigner_constant(n: int, m: int, mp: int) -> float:
    a, b = abs(m - mp), abs(m + mp)
    k = n - max(abs(m), abs(mp))
    nu = 0 if mp <= m else mp - m
    return (-1) ** nu * np.sqrt(comb(2 * n - k, k + a) / comb(k + b, b))


def wigner_d_small(n: int, m: int, mp: int, alpha):
    """``d^n_{m m'}(alpha)``, normalised so that ``d(0)`` is the identity."""
    if abs(m) > n or abs(mp) > n:
        raise ValueError("|m|, |m'| must not exceed n")
    a, b = abs(m - mp), abs(m + mp)
    k = n - max(abs(m), abs(mp))
    alpha = np.asarray(alpha, dtype=float)
    val = np.sin(alpha / 2) ** a * np.cos(alpha / 2) ** b * jacobi_eval(k, a, b, np.cos(alpha))
    return _wigner_constant(n, m, mp) * val


def wigner_D(n: int, m: int, mp: int, alpha, beta, gamma):
    """``exp(-i m beta) d^n_{m m'}(alpha) exp(-i m' gamma)`` in the Euler chart of :mod:`so3`."""
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    return np.exp(-1j * m * beta) * wigner_d_small(n, m, mp, alpha) * np.exp(-1j * mp * gamma)
