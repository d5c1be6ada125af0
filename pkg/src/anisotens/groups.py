"""Point groups as rotation sets and the tensors they leave invariant.

A molecular symmetry ``s`` acts on a tensor by ``X -> rotate(s, X)``; the
invariant space of order ``n`` collects the traceless tensors fixed by every
element.  Each space is available two ways: a numeric route (Reynolds
average of the orthogonal basis followed by an SVD rank cut) and an analytic
route (closed-form generating families).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import subspace_angles

from . import so3
from .bases import TensorSpace, orthogonal_basis
from .tensors import (
    MonomialExpr,
    SymTensor,
    as_vector,
    from_vector,
    rotate,
    rotate_batch,
    traceless_project,
)

DEDUP_TOL = 1e-9
MEMBER_TOL = 1e-8
CLOSURE_CAP = 512
RANK_TOL = 1e-9


class GroupClosureError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PointGroup:
    """A rotation group given by its elements, or a continuous axial group."""

    name: str
    kind: str
    n: int = 0
    elements: np.ndarray | None = None

    @property
    def order(self) -> float:
        if self.elements is None:
            return float("inf")
        return len(self.elements)

    @property
    def continuous(self) -> bool:
        return self.elements is None

    def contains(self, R, tol: float = MEMBER_TOL) -> bool:
        R = np.asarray(R, dtype=float)
        if self.kind == "SO3":
            return so3.is_rotation(R, tol)
        e1 = np.array([1.0, 0.0, 0.0])
        if self.kind == "Cinf":
            return bool(np.linalg.norm(R[:, 0] - e1) < tol)
        if self.kind == "Dinf":
            if np.linalg.norm(R[:, 0] - e1) < tol:
                return True
            return bool(np.linalg.norm(R[:, 0] + e1) < tol and np.linalg.norm(R - R.T) < tol)
        d = np.linalg.norm(self.elements - R, axis=(1, 2))
        return bool(d.min() < tol)

    def __repr__(self) -> str:
        return f"PointGroup({self.name}, order={self.order})"

    def __eq__(self, other):
        return isinstance(other, PointGroup) and self.name == other.name

    def __hash__(self):
        return hash(self.name)


def closure(generators, tol: float = DEDUP_TOL, cap: int = CLOSURE_CAP) -> np.ndarray:
    """All products of the generators, deduplicated by Frobenius distance."""
    gens = [np.asarray(g, dtype=float) for g in generators]
    elems = [np.eye(3)]
    queue = [np.eye(3)]
    products = 0
    while queue:
        a = queue.pop(0)
        for g in gens:
            products += 1
            if products > cap:
                raise GroupClosureError(f"closure exceeded {cap} compositions")
            c = a @ g
            if min(np.linalg.norm(c - e) for e in elems) > tol:
                elems.append(c)
                queue.append(c)
    return np.array(elems)


def generators(kind: str, n: int = 0) -> list:
    if kind == "C":
        return [so3.axis_rotation(2 * np.pi / n)]
    if kind == "D":
        return [so3.axis_rotation(2 * np.pi / n), so3.half_turn_b()]
    if kind == "T":
        return [so3.axis_rotation(np.pi), so3.half_turn_b(), so3.cyclic_r()]
    if kind == "O":
        return [so3.axis_rotation(np.pi / 2), so3.half_turn_b(), so3.cyclic_r()]
    if kind == "I":
        return [so3.axis_rotation(np.pi), so3.half_turn_b(), so3.cyclic_r(), so3.icosa_v()]
    raise ValueError(f"no generators for kind {kind!r}")


_NAME_RE = re.compile(r"^(C|D)(\d+|inf)$")


@lru_cache(maxsize=None)
def build_group(name: str) -> PointGroup:
    """Build a group from its name: ``Cn``, ``Dn``, ``Cinf``, ``Dinf``, ``T``, ``O``, ``I`` or ``SO3``."""
    key = name.strip()
    if key.lower() in ("so3", "isotropic"):
        return PointGroup("SO3", "SO3")
    if key in ("T", "O", "I"):
        return PointGroup(key, key, 0, closure(generators(key)))
    m = _NAME_RE.match(key.replace("∞", "inf"))
    if not m:
        raise ValueError(f"unknown group {name!r}")
    kind, n = m.group(1), m.group(2)
    if n == "inf":
        return PointGroup(f"{kind}inf", f"{kind}inf")
    n = int(n)
    if n < 1:
        raise ValueError("group index must be positive")
    if kind == "D" and n == 1:
        raise ValueError("D1 is not used; it is conjugate to C2")
    return PointGroup(f"{kind}{n}", kind, n, closure(generators(kind, n)))


def rank_key(G: PointGroup) -> tuple:
    """Sort key, larger means more symmetric.  Continuous groups rank above finite ones."""
    if G.kind == "SO3":
        return (3, 0, 0)
    if G.kind == "Dinf":
        return (2, 0, 1)
    if G.kind == "Cinf":
        return (2, 0, 0)
    return (1, int(G.order), 1 if G.kind == "D" else 0)


SUBGROUP_FRAMES = {"identity": np.eye(3), "body_diagonal": so3.body_diagonal_frame()}


def subgroup_frame(H: PointGroup, G: PointGroup, frames=None) -> str | None:
    """Name of the first convention frame ``g`` with ``g H g^T`` inside ``G``, else None."""
    frames = frames or tuple(SUBGROUP_FRAMES)
    if G.kind == "SO3":
        return frames[0]
    if H.kind == "SO3":
        return None
    for fname in frames:
        g = SUBGROUP_FRAMES[fname]
        if H.continuous:
            if G.continuous and (H.kind == G.kind or G.kind == "Dinf") and fname == "identity":
                return fname
            continue
        if all(G.contains(g @ h @ g.T) for h in H.elements):
            return fname
    return None


def is_subgroup(H: PointGroup, G: PointGroup, frames=None) -> bool:
    return subgroup_frame(H, G, frames) is not None


# Reynolds averages and invariant spaces -----------------------------------


def _finite_stand_in(G: PointGroup, order: int) -> PointGroup:
    """A finite subgroup with the same invariants as a continuous group at this order.

    Averaging over ``C_{n+1}`` kills every Fourier mode ``0 < |m| <= n``, so
    for tensors of order ``n`` it reproduces the average over all rotations
    about the axis.
    """
    return build_group(f"{G.kind[0]}{max(order + 1, 2)}")


def reynolds_average(X: SymTensor, G: PointGroup) -> SymTensor:
    """Average of ``rotate(s, X)`` over the group."""
    if G.kind == "SO3":
        grid = so3.haar_grid(X.order)
        comps = grid.weights @ rotate_batch(grid.rotations, X)
        return SymTensor(X.order, comps)
    if G.continuous:
        G = _finite_stand_in(G, X.order)
    return SymTensor(X.order, rotate_batch(G.elements, X).mean(axis=0))


def _span(order: int, vectors, name: str) -> TensorSpace:
    """Orthonormal basis of the span of weighted coordinate vectors."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.size == 0:
        return TensorSpace(order, (), name=name, orthogonal=True)
    _, s, vt = np.linalg.svd(V, full_matrices=False)
    scale = max(1.0, np.abs(V).max())
    rank = int(np.sum(s > RANK_TOL * scale))
    members = tuple(from_vector(order, vt[i]) for i in range(rank))
    return TensorSpace(order, members, name=name, orthogonal=True)


def invariant_space_numeric(G: PointGroup, order: int) -> TensorSpace:
    basis = orthogonal_basis(order)
    images = [as_vector(reynolds_average(X, G)) for X in basis]
    return _span(order, images, f"A[{G.name},{order}] numeric")


def _axial_members(order: int, step: int | None, dihedral: bool) -> list:
    basis = orthogonal_basis(order)
    out = []
    for X, meta in zip(basis.members, basis.meta):
        m = meta["m"]
        if step is None:
            keep = m == 0 and (not dihedral or order % 2 == 0)
        else:
            keep = m % step == 0
            if keep and dihedral:
                even = (order - m) % 2 == 0
                keep = (meta["family"] == "T") == even
        if keep:
            out.append(X)
    return out


def _cubic_generators():
    e1, e2, e3 = (MonomialExpr.axis(i) for i in (1, 2, 3))
    s1, s2, s3 = e1 * e1, e2 * e2, e3 * e3
    sigma2 = s1 * s2 + s2 * s3 + s3 * s1
    sigma3 = e1 * e2 * e3
    delta = (s1 - s2) * (s2 - s3) * (s3 - s1)
    return sigma2, sigma3, delta


def _cubic_members(order: int, octahedral: bool) -> list:
    sigma2, sigma3, delta = _cubic_generators()
    out = []
    for j1 in range(order // 4 + 1):
        for j2 in range(order // 3 + 1):
            if 4 * j1 + 3 * j2 == order and (not octahedral or j2 % 2 == 0):
                out.append(traceless_project((sigma2**j1 * sigma3**j2).tensor()))
            if 6 + 4 * j1 + 3 * j2 == order and (not octahedral or j2 % 2 == 1):
                out.append(traceless_project((delta * sigma2**j1 * sigma3**j2).tensor()))
    return out


def invariant_space_analytic(G: PointGroup, order: int) -> TensorSpace:
    """Invariant space from closed-form generating families (exact where possible)."""
    name = f"A[{G.name},{order}] analytic"
    if order == 0:
        return TensorSpace(0, (SymTensor.scalar(Fraction(1)),), name=name, orthogonal=True)
    if G.kind == "SO3":
        return TensorSpace(order, (), name=name, orthogonal=True)
    if G.kind == "C" and G.n == 1:
        return TensorSpace(order, orthogonal_basis(order).members, name=name, orthogonal=True)
    if G.kind in ("C", "D"):
        members = _axial_members(order, G.n, G.kind == "D")
        return TensorSpace(order, tuple(members), name=name, orthogonal=True)
    if G.kind in ("Cinf", "Dinf"):
        members = _axial_members(order, None, G.kind == "Dinf")
        return TensorSpace(order, tuple(members), name=name, orthogonal=True)
    if G.kind in ("T", "O"):
        return TensorSpace(order, tuple(_cubic_members(order, G.kind == "O")), name=name)
    if G.kind == "I":
        members = _cubic_members(order, False)
        if not members:
            return TensorSpace(order, (), name=name, orthogonal=True)
        v = so3.icosa_v()
        A = np.array([as_vector(X) for X in members])
        B = np.array([as_vector(rotate(v, X)) for X in members])
        # coefficients c with (B - A)^T c = 0
        _, s, vt = np.linalg.svd((B - A).T)
        s = np.concatenate([s, np.zeros(len(members) - len(s))])
        null = vt[s <= RANK_TOL * max(1.0, s.max() if s.size else 1.0)]
        return _span(order, null @ A, name) if len(null) else TensorSpace(order, (), name=name)
    raise ValueError(f"no analytic invariants for {G.name}")


def invariant_dimension(G: PointGroup, order: int) -> int:
    return invariant_space_analytic(G, order).dim


def principal_angles(A: TensorSpace, B: TensorSpace) -> np.ndarray:
    if A.dim == 0 and B.dim == 0:
        return np.zeros(0)
    if A.dim == 0 or B.dim == 0:
        return np.full(max(A.dim, B.dim), np.pi / 2)
    return subspace_angles(A.matrix().T, B.matrix().T)


def same_space(A: TensorSpace, B: TensorSpace, tol: float = 1e-8) -> bool:
    if A.dim != B.dim:
        return False
    return bool(A.dim == 0 or np.max(principal_angles(A, B)) < tol)


def project_onto(U: SymTensor, space: TensorSpace) -> SymTensor:
    """Orthogonal projection of ``U`` onto the span of ``space``."""
    if space.dim == 0:
        return SymTensor.zeros(U.order)
    M = space.matrix()
    u = as_vector(U)
    c, *_ = np.linalg.lstsq(M.T, u, rcond=None)
    return from_vector(U.order, M.T @ c)


# exact arithmetic in Q(sqrt 5) for the icosahedral check -------------------


class QSqrt5:
    """Numbers ``a + b sqrt(5)`` with rational ``a`` and ``b``."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        self.a = Fraction(a)
        self.b = Fraction(b)

    @staticmethod
    def _lift(x):
        return x if isinstance(x, QSqrt5) else QSqrt5(x, 0)

    def __add__(self, o):
        o = self._lift(o)
        return QSqrt5(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __neg__(self):
        return QSqrt5(-self.a, -self.b)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        o = self._lift(o)
        return QSqrt5(self.a * o.a + 5 * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._lift(o)
        norm = o.a * o.a - 5 * o.b * o.b
        if norm == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt 5)")
        return self * QSqrt5(o.a / norm, -o.b / norm)

    def __rtruediv__(self, o):
        return self._lift(o) / self

    def __eq__(self, o):
        try:
            o = self._lift(o)
        except (TypeError, ValueError):
            return NotImplemented
        return self.a == o.a and self.b == o.b

    def __ne__(self, o):
        return not self == o

    __hash__ = None

    def __float__(self):
        return float(self.a) + float(self.b) * float(np.sqrt(5.0))

    def __repr__(self):
        return f"({self.a} + {self.b}*sqrt5)"


def icosa_v_exact() -> np.ndarray:
    q, h = Fraction(1, 4), Fraction(1, 2)
    hphi = QSqrt5(q, q)  # golden ratio / 2
    hphi1 = QSqrt5(-q, q)  # (golden ratio - 1) / 2
    rows = [
        [hphi, QSqrt5(-h), hphi1],
        [QSqrt5(h), hphi1, -hphi],
        [hphi1, hphi, QSqrt5(h)],
    ]
    out = np.empty((3, 3), dtype=object)
    for i in range(3):
        for j in range(3):
            out[i, j] = rows[i][j]
    return out


def icosahedral_order6_ratio() -> QSqrt5:
    """Exact ``b / a`` for the order-6 icosahedral invariant ``a A + b B``.

    ``A = (m1^2 m2^2 m3^2)_0`` and ``B`` is the traceless part of
    ``(m1^2 - m2^2)(m2^2 - m3^2)(m3^2 - m1^2)``.
    """
    sigma2, sigma3, delta = _cubic_generators()
    A = traceless_project((sigma3 * sigma3).tensor())
    B = traceless_project(delta.tensor())
    v = icosa_v_exact()
    dA = (rotate(v, A) - A).comps
    dB = (rotate(v, B) - B).comps
    ratio = None
    for x, y in zip(dA, dB):
        if y != 0:
            ratio = -x / y
            break
    if ratio is None:
        raise ArithmeticError("B is fixed by the five-fold rotation")
    for x, y in zip(dA, dB):
        if x + ratio * y != 0:
            raise ArithmeticError("no icosahedral invariant in span{A, B}")
    return ratio
