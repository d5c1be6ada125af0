"""Mesoscopic symmetry detection from order-parameter tensors.

A set of tensors ``U_j`` has mesoscopic symmetry ``H`` when some frame ``q``
puts every ``U_j`` in ``rotate(q, A[H, n_j])``.  The distance to ``H`` is

    min_q sum_j |U_j - P_H(q) U_j|^2

with ``P_H(q)`` the orthogonal projection onto the rotated invariant space.
The minimum over ``q`` is found by a batched Levenberg-Marquardt search on
SO(3) from a fixed set of starting frames.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import so3
from .bases import TensorSpace, cheb_t_tilde, cheb_u_tilde, monomial_traceless_expr
from .groups import (
    PointGroup,
    SUBGROUP_FRAMES,
    build_group,
    invariant_space_analytic,
    rank_key,
    subgroup_frame,
)
from .tensors import MonomialExpr, SymTensor, as_vector, dot, from_vector, rotate

log = logging.getLogger(__name__)

TABLE_GROUPS = ("Dinf", "Cinf", "O", "T", "D4", "D3", "D2", "C4", "C3", "C2")
ISOTROPIC = "SO3"
NONE = "none"


# coefficient bases -------------------------------------------------------------


def _order_parameter_exprs(order: int) -> list:
    e1, e2, e3 = (MonomialExpr.axis(i) for i in (1, 2, 3))
    ii = MonomialExpr.identity()
    rest = ii - e1 * e1
    F = Fraction

    def tt(m):
        return cheb_t_tilde(m, e2, rest)

    def uu(m):
        return cheb_u_tilde(m - 1, e2, rest) * e3

    if order == 1:
        return [(e1, "T", 1, 0), (e2, "T", 0, 1), (e3, "U", 0, 1)]
    if order == 2:
        return [
            (monomial_traceless_expr(2, 0, 0), "T", 2, 0),
            (tt(2), "T", 0, 2),
            (uu(2), "U", 0, 2),
            (e1 * e3, "U", 1, 1),
            (e1 * e2, "T", 1, 1),
        ]
    if order == 3:
        p2 = e1 * e1 - ii * F(1, 5)
        return [
            (monomial_traceless_expr(3, 0, 0), "T", 3, 0),
            (tt(3), "T", 0, 3),
            (uu(3), "U", 0, 3),
            (e1 * uu(2), "U", 1, 2),
            (e1 * tt(2), "T", 1, 2),
            (p2 * e2, "T", 2, 1),
            (p2 * e3, "U", 2, 1),
        ]
    if order == 4:
        p2 = e1 * e1 - ii * F(1, 7)
        p3 = e1 * e1 * e1 - ii * e1 * F(3, 7)
        return [
            (monomial_traceless_expr(4, 0, 0), "T", 4, 0),
            (p2 * tt(2), "T", 2, 2),
            (p2 * uu(2), "U", 2, 2),
            (tt(4), "T", 0, 4),
            (uu(4), "U", 0, 4),
            (e1 * uu(3), "U", 1, 3),
            (e1 * tt(3), "T", 1, 3),
            (p3 * e2, "T", 3, 1),
            (p3 * e3, "U", 3, 1),
        ]
    raise ValueError("named coefficient bases exist for orders 1 to 4")


@lru_cache(maxsize=None)
def coefficient_basis(order: int, prefix: str | None = None) -> TensorSpace:
    """Orthogonal basis whose coordinates are the named coefficients.

    Orders 1 to 4 use the prefixes ``d``, ``a``, ``b``, ``c``.  Higher
    orders fall back to the orthogonal basis with labels ``x<n>_<family><k>``.
    """
    if order > 4:
        from .bases import orthogonal_basis

        B = orthogonal_basis(order)
        p = prefix or f"x{order}_"
        return TensorSpace(order, B.members, tuple(p + lab for lab in B.labels), B.exprs, B.meta, True)
    prefix = prefix or "dabc"[order - 1]
    items = _order_parameter_exprs(order)
    return TensorSpace(
        order=order,
        members=tuple(e.tensor() for e, *_ in items),
        labels=tuple(f"{prefix}{i + 1}" for i in range(len(items))),
        exprs=tuple(e for e, *_ in items),
        meta=tuple({"family": f, "k": k, "m": m} for _, f, k, m in items),
        orthogonal=True,
        name=f"coefficients-{order}",
    )


@dataclass(frozen=True)
class NamedTensor:
    name: str
    order: int
    prefix: str
    base_expr: MonomialExpr

    @property
    def base(self) -> SymTensor:
        return self.base_expr.tensor()

    @property
    def basis(self) -> TensorSpace:
        return coefficient_basis(self.order, self.prefix)


def _named():
    e1, e2, e3 = (MonomialExpr.axis(i) for i in (1, 2, 3))
    ii = MonomialExpr.identity()
    return {
        "Q1": NamedTensor("Q1", 1, "d", e1),
        "Q2": NamedTensor("Q2", 2, "a", monomial_traceless_expr(2, 0, 0)),
        "M2": NamedTensor("M2", 2, "a'", e2 * e2 - (ii - e1 * e1) * Fraction(1, 2)),
        "T3": NamedTensor("T3", 3, "b", e1 * e2 * e3 * 2),
        "Q4": NamedTensor("Q4", 4, "c", monomial_traceless_expr(4, 0, 0)),
    }


NAMED_TENSORS = _named()


def tensor_basis(name: str, order: int) -> TensorSpace:
    if name in NAMED_TENSORS:
        return NAMED_TENSORS[name].basis
    return coefficient_basis(order, f"{name}_" if order > 4 else None)


def decompose_in_frame(tensors: dict, frame) -> dict:
    """Named coefficients of each tensor in the frame ``q``: ``U = sum c_s rotate(q, B_s)``."""
    q = so3.check_rotation(frame)
    out = {}
    for name, U in tensors.items():
        V = rotate(q.T, U.to_float())
        B = tensor_basis(name, U.order)
        for X, lab in zip(B.members, B.labels):
            Xf = X.to_float()
            out[lab] = float(dot(Xf, V) / dot(Xf, Xf))
    return out


def compose_from_coefficients(coefficients: dict, selection, frame=None) -> dict:
    """Inverse of :func:`decompose_in_frame` for the named tensors in ``selection``."""
    q = np.eye(3) if frame is None else so3.check_rotation(frame)
    out = {}
    for name in selection:
        nt = NAMED_TENSORS[name]
        acc = SymTensor.zeros(nt.order)
        for X, lab in zip(nt.basis.members, nt.basis.labels):
            c = coefficients.get(lab, 0.0)
            if c:
                acc = acc + X.to_float() * float(c)
        out[name] = rotate(q, acc)
    return out


# frame search ---------------------------------------------------------------------


def _dense(U: SymTensor) -> np.ndarray:
    return U.to_float().to_dense()


def _apply(P: np.ndarray, V: np.ndarray, n: int) -> np.ndarray:
    """Apply ``P`` (batched or single) on the ``n`` tensor axes of batched ``V`` ``(S, 3, ..., 3)``."""
    out = V
    for ax in range(1, n + 1):
        moved = np.moveaxis(out, ax, 1)
        if P.ndim == 3:
            res = np.einsum("sij,sj...->si...", P, moved)
        else:
            res = np.tensordot(P, moved, axes=([1], [1]))
            res = np.moveaxis(res, 0, 1)
        out = np.moveaxis(res, 1, ax)
    return out


def _derivation(K: np.ndarray, V: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(V)
    for ax in range(1, n + 1):
        moved = np.moveaxis(V, ax, 1)
        res = np.moveaxis(np.tensordot(K, moved, axes=([1], [1])), 0, 1)
        out += np.moveaxis(res, 1, ax)
    return out


_GENERATORS = so3.skew(np.eye(3))


@lru_cache(maxsize=None)
def _generator_matrices(order: int) -> np.ndarray:
    """Infinitesimal rotations acting on weighted coordinates, shape ``(3, N, N)``."""
    N = (order + 1) * (order + 2) // 2
    out = np.zeros((3, N, N))
    eye = np.eye(N)
    for col in range(N):
        D = from_vector(order, eye[col]).to_dense()[None]
        for k, K in enumerate(_GENERATORS):
            out[k, :, col] = as_vector(SymTensor.from_dense(_derivation(K, D, order)[0]))
    return out


@lru_cache(maxsize=None)
def _invariant_basis(group_name: str, order: int) -> np.ndarray:
    """Orthonormal basis of the invariant space in weighted coordinates, shape ``(N, d)``."""
    space = invariant_space_analytic(build_group(group_name), order)
    N = (order + 1) * (order + 2) // 2
    if space.dim == 0:
        return np.zeros((N, 0))
    V = np.array([as_vector(X) for X in space.members])
    _, s, vt = np.linalg.svd(V, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * s.max()))
    return vt[:rank].T


def _weighted_batch(dense_batch: np.ndarray, order: int) -> np.ndarray:
    from .tensors import _dense_representatives, sqrt_weights

    flat = dense_batch.reshape(len(dense_batch), -1)
    return flat[:, _dense_representatives(order)] * sqrt_weights(order)


class _Problem:
    def __init__(self, tensors: list, group_name: str):
        self.orders = [U.order for U in tensors]
        self.dense = [_dense(U) for U in tensors]
        self.proj = []
        for n in self.orders:
            B = _invariant_basis(group_name, n)
            self.proj.append(np.eye(B.shape[0]) - B @ B.T)
        # projected generators: dr/dw_k = -P L_k v for the update q -> q exp(w)
        self.gens = [np.einsum("ab,kbc->kac", P, _generator_matrices(n)) for P, n in zip(self.proj, self.orders)]

    def residuals(self, Q: np.ndarray, jacobian: bool = False):
        S = len(Q)
        QT = np.transpose(Q, (0, 2, 1))
        rs, js = [], []
        for D, P, L, n in zip(self.dense, self.proj, self.gens, self.orders):
            if n == 0:
                v = np.broadcast_to(D.reshape(1, 1), (S, 1))
            else:
                v = _weighted_batch(_apply(QT, np.broadcast_to(D, (S,) + D.shape), n), n)
            rs.append(v @ P)
            if jacobian:
                # dV/dw_k = -L_k v for the frame update q -> q exp(w)
                js.append(-np.einsum("kab,sb->sak", L, v))
        r = np.concatenate(rs, axis=1)
        if not jacobian:
            return r
        return r, np.concatenate(js, axis=1)


def _starting_frames(tensors: list, n_random: int = 16) -> np.ndarray:
    bases = [np.eye(3)]
    for U in tensors:
        D = _dense(U)
        if U.order == 0 or not np.any(D):
            continue
        if U.order == 1:
            v = D / (np.linalg.norm(D) or 1.0)
            a = np.eye(3)[np.argmin(np.abs(v))]
            b = np.cross(v, a)
            b /= np.linalg.norm(b) or 1.0
            bases.append(np.stack([v, b, np.cross(v, b)], axis=1))
            continue
        M = D.reshape(3, -1)
        C = M @ M.T if U.order > 2 else D
        _, vecs = np.linalg.eigh(C)
        if np.linalg.det(vecs) < 0:
            vecs[:, 0] = -vecs[:, 0]
        bases.append(vecs)
    octa = build_group("O").elements
    diag = SUBGROUP_FRAMES["body_diagonal"]
    starts = [b @ o for b in bases for o in octa] + [b @ o @ diag for b in bases for o in octa]
    starts += list(so3.random_rotations(n_random, 20240917))
    return np.array(starts)


def _levenberg_marquardt(problem: _Problem, Q: np.ndarray, max_iter: int = 200, prune_every: int = 8):
    r, J = problem.residuals(Q, jacobian=True)
    cost = np.einsum("sk,sk->s", r, r)
    # damping floor: keeps the 3x3 systems regular when a start's Jacobian vanishes
    floor = 1e-20 * max(sum(float(np.sum(D * D)) for D in problem.dense), 1e-300)
    lam = np.full(len(Q), 1e-3)
    active = np.ones(len(Q), dtype=bool)
    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if not len(idx):
            break
        Ja, ra = J[idx], r[idx]
        A = np.einsum("ski,skj->sij", Ja, Ja)
        g = np.einsum("ski,sk->si", Ja, ra)
        scale = np.maximum(np.trace(A, axis1=1, axis2=2), floor)[:, None, None] / 3
        step = -np.linalg.solve(A + lam[idx, None, None] * scale * np.eye(3), g[..., None])[..., 0]
        Qn = Q[idx] @ so3.expmap(step)
        rn, Jn = problem.residuals(Qn, jacobian=True)
        cn = np.einsum("sk,sk->s", rn, rn)
        better = cn < cost[idx]
        gain = cost[idx] - cn
        b = idx[better]
        Q[b], r[b], J[b] = Qn[better], rn[better], Jn[better]
        converged = (better & (gain <= 1e-14 * cost[idx])) | (np.linalg.norm(step, axis=1) < 1e-13)
        cost[b] = cn[better]
        lam[idx] = np.where(better, np.maximum(lam[idx] / 3, 1e-12), lam[idx] * 4)
        converged |= (lam[idx] > 1e12) | (cost[idx] < 1e-30)
        active[idx[converged]] = False
        if it % prune_every == 0:
            # starts stuck well above the current best will not overtake it
            best = cost.min()
            active &= cost <= 1.5 * best + 1e-12 * (cost.max() + 1e-300)
    return Q, cost


@dataclass
class Alignment:
    group: str
    residual: float
    frame: np.ndarray


def frame_align(tensors, group, extra_starts=None, n_random: int = 16) -> Alignment:
    """Best frame and squared distance of ``tensors`` to the symmetry ``group``."""
    G = build_group(group) if isinstance(group, str) else group
    tlist = list(tensors.values()) if isinstance(tensors, dict) else list(tensors)
    total = float(sum(float(dot(U.to_float(), U.to_float())) for U in tlist))
    if G.kind == "SO3":
        return Alignment(G.name, total, np.eye(3))
    problem = _Problem(tlist, G.name)
    starts = _starting_frames(tlist, n_random)
    if extra_starts is not None and len(extra_starts):
        starts = np.concatenate([np.asarray(extra_starts, dtype=float).reshape(-1, 3, 3), starts])
    r0 = problem.residuals(starts)
    c0 = np.einsum("sk,sk->s", r0, r0)
    Q, cost = _levenberg_marquardt(problem, starts)
    best = int(np.argmin(cost))
    if c0.min() < cost[best]:
        best0 = int(np.argmin(c0))
        return Alignment(G.name, float(c0[best0]), starts[best0])
    return Alignment(G.name, float(cost[best]), Q[best])


def distance_profile(tensors, groups) -> dict:
    """Distances to each group, monotone along subgroup inclusion.

    Groups are processed from the most symmetric down and each best frame of
    a supergroup seeds the search for its subgroups, so the reported
    distance of a subgroup never exceeds that of a supergroup.
    """
    order = sorted((build_group(g) if isinstance(g, str) else g for g in groups), key=rank_key, reverse=True)
    out: dict = {}
    for H in order:
        seeds = []
        for Gname, al in out.items():
            fname = subgroup_frame(H, build_group(Gname))
            if fname is not None:
                seeds.append(al.frame @ SUBGROUP_FRAMES[fname])
        out[H.name] = frame_align(tensors, H, extra_starts=np.array(seeds) if seeds else None)
    return out


# canonical frames -------------------------------------------------------------------


def _partner(basis: TensorSpace, label: str) -> tuple:
    i = basis.labels.index(label)
    meta = basis.meta[i]
    if meta["m"] == 0:
        raise ValueError(f"coefficient {label} is unchanged by rotations about the first axis")
    for j, other in enumerate(basis.meta):
        if j != i and other["m"] == meta["m"] and other["k"] == meta["k"]:
            return i, j, meta["m"], meta["family"]
    raise ValueError(f"no partner for {label}")


def canonicalize_axial_frame(tensors: dict, frame, zero: str = "a3") -> tuple:
    """Rotate the frame about its first axis so that coefficient ``zero`` vanishes.

    The coefficient pair sharing the Fourier index ``m`` rotates by ``m * theta``;
    the partner of ``zero`` ends up non-negative.  Returns ``(frame, coefficients)``.
    """
    q = so3.check_rotation(frame)
    coeffs = decompose_in_frame(tensors, q)
    basis = None
    for name, U in tensors.items():
        B = tensor_basis(name, U.order)
        if zero in B.labels:
            basis = B
    if basis is None:
        raise KeyError(f"unknown coefficient {zero!r}")
    i, j, m, fam = _partner(basis, zero)
    lab_t, lab_u = (basis.labels[j], zero) if fam == "U" else (zero, basis.labels[j])
    ct, cu = coeffs[lab_t], coeffs[lab_u]
    phi = np.arctan2(cu, ct) if fam == "U" else np.arctan2(-ct, cu)
    theta = phi / m
    qn = q @ so3.axis_rotation(theta)
    return qn, decompose_in_frame(tensors, qn)


# detection ---------------------------------------------------------------------------


def _selection_key(tensors: dict) -> tuple:
    return tuple((name, U.order) for name, U in tensors.items())


@dataclass
class SymmetryReport:
    detected: str
    frame: np.ndarray
    coefficients: dict
    distances: dict
    tol: float
    threshold: float
    scale: float
    candidates: tuple = ()
    graph: "BreakingGraph | None" = None

    def to_json(self) -> dict:
        out = {
            "detected": self.detected,
            "frame": [float(x) for x in np.asarray(self.frame).ravel()],
            "coefficients": {k: float(v) for k, v in self.coefficients.items()},
            "distances": {k: float(v) for k, v in self.distances.items()},
            "tol": float(self.tol),
            "threshold": float(self.threshold),
        }
        if self.graph is not None:
            out["graph"] = self.graph.to_json()
        return out


def detect_symmetry(
    tensors: dict,
    tol: float = 1e-8,
    threshold: float | None = None,
    candidates=None,
    with_graph: bool = False,
    molecular_group: str | None = None,
) -> SymmetryReport:
    """Largest candidate group whose distance is within tolerance.

    The default threshold is relative, ``tol * sum_j |U_j|^2``.  Pass an
    absolute ``threshold`` for noisy estimates.  Returns ``"none"`` when no
    candidate passes.  ``molecular_group`` checks that named base tensors
    respect the molecular symmetry before the graph is built.
    """
    if not tensors:
        raise ValueError("no tensors given")
    tensors = {k: v.to_float() for k, v in tensors.items()}
    scale = float(sum(float(dot(U, U)) for U in tensors.values()))
    thr = tol * scale if threshold is None else float(threshold)
    graph = None
    if candidates is None:
        graph = breaking_graph(_selection_key(tensors), molecular_group)
        candidates = (ISOTROPIC,) + graph.nodes
    profile = distance_profile(tensors, candidates)
    ranked = sorted(profile, key=lambda g: rank_key(build_group(g)), reverse=True)
    detected = NONE
    for g in ranked:
        if profile[g].residual <= thr:
            detected = g
            break
    frame = profile[detected].frame if detected != NONE else profile[ranked[-1]].frame
    coefficients = decompose_in_frame(tensors, frame)
    return SymmetryReport(
        detected=detected,
        frame=frame,
        coefficients=coefficients,
        distances={g: profile[g].residual for g in ranked},
        tol=tol,
        threshold=thr,
        scale=scale,
        candidates=tuple(ranked),
        graph=graph if with_graph else None,
    )


# breaking graph ----------------------------------------------------------------------


@dataclass
class BreakingGraph:
    nodes: tuple
    edges: list
    admits_no_symmetry: bool
    allowed: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "nodes": [ISOTROPIC] + list(self.nodes),
            "edges": [
                {
                    "from": e["from"],
                    "to": e["to"],
                    "freed_coefficients": list(e["freed_coefficients"]),
                    "released_constraints": list(e["released_constraints"]),
                }
                for e in self.edges
            ],
            "admits_no_symmetry": self.admits_no_symmetry,
        }


def _normalize_selection(selection) -> tuple:
    out = []
    for item in selection:
        if isinstance(item, str):
            out.append((item, NAMED_TENSORS[item].order))
        elif isinstance(item, int):
            out.append((f"U{len(out)}", item))
        else:
            out.append((str(item[0]), int(item[1])))
    return tuple(out)


def _space_dims(G: PointGroup, orders) -> tuple:
    return tuple(invariant_space_analytic(G, n).dim for n in orders)


def _random_member(G: PointGroup, selection, rng) -> dict:
    out = {}
    for name, n in selection:
        B = _invariant_basis(G.name, n)
        c = rng.standard_normal(B.shape[1])
        out[name] = from_vector(n, B @ c if B.shape[1] else np.zeros(B.shape[0]))
    return out


def _contained(H: PointGroup, G: PointGroup, selection, samples: int = 2) -> bool:
    """Whether every tensor tuple with symmetry ``H`` also has symmetry ``G``."""
    orders = [n for _, n in selection]
    dh, dg = _space_dims(H, orders), _space_dims(G, orders)
    if any(b == 0 and a > 0 for a, b in zip(dh, dg)):
        return False
    if dh == dg and subgroup_frame(H, G) is not None:
        return True
    rng = np.random.default_rng(7)
    for _ in range(samples):
        W = _random_member(H, selection, rng)
        scale = sum(float(dot(U, U)) for U in W.values())
        if scale == 0:
            continue
        if frame_align(W, G).residual > 1e-10 * scale:
            return False
    return True


def _allowed(G: PointGroup, selection, frame: str = "identity") -> tuple:
    """Allowed coefficient labels and linear constraints of ``A[G]`` seen in ``frame``."""
    g = SUBGROUP_FRAMES[frame]
    labels, constraints = [], []
    for name, n in selection:
        basis = tensor_basis(name, n)
        space = invariant_space_analytic(G, n)
        if space.dim == 0:
            continue
        coords = []
        for X in space.members:
            V = rotate(g.T, X.to_float())
            coords.append([float(dot(B.to_float(), V) / dot(B.to_float(), B.to_float())) for B in basis.members])
        C = np.array(coords)
        mask = np.abs(C).max(axis=0) > 1e-9
        labs = [lab for lab, keep in zip(basis.labels, mask) if keep]
        labels += labs
        Ca = C[:, mask]
        _, s, vt = np.linalg.svd(Ca)
        s = np.concatenate([s, np.zeros(Ca.shape[1] - len(s))])
        for w in vt[s <= 1e-9 * max(1.0, s.max())]:
            constraints.append(_format_constraint(w, labs))
    return tuple(labels), tuple(constraints)


def _format_constraint(w: np.ndarray, labels) -> str:
    nz = [(c, lab) for c, lab in zip(w, labels) if abs(c) > 1e-9]
    if len(nz) == 2:
        (a, la), (b, lb) = nz
        r = -b / a
        frac = Fraction(r).limit_denominator(1000)
        rs = str(frac) if abs(float(frac) - r) < 1e-9 else f"{r:.12g}"
        return f"{la} = {rs}*{lb}"
    terms = " + ".join(f"{c:.12g}*{lab}" for c, lab in nz)
    return f"{terms} = 0"


@lru_cache(maxsize=None)
def breaking_graph(selection, molecular_group: str | None = None) -> BreakingGraph:
    """Distinguishable mesoscopic groups for a tensor selection and their breaking edges.

    A candidate group is hidden when every tensor tuple it allows is also
    allowed, possibly in another frame, by a more symmetric candidate.  Edges
    join each node to its maximal visible subgroups.
    """
    selection = _normalize_selection(selection)
    if molecular_group is not None:
        M = build_group(molecular_group)
        if M.elements is not None:
            checks = list(M.elements)
        else:
            checks = [so3.axis_rotation(0.7), so3.axis_rotation(2.1)]
            if M.kind == "Dinf":
                checks.append(so3.half_turn_b())
            if M.kind == "SO3":
                checks.append(so3.cyclic_r())
        for name, n in selection:
            if name in NAMED_TENSORS:
                base = NAMED_TENSORS[name].base.to_float()
                if not all(rotate(s, base).allclose(base, atol=1e-10) for s in checks):
                    raise ValueError(f"{name} is not invariant under the molecular group {molecular_group}")
    groups = sorted((build_group(g) for g in TABLE_GROUPS), key=rank_key, reverse=True)
    iso = build_group(ISOTROPIC)
    visible: list = []
    for H in groups:
        above = [iso] + [G for G in groups if rank_key(G) > rank_key(H)]
        if any(_contained(H, G, selection) for G in above):
            continue
        visible.append(H)
    trivial = build_group("C1")
    admits_none = not any(_contained(trivial, G, selection) for G in [iso] + visible)

    allowed = {G.name: _allowed(G, selection) for G in visible}
    edges = []
    for G in [iso] + visible:
        for H in visible:
            if H is G or rank_key(H) >= rank_key(G):
                continue
            fname = subgroup_frame(H, G)
            if fname is None:
                continue
            between = [
                K for K in visible
                if K is not G and K is not H
                and rank_key(H) < rank_key(K) < rank_key(G)
                and subgroup_frame(H, K) is not None
                and subgroup_frame(K, G) is not None
            ]
            if between:
                continue
            child_labels, _ = allowed[H.name]
            if G.kind == "SO3":
                parent_labels, parent_cons = (), ()
            else:
                parent_labels, parent_cons = _allowed(G, selection, fname)
            freed = [lab for lab in child_labels if lab not in parent_labels]
            released = [c for c in parent_cons if not _satisfies(H, selection, c, fname)]
            edges.append(
                {"from": G.name, "to": H.name, "frame": fname,
                 "freed_coefficients": freed, "released_constraints": released}
            )
    return BreakingGraph(tuple(G.name for G in visible), edges, admits_none, allowed)


def _satisfies(H: PointGroup, selection, constraint: str, frame: str) -> bool:
    # a constraint of the parent survives when the child's own constraints include it
    _, child_cons = _allowed(H, selection)
    return constraint in child_cons
