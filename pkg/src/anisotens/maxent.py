"""Maximum-entropy orientation densities from tensor moments.

Given tensors ``U_j`` and targets ``W_j`` the density is

    rho(p) = exp(sum_js b_js U_j(p) . X_s) / Z

where ``X_s`` runs over the normalised orthogonal basis of the order of
``U_j`` and ``U_j(p) = rotate(p, U_j)``.  The multipliers minimise the convex
dual

    J(b) = ln int exp(sum_js b_js (U_j(p) - W_j) . X_s) dp

whose gradient is the mismatch between the moments of ``rho`` and the
targets.  Integrals use the product rule of :func:`anisotens.so3.haar_grid`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import so3
from .bases import orthogonal_basis
from .groups import PointGroup
from .tensors import SymTensor, is_traceless, multinomials, rotate, rotate_batch

log = logging.getLogger(__name__)

B_MAX = 1e3


class InfeasibleTargetsError(ValueError):
    """The targets cannot be matched by a density (multipliers diverge)."""


class NotConvergedError(RuntimeError):
    """The solver stopped early; ``solution`` holds the last iterate and its residuals."""

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class MomentTarget:
    """Constraint ``int rotate(p, base) rho(p) dp = target``."""

    base: SymTensor
    target: SymTensor
    name: str = ""

    @property
    def order(self) -> int:
        return self.base.order


def check_targets(targets) -> list:
    targets = list(targets)
    if not targets:
        raise ValueError("at least one moment target is required")
    for t in targets:
        if t.base.order != t.target.order:
            raise ValueError(f"target {t.name!r}: base and target orders differ")
        if t.order < 1:
            raise ValueError(f"target {t.name!r}: order must be at least 1")
        if not is_traceless(t.base, 1e-10) or not is_traceless(t.target, 1e-10):
            raise ValueError(f"target {t.name!r}: tensors must be traceless")
        if t.base.norm() == 0:
            raise ValueError(f"target {t.name!r}: base tensor is zero")
    return targets


def _basis_rows(order: int) -> np.ndarray:
    """Normalised orthogonal basis as rows, pre-multiplied by multiplicities."""
    B = orthogonal_basis(order)
    rows = []
    for X in B.members:
        Xf = X.to_float()
        rows.append(Xf.comps / Xf.norm())
    return np.array(rows) * multinomials(order)


def _features(targets, rotations: np.ndarray):
    """``F0[i, (j, s)] = U_j(p_i) . X_s`` and the shift ``c[(j, s)] = W_j . X_s``."""
    cols, shift = [], []
    for t in targets:
        rows = _basis_rows(t.order)
        cols.append(rotate_batch(rotations, t.base) @ rows.T)
        shift.append(rows @ t.target.to_float().comps)
    return np.hstack(cols), np.concatenate(shift)


def _blocks(targets) -> list:
    out, start = [], 0
    for t in targets:
        d = 2 * t.order + 1
        out.append(slice(start, start + d))
        start += d
    return out


def _dual(F: np.ndarray, w: np.ndarray, b: np.ndarray, hessian: bool = True):
    s = F @ b
    mx = s.max()
    e = w * np.exp(s - mx)
    Z = e.sum()
    J = mx + np.log(Z)
    pi = e / Z
    g = pi @ F
    H = (F * pi[:, None]).T @ F - np.outer(g, g) if hessian else None
    return J, g, H


def objective_and_gradient(targets, b, grid: so3.QuadratureGrid):
    """Dual objective ``J(b)`` and its gradient on a quadrature grid."""
    targets = check_targets(targets)
    F0, c = _features(targets, grid.rotations)
    J, g, _ = _dual(F0 - c, grid.weights, np.asarray(b, dtype=float), hessian=False)
    return J, g


@dataclass
class MaxEntSolution:
    targets: list
    b: np.ndarray
    logZ: float
    grid: so3.QuadratureGrid
    gradient_norm: float
    residuals: list
    iterations: int
    history: list = field(default_factory=list)

    @property
    def blocks(self) -> list:
        return _blocks(self.targets)

    def multipliers(self) -> list:
        return [self.b[s] for s in self.blocks]

    def exponent(self, rotations: np.ndarray) -> np.ndarray:
        F0, _ = _features(self.targets, rotations)
        return F0 @ self.b

    def log_density(self, p) -> np.ndarray | float:
        p = np.asarray(p, dtype=float)
        single = p.ndim == 2
        P = p[None] if single else p
        out = self.exponent(P) - self.logZ
        return float(out[0]) if single else out

    def density(self, p):
        return np.exp(self.log_density(p))

    def moments(self) -> list:
        """Moments of the density on its grid, one tensor per target."""
        w = self.grid.weights * np.exp(self.exponent(self.grid.rotations) - self.logZ)
        return [SymTensor(t.order, w @ rotate_batch(self.grid.rotations, t.base)) for t in self.targets]


def _newton(F, w, b0, tol, max_iter, b_max):
    b = b0.copy()
    J, g, H = _dual(F, w, b)
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g) < tol:
            return b, J, g, it - 1
        try:
            d = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            d = -np.linalg.lstsq(H, g, rcond=None)[0]
        if g @ d >= 0:
            d = -g
        t = 1.0
        while True:
            bn = b + t * d
            Jn, gn, Hn = _dual(F, w, bn)
            if Jn <= J + 1e-4 * t * (g @ d) + 1e-14 * max(1.0, abs(J)):
                break
            t *= 0.5
            if t < 1e-12:
                break
        b, J, g, H = bn, Jn, gn, Hn
        if np.linalg.norm(b) > b_max:
            raise InfeasibleTargetsError(
                f"multipliers exceed {b_max:g} (|b| = {np.linalg.norm(b):.3g}); targets look infeasible"
            )
    return b, J, g, max_iter


def solve_maxent(
    targets,
    tol: float = 1e-9,
    grid_order: int | None = None,
    refine: bool = True,
    logz_tol: float = 1e-10,
    max_grid_order: int = 64,
    grid_step: int = 6,
    b_max: float = B_MAX,
    max_iter: int = 200,
    moment_tol: float = 1e-8,
) -> MaxEntSolution:
    """Fit the multipliers by damped Newton steps on the dual.

    The starting grid integrates polynomials of degree ``max(3 n, 2 n + 4)``
    in the matrix entries, ``n`` the highest target order, and is refined
    until ``logZ`` changes by less than ``logz_tol`` between successive grids.
    Raises :class:`NotConvergedError` (carrying the last iterate) when the
    gradient or a moment residual stays above its tolerance.
    """
    targets = check_targets(targets)
    nmax = max(t.order for t in targets)
    m = grid_order if grid_order is not None else max(3 * nmax, 2 * nmax + 4)
    D = sum(2 * t.order + 1 for t in targets)
    b = np.zeros(D)
    history = []
    while True:
        grid = so3.haar_grid(m)
        F0, c = _features(targets, grid.rotations)
        b, J, g, iters = _newton(F0 - c, grid.weights, b, tol, max_iter, b_max)
        logZ = J + b @ c
        history.append({"grid_order": m, "logZ": float(logZ), "iterations": iters})
        log.debug("grid order %d: logZ=%.17g |g|=%.3g", m, logZ, np.linalg.norm(g))
        if not refine or len(history) >= 2 and abs(history[-1]["logZ"] - history[-2]["logZ"]) < logz_tol:
            break
        if m + grid_step > max_grid_order:
            log.warning("grid refinement stopped at order %d before logZ settled", m)
            break
        m += grid_step
    sol = MaxEntSolution(
        targets=targets,
        b=b,
        logZ=float(logZ),
        grid=grid,
        gradient_norm=float(np.linalg.norm(g)),
        residuals=[],
        iterations=sum(h["iterations"] for h in history),
        history=history,
    )
    sol.residuals = [float((M - t.target.to_float()).norm()) for M, t in zip(sol.moments(), targets)]
    if sol.gradient_norm >= tol or max(sol.residuals) > moment_tol:
        raise NotConvergedError(
            f"gradient norm {sol.gradient_norm:.3g}, largest moment residual {max(sol.residuals):.3g} "
            f"after {sol.iterations} iterations",
            sol,
        )
    return sol


def density_eval(solution: MaxEntSolution, p):
    return solution.density(p)


def moments_of_density(log_density, bases, grid: so3.QuadratureGrid) -> list:
    """Moments ``int rotate(p, U) rho(p) dp`` for an arbitrary batched log-density."""
    w = grid.weights * np.exp(log_density(grid.rotations))
    return [SymTensor(U.order, w @ rotate_batch(grid.rotations, U)) for U in bases]


def _group_samples(H: PointGroup, n_angles: int) -> np.ndarray:
    if H.kind == "SO3":
        return so3.random_rotations(n_angles, 0)
    if H.continuous:
        thetas = 2 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
        out = [so3.axis_rotation(t) for t in thetas]
        if H.kind == "Dinf":
            out += [so3.axis_rotation(t) @ so3.half_turn_b() for t in thetas]
        return np.array(out)
    return H.elements


def verify_mesoscopic_symmetry(
    solution: MaxEntSolution, H: PointGroup, frame=None, points=None, n_angles: int = 8
) -> float:
    """Largest relative change of the density under ``p -> q t q^T p`` for ``t`` in ``H``."""
    q = np.eye(3) if frame is None else so3.check_rotation(frame)
    if points is None:
        points = so3.random_rotations(64, 12345)
    points = np.asarray(points, dtype=float)
    base = solution.density(points)
    scale = base.max()
    worst = 0.0
    for t in _group_samples(H, n_angles):
        moved = np.einsum("ij,bjk->bik", q @ t @ q.T, points)
        worst = max(worst, float(np.abs(solution.density(moved) - base).max() / scale))
    return worst


def rotate_targets(targets, s) -> list:
    return [MomentTarget(t.base, rotate(s, t.target.to_float()), t.name) for t in targets]


def sample_density(solution: MaxEntSolution, n: int, rng=None, safety: float = 1.1, batch: int = 20000):
    """Draw rotations by rejection from the uniform Haar proposal."""
    rng = np.random.default_rng(rng)
    bound = safety * solution.density(solution.grid.rotations).max()
    out = []
    have = 0
    while have < n:
        P = so3.random_rotations(batch, rng)
        dens = solution.density(P)
        if dens.max() > bound:
            bound = safety * dens.max()
            log.warning("density exceeded the rejection bound; restarting with %.6g", bound)
            out, have = [], 0
            continue
        keep = rng.random(batch) * bound < dens
        out.append(P[keep])
        have += int(keep.sum())
    return np.concatenate(out)[:n]
