"""Rotations, Euler angles, quaternions and Haar quadrature on SO(3).

A rotation is a 3x3 orthogonal matrix with determinant +1.  Its columns are
the body axes ``m1, m2, m3`` written in the lab frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

ROTATION_TOL = 1e-10
QUATERNION_TOL = 1e-12
GIMBAL_TOL = 1e-9

TWO_PI = 2.0 * np.pi
GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


class RotationError(ValueError):
    """Raised when a matrix is not a proper rotation."""


class EulerRangeError(ValueError):
    """Raised when Euler angles fall outside their chart."""


class EulerAngles(NamedTuple):
    alpha: float
    beta: float
    gamma: float
    degenerate: bool = False


def check_rotation(p, tol: float = ROTATION_TOL) -> np.ndarray:
    """Return ``p`` as a float array, raising if it is not a proper rotation."""
    p = np.asarray(p, dtype=float)
    if p.shape == (9,):
        p = p.reshape(3, 3)
    if p.shape != (3, 3):
        raise RotationError(f"expected a 3x3 matrix, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise RotationError("rotation contains non-finite entries")
    err = np.max(np.abs(p.T @ p - np.eye(3)))
    if err > tol:
        raise RotationError(f"matrix is not orthogonal (max |p^T p - I| = {err:.3g})")
    det = np.linalg.det(p)
    if abs(det - 1.0) > tol:
        raise RotationError(f"matrix is not a proper rotation (det = {det:.6g})")
    return p


def is_rotation(p, tol: float = ROTATION_TOL) -> bool:
    try:
        check_rotation(p, tol)
    except RotationError:
        return False
    return True


def compose(p1, p2) -> np.ndarray:
    return np.asarray(p1, dtype=float) @ np.asarray(p2, dtype=float)


def inverse(p) -> np.ndarray:
    return np.asarray(p, dtype=float).T


def rotation_from_euler(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Rotation for Euler angles with alpha in [0, pi] and beta, gamma in [0, 2pi)."""
    if not (0.0 <= alpha <= np.pi):
        raise EulerRangeError(f"alpha={alpha} outside [0, pi]")
    for name, v in (("beta", beta), ("gamma", gamma)):
        if not (0.0 <= v < TWO_PI):
            raise EulerRangeError(f"{name}={v} outside [0, 2pi)")
    return _euler_matrix(np.array([alpha]), np.array([beta]), np.array([gamma]))[0]


def _euler_matrix(alpha, beta, gamma) -> np.ndarray:
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    p = np.empty(np.shape(alpha) + (3, 3))
    p[..., 0, 0] = ca
    p[..., 0, 1] = -sa * cg
    p[..., 0, 2] = sa * sg
    p[..., 1, 0] = sa * cb
    p[..., 1, 1] = ca * cb * cg - sb * sg
    p[..., 1, 2] = -ca * cb * sg - sb * cg
    p[..., 2, 0] = sa * sb
    p[..., 2, 1] = ca * sb * cg + cb * sg
    p[..., 2, 2] = -ca * sb * sg + cb * cg
    return p


def euler_from_rotation(p) -> EulerAngles:
    """Invert :func:`rotation_from_euler`.

    When ``sin(alpha)`` is below the gimbal tolerance only ``beta + gamma``
    (alpha = 0) or ``beta - gamma`` (alpha = pi) is determined.  In that case
    the combination is returned in ``beta``, ``gamma`` is 0 and
    ``degenerate`` is True.
    """
    p = check_rotation(p)
    alpha = float(np.arccos(np.clip(p[0, 0], -1.0, 1.0)))
    sin_alpha = np.hypot(p[1, 0], p[2, 0])
    if sin_alpha < GIMBAL_TOL:
        combo = np.arctan2(p[2, 1], p[1, 1])
        if p[0, 0] < 0:
            combo = np.arctan2(-p[2, 1], -p[1, 1])
        return EulerAngles(alpha, float(combo % TWO_PI), 0.0, True)
    beta = np.arctan2(p[2, 0], p[1, 0]) % TWO_PI
    gamma = np.arctan2(p[0, 2], -p[0, 1]) % TWO_PI
    return EulerAngles(alpha, float(beta), float(gamma), False)


def rotation_from_quaternion(q, tol: float = QUATERNION_TOL) -> np.ndarray:
    """Rotation for a unit quaternion ``(a, b, c, d)`` with ``a`` the scalar part."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise RotationError(f"quaternion must have 4 entries, got shape {q.shape}")
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > tol:
        raise RotationError(f"quaternion is not unit (norm = {norm!r})")
    return quaternion_matrix(q[None, :])[0]


def quaternion_matrix(q: np.ndarray) -> np.ndarray:
    """Batched quaternion to matrix map, no normalisation checks."""
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    p = np.empty(q.shape[:-1] + (3, 3))
    p[..., 0, 0] = a * a + b * b - c * c - d * d
    p[..., 0, 1] = 2 * (b * c - a * d)
    p[..., 0, 2] = 2 * (a * c + b * d)
    p[..., 1, 0] = 2 * (a * d + b * c)
    p[..., 1, 1] = a * a - b * b + c * c - d * d
    p[..., 1, 2] = 2 * (c * d - a * b)
    p[..., 2, 0] = 2 * (b * d - a * c)
    p[..., 2, 1] = 2 * (a * b + c * d)
    p[..., 2, 2] = a * a - b * b - c * c + d * d
    return p


def quaternion_from_rotation(p) -> np.ndarray:
    """Unit quaternion ``(a, b, c, d)`` with ``a >= 0`` for a rotation."""
    p = check_rotation(p)
    x, y, z, w = _ScipyRotation.from_matrix(p).as_quat()
    q = np.array([w, x, y, z])
    return -q if q[0] < 0 else q


def axis_rotation(theta: float) -> np.ndarray:
    """Rotation by ``theta`` about the first axis."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def half_turn_b() -> np.ndarray:
    """Half turn about the second axis."""
    return np.diag([-1.0, 1.0, -1.0])


def cyclic_r() -> np.ndarray:
    """Three-fold rotation sending the frame (m1, m2, m3) to (m2, m3, m1)."""
    return np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def icosa_v() -> np.ndarray:
    """Five-fold rotation that extends the tetrahedral group to the icosahedral one."""
    f = GOLDEN
    return 0.5 * np.array([[f, -1.0, f - 1.0], [1.0, f - 1.0, -f], [f - 1.0, f, 1.0]])


def body_diagonal_frame() -> np.ndarray:
    """Frame whose first axis is the cube body diagonal (1, 1, 1)/sqrt(3)."""
    s2, s3, s6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)
    return np.array(
        [
            [1 / s3, 1 / s2, 1 / s6],
            [1 / s3, -1 / s2, 1 / s6],
            [1 / s3, 0.0, -2 / s6],
        ]
    )


def skew(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def expmap(w) -> np.ndarray:
    """Rodrigues formula, batched over leading axes."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)[..., None, None]
    k = skew(w)
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + a * k + b * (k @ k)


def random_rotations(n: int, rng=None) -> np.ndarray:
    """Haar-distributed rotations, shape ``(n, 3, 3)``."""
    rng = np.random.default_rng(rng)
    return _ScipyRotation.random(n, random_state=rng).as_matrix()


@dataclass(frozen=True)
class QuadratureGrid:
    """Product rule for the normalised Haar measure.

    Gauss-Legendre in ``cos(alpha)`` and equispaced trapezoid nodes in
    ``beta`` and ``gamma``.  Integrates every polynomial in the matrix
    entries of total degree ``<= 2 * max_order`` exactly.
    """

    rotations: np.ndarray
    weights: np.ndarray
    angles: np.ndarray
    max_order: int
    n_alpha: int
    n_angle: int

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self):
        return iter(zip(self.rotations, self.weights))

    @property
    def spec(self) -> dict:
        return {"max_order": self.max_order, "n_alpha": self.n_alpha, "n_angle": self.n_angle}


def haar_grid(max_order: int) -> QuadratureGrid:
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    n_alpha = max_order + 1
    n_angle = 2 * max_order + 1
    x, w = np.polynomial.legendre.leggauss(n_alpha)
    alpha = np.arccos(x)
    phi = TWO_PI * np.arange(n_angle) / n_angle
    A, B, G = np.meshgrid(alpha, phi, phi, indexing="ij")
    W = np.broadcast_to(w[:, None, None], A.shape) / (2.0 * n_angle**2)
    rot = _euler_matrix(A.ravel(), B.ravel(), G.ravel())
    angles = np.stack([A.ravel(), B.ravel(), G.ravel()], axis=1)
    return QuadratureGrid(rot, W.ravel().copy(), angles, max_order, n_alpha, n_angle)


def integrate(f: Callable[[np.ndarray], np.ndarray], grid: QuadratureGrid):
    """Integrate a batched function of rotations against the Haar measure.

    ``f`` receives an array of shape ``(K, 3, 3)`` and returns an array whose
    leading axis has length ``K``.
    """
    vals = np.asarray(f(grid.rotations))
    return np.tensordot(grid.weights, vals, axes=(0, 0))
