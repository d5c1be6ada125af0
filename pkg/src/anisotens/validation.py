"""Input validation shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from . import so3

ROTATION_TOL = 1e-6


def check_rotations(X, tol: float = ROTATION_TOL) -> np.ndarray:
    """Coerce orientations to an ``(N, 3, 3)`` array of rotation matrices.

    Accepts ``(N, 3, 3)`` matrices, ``(N, 9)`` flattened matrices or ``(N, 4)``
    unit quaternions with the scalar part first.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 3 and X.shape[1:] == (3, 3):
        R = check_array(X.reshape(len(X), 9)).reshape(-1, 3, 3)
    else:
        X = check_array(X)
        if X.shape[1] == 9:
            R = X.reshape(-1, 3, 3)
        elif X.shape[1] == 4:
            norms = np.linalg.norm(X, axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
            if bad.size:
                raise ValueError(f"row {bad[0]}: quaternion is not unit (norm = {norms[bad[0]]!r})")
            return so3.quaternion_matrix(X / norms[:, None])
        else:
            raise ValueError(f"expected (N, 3, 3), (N, 9) or (N, 4) orientations, got shape {X.shape}")
    err = np.abs(np.einsum("bji,bjk->bik", R, R) - np.eye(3)).max(axis=(1, 2))
    det = np.linalg.det(R)
    bad = np.flatnonzero((err > tol) | (np.abs(det - 1.0) > tol))
    if bad.size:
        raise ValueError(f"row {bad[0]}: not a proper rotation")
    return R


def check_sample_weight(sample_weight, n: int) -> np.ndarray:
    """Non-negative weights normalised to sum to one; uniform when ``None``."""
    if sample_weight is None:
        return np.full(n, 1.0 / n)
    w = check_array(np.asarray(sample_weight, dtype=float), ensure_2d=False)
    if w.shape != (n,):
        raise ValueError(f"sample_weight has shape {w.shape}, expected ({n},)")
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("sample_weight must be non-negative with a positive sum")
    return w / w.sum()


def check_selection(selection) -> tuple:
    from .classifier import NAMED_TENSORS

    if isinstance(selection, str):
        selection = tuple(s.strip() for s in selection.split(",") if s.strip())
    selection = tuple(selection)
    if not selection:
        raise ValueError("empty tensor selection")
    for name in selection:
        if name not in NAMED_TENSORS:
            raise ValueError(f"unknown tensor {name!r}; choose from {sorted(NAMED_TENSORS)}")
    return selection
