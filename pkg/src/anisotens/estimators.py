"""scikit-learn style wrappers around moment estimation, max-entropy fitting and classification.

Each estimator takes orientations as ``X`` (see
:func:`anisotens.validation.check_rotations`).  The classifier works on a
whole orientation set at once, so it has ``fit`` and fitted attributes but
no per-sample ``predict``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import cli_io
from .classifier import NAMED_TENSORS, detect_symmetry
from .maxent import MomentTarget, sample_density, solve_maxent
from .tensors import rotate_batch
from .validation import check_rotations, check_sample_weight, check_selection


def _sample(X, sample_weight) -> cli_io.OrientationSample:
    R = check_rotations(X)
    return cli_io.OrientationSample(R, check_sample_weight(sample_weight, len(R)))


class OrientationMoments(TransformerMixin, BaseEstimator):
    """Per-orientation tensor features and their weighted means.

    ``transform`` maps each orientation to the concatenated components of
    the rotated base tensors in ``selection``.
    """

    def __init__(self, selection=("Q2",)):
        self.selection = selection

    def fit(self, X, y=None, sample_weight=None):
        sel = check_selection(self.selection)
        est = cli_io.estimate_moments(_sample(X, sample_weight), sel)
        self.selection_ = sel
        self.moments_ = est.means
        self.stderr_ = est.stderr
        self.noise_scale_ = est.noise_scale
        self.n_eff_ = est.n_eff
        return self

    def transform(self, X):
        check_is_fitted(self, "moments_")
        R = check_rotations(X)
        return np.hstack([rotate_batch(R, NAMED_TENSORS[name].base.to_float()) for name in self.selection_])


class MaxEntDensity(DensityMixin, BaseEstimator):
    """Maximum-entropy orientation density matching the sample moments of ``selection``."""

    def __init__(self, selection=("Q2",), tol=1e-9):
        self.selection = selection
        self.tol = tol

    def fit(self, X, y=None, sample_weight=None):
        sel = check_selection(self.selection)
        est = cli_io.estimate_moments(_sample(X, sample_weight), sel)
        targets = [MomentTarget(NAMED_TENSORS[n].base.to_float(), est.means[n], n) for n in sel]
        return self._fit_targets(targets)

    def fit_targets(self, targets):
        """Fit directly from :class:`anisotens.maxent.MomentTarget` values."""
        return self._fit_targets(list(targets))

    def _fit_targets(self, targets):
        self.solution_ = solve_maxent(targets, tol=self.tol)
        self.multipliers_ = self.solution_.multipliers()
        self.log_partition_ = self.solution_.logZ
        return self

    def score_samples(self, X):
        check_is_fitted(self, "solution_")
        return np.atleast_1d(self.solution_.log_density(check_rotations(X)))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "solution_")
        return sample_density(self.solution_, n_samples, np.random.default_rng(random_state))


class SymmetryClassifier(BaseEstimator):
    """Mesoscopic symmetry of an orientation set, judged from its tensor moments."""

    def __init__(self, selection=("Q2",), confidence=1 - 1e-6, molecular_group=None):
        self.selection = selection
        self.confidence = confidence
        self.molecular_group = molecular_group

    def fit(self, X, y=None, sample_weight=None):
        sel = check_selection(self.selection)
        est = cli_io.estimate_moments(_sample(X, sample_weight), sel)
        self.threshold_ = cli_io.noise_threshold(est, self.confidence)
        self.report_ = detect_symmetry(est.means, threshold=self.threshold_, molecular_group=self.molecular_group)
        self.detected_ = self.report_.detected
        self.frame_ = self.report_.frame
        self.distances_ = self.report_.distances
        self.coefficients_ = self.report_.coefficients
        return self
