"""Symmetric traceless tensors, point-group invariants, max-entropy orientation densities
and mesoscopic symmetry classification."""

from .bases import TensorSpace, laplacian, monomial_basis, monomial_traceless, orthogonal_basis, wigner_D
from .classifier import (
    NAMED_TENSORS,
    BreakingGraph,
    SymmetryReport,
    breaking_graph,
    canonicalize_axial_frame,
    decompose_in_frame,
    detect_symmetry,
    distance_profile,
    frame_align,
)
from .cli_io import OrientationSample, estimate_moments, ingest, run_pipeline
from .groups import PointGroup, build_group, invariant_space_analytic, invariant_space_numeric, reynolds_average
from .maxent import MomentTarget, MaxEntSolution, objective_and_gradient, sample_density, solve_maxent
from .so3 import haar_grid, rotation_from_euler, rotation_from_quaternion
from .tensors import SymTensor, dot, identity, rotate, sym_product, trace, traceless_project

__version__ = "0.1.0"
