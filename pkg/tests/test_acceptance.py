"""Acceptance checks, one per criterion, each printing a PASS or FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or
``python tests/test_acceptance.py`` for a plain summary.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from anisotens import so3
from anisotens.bases import laplacian, monomial_basis, monomial_traceless, orthogonal_basis
from anisotens.classifier import (
    NAMED_TENSORS,
    breaking_graph,
    canonicalize_axial_frame,
    compose_from_coefficients,
    detect_symmetry,
)
from anisotens.cli_io import OrientationSample, run_pipeline
from anisotens.groups import (
    QSqrt5,
    _cubic_generators,
    build_group,
    icosahedral_order6_ratio,
    invariant_dimension,
    invariant_space_analytic,
    invariant_space_numeric,
    principal_angles,
)
from anisotens.maxent import MomentTarget, objective_and_gradient, sample_density, solve_maxent
from anisotens.tensors import SymTensor, identity, rotate, traceless_project, vector

CLASSIFIED = ["C2", "C3", "C4", "C5", "C6", "D2", "D3", "D4", "D5", "D6", "T", "O", "I", "Cinf", "Dinf"]
Q2 = monomial_traceless(2, 0, 0).to_float()
Q4 = monomial_traceless(4, 0, 0).to_float()


def basis_dimensions():
    for n in range(1, 7):
        assert len(monomial_basis(n).members) == 2 * n + 1
        B = orthogonal_basis(n)
        assert len(B.members) == 2 * n + 1
        G = B.gram()
        d = np.sqrt(np.diag(G))
        off = np.abs(G - np.diag(np.diag(G))) / np.outer(d, d)
        assert off.max() <= 1e-12, f"n={n}: off-diagonal {off.max():.2e}"
    return "n=1..6, 2n+1 members, Gram diagonal"


def traceless_exact():
    e1, i = vector([1, 0, 0]), identity()
    U4 = monomial_traceless(4, 0, 0)
    U2 = monomial_traceless(2, 0, 0)
    assert U4.exact and U2.exact
    assert U4 == e1**4 - i * e1**2 * Fraction(6, 7) + i**2 * Fraction(3, 35)
    assert U2 == e1**2 - i * Fraction(1, 3)
    return "6/7, 3/35 and 1/3 in rationals"


def eigenfunctions():
    count = 0
    for n in range(0, 7):
        for space in (monomial_basis(n), orthogonal_basis(n)):
            for expr, X in zip(space.exprs, space.members):
                assert laplacian(expr).tensor() == X * (n * (n + 1)), f"n={n}"
                count += 1
    return f"{count} basis tensors, exact"


def invariant_table():
    T, I, Dinf = build_group("T"), build_group("I"), build_group("Dinf")
    assert [invariant_dimension(T, n) for n in range(1, 7)] == [0, 0, 1, 1, 0, 2]
    assert [invariant_dimension(I, n) for n in range(1, 7)] == [0, 0, 0, 0, 0, 1]
    assert [invariant_dimension(Dinf, n) for n in range(1, 9)] == [int(n % 2 == 0) for n in range(1, 9)]
    r = icosahedral_order6_ratio()
    assert r == QSqrt5(0, -1) / 11
    # independent numeric check of the ratio: fit the numeric invariant in span{A, B}
    sigma2, sigma3, delta = _cubic_generators()
    A = traceless_project((sigma3 * sigma3).tensor()).to_float()
    B = traceless_project(delta.tensor()).to_float()
    V = invariant_space_numeric(I, 6).members[0].to_float()
    (a, b), *_ = np.linalg.lstsq(np.column_stack([A.comps, B.comps]), V.comps, rcond=None)
    assert abs(b / a + np.sqrt(5) / 11) <= 1e-10
    assert abs(float(r) + np.sqrt(5) / 11) <= 1e-10
    worst = 0.0
    for name in CLASSIFIED:
        G = build_group(name)
        for n in range(1, 7):
            S, N = invariant_space_analytic(G, n), invariant_space_numeric(G, n)
            assert S.dim == N.dim, f"{name} n={n}"
            if S.dim:
                worst = max(worst, float(np.max(principal_angles(S, N))))
    assert worst < 1e-8
    return f"b/a = -sqrt(5)/11, max principal angle {worst:.1e}"


def group_orders():
    expected = {"T": 12, "O": 24, "I": 60}
    expected.update({f"D{n}": 2 * n for n in range(2, 7)})
    for name, order in expected.items():
        assert build_group(name).order == order, name
    return "T=12, O=24, I=60, Dn=2n"


def maxent_round_trip():
    sol = solve_maxent([MomentTarget(Q2, Q2 * 0.3, "Q2")])
    assert sol.gradient_norm < 1e-9
    assert sol.moments()[0].allclose(Q2 * 0.3, rtol=0, atol=1e-8)
    P = so3.random_rotations(64, 0)
    rho = sol.density(P)
    worst = 0.0
    for theta in np.linspace(0, 2 * np.pi, 8, endpoint=False) + 0.1:
        t = so3.axis_rotation(theta)
        worst = max(worst, float(np.max(np.abs(sol.density(t @ P) - rho) / rho)))
    assert worst < 1e-8
    return f"|grad| {sol.gradient_norm:.1e}, symmetry error {worst:.1e}"


def gradient_check():
    grid = so3.haar_grid(10)
    targets = [MomentTarget(Q2, Q2 * 0.2, "Q2"), MomentTarget(Q4, Q4 * 0.05, "Q4")]
    rng = np.random.default_rng(7)
    h = 1e-6
    worst = 0.0
    for _ in range(10):
        b = rng.normal(scale=0.7, size=14)
        _, g = objective_and_gradient(targets, b, grid)
        fd = np.array([
            (objective_and_gradient(targets, b + h * e, grid)[0] - objective_and_gradient(targets, b - h * e, grid)[0])
            / (2 * h)
            for e in np.eye(len(b))
        ])
        worst = max(worst, float(np.linalg.norm(fd - g) / np.linalg.norm(g)))
    assert worst <= 1e-6
    return f"max relative error {worst:.1e}"


CASES = {
    ("Q2",): ["Dinf", "D2"],
    ("Q2", "Q4"): ["Dinf", "O", "D4", "D3", "D2", "C2"],
    ("Q2", "M2"): ["Dinf", "D2", "C2"],
    ("Q2", "M2", "T3"): ["Dinf", "Cinf", "T", "D3", "D2", "C3", "C2"],
    ("Q1", "Q2", "M2"): ["Dinf", "Cinf", "D2", "C2"],
    ("T3",): ["Cinf", "T", "D3", "C3", "C2"],
}


def _member(group, selection, rng):
    out = {}
    for name in selection:
        n = NAMED_TENSORS[name].order
        acc = SymTensor.zeros(n)
        for X in invariant_space_analytic(build_group(group), n).members:
            acc = acc + X.to_float() * rng.uniform(0.5, 1.5) * rng.choice([-1, 1])
        out[name] = acc
    return out


def six_cases():
    rng = np.random.default_rng(2024)
    checked = 0
    for selection, nodes in CASES.items():
        graph = breaking_graph(selection)
        assert set(graph.nodes) == set(nodes), selection
        assert graph.to_json()["nodes"][0] == "SO3"
        for group in nodes:
            q = so3.random_rotations(1, rng)[0]
            tensors = {k: rotate(q, U) for k, U in _member(group, selection, rng).items()}
            got = detect_symmetry(tensors, tol=1e-8).detected
            assert got == group, f"{selection}: built {group}, detected {got}"
            checked += 1
    # O from c1 = 7 c4, and T once b4 is freed
    q4 = compose_from_coefficients({"c1": 7.0, "c4": 1.0}, ["Q4"])["Q4"]
    assert detect_symmetry({"Q2": SymTensor.zeros(2), "Q4": q4}, tol=1e-8).detected == "O"
    t3 = compose_from_coefficients({"b4": 0.4}, ["T3"])["T3"]
    assert detect_symmetry({"T3": t3, "Q4": q4}, tol=1e-8).detected == "T"
    # a 1e-3 perturbation breaking the cubic constraint demotes O to D4
    bent = compose_from_coefficients({"c1": 7.0 * (1 + 1e-3), "c4": 1.0}, ["Q4"])["Q4"]
    assert detect_symmetry({"Q2": SymTensor.zeros(2), "Q4": bent}, tol=1e-8).detected == "D4"
    # a 1e-3 biaxial term demotes Dinf to D2
    q2 = compose_from_coefficients({"a1": 1.0, "a2": 1e-3}, ["Q2"])["Q2"]
    assert detect_symmetry({"Q2": q2}, tol=1e-8).detected == "D2"
    return f"{checked} synthetic members in random frames, O/T split, demotions"


def canonicalization():
    Q = compose_from_coefficients({"a1": 0.2, "a2": 0.3, "a3": 0.4}, ["Q2"])
    _, coeffs = canonicalize_axial_frame(Q, np.eye(3), zero="a3")
    assert abs(coeffs["a2"] - 0.5) < 1e-12 and abs(coeffs["a3"]) < 1e-12
    return f"(a2, a3) -> ({coeffs['a2']:.12f}, {abs(coeffs['a3']):.1e})"


def end_to_end():
    sol = solve_maxent([MomentTarget(Q2, Q2 * 0.3, "Q2")])
    R = sample_density(sol, 100_000, np.random.default_rng(10))
    n = len(R)
    report, _ = run_pipeline(OrientationSample(R, np.full(n, 1 / n)), ["Q2", "Q4"])
    assert report.detected == "Dinf", report.detected
    H = so3.random_rotations(100_000, 11)
    iso, _ = run_pipeline(OrientationSample(H, np.full(len(H), 1 / len(H))), ["Q2", "Q4"])
    assert iso.detected == "SO3", iso.detected
    return "maxent samples -> Dinf, Haar samples -> SO3"


CRITERIA = [
    (1, "basis dimension and orthogonality", basis_dimensions, 5.0),
    (2, "traceless projection exactness", traceless_exact, None),
    (3, "eigenfunction property", eigenfunctions, None),
    (4, "invariant-space dimension table", invariant_table, 60.0),
    (5, "group orders by closure", group_orders, None),
    (6, "max-entropy round trip", maxent_round_trip, 30.0),
    (7, "gradient check", gradient_check, None),
    (8, "classification of the six cases", six_cases, 60.0),
    (9, "canonicalization", canonicalization, None),
    (10, "end-to-end statistical check", end_to_end, 120.0),
]


def run_criterion(num, title, fn, budget):
    start = time.perf_counter()
    try:
        detail = fn()
        elapsed = time.perf_counter() - start
        ok = budget is None or elapsed < budget
        if not ok:
            detail = f"{detail}; took {elapsed:.1f} s, budget {budget:.0f} s"
    except AssertionError as exc:
        elapsed = time.perf_counter() - start
        ok, detail = False, str(exc) or "assertion failed"
    status = "PASS" if ok else "FAIL"
    print(f"{status} [{num}] {title}: {detail} ({elapsed:.2f} s)")
    return ok, detail


@pytest.mark.parametrize("num,title,fn,budget", CRITERIA, ids=[f"criterion{c[0]}" for c in CRITERIA])
def test_criterion(num, title, fn, budget):
    ok, detail = run_criterion(num, title, fn, budget)
    assert ok, detail


if __name__ == "__main__":
    results = [run_criterion(*c)[0] for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
