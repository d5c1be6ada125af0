from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisotens import so3
from anisotens.bases import orthogonal_basis
from anisotens.classifier import (
    NAMED_TENSORS,
    NONE,
    _allowed,
    _normalize_selection,
    breaking_graph,
    canonicalize_axial_frame,
    coefficient_basis,
    compose_from_coefficients,
    decompose_in_frame,
    detect_symmetry,
    distance_profile,
    frame_align,
)
from anisotens.groups import build_group, invariant_space_analytic
from anisotens.tensors import SymTensor, dot, identity, rotate, traceless_project, vector

e1, e2, e3 = (vector(v) for v in np.eye(3, dtype=int).tolist())
I = identity()
R = I - e1 * e1


def written_members():
    """Coefficient tensors written out term by term in the frame e1, e2, e3."""
    half, third, fifth, seventh = (Fraction(1, k) for k in (2, 3, 5, 7))
    q2 = [e1 * e1 - I * third, e2 * e2 * 2 - R, e2 * e3 * 2, e1 * e3, e1 * e2]
    t3 = [
        e1**3 - I * e1 * (3 * fifth),
        e2**3 * 4 - R * e2 * 3,
        e2 * e2 * e3 * 4 - R * e3,
        e1 * e2 * e3 * 2,
        e1 * (e2 * e2 * 2 - R),
        (e1 * e1 - I * fifth) * e2,
        (e1 * e1 - I * fifth) * e3,
    ]
    p2 = e1 * e1 - I * seventh
    p3 = e1**3 - I * e1 * (3 * seventh)
    q4 = [
        e1**4 - I * e1 * e1 * (6 * seventh) + I * I * Fraction(3, 35),
        p2 * (e2 * e2 * 2 - R),
        p2 * e2 * e3 * 2,
        e2**4 * 8 - R * e2 * e2 * 8 + R * R,
        e2**3 * e3 * 8 - R * e2 * e3 * 4,
        e1 * (e2 * e2 * e3 * 4 - R * e3),
        e1 * (e2**3 * 4 - R * e2 * 3),
        p3 * e2,
        p3 * e3,
    ]
    return {1: [e1, e2, e3], 2: q2, 3: t3, 4: q4}


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_named_bases_match_written_forms(order):
    # the fourth and fifth Q2 slots are q1 q3 and q1 q2
    B = coefficient_basis(order)
    for X, written in zip(B.members, written_members()[order]):
        assert X == written
    G = B.gram(exact=True)
    assert all(G[i, j] == 0 for i in range(len(G)) for j in range(len(G)) if i != j)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_named_bases_are_orthogonal_basis_members(order):
    ortho = orthogonal_basis(order)
    B = coefficient_basis(order)
    for X, meta in zip(B.members, B.meta):
        j = [i for i, m in enumerate(ortho.meta) if m["family"] == meta["family"] and m["m"] == meta["m"]]
        assert len(j) == 1
        Y = ortho.members[j[0]].to_float()
        Xf = X.to_float()
        cos = float(dot(Xf, Y)) / (Xf.norm() * Y.norm())
        assert abs(cos) == pytest.approx(1.0, abs=1e-12)


def test_named_base_tensors():
    assert NAMED_TENSORS["Q2"].base == e1 * e1 - I * Fraction(1, 3)
    assert NAMED_TENSORS["M2"].base == e2 * e2 - R * Fraction(1, 2)
    assert NAMED_TENSORS["T3"].base == e1 * e2 * e3 * 2
    assert NAMED_TENSORS["Q4"].base == traceless_project(e1**4)
    assert [NAMED_TENSORS[k].basis.labels[0] for k in ("Q1", "Q2", "M2", "T3", "Q4")] == ["d1", "a1", "a'1", "b1", "c1"]


def test_body_diagonal_identities():
    q = so3.body_diagonal_frame()
    sigma3 = (e1 * e2 * e3).to_float()
    c = decompose_in_frame({"T3": sigma3}, q)
    assert c["b1"] == pytest.approx(5 / (6 * np.sqrt(3)), abs=1e-14)
    assert c["b3"] == pytest.approx(1 / (3 * np.sqrt(6)), abs=1e-14)
    assert all(abs(v) < 1e-14 for k, v in c.items() if k not in ("b1", "b3"))
    sigma2 = traceless_project((e1 * e1 * e2 * e2 + e2 * e2 * e3 * e3 + e3 * e3 * e1 * e1).to_float())
    c = decompose_in_frame({"Q4": sigma2}, q)
    # c1 is positive and c6 negative; their ratio gives -4 sqrt(2) c1 = 7 c6
    assert c["c1"] == pytest.approx(7 / 12, abs=1e-14)
    assert c["c6"] == pytest.approx(-np.sqrt(2) / 3, abs=1e-14)
    assert -4 * np.sqrt(2) * c["c1"] == pytest.approx(7 * c["c6"], abs=1e-13)
    assert all(abs(v) < 1e-14 for k, v in c.items() if k not in ("c1", "c6"))
    # in the identity frame the same tensor has c1 = 7 c4
    c = decompose_in_frame({"Q4": sigma2}, np.eye(3))
    assert c["c1"] == pytest.approx(7 * c["c4"], abs=1e-14)
    assert c["c1"] == pytest.approx(-7 / 8, abs=1e-14)


TABLE = {
    "Dinf": ({"a1", "a'1", "c1"}, ()),
    "Cinf": ({"d1", "a1", "a'1", "b1", "c1"}, ()),
    "O": ({"c1", "c4"}, ("c1 = 7*c4",)),
    "T": ({"b4", "c1", "c4"}, ("c1 = 7*c4",)),
    "D4": ({"a1", "a'1", "c1", "c4"}, ()),
    "D3": ({"a1", "a'1", "b2", "c1", "c6"}, ()),
    # a'1, a'2 and b4 are D2-invariant alongside a1, a2, c1, c2, c4
    "D2": ({"a1", "a2", "a'1", "a'2", "b4", "c1", "c2", "c4"}, ()),
    "C4": ({"d1", "a1", "a'1", "b1", "c1", "c4", "c5"}, ()),
    "C3": ({"d1", "a1", "a'1", "b1", "b2", "b3", "c1", "c6", "c7"}, ()),
    "C2": ({"d1", "a1", "a2", "a3", "a'1", "a'2", "a'3", "b1", "b4", "b5", "c1", "c2", "c3", "c4", "c5"}, ()),
}


@pytest.mark.parametrize("group", sorted(TABLE))
def test_allowed_coefficients_table(group):
    sel = _normalize_selection(("Q1", "Q2", "M2", "T3", "Q4"))
    labels, constraints = _allowed(build_group(group), sel)
    assert set(labels) == TABLE[group][0]
    assert constraints == TABLE[group][1]


def test_cubic_conditions_in_body_diagonal_frame():
    sel = _normalize_selection(("Q1", "Q2", "M2", "T3", "Q4"))
    labels, cons = _allowed(build_group("T"), sel, "body_diagonal")
    assert set(labels) == {"b1", "b3", "c1", "c6"}
    ratios = sorted(float(c.split("= ")[1].split("*")[0]) for c in cons)
    # sqrt(2) b1 = 5 b3 and -4 sqrt(2) c1 = 7 c6
    assert ratios == pytest.approx(sorted([5 / np.sqrt(2), -7 / (4 * np.sqrt(2))]), abs=1e-9)


CASES = {
    ("Q2",): ["Dinf", "D2"],
    ("Q2", "Q4"): ["Dinf", "O", "D4", "D3", "D2", "C2"],
    ("Q2", "M2"): ["Dinf", "D2", "C2"],
    ("Q2", "M2", "T3"): ["Dinf", "Cinf", "T", "D3", "D2", "C3", "C2"],
    ("Q1", "Q2", "M2"): ["Dinf", "Cinf", "D2", "C2"],
    ("T3",): ["Cinf", "T", "D3", "C3", "C2"],
}


@pytest.mark.parametrize("selection", list(CASES))
def test_breaking_graph_nodes(selection):
    g = breaking_graph(selection)
    assert set(g.nodes) == set(CASES[selection])
    assert g.to_json()["nodes"][0] == "SO3"


def test_breaking_graph_edges_q2_q4():
    g = breaking_graph(("Q2", "Q4"))
    edges = {(e["from"], e["to"]): e for e in g.edges}
    assert set(edges) == {
        ("SO3", "Dinf"), ("SO3", "O"), ("Dinf", "D4"), ("Dinf", "D3"),
        ("O", "D4"), ("O", "D3"), ("D4", "D2"), ("D2", "C2"),
    }
    assert edges[("SO3", "Dinf")]["freed_coefficients"] == ["a1", "c1"]
    assert edges[("O", "D4")]["released_constraints"] == ["c1 = 7*c4"]
    assert "a1" in edges[("O", "D4")]["freed_coefficients"]
    assert edges[("O", "D3")]["frame"] == "body_diagonal"
    assert len(edges[("O", "D3")]["released_constraints"]) == 1


def test_breaking_graph_t_to_c3_releases_t3_constraint():
    g = breaking_graph(("Q2", "M2", "T3"))
    edge = next(e for e in g.edges if (e["from"], e["to"]) == ("T", "C3"))
    assert edge["released_constraints"] == ["b1 = 3.53553390593*b3"]


def test_molecular_group_checked():
    breaking_graph(("Q2", "M2", "T3"), "D2")
    with pytest.raises(ValueError):
        breaking_graph(("Q2", "M2"), "Dinf")


def _member(group, selection, rng):
    out = {}
    for name in selection:
        n = NAMED_TENSORS[name].order
        space = invariant_space_analytic(build_group(group), n)
        acc = SymTensor.zeros(n)
        for X in space.members:
            acc = acc + X.to_float() * rng.uniform(0.5, 1.5) * rng.choice([-1, 1])
        out[name] = acc
    return out


@pytest.mark.parametrize("selection", list(CASES))
def test_detects_each_node_in_random_frames(selection):
    rng = np.random.default_rng(len(selection))
    for group in CASES[selection]:
        q = so3.random_rotations(1, rng)[0]
        tensors = {k: rotate(q, U) for k, U in _member(group, selection, rng).items()}
        report = detect_symmetry(tensors, tol=1e-8)
        assert report.detected == group
        # the reported frame carries the symmetry
        G = build_group(group)
        checks = G.elements if not G.continuous else [so3.axis_rotation(0.7)]
        for s in checks:
            g = report.frame @ s @ report.frame.T
            for U in tensors.values():
                assert rotate(g, U).allclose(U, atol=1e-6)


def test_perturbation_demotes():
    rng = np.random.default_rng(0)
    sel = ("Q2", "Q4")
    base = _member("O", sel, rng)
    extra = _member("D4", sel, rng)
    tensors = {k: base[k] + extra[k] * 1e-3 for k in sel}
    assert detect_symmetry(base).detected == "O"
    assert detect_symmetry(tensors).detected == "D4"


def test_cubic_splitting_with_t3_and_q4():
    q4 = compose_from_coefficients({"c1": 7.0, "c4": 1.0}, ["Q4"])["Q4"]
    zero_t3 = SymTensor.zeros(3)
    assert detect_symmetry({"T3": zero_t3, "Q4": q4}).detected == "O"
    t3 = compose_from_coefficients({"b4": 0.4}, ["T3"])["T3"]
    assert detect_symmetry({"T3": t3, "Q4": q4}).detected == "T"
    q4_bad = compose_from_coefficients({"c1": 7.05, "c4": 1.0}, ["Q4"])["Q4"]
    assert detect_symmetry({"T3": t3, "Q4": q4_bad}).detected == "D2"


def test_none_when_no_symmetry_remains():
    assert breaking_graph(("Q1", "Q2", "M2")).admits_no_symmetry
    assert not breaking_graph(("Q2",)).admits_no_symmetry
    rng = np.random.default_rng(1)
    tensors = _member("C1", ("Q1", "Q2", "M2"), rng)
    assert detect_symmetry(tensors).detected == NONE


def test_canonicalize_pair():
    Q = compose_from_coefficients({"a1": 0.2, "a2": 0.3, "a3": 0.4}, ["Q2"])
    frame, coeffs = canonicalize_axial_frame(Q, np.eye(3), zero="a3")
    assert coeffs["a2"] == pytest.approx(0.5, abs=1e-14)
    assert coeffs["a3"] == pytest.approx(0.0, abs=1e-14)
    assert coeffs["a1"] == pytest.approx(0.2, abs=1e-14)
    assert np.allclose(frame[:, 0], [1, 0, 0])
    _, coeffs = canonicalize_axial_frame(Q, np.eye(3), zero="a2")
    assert coeffs["a2"] == pytest.approx(0.0, abs=1e-14)
    assert coeffs["a3"] == pytest.approx(0.5, abs=1e-14)


def test_decompose_compose_round_trip():
    rng = np.random.default_rng(5)
    sel = ["Q1", "Q2", "M2", "T3", "Q4"]
    coeffs = {lab: rng.normal() for name in sel for lab in NAMED_TENSORS[name].basis.labels}
    q = so3.random_rotations(1, rng)[0]
    tensors = compose_from_coefficients(coeffs, sel, q)
    back = decompose_in_frame(tensors, q)
    assert all(back[k] == pytest.approx(v, abs=1e-12) for k, v in coeffs.items())


def test_distance_profile_monotone():
    rng = np.random.default_rng(3)
    tensors = {k: U * 1.0 for k, U in _member("C2", ("Q2", "Q4"), rng).items()}
    prof = distance_profile(tensors, ["SO3", "Dinf", "O", "D4", "D3", "D2", "C2"])
    assert prof["D2"].residual <= prof["D4"].residual + 1e-12
    assert prof["C2"].residual <= prof["D2"].residual + 1e-12
    assert prof["SO3"].residual == pytest.approx(sum(float(dot(U, U)) for U in tensors.values()))


@settings(max_examples=8)
@given(st.integers(0, 2**31))
def test_frame_align_is_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    tensors = _member("D2", ("Q2", "M2"), rng)
    s = so3.random_rotations(1, rng)[0]
    moved = {k: rotate(s, U) for k, U in tensors.items()}
    a, b = frame_align(tensors, "Dinf"), frame_align(moved, "Dinf")
    assert a.residual == pytest.approx(b.residual, rel=1e-7, abs=1e-12)
    assert detect_symmetry(moved).detected == detect_symmetry(tensors).detected == "D2"
