import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisotens import so3

angles_interior = st.tuples(
    st.floats(0.05, np.pi - 0.05),
    st.floats(0.0, 2 * np.pi - 1e-9),
    st.floats(0.0, 2 * np.pi - 1e-9),
)
unit_quats = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1)


def test_identity_euler():
    assert np.allclose(so3.rotation_from_euler(0.0, 0.0, 0.0), np.eye(3))


def test_euler_matrix_columns_are_body_axes():
    # alpha tilts m1 away from e1; beta turns the tilt about e1
    p = so3.rotation_from_euler(np.pi / 2, 0.0, 0.0)
    assert np.allclose(p[:, 0], [0, 1, 0])
    p = so3.rotation_from_euler(np.pi / 2, np.pi / 2, 0.0)
    assert np.allclose(p[:, 0], [0, 0, 1])


@given(angles_interior)
def test_euler_round_trip(angles):
    p = so3.rotation_from_euler(*angles)
    back = so3.euler_from_rotation(p)
    assert not back.degenerate
    assert np.allclose(so3.rotation_from_euler(back.alpha, back.beta, back.gamma), p, atol=1e-9)
    assert back.alpha == pytest.approx(angles[0], abs=1e-9)


@pytest.mark.parametrize("alpha", [0.0, np.pi])
def test_gimbal_returns_combination(alpha):
    p = so3.rotation_from_euler(alpha, 0.7, 0.2)
    back = so3.euler_from_rotation(p)
    assert back.degenerate and back.gamma == 0.0
    combo = 0.9 if alpha == 0.0 else 0.5
    assert back.beta == pytest.approx(combo, abs=1e-12)
    assert np.allclose(so3.rotation_from_euler(back.alpha, back.beta, 0.0), p, atol=1e-12)


@pytest.mark.parametrize("bad", [(-0.1, 0, 0), (3.2, 0, 0), (1, 2 * np.pi, 0), (1, 0, -1e-3)])
def test_euler_range_checked(bad):
    with pytest.raises(so3.EulerRangeError):
        so3.rotation_from_euler(*bad)


def test_check_rotation_rejects_reflection_and_shear():
    with pytest.raises(so3.RotationError):
        so3.check_rotation(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(so3.RotationError):
        so3.check_rotation(np.eye(3) + 1e-6)
    with pytest.raises(so3.RotationError):
        so3.check_rotation(np.eye(2))


@given(unit_quats)
def test_quaternion_double_cover(v):
    q = np.array(v) / np.linalg.norm(v)
    p = so3.rotation_from_quaternion(q)
    assert so3.is_rotation(p)
    assert np.allclose(p, so3.rotation_from_quaternion(-q), atol=1e-14)
    back = so3.quaternion_from_rotation(p)
    assert np.allclose(so3.rotation_from_quaternion(back), p, atol=1e-12)
    assert np.isclose(abs(back @ q), 1.0)


def test_quaternion_matches_axis_angle_oracle():
    # rotation by t about e1 is (cos t/2, sin t/2, 0, 0)
    t = 0.83
    q = np.array([np.cos(t / 2), np.sin(t / 2), 0.0, 0.0])
    assert np.allclose(so3.rotation_from_quaternion(q), so3.axis_rotation(t))


def test_quaternion_unit_tolerance_is_strict():
    with pytest.raises(so3.RotationError):
        so3.rotation_from_quaternion([1.0 + 1e-9, 0, 0, 0])


def test_named_rotations():
    b = so3.half_turn_b()
    r = so3.cyclic_r()
    v = so3.icosa_v()
    for p, k in ((b, 2), (r, 3), (v, 5)):
        assert so3.is_rotation(p)
        acc = np.eye(3)
        for _ in range(k):
            acc = acc @ p
        assert np.allclose(acc, np.eye(3), atol=1e-12)
    assert np.allclose(r @ np.array([1.0, 0, 0]), [0, 1, 0])


def test_body_diagonal_frame_columns():
    q = so3.body_diagonal_frame()
    assert so3.is_rotation(q)
    assert np.allclose(q[:, 0], np.ones(3) / np.sqrt(3))
    assert np.allclose(q[:, 1], np.array([1, -1, 0]) / np.sqrt(2))
    assert np.allclose(q[:, 2], np.array([1, 1, -2]) / np.sqrt(6))


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_expmap_is_rotation_about_vector(w):
    w = np.array(w)
    p = so3.expmap(w)
    assert so3.is_rotation(p, 1e-9)
    assert np.allclose(p @ w, w, atol=1e-9)


def test_haar_grid_weights_and_low_degree_exactness():
    grid = so3.haar_grid(6)
    assert grid.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert grid.spec == {"max_order": 6, "n_alpha": 7, "n_angle": 13}
    # every matrix entry of the Haar average is zero; products average to delta/3
    R = grid.rotations
    assert np.allclose(grid.weights @ R.reshape(-1, 9), 0, atol=1e-14)
    second = np.einsum("b,bij,bkl->ijkl", grid.weights, R, R)
    oracle = np.einsum("ik,jl->ijkl", np.eye(3), np.eye(3)) / 3
    assert np.allclose(second, oracle, atol=1e-14)


def test_integrate_against_monte_carlo():
    grid = so3.haar_grid(8)

    def f(P):
        return P[:, 0, 0] ** 4 + P[:, 1, 2] ** 2

    exact = 1 / 5 + 1 / 3  # each entry is a coordinate of a uniform unit vector
    assert so3.integrate(f, grid) == pytest.approx(exact, abs=1e-13)
    mc = f(so3.random_rotations(200000, 0)).mean()
    assert mc == pytest.approx(exact, abs=5e-3)


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_random_rotations_are_proper(seed):
    P = so3.random_rotations(5, seed)
    assert all(so3.is_rotation(p) for p in P)
