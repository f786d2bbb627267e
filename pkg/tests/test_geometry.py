import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperfit.errors import InvalidArgumentError, NotAnEllipsoidError
from hyperfit.geometry import (
    GAUSSIAN,
    PARAMETRIC,
    EllipsoidModel,
    GeometricParams,
    axis_ratio,
    euler_to_rotation,
    sample_hypersphere,
    specificity_threshold,
    to_geometric,
    transform_sphere_points,
)
from hyperfit.synth import random_rotation


@pytest.mark.parametrize("dim", [2, 3, 4, 7])
@pytest.mark.parametrize("scheme", [PARAMETRIC, GAUSSIAN])
def test_sphere_points_have_unit_norm(dim, scheme):
    s = sample_hypersphere(dim, 137, scheme=scheme, seed=3)
    assert s.points.shape == (137, dim)
    assert np.max(np.abs(np.linalg.norm(s.points, axis=1) - 1)) < 1e-12


def test_circle_grid_is_equally_spaced():
    s = sample_hypersphere(2, 4, scheme=PARAMETRIC)
    np.testing.assert_allclose(s.points, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_parametric_grid_is_deterministic_and_covers_sphere():
    a = sample_hypersphere(3, 500, scheme=PARAMETRIC)
    b = sample_hypersphere(3, 500, scheme=PARAMETRIC, seed=99)
    np.testing.assert_array_equal(a.points, b.points)
    # roughly area-uniform: the mean of a uniform sphere sample is the origin
    assert np.linalg.norm(a.points.mean(axis=0)) < 0.02
    # and each octant holds about one eighth of the points
    octant = (a.points > 0) @ np.array([1, 2, 4])
    counts = np.bincount(octant, minlength=8)
    assert counts.min() > 0.8 * 500 / 8


def test_gaussian_scheme_seeded():
    a = sample_hypersphere(4, 50, scheme=GAUSSIAN, seed=1)
    b = sample_hypersphere(4, 50, scheme=GAUSSIAN, seed=1)
    c = sample_hypersphere(4, 50, scheme=GAUSSIAN, seed=2)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_sample_hypersphere_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        sample_hypersphere(3, 0)
    with pytest.raises(InvalidArgumentError):
        sample_hypersphere(0, 5)
    with pytest.raises(InvalidArgumentError):
        sample_hypersphere(3, 5, scheme="fibonacci")


def test_singular_A_is_rejected():
    with pytest.raises(NotAnEllipsoidError):
        EllipsoidModel(np.diag([1.0, 0.0, 2.0]), np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        EllipsoidModel(np.eye(3), np.zeros(2))


def test_model_is_immutable():
    m = EllipsoidModel(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        m.A[0, 0] = 5.0


def test_transformed_points_satisfy_center_form():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    m = EllipsoidModel(A, rng.normal(size=4))
    pts = transform_sphere_points(m, sample_hypersphere(4, 60, seed=1))
    assert np.max(np.abs(m.residual(pts))) < 1e-10


def test_to_geometric_axis_aligned():
    m = EllipsoidModel(np.diag([2.0, 5.0, 3.0]), [1.0, 2.0, 3.0])
    g = to_geometric(m)
    np.testing.assert_allclose(g.semi_axes, [5, 3, 2])
    np.testing.assert_allclose(g.center, [1, 2, 3])
    np.testing.assert_allclose(np.abs(g.rotation), [[0, 1, 0], [0, 0, 1], [1, 0, 0]], atol=1e-15)
    assert np.linalg.det(g.rotation) == pytest.approx(1.0)


@given(st.integers(0, 10_000), st.integers(2, 6))
def test_geometric_round_trip(seed, dim):
    rng = np.random.default_rng(seed)
    axes = rng.uniform(1, 10, size=dim)
    R = random_rotation(dim, rng)
    m = EllipsoidModel(R * axes, rng.uniform(-5, 5, size=dim))
    g = to_geometric(m)
    assert np.all(np.diff(g.semi_axes) <= 0)
    np.testing.assert_allclose(g.shape_matrix(), m.B, rtol=1e-9, atol=1e-9)
    back = EllipsoidModel.from_geometric(g)
    np.testing.assert_allclose(back.B, m.B, rtol=1e-9, atol=1e-9)
    assert axis_ratio(g) == pytest.approx(axes.max() / axes.min())


@given(st.integers(0, 10_000))
def test_euler_angles_reconstruct_rotation(seed):
    rng = np.random.default_rng(seed)
    m = EllipsoidModel(random_rotation(3, rng) * rng.uniform(1, 5, 3), np.zeros(3))
    g = to_geometric(m)
    np.testing.assert_allclose(euler_to_rotation(*g.euler3d), g.rotation, atol=1e-9)


def test_specificity_threshold_values():
    assert specificity_threshold(3) == pytest.approx(2.0)
    assert specificity_threshold(2) == float("inf")
    assert specificity_threshold(4) == pytest.approx(np.sqrt(3.0))
    with pytest.raises(InvalidArgumentError):
        specificity_threshold(1)


def test_geometric_params_shape_matrix():
    g = GeometricParams(np.zeros(2), np.array([3.0, 1.0]), np.eye(2))
    np.testing.assert_allclose(g.shape_matrix(), np.diag([9.0, 1.0]))
