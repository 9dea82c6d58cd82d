import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polytope_fem.piola import AffineMap, contravariant_push, covariant_push, push_curl, push_div, push_gradient
from polytope_fem.reference import DomainError

ROT = [[0, -1], [1, 0]]


@pytest.mark.parametrize(
    "J, value, expected",
    [(np.eye(2), [0.3, -1.2], [0.3, -1.2]), (np.diag([2, 1]), [1, 0], [0.5, 0]), (ROT, [1, 0], [0, 1])],
)
def test_covariant(J, value, expected):
    np.testing.assert_allclose(covariant_push(AffineMap.from_matrix(J), value), expected, atol=1e-15)


@pytest.mark.parametrize(
    "J, value, expected",
    [(np.eye(2), [0.3, -1.2], [0.3, -1.2]), (np.diag([2, 1]), [1, 0], [1, 0]), (np.diag([2, 2]), [0, 1], [0, 0.5])],
)
def test_contravariant(J, value, expected):
    np.testing.assert_allclose(contravariant_push(AffineMap.from_matrix(J), value), expected, atol=1e-15)


def test_push_curl():
    assert push_curl(AffineMap.from_matrix(np.diag([2, 1])), -2) == pytest.approx(-1)
    np.testing.assert_allclose(push_curl(AffineMap.from_matrix(np.eye(3)), [1, 2, 3]), [1, 2, 3])
    np.testing.assert_allclose(push_curl(AffineMap.from_matrix(np.diag([1, 1, 2])), [0, 0, 1]), [0, 0, 1])


def test_push_div_and_gradient():
    assert push_div(AffineMap.from_matrix(np.eye(2)), 3.0) == pytest.approx(3.0)
    assert push_div(AffineMap.from_matrix(np.diag([2, 2])), 2.0) == pytest.approx(0.5)
    np.testing.assert_allclose(push_gradient(AffineMap.from_matrix(np.eye(2)), [1, 2]), [1, 2])
    np.testing.assert_allclose(push_gradient(AffineMap.from_matrix(np.diag([2, 1])), [2, 0]), [1, 0])


def test_map_from_vertices_round_trip():
    coords = np.array([[0.5, 0.2], [0.1, 1.4], [2.0, 0.3]])
    m = AffineMap.from_vertices(coords, 2)
    ref = np.array([[0, 0], [0, 1], [1, 0]], dtype=float)
    np.testing.assert_allclose(m(ref), coords)
    np.testing.assert_allclose(m.inverse(coords), ref, atol=1e-14)


def test_singular_map_rejected():
    with pytest.raises(DomainError):
        AffineMap.from_matrix([[1, 2], [2, 4]])


matrices = st.lists(st.floats(-3, 3, allow_nan=False), min_size=9, max_size=9).map(lambda v: np.reshape(v, (3, 3)))
vectors = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3).map(np.array)


@settings(max_examples=50, deadline=None)
@given(matrices, vectors, vectors)
def test_tangent_and_flux_pairings_preserved(J, a, b):
    if abs(np.linalg.det(J)) < 1e-2:
        return
    m = AffineMap.from_matrix(J)
    # covariant values pair with pushed tangents J t; contravariant with cofactor-pushed normals
    assert covariant_push(m, a) @ (J @ b) == pytest.approx(a @ b, abs=1e-8 * (1 + np.abs(a).sum() * np.abs(b).sum()) * np.linalg.cond(J))
    n_phys = m.cofactor @ b
    assert contravariant_push(m, a) @ n_phys == pytest.approx(a @ b, rel=1e-7, abs=1e-7 * np.linalg.cond(J))
