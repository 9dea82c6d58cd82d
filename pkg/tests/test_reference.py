import numpy as np
import pytest

from polytope_fem.reference import (
    DomainError,
    edge_tangent,
    facet_normal,
    oriented_normal,
    polytopes,
    reference_simplex,
)


@pytest.mark.parametrize(
    "dim, edge, expected",
    [(2, "e12", (0, 1)), (2, "e23", (1, -1)), (3, "e14", (1, 0, 0))],
)
def test_edge_tangent(dim, edge, expected):
    np.testing.assert_array_equal(edge_tangent(reference_simplex(dim), edge), expected)


@pytest.mark.parametrize(
    "dim, facet, expected",
    [(2, "e13", (0, -1)), (2, "e23", (1, 1)), (3, "f123", (-1, 0, 0))],
)
def test_facet_normal(dim, facet, expected):
    np.testing.assert_allclose(facet_normal(reference_simplex(dim), facet), expected)


@pytest.mark.parametrize("dim", [2, 3])
def test_facet_normals_point_outward(dim):
    s = reference_simplex(dim)
    for facet in s.facets:
        mid = s.vertices[list(facet.vertices)].mean(axis=0)
        assert facet_normal(s, facet) @ (mid - s.centroid) > 0


@pytest.mark.parametrize("dim", [2, 3])
def test_oriented_normal_is_orthogonal_to_facet(dim):
    s = reference_simplex(dim)
    for facet in s.facets:
        n = oriented_normal(s, facet)
        v = s.vertices[list(facet.vertices)]
        np.testing.assert_allclose((v[1:] - v[0]) @ n, 0, atol=1e-14)
        np.testing.assert_allclose(np.cross(n, facet_normal(s, facet)) if dim == 3 else
                                   n[0] * facet_normal(s, facet)[1] - n[1] * facet_normal(s, facet)[0], 0, atol=1e-14)


def test_polytope_listing():
    tri, tet = reference_simplex(2), reference_simplex(3)
    assert len(polytopes(tri)) == 7
    assert len(polytopes(tet)) == 15
    assert polytopes(tri)[3].vertices == (0, 1)
    assert [p.dim for p in polytopes(tet)] == sorted(p.dim for p in polytopes(tet))


def test_reference_vertices():
    np.testing.assert_array_equal(reference_simplex(2).vertices, [[0, 0], [0, 1], [1, 0]])
    np.testing.assert_array_equal(reference_simplex(3).vertices, [[0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0]])


@pytest.mark.parametrize("bad", ["e45", "f12", "x"])
def test_unknown_polytope(bad):
    with pytest.raises(DomainError):
        edge_tangent(reference_simplex(2), bad)


def test_facet_of_wrong_kind():
    with pytest.raises(DomainError):
        facet_normal(reference_simplex(3), "e12")


def test_barycentric_partition():
    s = reference_simplex(3)
    pts = s.sample(s.cell, 20, np.random.default_rng(1))
    lam = s.barycentric(pts)
    np.testing.assert_allclose(lam.sum(axis=1), 1)
    assert (lam > 0).all()
