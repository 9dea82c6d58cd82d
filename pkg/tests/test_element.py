import numpy as np
import pytest

from polytope_fem.element import build_element, curl_element, div_element, evaluate_element, expected_dimension
from polytope_fem.reference import DomainError, reference_simplex
from polytope_fem.templates import NotCoveredError

SUPPORTED = (
    [("n2", p, 2) for p in range(1, 5)]
    + [("bdm", p, 2) for p in range(1, 5)]
    + [("n1", p, 2) for p in range(0, 4)]
    + [("rt", p, 2) for p in range(0, 4)]
    + [("n2", p, 3) for p in range(1, 4)]
    + [("bdm", p, 3) for p in range(1, 4)]
    + [("n1", 0, 3)]
)


@pytest.mark.parametrize("family, p, dim", SUPPORTED)
def test_dimension(family, p, dim):
    assert len(build_element(family, p, dim)) == expected_dimension(family, p, dim)


def test_n2_linear_triangle():
    e = build_element("n2", 1, 2)
    assert len(e) == 6
    assert e.kind_counts() == {"vertex-edge": 6}
    assert e.counts() == {"v1": 2, "v2": 2, "v3": 2}


def test_n1_quadratic_bernstein_breakdown():
    e = build_element("n1", 2, 2, "bernstein")
    assert len(e) == 15
    assert e.kind_counts() == {"lowest-order": 3, "gradient": 7, "vertex-cell": 2, "edge-cell": 3}


def test_bdm_linear_tet():
    e = build_element("bdm", 1, 3)
    assert len(e) == 12
    assert e.kind_counts() == {"vertex-face": 12}
    assert e.counts() == {f"v{i}": 3 for i in range(1, 5)}


def test_lowest_n1_values():
    e = build_element("n1", 0, 2)
    np.testing.assert_allclose(evaluate_element(e, [0, 0])[0], [0, 1])
    np.testing.assert_allclose(curl_element(e, [0.3, 0.1])[[0, 2]], [-2, -2])


def test_lowest_rt_values():
    e = build_element("rt", 0, 2)
    np.testing.assert_allclose(evaluate_element(e, [1 / 3, 1 / 3])[2], [-1 / 3, -1 / 3])
    assert div_element(e, [0.2, 0.2])[0] == pytest.approx(-2)


def test_bdm_vertex_function_divergence():
    e = build_element("bdm", 1, 2)
    x = np.array([0.2, 0.3])
    n_v1 = 1 - x.sum()
    (k,) = [i for i, f in enumerate(e.functions)
            if f.polytope.name == "v1" and np.allclose(e.templates["v1"][f.template].offset(), [0, -1])]
    np.testing.assert_allclose(evaluate_element(e, x)[k], [0, -n_v1])
    assert div_element(e, x)[k] == pytest.approx(1)


@pytest.mark.parametrize("family, p", [("n1", 2), ("n1", 3)])
def test_gradient_kind_is_curl_free(family, p):
    e = build_element(family, p, 2, "bernstein")
    s = reference_simplex(2)
    curls = e.curl(s.sample(s.cell, 8, np.random.default_rng(0)))
    idx = [f.index for f in e.functions if f.kind == "gradient"]
    np.testing.assert_allclose(curls[:, idx], 0, atol=1e-12)


def test_curl_of_scalar_kind_is_div_free():
    e = build_element("rt", 3, 2)
    s = reference_simplex(2)
    div = e.div(s.sample(s.cell, 8, np.random.default_rng(0)))
    idx = [f.index for f in e.functions if f.kind == "curl-of-scalar"]
    assert idx
    np.testing.assert_allclose(div[:, idx], 0, atol=1e-12)


def _fd_jacobian(e, x, h=1e-6):
    d = len(x)
    cols = [(e.evaluate((x + h * v)[None])[0] - e.evaluate((x - h * v)[None])[0]) / (2 * h) for v in np.eye(d)]
    return np.stack(cols, axis=-1)  # (nf, d, d): component, derivative


@pytest.mark.parametrize("family, p, dim", [("n2", 3, 2), ("n1", 2, 2), ("bdm", 2, 2), ("rt", 2, 2),
                                            ("n2", 2, 3), ("bdm", 2, 3), ("n1", 0, 3)])
def test_derivatives_match_finite_differences(family, p, dim):
    e = build_element(family, p, dim, "bernstein")
    s = reference_simplex(dim)
    x = s.sample(s.cell, 1, np.random.default_rng(3))[0]
    D = _fd_jacobian(e, x)
    if e.space == "hdiv":
        np.testing.assert_allclose(e.div(x[None])[0], np.trace(D, axis1=1, axis2=2), atol=1e-7)
    elif dim == 2:
        np.testing.assert_allclose(e.curl(x[None])[0], D[:, 1, 0] - D[:, 0, 1], atol=1e-7)
    else:
        curl = np.stack([D[:, 2, 1] - D[:, 1, 2], D[:, 0, 2] - D[:, 2, 0], D[:, 1, 0] - D[:, 0, 1]], axis=-1)
        np.testing.assert_allclose(e.curl(x[None])[0], curl, atol=1e-7)


@pytest.mark.parametrize("family", ["n2", "bdm"])
def test_degree_is_p(family):
    assert build_element(family, 3, 2).degree == 3


@pytest.mark.parametrize("family, p", [("n1", 1), ("rt", 0), ("rt", 2)])
def test_tet_kernel_families_not_covered(family, p):
    with pytest.raises(NotCoveredError) as info:
        build_element(family, p, 3)
    assert "not covered by the template construction" in str(info.value)


@pytest.mark.parametrize("family, p", [("n2", 0), ("bdm", 0), ("n1", -1)])
def test_invalid_order(family, p):
    with pytest.raises(DomainError):
        build_element(family, p, 2)


def test_element_is_cached():
    assert build_element("n2", 2, 2) is build_element("N2", 2, "triangle")


def test_outside_point_rejected():
    with pytest.raises(DomainError):
        build_element("n2", 1, 2).evaluate([[1.0, 1.0]])
