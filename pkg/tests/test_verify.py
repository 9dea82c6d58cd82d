import numpy as np
import pytest

from polytope_fem.element import build_element
from polytope_fem.templates import template_set
from polytope_fem.verify import (
    CSV_HEADER,
    ConvergenceReport,
    check_conformity,
    check_kernels,
    check_piola,
    check_span_ranks,
    check_unisolvence,
    fit_slope,
    random_two_cell_mesh,
    run_verification,
)


@pytest.mark.parametrize("dim", [2, 3])
def test_random_two_cell_mesh_shares_one_facet(dim):
    mesh = random_two_cell_mesh(dim, np.random.default_rng(0))
    assert mesh.ncells == 2
    assert len(mesh.interior_facets()) == 1


def test_unisolvence_reports_rank():
    r = check_unisolvence(build_element("n2", 3, 2), seed=0)
    assert r.passed
    assert "dim=20" in r.line()


@pytest.mark.parametrize("family, p, dim", [("n2", 2, 2), ("rt", 1, 2), ("bdm", 1, 3)])
def test_conformity_passes(family, p, dim):
    assert check_conformity(family, p, dim, seed=1).passed


@pytest.mark.parametrize("family, poly", [("n2", "v1"), ("bdm", "e12"), ("n1", "c123")])
def test_conformity_negative_control(family, poly):
    perturbed = template_set(family, 2).perturbed(poly, 0, 1e-3)
    r = check_conformity(family, 2, 2, seed=0, templates=perturbed)
    if poly == "c123":
        # cell templates have no trace; perturbing them must not break conformity
        assert r.passed
    else:
        assert not r.passed
        assert r.value > 1e-5


def test_conformity_sees_both_orientations():
    assert "detJ signs [-1, 1]" in check_conformity("n1", 1, 2, seed=0).detail


@pytest.mark.parametrize("family, p", [("n1", 3), ("rt", 3), ("n2", 2)])
def test_kernels_and_ranks(family, p):
    e = build_element(family, p, 2, "bernstein")
    assert check_kernels(e).passed
    assert check_span_ranks(e).passed


def test_piola_checks():
    results = check_piola(nmaps=5, seed=3)
    assert results and all(r.passed for r in results)


def test_run_verification_names():
    names = [r.name for r in run_verification("bdm", 2, 3)]
    assert names[:2] == ["unisolvence[lagrange]", "unisolvence[bernstein]"]
    assert "conformity" in names


@pytest.mark.parametrize("k", [1, 2.5, 4])
def test_fit_slope_exact_on_power_law(k):
    h = 2.0 / 2 ** np.arange(5)
    assert fit_slope(h, 3 * h**k) == pytest.approx(k, abs=1e-12)
    assert fit_slope(h, 3 * h**k, last=2) == pytest.approx(k, abs=1e-12)


def test_fit_slope_needs_two_points():
    with pytest.raises(ValueError):
        fit_slope([1.0], [1.0])


def _report():
    rep = ConvergenceReport("antiplane", "L1", "N1_0", 0)
    for lvl in range(4):
        h = 2.0 / (2 * 2**lvl)
        rep.add(lvl, h, 10 * 4**lvl, h**2, h)
    return rep


def test_report_csv_is_stable():
    a, b = _report().csv_text(), _report().csv_text()
    assert a == b
    lines = a.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "L1,N1_0,0,0,10,1.000000000000e+00,1.000000000000e+00"


def test_report_levels_increase():
    rep = _report()
    with pytest.raises(ValueError):
        rep.add(2, 0.1, 1, 1.0, 1.0)


def test_report_svg():
    svg = _report().svg()
    assert svg.count("<polyline") == 2
    assert "slope 2.00" in svg and "slope 1.00" in svg


def test_report_write(tmp_path):
    path = tmp_path / "r.csv"
    _report().write_csv(path)
    assert path.read_text() == _report().csv_text()


def test_fitted_derivatives_match_element():
    from polytope_fem.verify import _fitted_derivatives

    e = build_element("rt", 2, 2, "bernstein")
    rng = np.random.default_rng(0)
    pts = rng.dirichlet(np.ones(3), 6)[:, :2]
    idx = list(range(len(e)))
    _, div = _fitted_derivatives(e, idx, pts, rng)
    exact = e.div(pts)
    # the fit is normalised by an unknown sample maximum, so compare shapes
    np.testing.assert_allclose(div / np.abs(div).max(), exact / np.abs(exact).max(), atol=1e-11)
