import math

import numpy as np
import pytest
import scipy.sparse as sp
import sympy as sy

from polytope_fem.mesh import structured_mesh
from polytope_fem.micromorphic import (
    MaterialParams2D,
    MaterialParams3D,
    Pairing,
    SolverError,
    antiplane_solution,
    apply_dirichlet,
    assemble_antiplane,
    assemble_rmm3d,
    get_pairing,
    l2_error,
    patch_solution,
    rmm3d_solution,
    solve,
    solve_problem,
    spd_solve,
    zero_solution,
)
from polytope_fem.reference import DomainError


# --- linear algebra -----------------------------------------------------------


@pytest.mark.parametrize("direct_limit", [10**6, 0])
def test_identity_system(direct_limit):
    b = np.array([1.0, -2.0, 3.5])
    np.testing.assert_allclose(spd_solve(sp.identity(3), b, direct_limit=direct_limit), b)


@pytest.mark.parametrize("direct_limit", [10**6, 0])
def test_two_by_two(direct_limit):
    x = spd_solve(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]), [3.0, 3.0], direct_limit=direct_limit)
    np.testing.assert_allclose(x, [1, 1], atol=1e-9)


def test_cg_failure_reports_history():
    n = 200
    A = sp.diags([-np.ones(n - 1), 2.0001 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()
    with pytest.raises(SolverError) as info:
        spd_solve(A, np.ones(n), maxiter=3, direct_limit=0)
    assert len(info.value.residuals) == 3


def test_non_spd_diagonal_rejected():
    with pytest.raises(SolverError):
        spd_solve(sp.diags([1.0, -1.0]), [1.0, 1.0], direct_limit=0)


# --- manufactured data ----------------------------------------------------------

X, Y, Z = sy.symbols("x y z", real=True)


def _lambdify_check(expr_fn, num_fn, pts):
    f = sy.lambdify((X, Y, Z), expr_fn, "numpy")
    return np.array([np.array(f(*p), dtype=float) for p in pts]), num_fn(pts)


def test_3d_loads_match_strong_form():
    u = sy.Matrix([0, 0, sy.sin(sy.pi * X)])
    g = 10 * (1 - Y**2) * (1 - Z**2) * sy.sin(sy.pi * X)
    P = sy.Matrix([[0, 0, 0], [0, 0, 0], [sy.pi * sy.cos(sy.pi * X), -Z * g, Y * g]])
    v = (X, Y, Z)
    Du = u.jacobian(v)

    def iso(A):
        return A.trace() * sy.eye(3) + (A + A.T)

    def curl_rows(A):
        return sy.Matrix([[sy.diff(A[r, 2], Y) - sy.diff(A[r, 1], Z),
                           sy.diff(A[r, 0], Z) - sy.diff(A[r, 2], X),
                           sy.diff(A[r, 1], X) - sy.diff(A[r, 0], Y)] for r in range(3)])

    sigma = iso(Du - P)
    f = -sy.Matrix([sum(sy.diff(sigma[i, j], v[j]) for j in range(3)) for i in range(3)])
    M = -sigma + iso(P) + curl_rows(curl_rows(P))
    pts = np.random.default_rng(0).uniform(-1, 1, size=(6, 3))
    sol = rmm3d_solution()
    ref_f, num_f = _lambdify_check(f.T, sol.f, pts)
    ref_m, num_m = _lambdify_check(M, sol.m, pts)
    np.testing.assert_allclose(num_f, ref_f.reshape(6, 3), atol=1e-10)
    np.testing.assert_allclose(num_m, ref_m, atol=1e-10)
    np.testing.assert_allclose(sol.p(pts), np.array([np.array(sy.lambdify(v, P)(*p), dtype=float) for p in pts]))


@pytest.mark.parametrize("side", [-1, 1])
def test_antiplane_data_matches_strong_form(side):
    u = (1 - Y**2) * (sy.exp(1 - side * X) - 1)
    # p equals grad u away from the kink
    p = sy.Matrix([-side * (1 - Y**2) * sy.exp(1 - side * X), 2 * Y * (1 - sy.exp(1 - side * X))])
    rot = sy.diff(p[1], X) - sy.diff(p[0], Y)
    grad_u = sy.Matrix([sy.diff(u, X), sy.diff(u, Y)])
    f = -(sy.diff(grad_u[0] - p[0], X) + sy.diff(grad_u[1] - p[1], Y))
    m = -(grad_u - p) + p + sy.Matrix([sy.diff(rot, Y), -sy.diff(rot, X)])
    assert sy.simplify(f) == 0
    assert sy.simplify(m - p) == sy.zeros(2, 1)
    sol = antiplane_solution()
    pts = np.random.default_rng(1).uniform(0.05, 1, size=(5, 2)) * np.array([side, 1])
    np.testing.assert_allclose(sol.u(pts), sy.lambdify((X, Y), u)(pts[:, 0], pts[:, 1]))
    np.testing.assert_allclose(sol.p(pts), np.column_stack(sy.lambdify((X, Y), list(p))(pts[:, 0], pts[:, 1])))
    np.testing.assert_allclose(sol.m(pts), sol.p(pts))


def test_antiplane_tangential_trace_vanishes_on_boundary():
    sol = antiplane_solution()
    t = np.linspace(-1, 1, 11)
    one = np.ones_like(t)
    np.testing.assert_allclose(sol.u(np.column_stack([t, one])), 0)
    np.testing.assert_allclose(sol.p(np.column_stack([t, one]))[:, 0], 0, atol=1e-15)
    np.testing.assert_allclose(sol.p(np.column_stack([one, t]))[:, 1], 0, atol=1e-15)


# --- assembly and constraints ---------------------------------------------------


def _system(dim, name, n=2, solution=None):
    pair = get_pairing(name, dim)
    h1, hc = pair.elements(dim)
    mesh = structured_mesh(dim, n)
    if dim == 2:
        return assemble_antiplane(mesh, h1, hc, MaterialParams2D(), solution or antiplane_solution())
    return assemble_rmm3d(mesh, h1, hc, MaterialParams3D(), solution or rmm3d_solution())


@pytest.mark.parametrize("dim, name", [(2, "l1-n1_0"), (2, "b3-n1_2"), (3, "l2-n2_1")])
def test_matrix_symmetric_positive_semidefinite(dim, name):
    K = _system(dim, name).matrix
    assert abs(K - K.T).max() < 1e-12 * abs(K).max()
    assert np.linalg.eigvalsh(K.toarray()).min() > -1e-10


def test_mu_c_adds_skew_energy():
    pair = get_pairing("l1-n1_0", 3)
    h1, hc = pair.elements(3)
    mesh = structured_mesh(3, 1)
    K0 = assemble_rmm3d(mesh, h1, hc, MaterialParams3D(), zero_solution(3)).matrix
    K1 = assemble_rmm3d(mesh, h1, hc, MaterialParams3D(mu_c=0.5), zero_solution(3)).matrix
    D = (K1 - K0).toarray()
    assert abs(D).max() > 1e-3
    assert np.linalg.eigvalsh(D).min() > -1e-10


@pytest.mark.parametrize("dim", [2, 3])
def test_zero_data_gives_zero_solution(dim):
    name = "l1-n1_0"
    system, coeffs, errs = solve_problem("antiplane" if dim == 2 else "rmm3d", name, 2, solution=zero_solution(dim))
    assert not system.rhs.any()
    assert not coeffs.any()
    assert errs == (0.0, 0.0)


def test_antiplane_boundary_values_vanish():
    system = apply_dirichlet(_system(2, "l2-n2_1"), antiplane_solution())
    assert len(system.constrained)
    np.testing.assert_allclose(system.values, 0, atol=1e-14)


def test_3d_boundary_values_on_top_face():
    # n = 3 keeps mesh nodes off the zeros of sin(pi x)
    system = apply_dirichlet(_system(3, "l1-n1_0", n=3), rmm3d_solution())
    mesh = system.mesh
    assert np.abs(system.values).max() > 0.1
    # microdistortion row 3 on edges of the face y = 1
    row = 2
    base = system.offset_p + row * system.dofs_p.ndofs
    top = {i for i, t in enumerate(system.dofs_p.traces)
           if t is not None and np.allclose(mesh.vertices[list(t), 1], 1.0)}
    vals = dict(zip(system.constrained, system.values))
    assert max(abs(vals[base + i]) for i in top) > 0.1


def test_lowest_order_edge_values_are_circulations():
    system = apply_dirichlet(_system(3, "l1-n1_0", n=3), rmm3d_solution())
    mesh, sol = system.mesh, rmm3d_solution()
    vals = dict(zip(system.constrained, system.values))
    base = system.offset_p + 2 * system.dofs_p.ndofs
    checked = 0
    for i, t in enumerate(system.dofs_p.traces):
        if base + i not in vals:
            continue
        checked += abs(vals[base + i]) > 0.1
        a, b = mesh.vertices[list(t)]
        s, w = np.polynomial.legendre.leggauss(8)
        x = a + np.outer((s + 1) / 2, b - a)
        circ = (w / 2) @ (sol.p(x)[:, 2, :] @ (b - a))
        assert vals[base + i] == pytest.approx(circ, abs=1e-6)  # boundary quadrature of a non-polynomial trace
    assert checked > 0


# --- errors ------------------------------------------------------------------------


def test_zero_coefficients_give_norm_of_exact_solution():
    system = _system(2, "l1-n1_0", n=4)
    eu, ep = l2_error(system, np.zeros(system.size), antiplane_solution())
    e = math.e
    ix = 2 * ((e**2 - 1) / 2 - 2 * (e - 1) + 1)  # int (e^{1-|x|} - 1)^2
    iy = 16 / 15  # int (1 - y^2)^2
    ex2 = e**2 - 1  # int e^{2(1-|x|)}
    y2 = 2 / 3  # int y^2
    assert eu == pytest.approx(math.sqrt(ix * iy), rel=1e-6)
    assert ep == pytest.approx(math.sqrt(ex2 * iy + 4 * y2 * ix), rel=1e-6)


@pytest.mark.parametrize("dim, name", [(2, "l1-n1_0"), (2, "b3-n2_2"), (3, "l1-n1_0"), (3, "b3-n2_2")])
def test_patch_reproduced(dim, name):
    problem = "antiplane" if dim == 2 else "rmm3d"
    sol = patch_solution(dim, seed=7)
    _, _, (eu, ep) = solve_problem(problem, name, 2, solution=sol)
    assert eu < 1e-10 and ep < 1e-10


def test_errors_decrease_under_refinement():
    errs = [solve_problem("antiplane", "l1-n1_0", n)[2] for n in (2, 4, 8)]
    assert all(a[0] > b[0] and a[1] > b[1] for a, b in zip(errs, errs[1:]))


# --- pairings ---------------------------------------------------------------------


def test_pairing_labels():
    pair = get_pairing("B3-N1_2", 2)
    assert (pair.label_u, pair.label_p) == ("B3", "N1_2")


def test_pairing_order_rule():
    with pytest.raises(DomainError):
        Pairing("bad", "lagrange", 2, "n1", 0)


@pytest.mark.parametrize("name, dim", [("b3-n1_2", 3), ("l3-n1_0", 2)])
def test_unavailable_pairings(name, dim):
    with pytest.raises(DomainError):
        get_pairing(name, dim)


def test_unknown_problem():
    with pytest.raises(DomainError):
        solve_problem("plate", "l1-n1_0", 1)


def test_invalid_params():
    with pytest.raises(DomainError):
        MaterialParams2D(mu_e=0)
    with pytest.raises(DomainError):
        MaterialParams3D(mu_c=-1)
