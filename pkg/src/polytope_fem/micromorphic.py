"""Relaxed micromorphic model problems: assembly, constraints, solve, errors.

Two settings are covered:

* antiplane shear on (-1, 1)^2 with ``u in H1`` and ``p in H(curl)``;
* the full 3D continuum on (-1, 1)^3 with ``u in [H1]^3`` and each row of
  ``P`` in ``H(curl)``.

Unknowns are stacked component-major: the displacement block first (one copy
of the scalar DOF map per component), then the microdistortion block (one
copy of the H(curl) DOF map per row).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .element import VectorElement, build_element
from .mesh import DofMap, SimplicialMesh, build_dof_map, structured_mesh
from .quadrature import MAX_DEGREE, rule
from .reference import DomainError
from .scalar import ScalarBasis, build_scalar_basis

__all__ = [
    "MaterialParams2D",
    "MaterialParams3D",
    "ManufacturedSolution",
    "DiscreteSystem",
    "PAIRINGS",
    "PAIRINGS_3D",
    "get_pairing",
    "Pairing",
    "SolverError",
    "antiplane_solution",
    "rmm3d_solution",
    "patch_solution",
    "zero_solution",
    "assemble_antiplane",
    "assemble_rmm3d",
    "apply_dirichlet",
    "solve",
    "spd_solve",
    "l2_error",
    "solve_problem",
]

DIRECT_LIMIT = 20000
_CHUNK_BYTES = 64 * 2**20


class SolverError(RuntimeError):
    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass(frozen=True)
class MaterialParams2D:
    mu_e: float = 1.0
    mu_micro: float = 1.0
    mu_macro: float = 1.0
    L_c: float = 1.0

    def __post_init__(self):
        if min(self.mu_e, self.mu_micro, self.mu_macro) <= 0 or self.L_c < 0:
            raise DomainError("shear moduli must be positive and L_c non-negative")


@dataclass(frozen=True)
class MaterialParams3D:
    lambda_e: float = 1.0
    mu_e: float = 1.0
    lambda_micro: float = 1.0
    mu_micro: float = 1.0
    mu_c: float = 0.0
    mu_macro: float = 1.0
    L_c: float = 1.0

    def __post_init__(self):
        if min(self.mu_e, self.mu_micro, self.mu_macro) <= 0 or self.mu_c < 0 or self.L_c < 0:
            raise DomainError("mu_e, mu_micro, mu_macro must be positive; mu_c and L_c non-negative")

    @staticmethod
    def _iso(lam, mu, A):
        sym = 0.5 * (A + np.swapaxes(A, -1, -2))
        tr = np.trace(A, axis1=-2, axis2=-1)
        return lam * tr[..., None, None] * np.eye(3) + 2 * mu * sym

    def C_e(self, A):
        return self._iso(self.lambda_e, self.mu_e, A)

    def C_micro(self, A):
        return self._iso(self.lambda_micro, self.mu_micro, A)

    def C_c(self, A):
        return self.mu_c * (A - np.swapaxes(A, -1, -2))


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact fields and loads; ``p`` is a vector (2D) or a 3x3 tensor field (3D)."""

    name: str
    dim: int
    u: Callable
    p: Callable
    f: Callable
    m: Callable


# --- manufactured solutions -------------------------------------------------


def antiplane_solution() -> ManufacturedSolution:
    """Kinked antiplane field with a normal jump of ``p`` across x = 0 (unit parameters)."""

    def u(x):
        return (1 - x[:, 1] ** 2) * (np.exp(1 - np.abs(x[:, 0])) - 1)

    def p(x):
        X, Y = x[:, 0], x[:, 1]
        s = np.where(X <= 0, 1.0, -1.0)
        ex = np.exp(1 - np.abs(X))
        return np.column_stack([s * (1 - Y**2) * ex, 2 * Y * (1 - ex)])

    def f(x):
        return np.zeros(len(x))

    return ManufacturedSolution("antiplane", 2, u, p, f, p)


def rmm3d_solution() -> ManufacturedSolution:
    """``u = (0, 0, sin pi x)`` with a curl-carrying microdistortion (unit parameters, mu_c = 0)."""
    pi = math.pi

    def u(x):
        out = np.zeros((len(x), 3))
        out[:, 2] = np.sin(pi * x[:, 0])
        return out

    def p(x):
        X, Y, Z = x.T
        out = np.zeros((len(x), 3, 3))
        out[:, 2, 0] = pi * np.cos(pi * X)
        g = 10 * (1 - Y**2) * (1 - Z**2) * np.sin(pi * X)
        out[:, 2, 1] = -Z * g
        out[:, 2, 2] = Y * g
        return out

    def f(x):
        X, Y, Z = x.T
        s, c = np.sin(pi * X), np.cos(pi * X)
        return np.column_stack([
            10 * pi * Y * (Y**2 - 1) * (Z**2 - 1) * c,
            20 * (Z**2 - Y**2) * s,
            20 * Y * Z * (3 * Y**2 - Z**2 - 2) * s,
        ])

    def m(x):
        X, Y, Z = x.T
        s, c = np.sin(pi * X), np.cos(pi * X)
        q = (Y**2 - 1) * (Z**2 - 1)
        out = np.zeros((len(x), 3, 3))
        out[:, 0, 0] = 20 * Y * q * s
        out[:, 1, 1] = 20 * Y * q * s
        out[:, 0, 2] = pi * c
        out[:, 1, 2] = -20 * Z * q * s
        out[:, 2, 0] = pi * (20 * Y**3 * Z - 20 * Y * Z**3 + 1) * c
        out[:, 2, 1] = -10 * Z * (pi**2 * q + 2 * Y**2 * Z**2 - 14 * Y**2 - 2 * Z**2 + 10) * s
        out[:, 2, 2] = 10 * Y * (pi**2 * q + 6 * Y**2 * Z**2 - 6 * Y**2 - 18 * Z**2 + 14) * s
        return out

    return ManufacturedSolution("rmm3d", 3, u, p, f, m)


def patch_solution(dim: int, params=None, seed: int = 0) -> ManufacturedSolution:
    """Linear ``u`` and constant ``p`` (not equal to the gradient) with matching constant loads."""
    rng = np.random.default_rng(seed)
    if dim == 2:
        params = params or MaterialParams2D()
        a, g, p0 = rng.normal(), rng.normal(size=2), rng.normal(size=2)
        m0 = -params.mu_e * (g - p0) + params.mu_micro * p0
        return ManufacturedSolution(
            "patch2d",
            2,
            lambda x: a + x @ g,
            lambda x: np.tile(p0, (len(x), 1)),
            lambda x: np.zeros(len(x)),
            lambda x: np.tile(m0, (len(x), 1)),
        )
    params = params or MaterialParams3D()
    a, B, P0 = rng.normal(size=3), rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    E = B - P0
    M0 = -params.C_e(E) - params.C_c(E) + params.C_micro(P0)
    return ManufacturedSolution(
        "patch3d",
        3,
        lambda x: a + x @ B.T,
        lambda x: np.tile(P0, (len(x), 1, 1)),
        lambda x: np.zeros((len(x), 3)),
        lambda x: np.tile(M0, (len(x), 1, 1)),
    )


def zero_solution(dim: int) -> ManufacturedSolution:
    if dim == 2:
        z = lambda x: np.zeros(len(x))  # noqa: E731
        zv = lambda x: np.zeros((len(x), 2))  # noqa: E731
        return ManufacturedSolution("zero2d", 2, z, zv, z, zv)
    zv = lambda x: np.zeros((len(x), 3))  # noqa: E731
    zt = lambda x: np.zeros((len(x), 3, 3))  # noqa: E731
    return ManufacturedSolution("zero3d", 3, zv, zt, zv, zt)


# --- element pairings -------------------------------------------------------


@dataclass(frozen=True)
class Pairing:
    name: str
    scalar_family: str
    scalar_order: int
    hcurl_family: str
    hcurl_order: int

    def __post_init__(self):
        if self.scalar_order != self.hcurl_order + 1:
            raise DomainError(f"pairing {self.name}: scalar order must be H(curl) order + 1")

    @property
    def label_u(self) -> str:
        return f"{self.scalar_family[0].upper()}{self.scalar_order}"

    @property
    def label_p(self) -> str:
        return f"{self.hcurl_family.upper()}_{self.hcurl_order}"

    def elements(self, dim: int) -> tuple[ScalarBasis, VectorElement]:
        h1 = build_scalar_basis(self.scalar_family, self.scalar_order, dim)
        hc = build_element(self.hcurl_family, self.hcurl_order, dim, self.scalar_family)
        return h1, hc


PAIRINGS = {
    "l1-n1_0": Pairing("l1-n1_0", "lagrange", 1, "n1", 0),
    "l2-n2_1": Pairing("l2-n2_1", "lagrange", 2, "n2", 1),
    "b3-n1_2": Pairing("b3-n1_2", "bernstein", 3, "n1", 2),
    "b3-n2_2": Pairing("b3-n2_2", "bernstein", 3, "n2", 2),
}
PAIRINGS_3D = ("l1-n1_0", "l2-n2_1", "b3-n2_2")


def get_pairing(name: str, dim: int) -> Pairing:
    key = str(name).lower()
    if key not in PAIRINGS:
        raise DomainError(f"unknown pairing {name!r}; choose from {sorted(PAIRINGS)}")
    if dim == 3 and key not in PAIRINGS_3D:
        raise DomainError(f"pairing {name!r} is not available in 3D; choose from {list(PAIRINGS_3D)}")
    return PAIRINGS[key]


# --- discrete system --------------------------------------------------------


@dataclass(eq=False)
class DiscreteSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    mesh: SimplicialMesh
    h1: ScalarBasis
    hcurl: VectorElement
    dofs_u: DofMap
    dofs_p: DofMap
    ncomp: int  # displacement components (1 in 2D, 3 in 3D)
    nrows: int  # microdistortion rows (1 in 2D, 3 in 3D)
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def offset_p(self) -> int:
        return self.ncomp * self.dofs_u.ndofs

    @property
    def size(self) -> int:
        return self.offset_p + self.nrows * self.dofs_p.ndofs

    def u_index(self, comp: int) -> np.ndarray:
        return comp * self.dofs_u.ndofs + np.arange(self.dofs_u.ndofs)

    def p_index(self, row: int) -> np.ndarray:
        return self.offset_p + row * self.dofs_p.ndofs + np.arange(self.dofs_p.ndofs)

    def cell_dofs(self) -> np.ndarray:
        """Global unknowns per cell in local order ``[u comps..., p rows...]``."""
        nu, np_ = self.dofs_u.ndofs, self.dofs_p.ndofs
        blocks = [self.dofs_u.cell_dofs + r * nu for r in range(self.ncomp)]
        blocks += [self.dofs_p.cell_dofs + self.offset_p + r * np_ for r in range(self.nrows)]
        return np.hstack(blocks)


def _quadrature_degree(h1: ScalarBasis, hc: VectorElement, extra: int = 2) -> int:
    deg = max(h1.order, hc.degree)
    return min(2 * deg + extra, MAX_DEGREE[h1.simplex.dim])


@dataclass(eq=False)
class _Tabulation:
    """Physical basis data on a chunk of cells: arrays indexed ``[cell, qp, func, ...]``."""

    x: np.ndarray
    w: np.ndarray
    u_val: np.ndarray
    u_grad: np.ndarray
    p_val: np.ndarray
    p_curl: np.ndarray


def _tabulate(mesh, h1, hc, qrule, cells):
    J, det, origin = mesh.jacobians()
    J, det, origin = J[cells], det[cells], origin[cells]
    JinvT = np.linalg.inv(J).transpose(0, 2, 1)
    pts = qrule.points
    x = origin[:, None, :] + np.einsum("cij,qj->cqi", J, pts)
    w = np.abs(det)[:, None] * qrule.weights[None, :]
    N = h1.evaluate(pts)
    G = np.einsum("cij,qnj->cqni", JinvT, h1.gradient(pts))
    V = np.einsum("cij,qnj->cqni", JinvT, hc.evaluate(pts))
    C = hc.curl(pts)
    if mesh.dim == 2:
        Cp = C[None] / det[:, None, None]
    else:
        Cp = np.einsum("cij,qnj->cqni", J, C) / det[:, None, None, None]
    return _Tabulation(x, w, np.broadcast_to(N, (len(cells),) + N.shape), G, V, Cp)


def _chunks(ncells: int, per_cell_bytes: int):
    size = max(1, _CHUNK_BYTES // max(per_cell_bytes, 1))
    for start in range(0, ncells, size):
        yield np.arange(start, min(ncells, start + size))


def _scatter(rows, vals, shape):
    dofs = rows
    I = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    Jc = np.tile(dofs, (1, dofs.shape[1])).ravel()
    return sp.coo_matrix((vals.ravel(), (I, Jc)), shape=shape).tocsr()


def _check_pair(mesh, h1, hc, dim):
    if mesh.dim != dim:
        raise DomainError(f"expected a {dim}D mesh, got {mesh.dim}D")
    if h1.simplex.dim != dim or hc.simplex.dim != dim:
        raise DomainError("element dimension does not match the mesh")
    if hc.space != "hcurl":
        raise DomainError(f"the microdistortion needs an H(curl) element, got {hc.family}")


def assemble_antiplane(mesh: SimplicialMesh, h1: ScalarBasis, hc: VectorElement, params: MaterialParams2D,
                       solution: ManufacturedSolution) -> DiscreteSystem:
    """Bilinear form ``mu_e <grad du - dp, grad u - p> + mu_micro <dp, p> + mu_macro Lc^2 rot dp rot p``."""
    _check_pair(mesh, h1, hc, 2)
    du, dp = build_dof_map(mesh, h1), build_dof_map(mesh, hc)
    system = DiscreteSystem(None, None, mesh, h1, hc, du, dp, 1, 1)
    qrule = rule(2, _quadrature_degree(h1, hc))
    nu, npl = len(h1), len(hc)
    nloc = nu + npl
    cdofs = system.cell_dofs()
    kc = params.mu_macro * params.L_c**2
    Ks, rhs = [], np.zeros(system.size)
    for cells in _chunks(mesh.ncells, len(qrule) * nloc * 8 * 12):
        t = _tabulate(mesh, h1, hc, qrule, cells)
        nc, nq = len(cells), len(qrule)
        sw = np.sqrt(t.w)[:, :, None, None]
        feats = np.zeros((nc, nq, nloc, 5))
        feats[:, :, :nu, :2] = math.sqrt(params.mu_e) * t.u_grad
        feats[:, :, nu:, :2] = -math.sqrt(params.mu_e) * t.p_val
        feats[:, :, nu:, 2:4] = math.sqrt(params.mu_micro) * t.p_val
        feats[:, :, nu:, 4] = math.sqrt(kc) * t.p_curl
        B = (sw * feats).transpose(0, 2, 1, 3).reshape(nc, nloc, -1)
        K = B @ B.transpose(0, 2, 1)
        Ks.append(_scatter(cdofs[cells], K, (system.size,) * 2))
        xf = t.x.reshape(-1, 2)
        fval = solution.f(xf).reshape(nc, nq)
        mval = solution.m(xf).reshape(nc, nq, 2)
        b = np.zeros((nc, nloc))
        b[:, :nu] = np.einsum("cq,cqi,cq->ci", t.w, t.u_val, fval)
        b[:, nu:] = np.einsum("cq,cqik,cqk->ci", t.w, t.p_val, mval)
        np.add.at(rhs, cdofs[cells], b)
    system.matrix = sum(Ks[1:], Ks[0]).tocsr()
    system.rhs = rhs
    return system


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _skew(A):
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def assemble_rmm3d(mesh: SimplicialMesh, h1: ScalarBasis, hc: VectorElement, params: MaterialParams3D,
                   solution: ManufacturedSolution) -> DiscreteSystem:
    """Full relaxed micromorphic form with row-wise H(curl) microdistortion."""
    _check_pair(mesh, h1, hc, 3)
    du, dp = build_dof_map(mesh, h1), build_dof_map(mesh, hc)
    system = DiscreteSystem(None, None, mesh, h1, hc, du, dp, 3, 3)
    qrule = rule(3, _quadrature_degree(h1, hc))
    nu, npl = len(h1), len(hc)
    nloc = 3 * nu + 3 * npl
    cdofs = system.cell_dofs()
    kc = params.mu_macro * params.L_c**2
    Ks, rhs = [], np.zeros(system.size)
    for cells in _chunks(mesh.ncells, len(qrule) * nloc * 8 * 120):
        t = _tabulate(mesh, h1, hc, qrule, cells)
        nc, nq = len(cells), len(qrule)
        # per local unknown: D u (as 3x3), P (3x3), Curl P (3x3)
        Du = np.zeros((nc, nq, nloc, 3, 3))
        P = np.zeros((nc, nq, nloc, 3, 3))
        Cu = np.zeros((nc, nq, nloc, 3, 3))
        for r in range(3):
            su = slice(r * nu, (r + 1) * nu)
            sp_ = slice(3 * nu + r * npl, 3 * nu + (r + 1) * npl)
            Du[:, :, su, r, :] = t.u_grad
            P[:, :, sp_, r, :] = t.p_val
            Cu[:, :, sp_, r, :] = t.p_curl
        E = Du - P
        # K = B B^T with B stacking square-root-weighted strain measures
        parts = [
            math.sqrt(2 * params.mu_e) * _sym(E).reshape(nc, nq, nloc, 9),
            math.sqrt(params.lambda_e) * np.trace(E, axis1=-2, axis2=-1)[..., None],
            math.sqrt(2 * params.mu_micro) * _sym(P).reshape(nc, nq, nloc, 9),
            math.sqrt(params.lambda_micro) * np.trace(P, axis1=-2, axis2=-1)[..., None],
            math.sqrt(kc) * Cu.reshape(nc, nq, nloc, 9),
        ]
        if params.mu_c:
            parts.append(math.sqrt(2 * params.mu_c) * _skew(E).reshape(nc, nq, nloc, 9))
        feats = np.concatenate(parts, axis=-1) * np.sqrt(t.w)[:, :, None, None]
        B = feats.transpose(0, 2, 1, 3).reshape(nc, nloc, -1)
        K = B @ B.transpose(0, 2, 1)
        Ks.append(_scatter(cdofs[cells], K, (system.size,) * 2))
        xf = t.x.reshape(-1, 3)
        fval = solution.f(xf).reshape(nc, nq, 3)
        mval = solution.m(xf).reshape(nc, nq, 3, 3)
        b = np.zeros((nc, nloc))
        for r in range(3):
            b[:, r * nu:(r + 1) * nu] = np.einsum("cq,cqi,cq->ci", t.w, t.u_val, fval[..., r])
            s = slice(3 * nu + r * npl, 3 * nu + (r + 1) * npl)
            b[:, s] = np.einsum("cq,cqik,cqk->ci", t.w, t.p_val, mval[:, :, r, :])
        np.add.at(rhs, cdofs[cells], b)
    system.matrix = sum(Ks[1:], Ks[0]).tocsr()
    system.rhs = rhs
    return system


# --- Dirichlet data -----------------------------------------------------------


def _subsimplex_points(coords: np.ndarray, degree: int):
    """Quadrature points/weights on a physical segment or triangle given by its vertices."""
    k = len(coords) - 1
    if k == 1:
        t, w = np.polynomial.legendre.leggauss(max(1, (degree + 2) // 2))
        lam = np.column_stack([(1 - t) / 2, (1 + t) / 2])
        w = w / 2
    else:
        q = rule(2, min(degree, MAX_DEGREE[2]))
        lam = np.column_stack([1 - q.points.sum(axis=1), q.points])
        w = q.weights * 2
    return lam @ coords, w


def _boundary_polytope_owner(mesh: SimplicialMesh) -> dict[tuple, int]:
    """One cell per boundary sub-polytope (vertices, edges, faces of boundary facets)."""
    vertex_cells: dict[int, list[int]] = {}
    for c, verts in enumerate(mesh.sorted_cells):
        for v in verts:
            vertex_cells.setdefault(int(v), []).append(c)
    owner = {}
    for poly in mesh.boundary_subpolytopes():
        for c in vertex_cells[poly[0]]:
            if set(poly) <= set(mesh.sorted_cells[c].tolist()):
                owner[poly] = c
                break
    return owner


def _trace_rows(mesh: SimplicialMesh, poly: tuple) -> np.ndarray:
    X = mesh.vertices[list(poly)]
    return X[1:] - X[0]


def _local_traces(mesh, element, c, poly, pts, kind):
    amap = mesh.cell_map(c)
    ref = amap.inverse(pts)
    if kind == "h1":
        return element.evaluate(ref)  # (npts, nloc)
    vals = element.evaluate(ref) @ amap.JinvT.T  # covariant push
    return vals @ _trace_rows(mesh, poly).T  # (npts, nloc, ntan)


def _project_boundary(mesh, element, dofmap: DofMap, target, kind: str, degree: int, nodal: bool = False) -> dict[int, float]:
    """Boundary DOF values by hierarchical per-polytope L2 projection of the trace of ``target``.

    ``target(x)`` returns values (H1) or vectors (H(curl)); polytopes are processed
    in increasing dimension so lower-dimensional DOFs are fixed first.
    """
    owner = _boundary_polytope_owner(mesh)
    bset = set(dofmap.boundary[mesh.boundary_marker].tolist())
    values: dict[int, float] = {}
    if nodal:
        lattice = element.lattice()
        for poly, c in owner.items():
            amap = mesh.cell_map(c)
            for k, g in enumerate(dofmap.cell_dofs[c]):
                if g in bset and g not in values and dofmap.traces[g] == poly:
                    values[int(g)] = float(target(amap(lattice[k])[None, :])[0])
        return values
    for poly in sorted(owner, key=lambda q: (len(q), q)):
        c = owner[poly]
        dofs = dofmap.cell_dofs[c]
        own = [k for k, g in enumerate(dofs) if dofmap.traces[g] == poly]
        if not own:
            continue
        sub = {q for r in range(1, len(poly)) for q in combinations(poly, r)}
        fixed = [k for k, g in enumerate(dofs) if dofmap.traces[g] in sub]
        if len(poly) == 1:
            x = mesh.vertices[list(poly)]
            w = np.ones(1)
        else:
            x, w = _subsimplex_points(mesh.vertices[list(poly)], degree)
        tr = _local_traces(mesh, element, c, poly, x, kind)
        if kind == "h1":
            goal = target(x)
            tr = tr[:, :, None]
            goal = goal[:, None]
        else:
            goal = target(x) @ _trace_rows(mesh, poly).T
        for k in fixed:
            goal = goal - values[int(dofs[k])] * tr[:, k, :]
        A = (tr[:, own, :] * np.sqrt(w)[:, None, None]).transpose(0, 2, 1).reshape(-1, len(own))
        b = (goal * np.sqrt(w)[:, None]).reshape(-1)
        coef = np.linalg.lstsq(A, b, rcond=None)[0]
        for k, v in zip(own, coef):
            values[int(dofs[k])] = float(v)
    return values


def apply_dirichlet(system: DiscreteSystem, solution: ManufacturedSolution) -> DiscreteSystem:
    """Fix boundary DOFs from the exact traces; stored for symmetric elimination in :func:`solve`."""
    mesh, h1, hc = system.mesh, system.h1, system.hcurl
    degree = _quadrature_degree(h1, hc, extra=4)
    idx, vals = [], []
    nodal = h1.family == "lagrange"
    for r in range(system.ncomp):
        if system.ncomp == 1:
            target = solution.u
        else:
            target = (lambda rr: (lambda x: solution.u(x)[:, rr]))(r)
        fixed = _project_boundary(mesh, h1, system.dofs_u, target, "h1", degree, nodal=nodal)
        for g, v in fixed.items():
            idx.append(r * system.dofs_u.ndofs + g)
            vals.append(v)
    for r in range(system.nrows):
        if system.nrows == 1:
            target = solution.p
        else:
            target = (lambda rr: (lambda x: solution.p(x)[:, rr, :]))(r)
        fixed = _project_boundary(mesh, hc, system.dofs_p, target, "hcurl", degree)
        for g, v in fixed.items():
            idx.append(system.offset_p + r * system.dofs_p.ndofs + g)
            vals.append(v)
    order = np.argsort(idx)
    system.constrained = np.asarray(idx, dtype=int)[order]
    system.values = np.asarray(vals, dtype=float)[order]
    return system


# --- solve ---------------------------------------------------------------------


def spd_solve(A, b, rtol: float = 1e-10, maxiter: int | None = None, direct_limit: int = DIRECT_LIMIT) -> np.ndarray:
    """Sparse direct solve for small systems, Jacobi-preconditioned CG otherwise."""
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    if n < direct_limit:
        return np.atleast_1d(spla.spsolve(A.tocsc(), b))
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix has non-positive diagonal entries; not SPD")
    M = sp.diags(1.0 / diag)
    history = []
    bnorm = np.linalg.norm(b) or 1.0

    def track(xk):
        history.append(float(np.linalg.norm(b - A @ xk) / bnorm))

    x, info = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter or 20 * n, M=M, callback=track)
    if info != 0:
        raise SolverError(f"CG did not converge in {info} iterations (last relative residual {history[-1]:.3e})", history)
    return x


def solve(system: DiscreteSystem, **kw) -> np.ndarray:
    """Eliminate constrained DOFs symmetrically and solve the remaining SPD system."""
    n = system.size
    K, b = system.matrix, system.rhs
    fixed = system.constrained
    free = np.setdiff1d(np.arange(n), fixed)
    x = np.zeros(n)
    x[fixed] = system.values
    Kff = K[free][:, free]
    rhs = b[free] - K[free][:, fixed] @ system.values
    x[free] = spd_solve(Kff, rhs, **kw)
    return x


# --- errors ----------------------------------------------------------------------


def l2_error(system: DiscreteSystem, coeffs: np.ndarray, solution: ManufacturedSolution) -> tuple[float, float]:
    """``(||u - u_h||, ||p - p_h||)`` in L2 (Frobenius norm for the 3D tensor)."""
    mesh, h1, hc = system.mesh, system.h1, system.hcurl
    d = mesh.dim
    qrule = rule(d, min(2 * max(h1.order, hc.degree) + 4, MAX_DEGREE[d]))
    cu = np.stack([coeffs[system.u_index(r)] for r in range(system.ncomp)], axis=-1)  # (nu_glob, ncomp)
    cp = np.stack([coeffs[system.p_index(r)] for r in range(system.nrows)], axis=-1)
    eu = ep = 0.0
    for cells in _chunks(mesh.ncells, len(qrule) * (len(h1) + len(hc)) * 8 * 8):
        t = _tabulate(mesh, h1, hc, qrule, cells)
        xf = t.x.reshape(-1, d)
        nc, nq = len(cells), len(qrule)
        uh = np.einsum("cqi,cir->cqr", t.u_val, cu[system.dofs_u.cell_dofs[cells]])
        ph = np.einsum("cqik,cir->cqrk", t.p_val, cp[system.dofs_p.cell_dofs[cells]])
        ue = solution.u(xf).reshape(nc, nq, system.ncomp)
        pe = solution.p(xf).reshape(nc, nq, system.nrows, d)
        eu += float(np.einsum("cq,cqr->", t.w, (uh - ue) ** 2))
        ep += float(np.einsum("cq,cqrk->", t.w, (ph - pe) ** 2))
    return math.sqrt(eu), math.sqrt(ep)


def solve_problem(problem: str, pairing, n: int, params=None, solution: ManufacturedSolution | None = None, **kw):
    """Mesh, assemble, constrain, solve and measure one refinement level.

    Returns ``(system, coeffs, (err_u, err_p))``.
    """
    dim = 2 if problem == "antiplane" else 3
    if problem not in ("antiplane", "rmm3d"):
        raise DomainError(f"unknown problem {problem!r}; choose antiplane or rmm3d")
    if not isinstance(pairing, Pairing):
        pairing = get_pairing(pairing, dim)
    h1, hc = pairing.elements(dim)
    mesh = structured_mesh(dim, n)
    if dim == 2:
        params = params or MaterialParams2D()
        solution = solution or antiplane_solution()
        system = assemble_antiplane(mesh, h1, hc, params, solution)
    else:
        params = params or MaterialParams3D()
        solution = solution or rmm3d_solution()
        system = assemble_rmm3d(mesh, h1, hc, params, solution)
    apply_dirichlet(system, solution)
    coeffs = solve(system, **kw)
    return system, coeffs, l2_error(system, coeffs, solution)
