"""Property checks for reference elements and convergence-study reporting."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .element import VectorElement, build_element, expected_dimension
from .mesh import SimplicialMesh, build_dof_map
from .plot import loglog_svg
from .piola import AffineMap, contravariant_push, covariant_push, push_curl, push_div, push_gradient
from .reference import _as_simplex, edge_tangent, oriented_normal
from .scalar import build_scalar_basis
from .templates import Family, TemplateSet

__all__ = [
    "CheckResult",
    "check_unisolvence",
    "check_conformity",
    "check_kernels",
    "check_span_ranks",
    "check_piola",
    "run_verification",
    "random_two_cell_mesh",
    "ConvergenceReport",
    "fit_slope",
    "CSV_HEADER",
]

UNISOLVENCE_RTOL = 1e-8
CONFORMITY_TOL = 1e-10
KERNEL_TOL = 1e-12
FD_TOL = 1e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail}"


def _interior_points(dim: int, count: int, rng) -> np.ndarray:
    # strictly interior barycentric samples
    return rng.dirichlet(np.ones(dim + 1), size=count)[:, :dim]


def _pushed_values(element: VectorElement, amap: AffineMap, ref_pts) -> np.ndarray:
    vals = element.evaluate(ref_pts)
    if element.space == "hcurl":
        return covariant_push(amap, vals)
    return contravariant_push(amap, vals)


def check_unisolvence(element: VectorElement, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    n, d = len(element), element.simplex.dim
    pts = _interior_points(d, n, rng)
    mat = element.evaluate(pts).transpose(1, 0, 2).reshape(n, -1)
    sv = np.linalg.svd(mat, compute_uv=False)
    ratio = float(sv[-1] / sv[0]) if len(sv) == n else 0.0
    expected = expected_dimension(element.family, element.order, d)
    ok = ratio > UNISOLVENCE_RTOL and n == expected
    return CheckResult(
        "unisolvence",
        ok,
        ratio,
        f"{element.family}^{element.order} {element.scalar_family} dim={n} (expected {expected}), sigma_min/sigma_max={ratio:.3e}",
    )


def random_two_cell_mesh(dim: int, rng) -> SimplicialMesh:
    """Two cells sharing a facet, random vertex placement and random global numbering."""
    while True:
        shared = rng.uniform(-1, 1, size=(dim, dim))
        centre = shared.mean(axis=0)
        if dim == 2:
            normal = np.array([shared[1, 1] - shared[0, 1], shared[0, 0] - shared[1, 0]])
        else:
            normal = np.cross(shared[1] - shared[0], shared[2] - shared[0])
        if np.linalg.norm(normal) < 0.2:
            continue
        normal /= np.linalg.norm(normal)
        tip_a = centre + rng.uniform(0.3, 1.0) * normal + 0.3 * rng.uniform(-1, 1, dim)
        tip_b = centre - rng.uniform(0.3, 1.0) * normal + 0.3 * rng.uniform(-1, 1, dim)
        pts = np.vstack([shared, tip_a, tip_b])
        perm = rng.permutation(dim + 2)
        coords = np.empty_like(pts)
        coords[perm] = pts
        cells = np.array([list(perm[:dim]) + [perm[dim]], list(perm[:dim]) + [perm[dim + 1]]])
        mesh = SimplicialMesh(coords, cells)
        if np.all(mesh.volumes() > 1e-3):
            return mesh


def _facet_trace_rows(mesh: SimplicialMesh, facet, space: str) -> np.ndarray:
    X = mesh.vertices[list(facet)]
    if space == "hcurl":
        return X[1:] - X[0]
    if mesh.dim == 2:
        t = X[1] - X[0]
        return np.array([[t[1], -t[0]]])
    return np.cross(X[1] - X[0], X[2] - X[0])[None, :]


def facet_jump(mesh: SimplicialMesh, element: VectorElement, npoints: int = 10, rng=None) -> tuple[float, float]:
    """Largest trace jump of any global basis function across interior facets, and the trace scale."""
    rng = np.random.default_rng(rng)
    dm = build_dof_map(mesh, element)
    worst, scale = 0.0, 0.0
    for facet, (ca, cb) in mesh.interior_facets():
        w = rng.dirichlet(np.ones(len(facet)), size=npoints)
        x = w @ mesh.vertices[list(facet)]
        rows = _facet_trace_rows(mesh, facet, element.space)
        traces = []
        for c in (ca, cb):
            amap = mesh.cell_map(c)
            ref = np.clip(amap.inverse(x), 0.0, 1.0)
            vals = _pushed_values(element, amap, ref) @ rows.T  # (npts, nloc, ntr)
            glob = np.zeros((npoints, dm.ndofs, rows.shape[0]))
            np.add.at(glob, (slice(None), dm.cell_dofs[c]), vals * dm.signs[c][None, :, None])
            traces.append(glob)
        worst = max(worst, float(np.abs(traces[0] - traces[1]).max()))
        scale = max(scale, float(np.abs(traces[0]).max()), float(np.abs(traces[1]).max()))
    return worst, scale


def check_conformity(family, p: int, dim: int, seed: int = 0, meshes: int = 6, scalar_family: str = "lagrange",
                     templates: TemplateSet | None = None) -> CheckResult:
    element = build_element(family, p, dim, scalar_family, templates=templates)
    rng = np.random.default_rng(seed)
    worst, signs = 0.0, set()
    for _ in range(meshes):
        mesh = random_two_cell_mesh(dim, rng)
        signs.update(np.sign(mesh.jacobians()[1]).astype(int).tolist())
        jump, scale = facet_jump(mesh, element, rng=rng)
        worst = max(worst, jump / max(scale, 1e-300))
    ok = worst < CONFORMITY_TOL
    return CheckResult(
        "conformity",
        ok,
        worst,
        f"{element.family}^{p} dim={dim} max relative trace jump {worst:.3e} over {meshes} meshes, detJ signs {sorted(signs)}",
    )


def _fitted_derivatives(element: VectorElement, idx, pts, rng) -> tuple[np.ndarray, np.ndarray]:
    """``(rot, div)`` at ``pts`` of a tensor-Legendre fit to sampled values of functions ``idx`` (2D).

    Independent of the analytic product-rule derivatives used by the element.
    Both are scaled by the largest sampled value, since the fit error is relative.
    """
    leg = np.polynomial.legendre
    deg = element.degree
    fit_pts = _interior_points(2, 4 * (deg + 1) ** 2, rng)
    V = leg.legvander2d(*(2 * fit_pts.T - 1), [deg, deg])
    vals = element.evaluate(fit_pts)[:, idx, :].reshape(len(fit_pts), -1)
    coef = np.linalg.lstsq(V, vals, rcond=None)[0].T.reshape(len(idx), 2, deg + 1, deg + 1)
    s, t = 2 * pts.T - 1

    def d(c, axis):
        return leg.legval2d(s, t, leg.legder(c, axis=axis) * 2)

    scale = float(np.abs(vals).max()) or 1.0
    rot = np.array([d(c[1], 0) - d(c[0], 1) for c in coef]).T / scale
    div = np.array([d(c[0], 0) + d(c[1], 1) for c in coef]).T / scale
    return rot, div


def check_kernels(element: VectorElement, seed: int = 0, npoints: int = 25) -> CheckResult:
    """Kernel functions must be curl-free (N1) or divergence-free (RT).

    On the triangle the derivatives also come from a polynomial fit of the
    sampled values (relative to their size); the larger deviation is reported.
    """
    rng = np.random.default_rng(seed)
    d = element.simplex.dim
    pts = _interior_points(d, npoints, rng)
    if element.family == Family.N1:
        idx = [f.index for f in element.functions if f.kind == "gradient"]
        what = "curl of gradients"
    elif element.family == Family.RT:
        idx = [f.index for f in element.functions if f.kind == "curl-of-scalar"]
        what = "div of rotated gradients"
    else:
        return CheckResult("kernel", True, 0.0, f"{element.family} has no kernel functions")
    if not idx:
        return CheckResult("kernel", True, 0.0, f"{what}: no kernel functions at order {element.order}")
    analytic = element.curl(pts)[:, idx] if element.family == Family.N1 else element.div(pts)[:, idx]
    worst = float(np.abs(analytic).max())
    if d == 2:
        rot, div = _fitted_derivatives(element, idx, pts, rng)
        worst = max(worst, float(np.abs(rot if element.family == Family.N1 else div).max()))
    return CheckResult("kernel", worst < KERNEL_TOL, worst, f"{what}: max {worst:.3e} over {len(idx)} functions")


def _dim_pk(k: int, dim: int = 2) -> int:
    if k < 0:
        return 0
    return math.comb(k + dim, dim)


def check_span_ranks(element: VectorElement, seed: int = 0) -> CheckResult:
    """Rank of the sampled rot (H(curl)) or div (H(div)) image versus the exact-sequence target."""
    d = element.simplex.dim
    p = element.order
    if element.family in (Family.N2, Family.BDM):
        target = _dim_pk(p - 1, d) if d == 2 else None
    else:
        target = _dim_pk(p, d) if d == 2 else None
    if target is None:
        return CheckResult("span-rank", True, 0.0, "span rank targets are checked on the triangle only")
    rng = np.random.default_rng(seed)
    pts = _interior_points(d, 3 * len(element) + 10, rng)
    image = element.curl(pts) if element.space == "hcurl" else element.div(pts)
    sv = np.linalg.svd(image, compute_uv=False)
    rank = int((sv > 1e-9 * sv[0]).sum())
    op = "rot" if element.space == "hcurl" else "div"
    return CheckResult("span-rank", rank == target, rank, f"rank {op} {element.family}^{p} = {rank} (target {target})")


def _random_map(dim: int, rng) -> AffineMap:
    while True:
        J = rng.uniform(-2, 2, size=(dim, dim))
        if abs(np.linalg.det(J)) > 0.2:
            return AffineMap.from_matrix(J, rng.uniform(-1, 1, dim))


def _fd_physical(fun, x, h=1e-6):
    """Central-difference Jacobian ``d fun_i / d x_j`` at each row of ``x``."""
    d = x.shape[1]
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def check_piola(nmaps: int = 20, seed: int = 0) -> list[CheckResult]:
    """Circulation/flux preservation and commuting-diagram identities on random affine maps."""
    rng = np.random.default_rng(seed)
    circ = flux = curl_err = div_err = grad_err = 0.0
    for m in range(nmaps):
        dim = 2 if m % 2 == 0 else 3
        simplex = _as_simplex(dim)
        amap = _random_map(dim, rng)
        hcurl = build_element("n2", 2, dim)
        hdiv = build_element("bdm", 2, dim)
        scalar = build_scalar_basis("lagrange", 3, dim)
        pts = _interior_points(dim, 10, rng) * 0.8 + 0.1 / (dim + 1)
        for edge in simplex.edges:
            tau = edge_tangent(simplex, edge)
            ref = hcurl.evaluate(pts) @ tau
            phys = covariant_push(amap, hcurl.evaluate(pts)) @ (amap.J @ tau)
            circ = max(circ, float(np.abs(ref - phys).max()))
        for facet in simplex.facets:
            nu = oriented_normal(simplex, facet)
            ref = hdiv.evaluate(pts) @ nu
            phys = contravariant_push(amap, hdiv.evaluate(pts)) @ (amap.cofactor @ nu)
            flux = max(flux, float(np.abs(ref - phys).max()))
        x = amap(pts)

        def hcurl_phys(y):
            return covariant_push(amap, hcurl.evaluate(amap.inverse(y)))

        def hdiv_phys(y):
            return contravariant_push(amap, hdiv.evaluate(amap.inverse(y)))

        D = _fd_physical(hcurl_phys, x)  # (npts, nf, d, d)
        if dim == 2:
            fd_curl = D[..., 1, 0] - D[..., 0, 1]
        else:
            fd_curl = np.stack([D[..., 2, 1] - D[..., 1, 2], D[..., 0, 2] - D[..., 2, 0], D[..., 1, 0] - D[..., 0, 1]], axis=-1)
        curl_err = max(curl_err, float(np.abs(push_curl(amap, hcurl.curl(pts)) - fd_curl).max()))
        D = _fd_physical(hdiv_phys, x)
        fd_div = np.trace(D, axis1=-2, axis2=-1)
        div_err = max(div_err, float(np.abs(push_div(amap, hdiv.div(pts)) - fd_div).max()))
        G = _fd_physical(lambda y: scalar.evaluate(amap.inverse(y)), x)
        grad_err = max(grad_err, float(np.abs(push_gradient(amap, scalar.gradient(pts)) - G).max()))
    return [
        CheckResult("piola-circulation", circ < 1e-12, circ, f"max |<v,tau> - <J^-T v, J tau>| = {circ:.3e}"),
        CheckResult("piola-flux", flux < 1e-12, flux, f"max |<v,nu> - <J v/detJ, cof(J) nu>| = {flux:.3e}"),
        CheckResult("piola-curl", curl_err < FD_TOL, curl_err, f"push_curl vs finite differences {curl_err:.3e}"),
        CheckResult("piola-div", div_err < FD_TOL, div_err, f"push_div vs finite differences {div_err:.3e}"),
        CheckResult("piola-gradient", grad_err < FD_TOL, grad_err, f"push_gradient vs finite differences {grad_err:.3e}"),
    ]


def run_verification(family, p: int, dim: int, seed: int = 0, scalar_families=("lagrange", "bernstein")) -> list[CheckResult]:
    """Unisolvence, conformity, kernel and span checks for one (family, p, dim)."""
    results = []
    for sf in scalar_families:
        element = build_element(family, p, dim, sf)
        r = check_unisolvence(element, seed)
        r.name = f"unisolvence[{sf}]"
        results.append(r)
    element = build_element(family, p, dim, scalar_families[-1])
    results.append(check_conformity(family, p, dim, seed, scalar_family=scalar_families[-1]))
    results.append(check_kernels(element, seed))
    results.append(check_span_ranks(element, seed))
    return results


# --- convergence reporting -------------------------------------------------

CSV_HEADER = ["family_u", "family_p", "p", "refine", "dofs", "err_u", "err_p"]


def fit_slope(h, err, last: int = 3) -> float:
    """Least-squares slope of ``log(err)`` against ``log(h)`` over the final ``last`` points."""
    h = np.asarray(h, dtype=float)[-last:]
    err = np.asarray(err, dtype=float)[-last:]
    if len(h) < 2:
        raise ValueError("need at least two levels to fit a slope")
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)


@dataclass
class ConvergenceReport:
    problem: str
    family_u: str
    family_p: str
    order: int
    levels: list[int] = field(default_factory=list)
    h: list[float] = field(default_factory=list)
    dofs: list[int] = field(default_factory=list)
    err_u: list[float] = field(default_factory=list)
    err_p: list[float] = field(default_factory=list)

    def add(self, level: int, h: float, dofs: int, err_u: float, err_p: float):
        if self.levels and level <= self.levels[-1]:
            raise ValueError("levels must be strictly increasing")
        self.levels.append(level)
        self.h.append(h)
        self.dofs.append(dofs)
        self.err_u.append(err_u)
        self.err_p.append(err_p)

    def slopes(self, last: int = 3) -> tuple[float, float]:
        return fit_slope(self.h, self.err_u, last), fit_slope(self.h, self.err_p, last)

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for lvl, n, eu, ep in zip(self.levels, self.dofs, self.err_u, self.err_p):
            writer.writerow([self.family_u, self.family_p, self.order, lvl, n, f"{eu:.12e}", f"{ep:.12e}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    def svg(self, last: int = 3) -> str:
        su, sp = self.slopes(min(last, len(self.h)))
        title = f"{self.problem}: {self.family_u} x {self.family_p}"
        return loglog_svg(
            self.h,
            [("u", self.err_u, f"slope {su:.2f}"), ("p", self.err_p, f"slope {sp:.2f}")],
            title=title,
        )
