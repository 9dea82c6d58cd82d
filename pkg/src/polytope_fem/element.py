"""Reference vector elements built from scalar polytopal sets and templates.

N2 and BDM: every scalar function of polytope ``P`` is multiplied by every
template of ``T_P``.  N1 and RT: lowest-order edge fields, gradients (rotated
gradients for RT) of the order ``p + 1`` edge and cell scalars, and products of
order ``p`` scalars with the non-kernel templates.

Every function carries a *trace polytope*: the lowest-dimensional polytope on
which its tangential (H(curl)) or normal (H(div)) trace does not vanish.  The
mesh module uses it as the conformity association when numbering DOFs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .reference import (
    ROTATION,
    DomainError,
    Polytope,
    ReferenceSimplex,
    _as_simplex,
    edge_tangent,
    oriented_normal,
    polytopes,
)
from .scalar import ScalarBasis, build_scalar_basis
from .templates import Family, NotCoveredError, TemplateSet, lowest_order_fields, template_set

__all__ = [
    "VectorBasisFunction",
    "VectorElement",
    "build_element",
    "evaluate_element",
    "curl_element",
    "div_element",
    "expected_dimension",
]

_TRACE_TOL = 1e-10


@dataclass(frozen=True)
class VectorBasisFunction:
    index: int
    kind: str
    polytope: Polytope  # polytope of the generating scalar (or edge for lowest-order fields)
    trace: Polytope  # conformity association
    source: str  # "product" | "lowest" | "gradient" | "curl"
    scalar: int | None = None
    scalar_rank: int = 0
    template: int | None = None
    ordinal: int = 0

    @property
    def dof_key(self) -> tuple:
        return (self.kind, self.trace, self.polytope, self.scalar_rank, self.ordinal)


def expected_dimension(family, p: int, dim: int) -> int:
    family = Family.parse(family)
    if dim == 2:
        return (p + 2) * (p + 1) if family in (Family.N2, Family.BDM) else (p + 3) * (p + 1)
    if family in (Family.N2, Family.BDM):
        return (p + 3) * (p + 2) * (p + 1) // 2
    return (p + 4) * (p + 3) * (p + 1) // 2


def _trace_matrices(simplex: ReferenceSimplex, family: Family, poly: Polytope) -> np.ndarray:
    """Rows spanning the trace functionals on ``poly`` (tangents or a normal)."""
    v = simplex.vertices
    if family.space == "hcurl":
        base = poly.vertices[0]
        return np.array([v[k] - v[base] for k in poly.vertices[1:]])
    return oriented_normal(simplex, poly)[None, :]


def _candidate_traces(simplex: ReferenceSimplex, family: Family, poly: Polytope) -> list[Polytope]:
    if family.space == "hcurl":
        pool = list(simplex.edges) + list(simplex.faces)
    else:
        pool = list(simplex.facets)
    return [q for q in pool if q.contains(poly)]


class VectorElement:
    """A complete reference H(curl) or H(div) element.

    ``evaluate`` returns ``(npts, nfunc, dim)``; ``curl`` returns ``(npts, nfunc)``
    in 2D and ``(npts, nfunc, 3)`` in 3D; ``div`` returns ``(npts, nfunc)``.
    """

    def __init__(self, family, order: int, simplex, scalar_family: str = "lagrange", templates: TemplateSet | None = None):
        self.family = Family.parse(family)
        self.simplex = _as_simplex(simplex)
        self.order = int(order)
        self.scalar_family = str(scalar_family).lower()
        d = self.simplex.dim
        if int(order) != order:
            raise DomainError(f"element order must be an integer, got {order}")
        minimum = 0 if self.family.has_kernel_split else 1
        if self.order < minimum:
            raise DomainError(f"{self.family} requires order >= {minimum}, got {order}")
        if self.family.has_kernel_split and d == 3 and not (self.family == Family.N1 and self.order == 0):
            raise NotCoveredError(
                f"{self.family}^{self.order} on the tetrahedron is not covered by the template construction;"
                " only the lowest-order N1 edge element is available in 3D"
            )
        self.templates = templates
        if templates is None and not (d == 3 and self.family == Family.N1):
            self.templates = template_set(self.family, d)

        self.scalar: ScalarBasis | None = (
            build_scalar_basis(self.scalar_family, self.order, self.simplex) if self.order >= 1 else None
        )
        self.kernel_scalar: ScalarBasis | None = None
        if self.family.has_kernel_split:
            self.kernel_scalar = build_scalar_basis(self.scalar_family, self.order + 1, self.simplex)
            self.lowest = lowest_order_fields(self.family, d)
        else:
            self.lowest = ()

        self.functions: list[VectorBasisFunction] = []
        prod, low, kern = [], [], []
        for poly in polytopes(self.simplex):
            if self.family.has_kernel_split:
                if poly.kind == "edge":
                    k = self.simplex.edges.index(poly)
                    low.append((len(self.functions), k))
                    self._append("lowest-order", poly, poly, "lowest", template=k)
                if poly.kind in ("edge", "face", "cell"):
                    kind = "gradient" if self.family == Family.N1 else "curl-of-scalar"
                    src = "gradient" if self.family == Family.N1 else "curl"
                    for s in self.kernel_scalar.functions_on(poly):
                        rank = self.kernel_scalar.ranks[s]
                        kern.append((len(self.functions), s))
                        self._append(kind, poly, poly, src, scalar=s, scalar_rank=rank)
            if self.scalar is None or self.templates is None:
                continue
            entries = self.templates[poly]
            for s in self.scalar.functions_on(poly):
                rank = self.scalar.ranks[s]
                seen: dict[tuple, int] = {}
                for t, field in enumerate(entries):
                    kind, trace = self._classify(poly, s, field)
                    ordinal = seen.get((kind, trace), 0)
                    seen[(kind, trace)] = ordinal + 1
                    prod.append((len(self.functions), s, t, field))
                    self._append(kind, poly, trace, "product", scalar=s, scalar_rank=rank, template=t, ordinal=ordinal)

        self._prod_idx = np.array([r[0] for r in prod], dtype=int)
        self._prod_scalar = np.array([r[1] for r in prod], dtype=int)
        self._prod_A = np.array([r[3].matrix() for r in prod]).reshape(-1, d, d)
        self._prod_b = np.array([r[3].offset() for r in prod]).reshape(-1, d)
        self._prod_curl = np.array([self._field_curl(r[3]) for r in prod]).reshape((-1,) if d == 2 else (-1, 3))
        self._prod_div = np.array([float(r[3].div()) for r in prod])
        self._low_idx = np.array([r[0] for r in low], dtype=int)
        fields = [self.lowest[r[1]] for r in low]
        self._low_A = np.array([f.matrix() for f in fields]).reshape(-1, d, d)
        self._low_b = np.array([f.offset() for f in fields]).reshape(-1, d)
        self._low_curl = np.array([self._field_curl(f) for f in fields]).reshape((-1,) if d == 2 else (-1, 3))
        self._low_div = np.array([float(f.div()) for f in fields])
        self._kern_idx = np.array([r[0] for r in kern], dtype=int)
        self._kern_scalar = np.array([r[1] for r in kern], dtype=int)

    # -- construction helpers ------------------------------------------------

    def _append(self, kind, poly, trace, source, **kw):
        self.functions.append(VectorBasisFunction(len(self.functions), kind, poly, trace, source, **kw))

    def _field_curl(self, field):
        if self.simplex.dim == 2:
            return float(field.rot())
        return [float(c) for c in field.curl()]

    def _classify(self, poly: Polytope, s: int, field) -> tuple[str, Polytope]:
        """Kind and trace polytope of the product ``n_s * field``."""
        rng = np.random.default_rng(12345)
        cell = self.simplex.cell
        if poly == cell:
            return "cell", cell
        hits = []
        for q in sorted(_candidate_traces(self.simplex, self.family, poly), key=lambda q: q.dim):
            if hits and q.dim > hits[0].dim:
                break
            pts = self.simplex.sample(q, 6, rng)
            vals = self.scalar.evaluate(pts)[:, s, None] * field(pts)
            proj = vals @ _trace_matrices(self.simplex, self.family, q).T
            if np.abs(proj).max() > _TRACE_TOL:
                hits.append(q)
        if len(hits) > 1:
            raise DomainError(f"template {field} on {poly!r} has non-vanishing traces on several polytopes {hits}")
        if not hits:
            return f"{poly.kind}-cell", cell
        q = hits[0]
        kind = poly.kind if q == poly else f"{poly.kind}-{q.kind}"
        return kind, q

    # -- introspection ---------------------------------------------------------

    def __len__(self):
        return len(self.functions)

    def __repr__(self):
        return f"VectorElement({self.family}, p={self.order}, {self.simplex.name}, {self.scalar_family}, n={len(self)})"

    @property
    def dim(self) -> int:
        return len(self.functions)

    @property
    def space(self) -> str:
        return self.family.space

    @property
    def kinds(self) -> list[str]:
        return [f.kind for f in self.functions]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for f in self.functions:
            out[f.polytope.name] = out.get(f.polytope.name, 0) + 1
        return out

    def kind_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for f in self.functions:
            out[f.kind] = out.get(f.kind, 0) + 1
        return out

    @property
    def degree(self) -> int:
        """Maximal polynomial degree of any component."""
        return self.order + 1 if self.family.has_kernel_split else self.order

    # -- evaluation -----------------------------------------------------------

    def _prepare(self, points):
        single = np.ndim(points) == 1
        pts = self.simplex.check_points(points)
        return single, pts

    def _product_parts(self, pts):
        N = self.scalar.evaluate(pts)[:, self._prod_scalar]
        G = self.scalar.gradient(pts)[:, self._prod_scalar]
        L = np.einsum("kij,pj->pki", self._prod_A, pts) + self._prod_b
        return N, G, L

    def evaluate(self, points) -> np.ndarray:
        single, pts = self._prepare(points)
        d = self.simplex.dim
        out = np.zeros((len(pts), len(self), d))
        if len(self._prod_idx):
            N, _, L = self._product_parts(pts)
            out[:, self._prod_idx] = N[..., None] * L
        if len(self._low_idx):
            out[:, self._low_idx] = np.einsum("kij,pj->pki", self._low_A, pts) + self._low_b
        if len(self._kern_idx):
            G = self.kernel_scalar.gradient(pts)[:, self._kern_scalar]
            if self.family == Family.RT:
                G = G @ ROTATION.T
            out[:, self._kern_idx] = G
        return out[0] if single else out

    def curl(self, points) -> np.ndarray:
        if self.space != "hcurl":
            raise DomainError(f"curl is defined for H(curl) families, not {self.family}")
        single, pts = self._prepare(points)
        d = self.simplex.dim
        shape = (len(pts), len(self)) if d == 2 else (len(pts), len(self), 3)
        out = np.zeros(shape)
        if len(self._prod_idx):
            N, G, L = self._product_parts(pts)
            if d == 2:
                out[:, self._prod_idx] = G[..., 0] * L[..., 1] - G[..., 1] * L[..., 0] + N * self._prod_curl
            else:
                out[:, self._prod_idx] = np.cross(G, L) + N[..., None] * self._prod_curl
        if len(self._low_idx):
            out[:, self._low_idx] = self._low_curl
        # gradients are curl-free: their entries stay exactly zero
        return out[0] if single else out

    def div(self, points) -> np.ndarray:
        if self.space != "hdiv":
            raise DomainError(f"div is defined for H(div) families, not {self.family}")
        single, pts = self._prepare(points)
        out = np.zeros((len(pts), len(self)))
        if len(self._prod_idx):
            N, G, L = self._product_parts(pts)
            out[:, self._prod_idx] = np.einsum("pki,pki->pk", G, L) + N * self._prod_div
        if len(self._low_idx):
            out[:, self._low_idx] = self._low_div
        return out[0] if single else out

    def trace_functionals(self, poly: Polytope) -> np.ndarray:
        """Rows ``t`` such that ``t . v`` is the tangential/normal trace on ``poly``."""
        return _trace_matrices(self.simplex, self.family, poly)


@lru_cache(maxsize=None)
def _cached_element(family: Family, order: int, dim: int, scalar_family: str) -> VectorElement:
    return VectorElement(family, order, dim, scalar_family)


def build_element(family, p: int, simplex, scalar_family: str = "lagrange", templates: TemplateSet | None = None) -> VectorElement:
    """Reference element of ``family`` and order ``p``.

    Passing ``templates`` overrides the built-in sets; such elements are not cached.
    """
    fam = Family.parse(family)
    dim = _as_simplex(simplex).dim
    if templates is not None:
        return VectorElement(fam, p, dim, scalar_family, templates)
    return _cached_element(fam, int(p), dim, str(scalar_family).lower())


def evaluate_element(element: VectorElement, point) -> np.ndarray:
    return element.evaluate(point)


def curl_element(element: VectorElement, point) -> np.ndarray:
    return element.curl(point)


def div_element(element: VectorElement, point) -> np.ndarray:
    return element.div(point)


def edge_tangents(simplex) -> np.ndarray:
    simplex = _as_simplex(simplex)
    return np.array([edge_tangent(simplex, e) for e in simplex.edges])
