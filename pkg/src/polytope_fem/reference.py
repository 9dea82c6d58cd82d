"""Reference triangle and tetrahedron with their polytope decomposition.

Vertex coordinates follow a fixed convention that the template sets depend on:

* triangle:    v1 = (0, 0),    v2 = (0, 1),    v3 = (1, 0)
* tetrahedron: v1 = (0, 0, 0), v2 = (0, 0, 1), v3 = (0, 1, 0), v4 = (1, 0, 0)

Polytopes store 0-based local vertex indices in ascending order; their
``name`` uses the customary 1-based labels (``v1``, ``e12``, ``f123``, ...).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

__all__ = [
    "DomainError",
    "Polytope",
    "ReferenceSimplex",
    "ROTATION",
    "reference_simplex",
    "edge_tangent",
    "facet_normal",
    "oriented_normal",
    "polytopes",
]

#: constant 2x2 rotation used for the scalar curl ``R grad u = (u_y, -u_x)``
ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])
ROTATION.setflags(write=False)

_KINDS = {1: "vertex", 2: "edge", 3: "face"}


class DomainError(ValueError):
    """Raised for arguments outside an operation's domain."""


@dataclass(frozen=True, order=True)
class Polytope:
    """A sub-simplex of a reference cell identified by its sorted vertices."""

    vertices: tuple[int, ...]
    kind: str = field(compare=False, default="")

    def __post_init__(self):
        verts = tuple(int(v) for v in self.vertices)
        if list(verts) != sorted(set(verts)):
            raise DomainError(f"polytope vertices must be strictly ascending: {verts}")
        object.__setattr__(self, "vertices", verts)
        if not self.kind:
            object.__setattr__(self, "kind", _KINDS.get(len(verts), "cell"))

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    @property
    def name(self) -> str:
        prefix = {"vertex": "v", "edge": "e", "face": "f", "cell": "c"}[self.kind]
        return prefix + "".join(str(v + 1) for v in self.vertices)

    def __repr__(self):
        return self.name

    def contains(self, other: "Polytope") -> bool:
        return set(other.vertices) <= set(self.vertices)


@dataclass(frozen=True, eq=False)
class ReferenceSimplex:
    dim: int
    vertices: np.ndarray
    edges: tuple[Polytope, ...]
    faces: tuple[Polytope, ...]
    cell: Polytope

    @property
    def name(self) -> str:
        return "triangle" if self.dim == 2 else "tetrahedron"

    @property
    def nvertices(self) -> int:
        return self.dim + 1

    @property
    def volume(self) -> float:
        return 0.5 if self.dim == 2 else 1.0 / 6.0

    @property
    def facets(self) -> tuple[Polytope, ...]:
        return self.edges if self.dim == 2 else self.faces

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def vertex(self, i: int) -> Polytope:
        return Polytope((i,))

    def polytope(self, name: str) -> Polytope:
        """Look up a polytope by label, e.g. ``"e23"`` or ``"c123"``."""
        for poly in polytopes(self):
            if poly.name == name:
                return poly
        raise DomainError(f"{name!r} is not a polytope of the reference {self.name}")

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts >= -tol).all(axis=1) & (pts.sum(axis=1) <= 1.0 + tol)

    def check_points(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        flat = np.atleast_2d(pts)
        if flat.shape[-1] != self.dim:
            raise DomainError(f"expected points of dimension {self.dim}, got shape {pts.shape}")
        inside = self.contains(flat, tol)
        if not inside.all():
            bad = flat[~inside][0]
            raise DomainError(f"point {tuple(bad)} lies outside the reference {self.name}")
        return flat

    def barycentric(self, points) -> np.ndarray:
        """Barycentric coordinates ``(npts, dim + 1)``; column ``i`` belongs to v_{i+1}."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        coeffs, offsets = _barycentric_affine(self.dim)
        return pts @ coeffs.T + offsets

    @property
    def barycentric_gradients(self) -> np.ndarray:
        """Constant gradients of the barycentric coordinates, ``(dim + 1, dim)``."""
        return _barycentric_affine(self.dim)[0]

    def contains_polytope(self, poly: Polytope) -> bool:
        return max(poly.vertices) < self.nvertices

    def sample(self, poly: Polytope, count: int, rng=None) -> np.ndarray:
        """Points on the closed polytope, ``count`` of them, drawn uniformly."""
        rng = np.random.default_rng(rng)
        weights = rng.dirichlet(np.ones(len(poly.vertices)), size=count)
        return weights @ self.vertices[list(poly.vertices)]


@lru_cache(maxsize=None)
def _barycentric_affine(dim: int):
    verts = _VERTICES[dim]
    # lambda(x) = C x + c with lambda(v_k) = e_k
    system = np.hstack([verts, np.ones((dim + 1, 1))])
    inv = np.linalg.inv(system)
    coeffs = inv[:dim].T.copy()
    offsets = inv[dim].copy()
    coeffs.setflags(write=False)
    offsets.setflags(write=False)
    return coeffs, offsets


_VERTICES = {
    2: np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]),
    3: np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
}
for _v in _VERTICES.values():
    _v.setflags(write=False)


@lru_cache(maxsize=None)
def reference_simplex(dim: int) -> ReferenceSimplex:
    if dim not in _VERTICES:
        raise DomainError(f"only triangles (2) and tetrahedra (3) are supported, got dim={dim}")
    n = dim + 1
    edges = tuple(Polytope(e) for e in combinations(range(n), 2))
    faces = tuple(Polytope(f) for f in combinations(range(n), 3)) if dim == 3 else ()
    cell = Polytope(tuple(range(n)), kind="cell")
    return ReferenceSimplex(dim, _VERTICES[dim], edges, faces, cell)


def _as_simplex(simplex) -> ReferenceSimplex:
    if isinstance(simplex, ReferenceSimplex):
        return simplex
    if simplex in ("triangle", 2):
        return reference_simplex(2)
    if simplex in ("tetrahedron", 3):
        return reference_simplex(3)
    raise DomainError(f"unknown reference simplex {simplex!r}")


def _resolve(simplex: ReferenceSimplex, poly) -> Polytope:
    if isinstance(poly, str):
        return simplex.polytope(poly)
    if not isinstance(poly, Polytope):
        poly = Polytope(tuple(poly))
    if not simplex.contains_polytope(poly):
        raise DomainError(f"{poly!r} is not a polytope of the reference {simplex.name}")
    if poly.kind != "cell" and len(poly.vertices) == simplex.nvertices:
        poly = simplex.cell
    return poly


def polytopes(simplex) -> list[Polytope]:
    """Vertices, edges, faces (3D) and the cell, in that order."""
    simplex = _as_simplex(simplex)
    verts = [Polytope((i,)) for i in range(simplex.nvertices)]
    return verts + list(simplex.edges) + list(simplex.faces) + [simplex.cell]


def edge_tangent(simplex, edge) -> np.ndarray:
    """Unnormalized tangent ``v_j - v_i`` of edge ``(i, j)``, ``i < j``."""
    simplex = _as_simplex(simplex)
    edge = _resolve(simplex, edge)
    if edge.kind != "edge":
        raise DomainError(f"{edge!r} is not an edge")
    i, j = edge.vertices
    return simplex.vertices[j] - simplex.vertices[i]


def oriented_normal(simplex, facet) -> np.ndarray:
    """Facet normal induced by the ascending vertex order.

    ``R (v_j - v_i)`` on a triangle edge, ``(v_j - v_i) x (v_k - v_i)`` on a
    tetrahedron face. This is the orientation the H(div) templates are built
    against and it transforms consistently across neighbouring cells, so it
    need not point outward.
    """
    simplex = _as_simplex(simplex)
    facet = _resolve(simplex, facet)
    if facet.dim != simplex.dim - 1:
        raise DomainError(f"{facet!r} is not a facet of the reference {simplex.name}")
    v = simplex.vertices
    if simplex.dim == 2:
        i, j = facet.vertices
        return ROTATION @ (v[j] - v[i])
    i, j, k = facet.vertices
    return np.cross(v[j] - v[i], v[k] - v[i])


def facet_normal(simplex, facet) -> np.ndarray:
    """Outward facet normal with the magnitude of :func:`oriented_normal`."""
    simplex = _as_simplex(simplex)
    facet = _resolve(simplex, facet)
    normal = oriented_normal(simplex, facet)
    midpoint = simplex.vertices[list(facet.vertices)].mean(axis=0)
    if normal @ (simplex.centroid - midpoint) > 0:
        normal = -normal
    return normal


def facet_orientation(simplex, facet) -> int:
    """``+1`` if the oriented normal points outward, ``-1`` otherwise."""
    simplex = _as_simplex(simplex)
    return int(np.sign(oriented_normal(simplex, facet) @ facet_normal(simplex, facet)))
