"""H1-conforming scalar bases on the reference simplex, split by polytope.

Both families are written in barycentric coordinates over the multi-indices
``alpha`` with ``|alpha| = p``.  A function belongs to the polytope spanned by
the vertices where ``alpha_i > 0``, which gives the vertex/edge/face/cell
partition and the trace-vanishing structure for free.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product
from math import factorial

import numpy as np

from .reference import DomainError, Polytope, ReferenceSimplex, _as_simplex, polytopes

__all__ = ["ScalarBasis", "build_scalar_basis", "multi_indices", "SCALAR_FAMILIES"]

SCALAR_FAMILIES = ("lagrange", "bernstein")


def multi_indices(nbary: int, p: int) -> list[tuple[int, ...]]:
    """All ``alpha`` with ``nbary`` entries summing to ``p``."""
    return [a for a in product(range(p + 1), repeat=nbary) if sum(a) == p]


def _factor_tables(family: str, p: int, lam: np.ndarray):
    """Per-barycentric 1D factors ``f_a(lambda)`` and derivatives, ``a = 0..p``.

    Lagrange: ``prod_{k<a} (p lambda - k) / (k + 1)`` on the equispaced lattice.
    Bernstein: ``lambda^a / a!`` (the overall ``p!`` is applied by the caller).
    """
    npts, nb = lam.shape
    vals = np.ones((p + 1, npts, nb))
    ders = np.zeros((p + 1, npts, nb))
    for a in range(1, p + 1):
        if family == "lagrange":
            step = (p * lam - (a - 1)) / a
            dstep = p / a
        else:
            step = lam / a
            dstep = 1.0 / a
        vals[a] = vals[a - 1] * step
        ders[a] = ders[a - 1] * step + vals[a - 1] * dstep
    return vals, ders


class ScalarBasis:
    """Order-``p`` Lagrange or Bernstein basis with polytope association.

    Functions are ordered by polytope (vertices, edges, faces, cell) and,
    within a polytope, by descending lexicographic multi-index restricted to
    the polytope's vertices.  Two cells that list a shared edge or face with
    the same ascending global vertices therefore enumerate its functions
    identically.
    """

    def __init__(self, family: str, order: int, simplex):
        family = str(family).lower()
        if family not in SCALAR_FAMILIES:
            raise DomainError(f"unknown scalar family {family!r}; choose from {SCALAR_FAMILIES}")
        if int(order) != order or order < 1:
            raise DomainError(f"scalar basis order must be an integer >= 1, got {order}")
        self.family = family
        self.order = int(order)
        self.simplex: ReferenceSimplex = _as_simplex(simplex)

        alphas = multi_indices(self.simplex.nvertices, self.order)
        polys = polytopes(self.simplex)
        by_poly: dict[Polytope, list] = {poly: [] for poly in polys}
        for alpha in alphas:
            support = tuple(i for i, a in enumerate(alpha) if a > 0)
            key = self.simplex.cell if len(support) == self.simplex.nvertices else Polytope(support)
            by_poly[key].append(alpha)

        ordered, owners, ranks = [], [], []
        for poly in polys:
            members = sorted(by_poly[poly], key=lambda a: [a[i] for i in poly.vertices], reverse=True)
            for rank, alpha in enumerate(members):
                ordered.append(alpha)
                owners.append(poly)
                ranks.append(rank)
        self.multi_indices = np.array(ordered, dtype=int)
        self.polytopes: tuple[Polytope, ...] = tuple(owners)
        self.ranks: tuple[int, ...] = tuple(ranks)
        self._index = {poly: [i for i, o in enumerate(owners) if o == poly] for poly in polys}

    def __len__(self):
        return len(self.multi_indices)

    def __repr__(self):
        return f"ScalarBasis({self.family!r}, {self.order}, {self.simplex.name!r})"

    @property
    def dim(self) -> int:
        return len(self.multi_indices)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(poly.kind for poly in self.polytopes)

    def functions_on(self, poly: Polytope) -> list[int]:
        """Indices of the functions associated with ``poly`` (in basis order)."""
        if poly.kind != "cell" and len(poly.vertices) == self.simplex.nvertices:
            poly = self.simplex.cell
        return list(self._index.get(poly, []))

    def counts(self) -> dict[str, int]:
        return {poly.name: len(idx) for poly, idx in self._index.items()}

    def _tables(self, points):
        pts = self.simplex.check_points(points)
        lam = self.simplex.barycentric(pts)
        return lam, _factor_tables(self.family, self.order, lam)

    def evaluate(self, points) -> np.ndarray:
        """Values at ``points``: ``(nfunc,)`` for one point, else ``(npts, nfunc)``."""
        single = np.ndim(points) == 1
        lam, (vals, _) = self._tables(points)
        nb = lam.shape[1]
        out = np.ones((lam.shape[0], self.dim))
        for i in range(nb):
            out *= vals[self.multi_indices[:, i], :, i].T
        if self.family == "bernstein":
            out *= factorial(self.order)
        return out[0] if single else out

    def gradient(self, points) -> np.ndarray:
        """Reference gradients: ``(nfunc, dim)`` for one point, else ``(npts, nfunc, dim)``."""
        single = np.ndim(points) == 1
        lam, (vals, ders) = self._tables(points)
        nb = lam.shape[1]
        grad_lam = self.simplex.barycentric_gradients
        factors = [vals[self.multi_indices[:, i], :, i].T for i in range(nb)]
        dfactors = [ders[self.multi_indices[:, i], :, i].T for i in range(nb)]
        out = np.zeros((lam.shape[0], self.dim, self.simplex.dim))
        for i in range(nb):
            term = dfactors[i].copy()
            for j in range(nb):
                if j != i:
                    term *= factors[j]
            out += term[:, :, None] * grad_lam[i]
        if self.family == "bernstein":
            out *= factorial(self.order)
        return out[0] if single else out

    def lattice(self) -> np.ndarray:
        """Principal lattice points ``alpha / p`` in basis order (Lagrange nodes)."""
        return (self.multi_indices / self.order) @ self.simplex.vertices


@lru_cache(maxsize=None)
def build_scalar_basis(family: str, order: int, simplex) -> ScalarBasis:
    """Cached constructor; bases are immutable after construction."""
    return ScalarBasis(family, order, simplex)

