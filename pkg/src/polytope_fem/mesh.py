"""Simplicial meshes and orientation-consistent DOF maps.

Orientation is resolved by global vertex order: every cell is placed on the
reference element with its vertices sorted ascending, so two cells sharing an
edge or face see the same local tangent/normal direction and the same scalar
ordering along it.  Signs are therefore always ``+1``; they are kept in the
DOF map for families that might need them.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from .element import VectorElement
from .piola import AffineMap
from .reference import DomainError, Polytope, reference_simplex
from .scalar import ScalarBasis

__all__ = ["SimplicialMesh", "structured_mesh", "DofMap", "build_dof_map", "boundary_dofs", "write_mesh"]


@dataclass(eq=False)
class SimplicialMesh:
    vertices: np.ndarray
    cells: np.ndarray
    boundary_marker: str = "dirichlet"
    edges: np.ndarray = field(init=False)
    faces: np.ndarray = field(init=False)
    facet_cells: dict = field(init=False, repr=False)
    boundary_facets: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.cells = np.asarray(self.cells, dtype=int)
        d = self.dim
        if self.cells.shape[1] != d + 1:
            raise DomainError(f"cells of a {d}D mesh need {d + 1} vertices, got {self.cells.shape[1]}")
        sc = self._sorted = np.sort(self.cells, axis=1)
        sc.setflags(write=False)
        self.edges = np.unique(np.vstack([sc[:, list(e)] for e in combinations(range(d + 1), 2)]), axis=0)
        if d == 3:
            self.faces = np.unique(np.vstack([sc[:, list(f)] for f in combinations(range(4), 3)]), axis=0)
        else:
            self.faces = np.zeros((0, 3), dtype=int)
        facet_cells: dict[tuple, list[int]] = {}
        for c, verts in enumerate(sc):
            for f in combinations(verts, d):
                facet_cells.setdefault(tuple(int(v) for v in f), []).append(c)
        if any(len(v) > 2 for v in facet_cells.values()):
            raise DomainError("non-manifold mesh: a facet is shared by more than two cells")
        self.facet_cells = facet_cells
        self.boundary_facets = np.array(sorted(f for f, cs in facet_cells.items() if len(cs) == 1), dtype=int).reshape(-1, d)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def ncells(self) -> int:
        return len(self.cells)

    @property
    def sorted_cells(self) -> np.ndarray:
        """Cells with ascending vertex indices (the placement used for every element)."""
        return self._sorted

    @property
    def facets(self) -> np.ndarray:
        return self.edges if self.dim == 2 else self.faces

    def interior_facets(self) -> list[tuple[tuple[int, ...], list[int]]]:
        return [(f, cs) for f, cs in sorted(self.facet_cells.items()) if len(cs) == 2]

    def jacobians(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(J, detJ, origin)`` per cell for the ascending-vertex placement."""
        X = self.vertices[self.sorted_cells]
        V = reference_simplex(self.dim).vertices
        Vinv = np.linalg.inv((V[1:] - V[0]).T)
        J = np.einsum("cki,kj->cij", X[:, 1:] - X[:, :1], Vinv)
        return J, np.linalg.det(J), X[:, 0]

    def cell_map(self, c: int) -> AffineMap:
        return AffineMap.from_vertices(self.vertices[self.sorted_cells[c]], self.dim)

    def volumes(self) -> np.ndarray:
        return np.abs(self.jacobians()[1]) * reference_simplex(self.dim).volume

    def h(self) -> float:
        """Longest edge length."""
        e = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return float(np.sqrt((e ** 2).sum(axis=1)).max())

    def boundary_subpolytopes(self) -> set[tuple[int, ...]]:
        out = set()
        for f in self.boundary_facets:
            f = tuple(int(v) for v in f)
            for k in range(1, len(f) + 1):
                out.update(combinations(f, k))
        return out


def structured_mesh(dim: int, n: int, extent=(-1.0, 1.0)) -> SimplicialMesh:
    """``n^dim`` squares (2 triangles each) or cubes (6 Kuhn tetrahedra each) on ``extent^dim``."""
    if int(n) != n or n < 1:
        raise DomainError(f"mesh resolution must be an integer >= 1, got {n}")
    if dim not in (2, 3):
        raise DomainError(f"structured meshes exist for dim 2 and 3, got {dim}")
    lo, hi = map(float, extent)
    ticks = np.linspace(lo, hi, n + 1)
    grids = np.meshgrid(*([ticks] * dim), indexing="ij")
    coords = np.column_stack([g.ravel() for g in grids])
    shape = (n + 1,) * dim

    def vid(idx):
        return np.ravel_multi_index(tuple(np.asarray(idx).T), shape)

    corners = np.array(np.meshgrid(*([np.arange(n)] * dim), indexing="ij")).reshape(dim, -1).T
    cells = []
    if dim == 2:
        for a, b, c in [((0, 0), (1, 0), (1, 1)), ((0, 0), (1, 1), (0, 1))]:
            cells.append(np.column_stack([vid(corners + np.array(o)) for o in (a, b, c)]))
    else:
        for perm in permutations(range(3)):
            path = [np.zeros(3, dtype=int)]
            for axis in perm:
                step = path[-1].copy()
                step[axis] += 1
                path.append(step)
            cells.append(np.column_stack([vid(corners + p) for p in path]))
    cells = np.stack(cells, axis=1).reshape(-1, dim + 1)
    return SimplicialMesh(coords, cells)


@dataclass(eq=False)
class DofMap:
    cell_dofs: np.ndarray  # (ncells, nlocal)
    signs: np.ndarray  # (ncells, nlocal), all +1 with ascending placement
    ndofs: int
    keys: list  # global key per DOF
    traces: list  # global trace vertex tuple per DOF, None for cell-interior
    boundary: dict[str, np.ndarray]

    @property
    def nlocal(self) -> int:
        return self.cell_dofs.shape[1]


def _local_descriptors(element) -> list[tuple]:
    """``(kind, trace polytope, scalar polytope, rank, ordinal)`` per local function."""
    if isinstance(element, ScalarBasis):
        return [("h1", poly, poly, rank, 0) for poly, rank in zip(element.polytopes, element.ranks)]
    if isinstance(element, VectorElement):
        return [f.dof_key for f in element.functions]
    raise DomainError(f"cannot build a DOF map for {type(element).__name__}")


def build_dof_map(mesh: SimplicialMesh, element) -> DofMap:
    """Global numbering keyed on globally identified polytopes.

    Functions whose trace polytope is the cell are private to the cell.
    """
    simplex = element.simplex
    if simplex.dim != mesh.dim:
        raise DomainError(f"element dimension {simplex.dim} does not match mesh dimension {mesh.dim}")
    desc = _local_descriptors(element)
    cell_poly = simplex.cell
    sc = mesh.sorted_cells
    index: dict[tuple, int] = {}
    keys, traces = [], []
    cell_dofs = np.empty((mesh.ncells, len(desc)), dtype=int)
    for c in range(mesh.ncells):
        verts = sc[c]
        for k, (kind, trace, spoly, rank, ordinal) in enumerate(desc):
            gscalar = tuple(int(verts[i]) for i in spoly.vertices)
            if trace == cell_poly:
                gtrace = None
                key = (kind, ("cell", c), gscalar, rank, ordinal)
            else:
                gtrace = tuple(int(verts[i]) for i in trace.vertices)
                key = (kind, gtrace, gscalar, rank, ordinal)
            dof = index.get(key)
            if dof is None:
                dof = index[key] = len(keys)
                keys.append(key)
                traces.append(gtrace)
            cell_dofs[c, k] = dof
    on_boundary = mesh.boundary_subpolytopes()
    bnd = np.array([i for i, t in enumerate(traces) if t is not None and t in on_boundary], dtype=int)
    return DofMap(cell_dofs, np.ones_like(cell_dofs), len(keys), keys, traces, {mesh.boundary_marker: bnd})


def boundary_dofs(dofmap: DofMap, marker: str = "dirichlet") -> np.ndarray:
    if marker not in dofmap.boundary:
        raise DomainError(f"unknown boundary marker {marker!r}; have {sorted(dofmap.boundary)}")
    return dofmap.boundary[marker]


def write_mesh(mesh: SimplicialMesh, path) -> None:
    """Plain-text export: ``v x y [z]`` lines, then ``c i j k [l]`` lines (0-based)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        for x in mesh.vertices:
            fh.write("v " + " ".join(f"{v:.17g}" for v in x) + "\n")
        for cell in mesh.cells:
            fh.write("c " + " ".join(str(int(i)) for i in cell) + "\n")
