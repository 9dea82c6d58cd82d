"""Polytopal-template construction of H(curl) and H(div) finite elements on simplices."""
from .element import VectorBasisFunction, VectorElement, build_element, curl_element, div_element, evaluate_element
from .mesh import DofMap, SimplicialMesh, boundary_dofs, build_dof_map, structured_mesh, write_mesh
from .micromorphic import (
    PAIRINGS,
    DiscreteSystem,
    ManufacturedSolution,
    MaterialParams2D,
    MaterialParams3D,
    antiplane_solution,
    apply_dirichlet,
    assemble_antiplane,
    assemble_rmm3d,
    l2_error,
    patch_solution,
    rmm3d_solution,
    solve,
    solve_problem,
)
from .piola import AffineMap, contravariant_push, covariant_push, push_curl, push_div, push_gradient
from .quadrature import QuadratureRule, rule
from .reference import (
    ROTATION,
    DomainError,
    Polytope,
    ReferenceSimplex,
    edge_tangent,
    facet_normal,
    oriented_normal,
    polytopes,
    reference_simplex,
)
from .scalar import ScalarBasis, build_scalar_basis
from .templates import Family, NotCoveredError, TemplateField, TemplateSet, lowest_order_fields, template_set
from .verify import ConvergenceReport, fit_slope, run_verification

__version__ = "0.1.0"
