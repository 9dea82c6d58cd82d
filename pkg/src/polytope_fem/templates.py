"""Polytopal template sets as exact rational data.

Each template is an affine vector field ``l(x) = A x + b``.  Constant templates
have ``A = 0``; the N1/RT non-kernel templates are affine combinations of the
lowest-order edge fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .reference import DomainError, Polytope, _as_simplex, polytopes, reference_simplex

__all__ = [
    "Family",
    "NotCoveredError",
    "TemplateField",
    "TemplateSet",
    "template_set",
    "lowest_order_fields",
]


class NotCoveredError(DomainError):
    """The requested (family, dimension) has no template construction."""


class Family(str, Enum):
    N1 = "N1"
    N2 = "N2"
    BDM = "BDM"
    RT = "RT"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise DomainError(f"unknown element family {value!r}; choose from n1, n2, bdm, rt") from None

    @property
    def space(self) -> str:
        return "hcurl" if self in (Family.N1, Family.N2) else "hdiv"

    @property
    def has_kernel_split(self) -> bool:
        return self in (Family.N1, Family.RT)

    def __str__(self):
        return self.value


def _frac_vec(values) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)


@dataclass(frozen=True)
class TemplateField:
    """Affine vector field ``x -> A x + b`` with rational coefficients."""

    A: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]

    @classmethod
    def constant(cls, *values) -> "TemplateField":
        b = _frac_vec(values)
        zero = tuple(tuple(Fraction(0) for _ in b) for _ in b)
        return cls(zero, b)

    @classmethod
    def affine(cls, A, b) -> "TemplateField":
        return cls(tuple(_frac_vec(row) for row in A), _frac_vec(b))

    @property
    def dim(self) -> int:
        return len(self.b)

    @property
    def is_constant(self) -> bool:
        return all(a == 0 for row in self.A for a in row)

    def matrix(self) -> np.ndarray:
        return np.array([[float(a) for a in row] for row in self.A])

    def offset(self) -> np.ndarray:
        return np.array([float(v) for v in self.b])

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix().T + self.offset()

    def rot(self) -> Fraction:
        """Scalar curl ``l_{2,x} - l_{1,y}`` (2D)."""
        return self.A[1][0] - self.A[0][1]

    def curl(self) -> tuple[Fraction, ...]:
        A = self.A
        return (A[2][1] - A[1][2], A[0][2] - A[2][0], A[1][0] - A[0][1])

    def div(self) -> Fraction:
        return sum((self.A[i][i] for i in range(self.dim)), Fraction(0))

    def scaled(self, factor) -> "TemplateField":
        f = Fraction(factor)
        return TemplateField(tuple(tuple(f * a for a in row) for row in self.A), tuple(f * v for v in self.b))

    def __add__(self, other: "TemplateField") -> "TemplateField":
        A = tuple(tuple(a + c for a, c in zip(r1, r2)) for r1, r2 in zip(self.A, other.A))
        return TemplateField(A, tuple(a + c for a, c in zip(self.b, other.b)))

    def __neg__(self) -> "TemplateField":
        return self.scaled(-1)

    def __sub__(self, other: "TemplateField") -> "TemplateField":
        return self + (-other)

    def __str__(self):
        def fmt(q: Fraction) -> str:
            return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"

        coords = "xyz"[: self.dim] if self.dim == 3 else "xy"
        comps = []
        for row, off in zip(self.A, self.b):
            terms = [f"{fmt(a)}*{c}" for a, c in zip(row, coords) if a != 0]
            if off != 0 or not terms:
                terms.append(fmt(off))
            comps.append(" + ".join(terms).replace("+ -", "- ").replace("1*", ""))
        return "(" + ", ".join(comps) + ")"


@dataclass(frozen=True)
class TemplateSet:
    family: Family
    dim: int
    sets: Mapping[Polytope, tuple[TemplateField, ...]]

    def __getitem__(self, poly) -> tuple[TemplateField, ...]:
        if isinstance(poly, str):
            poly = reference_simplex(self.dim).polytope(poly)
        return self.sets.get(poly, ())

    def __iter__(self):
        return iter(self.sets.items())

    def polytopes(self) -> list[Polytope]:
        return list(self.sets)

    def perturbed(self, poly, index: int = 0, eps: float = 1e-3) -> "TemplateSet":
        """Copy with one entry scaled by ``1 + eps`` (negative control for conformity checks)."""
        if isinstance(poly, str):
            poly = reference_simplex(self.dim).polytope(poly)
        sets = dict(self.sets)
        entries = list(sets[poly])
        entries[index] = entries[index].scaled(Fraction(1) + Fraction(eps).limit_denominator(10**12))
        sets[poly] = tuple(entries)
        return TemplateSet(self.family, self.dim, MappingProxyType(sets))


# --- literal data ---------------------------------------------------------

_h = Fraction(1, 2)


def _c(*v):
    return TemplateField.constant(*v)


def _named(dim: int, data: dict[str, list[TemplateField]]) -> dict[Polytope, tuple[TemplateField, ...]]:
    simplex = reference_simplex(dim)
    out = {}
    for poly in polytopes(simplex):
        if poly.name in data:
            out[poly] = tuple(data[poly.name])
    return out


def _triangle_n2():
    e1, e2 = _c(1, 0), _c(0, 1)
    return {
        "v1": [e1, e2],
        "v2": [e1 + e2, e1],
        "v3": [e1 + e2, -e2],
        "e12": [e2, -e1],
        "e13": [e1, e2],
        "e23": [(e1 - e2).scaled(_h), e1 + e2],
        "c123": [e1, e2],
    }


def _triangle_bdm():
    e1, e2 = _c(1, 0), _c(0, 1)
    return {
        "v1": [e1, -e2],
        "v2": [e1 - e2, -e2],
        "v3": [e1 - e2, -e1],
        "e12": [e1, e2],
        "e13": [-e2, e1],
        "e23": [-(e1 + e2).scaled(_h), e2 - e1],
        "c123": [e1, e2],
    }


def _triangle_n1_lowest():
    # edge fields of e12, e13, e23 in that order
    t1 = TemplateField.affine([[0, 1], [-1, 0]], [0, 1])  # (eta, 1 - xi)
    t2 = TemplateField.affine([[0, -1], [1, 0]], [1, 0])  # (1 - eta, xi)
    t3 = TemplateField.affine([[0, 1], [-1, 0]], [0, 0])  # (eta, -xi)
    return t1, t2, t3


def _triangle_rt_lowest():
    f1 = TemplateField.affine([[-1, 0], [0, -1]], [1, 0])  # (1 - xi, -eta)
    f2 = TemplateField.affine([[1, 0], [0, 1]], [0, -1])  # (xi, eta - 1)
    f3 = TemplateField.affine([[-1, 0], [0, -1]], [0, 0])  # (-xi, -eta)
    return f1, f2, f3


def _triangle_n1():
    t1, t2, t3 = _triangle_n1_lowest()
    return {
        "v1": [t3],
        "v2": [t2],
        "e12": [t3 - t2],
        "e13": [t1 + t3],
        "e23": [t1 - t2],
        "c123": [t1 - t2 + t3],
    }


def _triangle_rt():
    f1, f2, f3 = _triangle_rt_lowest()
    return {
        "v1": [-f3],
        "v2": [f2],
        "e12": [f2 - f3],
        "e13": [-f1 - f3],
        "e23": [f2 - f1],
        "c123": [f2 - f1 - f3],
    }


def _tet_n2():
    e1, e2, e3 = _c(1, 0, 0), _c(0, 1, 0), _c(0, 0, 1)
    s = e1 + e2 + e3
    return {
        "v1": [e3, e2, e1],
        "v2": [s, e2, e1],
        "v3": [s, -e3, e1],
        "v4": [s, -e3, -e2],
        "e12": [e3, -e2, -e1],
        "e13": [e2, e3, -e1],
        "e14": [e1, e3, e2],
        "e23": [e2, s, -e1],
        "e24": [e1, s, e2],
        "e34": [e1, s, -e3],
        "f123": [e3, e2, -e1],
        "f124": [e3, e1, e2],
        "f134": [e2, e1, -e3],
        "f234": [e2, e1, s],
        "c1234": [e3, e2, e1],
    }


def _tet_bdm():
    e1, e2, e3 = _c(1, 0, 0), _c(0, 1, 0), _c(0, 0, 1)
    return {
        "v1": [-e1, e2, -e3],
        "v2": [e3 - e1, e2 - e3, -e3],
        "v3": [e2 - e1, e2 - e3, -e2],
        "v4": [e2 - e1, e1 - e3, -e1],
        "e12": [-e1, e2, e3],
        "e13": [-e1, -e3, e2],
        "e14": [e2, -e3, e1],
        "e23": [e3 - e1, -e3, e2 - e3],
        "e24": [e2 - e3, -e3, e1 - e3],
        "e34": [e2 - e3, -e2, e1 - e2],
        "f123": [-e1, e3, e2],
        "f124": [e2, e3, e1],
        "f134": [-e3, e2, e1],
        "f234": [-e3, e2 - e3, e1 - e3],
        "c1234": [e3, e2, e1],
    }


def _tet_n1_lowest():
    """Whitney fields ``lambda_i grad lambda_j - lambda_j grad lambda_i`` per edge (i < j)."""
    # barycentric coordinates on the reference tetrahedron as exact affine maps
    # lambda_1 = 1 - x - y - z, lambda_2 = z, lambda_3 = y, lambda_4 = x
    grads = [(-1, -1, -1), (0, 0, 1), (0, 1, 0), (1, 0, 0)]
    consts = [1, 0, 0, 0]
    fields = []
    for edge in reference_simplex(3).edges:
        i, j = edge.vertices
        gi, gj = _frac_vec(grads[i]), _frac_vec(grads[j])
        A = [[gj[r] * gi[c] - gi[r] * gj[c] for c in range(3)] for r in range(3)]
        b = [consts[i] * gj[r] - consts[j] * gi[r] for r in range(3)]
        fields.append(TemplateField.affine(A, b))
    return tuple(fields)


_TABLES = {
    (Family.N2, 2): _triangle_n2,
    (Family.BDM, 2): _triangle_bdm,
    (Family.N1, 2): _triangle_n1,
    (Family.RT, 2): _triangle_rt,
    (Family.N2, 3): _tet_n2,
    (Family.BDM, 3): _tet_bdm,
}


@lru_cache(maxsize=None)
def template_set(family, dim: int) -> TemplateSet:
    """The polytopal template set of ``family`` on the reference simplex of ``dim``."""
    family = Family.parse(family)
    simplex = _as_simplex(dim)
    key = (family, simplex.dim)
    if key not in _TABLES:
        raise NotCoveredError(
            f"{family} templates on the tetrahedron are not covered by the template construction;"
            " only N2 and BDM exist in 3D (plus the lowest-order N1 edge element)"
        )
    return TemplateSet(family, simplex.dim, MappingProxyType(_named(simplex.dim, _TABLES[key]())))


@lru_cache(maxsize=None)
def lowest_order_fields(family, dim: int) -> tuple[TemplateField, ...]:
    """Lowest-order N1/RT fields, one per edge in reference edge order."""
    family = Family.parse(family)
    simplex = _as_simplex(dim)
    if family == Family.N1:
        return _triangle_n1_lowest() if simplex.dim == 2 else _tet_n1_lowest()
    if family == Family.RT:
        if simplex.dim == 3:
            raise NotCoveredError("RT fields on the tetrahedron are not covered by the template construction")
        return _triangle_rt_lowest()
    raise DomainError(f"lowest-order fields exist only for N1 and RT, not {family}")
