"""Collapsed-coordinate Gauss rules on the reference triangle and tetrahedron.

The square/cube is mapped onto the simplex by the Duffy transform
``x = a, y = b (1 - a), z = c (1 - a)(1 - b)``; the Jacobian factors
``(1 - a)^k`` are absorbed into Gauss-Jacobi weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .reference import DomainError

__all__ = ["QuadratureRule", "rule", "MAX_DEGREE"]

MAX_DEGREE = {2: 14, 3: 10}


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)

    def integrate(self, values) -> float:
        return float(np.asarray(values) @ self.weights)


def _gauss_jacobi_01(n: int, alpha: int):
    """Nodes/weights on [0, 1] for the weight ``(1 - a)^alpha``."""
    t, w = roots_jacobi(n, alpha, 0)
    return (t + 1) / 2, w / 2 ** (alpha + 1)


@lru_cache(maxsize=None)
def rule(dim: int, degree: int) -> QuadratureRule:
    """Rule exact for polynomials of total degree ``<= degree``."""
    if dim not in MAX_DEGREE:
        raise DomainError(f"quadrature exists for dim 2 and 3, got {dim}")
    if int(degree) != degree or degree < 0 or degree > MAX_DEGREE[dim]:
        raise DomainError(f"quadrature degree must be in 0..{MAX_DEGREE[dim]} for dim {dim}, got {degree}")
    n = max(1, (int(degree) + 2) // 2)
    if dim == 2:
        a, wa = _gauss_jacobi_01(n, 1)
        b, wb = _gauss_jacobi_01(n, 0)
        A, B = np.meshgrid(a, b, indexing="ij")
        pts = np.column_stack([A.ravel(), (B * (1 - A)).ravel()])
        wts = np.outer(wa, wb).ravel()
    else:
        a, wa = _gauss_jacobi_01(n, 2)
        b, wb = _gauss_jacobi_01(n, 1)
        c, wc = _gauss_jacobi_01(n, 0)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        pts = np.column_stack([A.ravel(), (B * (1 - A)).ravel(), (C * (1 - A) * (1 - B)).ravel()])
        wts = np.einsum("i,j,k->ijk", wa, wb, wc).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, int(degree))
