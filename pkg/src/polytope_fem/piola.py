"""Affine reference-to-physical maps and Piola push-forwards.

All push functions broadcast over leading axes, so ``(npts, nfunc, d)``
arrays of reference values can be pushed in one call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reference import DomainError, _as_simplex

__all__ = [
    "AffineMap",
    "covariant_push",
    "contravariant_push",
    "push_curl",
    "push_div",
    "push_gradient",
]


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x(xi) = origin + J xi`` with ``J^{-T}`` cached."""

    origin: np.ndarray
    J: np.ndarray
    detJ: float
    JinvT: np.ndarray

    @classmethod
    def from_matrix(cls, J, origin=None) -> "AffineMap":
        J = np.array(J, dtype=float)
        det = float(np.linalg.det(J))
        if abs(det) < 1e-14 * max(1.0, np.abs(J).max() ** len(J)):
            raise DomainError("degenerate affine map (detJ = 0)")
        origin = np.zeros(len(J)) if origin is None else np.asarray(origin, dtype=float)
        return cls(origin, J, det, np.linalg.inv(J).T)

    @classmethod
    def from_vertices(cls, coords, simplex=None) -> "AffineMap":
        """Map sending the reference vertices, in order, to ``coords``."""
        X = np.asarray(coords, dtype=float)
        simplex = _as_simplex(simplex if simplex is not None else X.shape[1])
        V = simplex.vertices
        J = (X[1:] - X[0]).T @ np.linalg.inv((V[1:] - V[0]).T)
        return cls.from_matrix(J, X[0] - J @ V[0])

    @property
    def dim(self) -> int:
        return len(self.J)

    def __call__(self, xi) -> np.ndarray:
        return np.asarray(xi, dtype=float) @ self.J.T + self.origin

    def inverse(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.origin) @ self.JinvT

    @property
    def cofactor(self) -> np.ndarray:
        return self.detJ * self.JinvT


def covariant_push(amap: AffineMap, value) -> np.ndarray:
    """``J^{-T} v``; preserves tangential traces."""
    return np.asarray(value, dtype=float) @ amap.JinvT.T


def contravariant_push(amap: AffineMap, value) -> np.ndarray:
    """``J v / det J``; preserves normal fluxes."""
    return np.asarray(value, dtype=float) @ amap.J.T / amap.detJ


def push_curl(amap: AffineMap, curl) -> np.ndarray:
    """Physical curl of a covariantly mapped field: ``J c / det J`` (scalar ``c / det J`` in 2D)."""
    curl = np.asarray(curl, dtype=float)
    if amap.dim == 2:
        return curl / amap.detJ
    return curl @ amap.J.T / amap.detJ


def push_div(amap: AffineMap, div) -> np.ndarray:
    """Physical divergence of a contravariantly mapped field."""
    return np.asarray(div, dtype=float) / amap.detJ


def push_gradient(amap: AffineMap, gradient) -> np.ndarray:
    """``J^{-T} grad_xi n``."""
    return covariant_push(amap, gradient)
