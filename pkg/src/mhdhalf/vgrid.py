"""Graded vertical grid on the truncated half line [0, h].

Nodes cluster at the wall x2 = 0 (sinh grading) because the half-line Green
kernels exp(-omega*x2) are boundary layers.  The grid carries trapezoid
quadrature weights (summing exactly to h) and Fornberg finite-difference
matrices for first and second derivatives with one-sided closures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = ["VerticalGrid", "fornberg_weights"]


def fornberg_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights for the m-th derivative at x0 from samples at nodes x.

    Fornberg's recursive algorithm; returns shape (m+1, len(x)) with row k
    holding the k-th derivative weights.
    """
    n = len(x)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = ((x[i] - x0) * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = (x[i] - x0) * c[0, j] / c3
        c1 = c2
    return c


def _diff_matrix(nodes: np.ndarray, order: int, stencil: int) -> np.ndarray:
    """Dense differentiation matrix with centered stencils, one-sided at edges."""
    n = len(nodes)
    half = stencil // 2
    d = np.zeros((n, n))
    for i in range(n):
        lo = min(max(i - half, 0), n - stencil)
        sl = slice(lo, lo + stencil)
        d[i, sl] = fornberg_weights(nodes[i], nodes[sl], order)[order]
    return d


@dataclass(frozen=True, eq=False)
class VerticalGrid:
    """Strictly increasing nodes on [0, h] with positive quadrature weights.

    Instances compare by identity so they can key caches of derived
    operators (differentiation matrices, kernel quadrature stencils).
    """

    nodes: np.ndarray
    h: float
    fd_order: int = 4
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes[0] != 0.0:
            raise ValueError("first node must sit on the wall x2 = 0")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        w = np.empty_like(nodes)
        d = np.diff(nodes)
        w[0] = d[0] / 2.0
        w[-1] = d[-1] / 2.0
        w[1:-1] = (nodes[2:] - nodes[:-2]) / 2.0
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", w)

    @classmethod
    def graded(cls, n2: int, h: float, strength: float = 3.0, fd_order: int = 4):
        """Canonical sinh-graded grid; strength 0 degenerates to uniform."""
        s = np.linspace(0.0, 1.0, n2)
        if strength <= 0.0:
            nodes = h * s
        else:
            nodes = h * np.sinh(strength * s) / np.sinh(strength)
        nodes[0], nodes[-1] = 0.0, h
        return cls(nodes=nodes, h=float(h), fd_order=fd_order)

    @property
    def n2(self) -> int:
        return len(self.nodes)

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def d1(self) -> np.ndarray:
        """First-derivative matrix (fd_order accurate, one-sided closures)."""
        return _diff_matrix(self.nodes, 1, self.fd_order + 1)

    @cached_property
    def d2(self) -> np.ndarray:
        """Direct second-derivative matrix (fd_order accurate)."""
        return _diff_matrix(self.nodes, 2, self.fd_order + 1)

    @cached_property
    def d2_sym(self) -> np.ndarray:
        """Quadrature-adjoint second derivative -W^{-1} D1^T W D1.

        Satisfies <d2_sym u, v>_W = -<d1 u, d1 v>_W exactly, so a viscous
        update built on it dissipates the discrete energy at exactly the rate
        ||d1 u||_W^2 (the discrete counterpart of integration by parts).
        """
        w = self.weights
        return -(self.d1.T * w[None, :]) @ self.d1 / w[:, None]

    def integrate(self, values: np.ndarray, axis: int = -1):
        """Quadrature of nodal values along the vertical axis."""
        values = np.asarray(values)
        return np.tensordot(values, self.weights, axes=([axis], [0]))

    def l2_norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(self.integrate(np.abs(values) ** 2).real))
