"""Gauss-Hermite quadrature against the standard normal density.

Rules are in probabilists' normalization: integrate(rule, f) approximates
the integral of f against phi (1-D) or phi x phi (2-D tensor rule), so the
weights sum to one.  All marginal item factor probabilities and tangent-cone
integrals in this package go through these rules.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

DEFAULT_NODES = 49


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights; nodes has shape (n,) in 1-D and (n, 2) in 2-D."""

    nodes: np.ndarray
    weights: np.ndarray
    dimension: int

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


def gauss_hermite(n_nodes: int = DEFAULT_NODES) -> QuadratureRule:
    """1-D Gauss-Hermite rule for the N(0, 1) weight.

    Nodes and weights come from the Golub-Welsch eigendecomposition of the
    symmetric tridiagonal Jacobi matrix of the probabilists' Hermite
    recurrence (zero diagonal, off-diagonal sqrt(k)).  A rule with n nodes
    integrates polynomials up to degree 2n - 1 exactly.
    """
    if not 2 <= n_nodes <= 200:
        raise ValueError(f"n_nodes must be in [2, 200], got {n_nodes}")
    off_diag = np.sqrt(np.arange(1, n_nodes, dtype=float))
    nodes, vectors = eigh_tridiagonal(np.zeros(n_nodes), off_diag)
    weights = vectors[0] ** 2
    # The exact rule is symmetric about 0; enforce it bitwise.
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    # Extreme-tail weights of large rules underflow to exactly zero; those
    # nodes contribute nothing, so drop them (symmetrically) and keep the
    # weights strictly positive.
    keep = weights > 0
    nodes, weights = nodes[keep], weights[keep]
    return QuadratureRule(nodes=nodes, weights=weights, dimension=1)


def tensor_rule(rule: QuadratureRule) -> QuadratureRule:
    """Tensor product of a 1-D rule with itself, for two latent factors."""
    if rule.dimension != 1:
        raise ValueError("tensor_rule expects a 1-D rule")
    n = rule.n_nodes
    grid_1, grid_2 = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    nodes = np.column_stack([grid_1.ravel(), grid_2.ravel()])
    weights = np.outer(rule.weights, rule.weights).ravel()
    assert nodes.shape == (n * n, 2)
    return QuadratureRule(nodes=nodes, weights=weights, dimension=2)


def integrate(rule: QuadratureRule, f) -> float:
    """Weighted sum of f over the nodes.

    ``f`` receives the full node array: shape (n,) for a 1-D rule, (n, 2)
    for a tensor rule, and must return one value per node.
    """
    values = np.asarray(f(rule.nodes), dtype=float)
    if values.shape != rule.weights.shape:
        raise ValueError(f"integrand returned shape {values.shape}, expected {rule.weights.shape}")
    return float(rule.weights @ values)
