"""Exact Fisher information matrices and singularity diagnostics.

The saturated-model informations (Gaussian over the half-vectorized
covariance, multinomial over nonzero patterns, Gaussian-plus-mean for
grouped data) feed the cone-projection reference distributions.  The
submodel informations, computed in each factor model's own parameter
space, expose the singularity that breaks the chi-square approximation:
at a two-factor point whose second factor is exactly zero, the rows and
columns indexed by the second-factor loadings vanish identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models
from .halfvec import half_vec_names, half_vec_size, symmetric_basis
from .models import EfaParams, IfaParams, SaturatedGaussianParams, SaturatedMultinomialParams
from .quadrature import QuadratureRule

RANK_TOL = 1e-8
SYMMETRY_TOL = 1e-12


class NegativeEigenError(ValueError):
    """Matrix has an eigenvalue too negative to be rounding error."""


@dataclass(frozen=True)
class InfoMatrix:
    """Information matrix with its spectrum and a numerical rank estimate.

    ``rank_estimate`` counts eigenvalues above RANK_TOL times the largest;
    the full spectrum is kept so near-singularity is visible, not just a
    boolean.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    rank_estimate: int
    layout: tuple[str, ...]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigen_ratio(self) -> float:
        """Smallest over largest eigenvalue; the invertibility diagnostic."""
        return float(self.eigenvalues[0] / self.eigenvalues[-1])


def _build_info(matrix: np.ndarray, layout: tuple[str, ...]) -> InfoMatrix:
    asym = np.max(np.abs(matrix - matrix.T)) if matrix.size else 0.0
    scale = max(np.max(np.abs(matrix)), 1.0)
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(f"information matrix asymmetric beyond tolerance: {asym}")
    matrix = 0.5 * (matrix + matrix.T)
    eigenvalues = np.linalg.eigvalsh(matrix)
    rank = int(np.sum(eigenvalues > RANK_TOL * max(eigenvalues[-1], 0.0)))
    return InfoMatrix(matrix=matrix, eigenvalues=eigenvalues, rank_estimate=rank, layout=layout)


def _gaussian_cov_info(cov: np.ndarray) -> np.ndarray:
    """Information over the half-vectorized covariance of a zero-mean Gaussian.

    Entry (r, s) is tr(Sigma^-1 D_r Sigma^-1 D_s) / 2 with D_r the
    derivative of Sigma in half-vector coordinate r.
    """
    j = cov.shape[0]
    try:
        precision = np.linalg.inv(cov)
        if np.linalg.eigvalsh(cov)[0] <= 0:
            raise models.NonSPDError("covariance is not positive definite")
    except np.linalg.LinAlgError as exc:
        raise models.NonSPDError("covariance is not positive definite") from exc
    basis = symmetric_basis(j)
    conjugated = np.einsum("ab,rbc,cd->rad", precision, basis, precision)
    return 0.5 * np.einsum("rij,sji->rs", conjugated, basis)


def info_saturated_gaussian(theta_star: SaturatedGaussianParams | np.ndarray) -> InfoMatrix:
    """Exact information of the saturated zero-mean Gaussian model."""
    cov = (
        theta_star.covariance()
        if isinstance(theta_star, SaturatedGaussianParams)
        else np.asarray(theta_star, dtype=float)
    )
    return _build_info(_gaussian_cov_info(cov), half_vec_names(cov.shape[0]))


def info_saturated_multinomial(
    theta_star: SaturatedMultinomialParams | np.ndarray,
) -> InfoMatrix:
    """Exact information of the saturated multinomial over nonzero patterns.

    The classical categorical identity: diag(1/p_x) plus a constant 1/p_0,
    where p_0 is the probability of the all-zeros pattern.
    """
    probs = (
        theta_star.probs
        if isinstance(theta_star, SaturatedMultinomialParams)
        else np.asarray(theta_star, dtype=float)
    )
    p0 = 1.0 - probs.sum()
    if np.any(probs <= 1e-12) or p0 <= 1e-12:
        raise DegenerateCellError("all pattern probabilities must exceed 1e-12")
    matrix = np.diag(1.0 / probs) + 1.0 / p0
    names = tuple(f"pi[{i}]" for i in range(1, probs.shape[0] + 1))
    return _build_info(matrix, names)


class DegenerateCellError(ValueError):
    """A multinomial cell probability is numerically zero."""


def info_re_saturated(cov: np.ndarray) -> InfoMatrix:
    """Information of the saturated Gaussian-with-mean model for grouped data.

    Parameter order is (half-vectorized covariance, mean).  The covariance
    block is the Gaussian identity, the mean block is 1' Sigma^-1 1, and the
    cross blocks vanish by the mean/covariance orthogonality of the normal.
    """
    cov = np.asarray(cov, dtype=float)
    j = cov.shape[0]
    k0 = half_vec_size(j)
    matrix = np.zeros((k0 + 1, k0 + 1))
    matrix[:k0, :k0] = _gaussian_cov_info(cov)
    ones = np.ones(j)
    matrix[k0, k0] = ones @ np.linalg.solve(cov, ones)
    return _build_info(matrix, half_vec_names(j) + ("beta0",))


def info_factor_submodel(
    params: EfaParams | IfaParams, quad: QuadratureRule | None = None
) -> InfoMatrix:
    """Exact information of a factor model in its own parameter space.

    Linear factor models use the Gaussian trace identity over the structured
    covariance; item factor models enumerate all response patterns and sum
    the outer products of the pattern-probability gradients weighted by
    1 / pi_x, with the gradients computed by quadrature.

    At a two-factor point with the second factor identically zero, the
    derivative of the model in every second-factor coordinate vanishes, so
    the corresponding rows and columns are zero and the matrix is singular.
    """
    if isinstance(params, EfaParams):
        j = params.n_items
        sigma = models.efa_covariance(params)
        precision = np.linalg.inv(sigma)
        tensors = []
        for l in range(j):
            d = np.zeros((j, j))
            d[l, l] = 1.0
            tensors.append(d)
        for l in range(j):
            d = np.zeros((j, j))
            d[l, :] += params.loadings_1
            d[:, l] += params.loadings_1
            tensors.append(d)
        if params.n_factors == 2:
            for l in range(1, j):
                d = np.zeros((j, j))
                d[l, :] += params.loadings_2
                d[:, l] += params.loadings_2
                tensors.append(d)
        stack = np.stack(tensors)
        conjugated = np.einsum("ab,rbc,cd->rad", precision, stack, precision)
        matrix = 0.5 * np.einsum("rij,sji->rs", conjugated, stack)
        return _build_info(matrix, models.efa_layout(j, params.n_factors))
    if isinstance(params, IfaParams):
        probs, d_probs = models.ifa_pattern_prob_derivs(params, quad)
        matrix = np.einsum("xp,x,xq->pq", d_probs, 1.0 / probs, d_probs)
        return _build_info(matrix, models.ifa_layout(params.n_items, params.n_factors))
    raise TypeError(f"no submodel information for {type(params).__name__}")


def sqrt_psd(info: InfoMatrix | np.ndarray, clip_tol: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root by eigendecomposition.

    Eigenvalues below clip_tol times the largest are clamped to zero;
    eigenvalues below -1e-8 times the largest raise, since the input is
    then not a rounding-error-PSD matrix.
    """
    matrix = info.matrix if isinstance(info, InfoMatrix) else np.asarray(info, dtype=float)
    eigenvalues, vectors = np.linalg.eigh(0.5 * (matrix + matrix.T))
    top = max(eigenvalues[-1], 0.0)
    if eigenvalues[0] < -1e-8 * top:
        raise NegativeEigenError(f"eigenvalue {eigenvalues[0]} too negative for a PSD matrix")
    clipped = np.where(eigenvalues < clip_tol * top, 0.0, eigenvalues)
    root = (vectors * np.sqrt(clipped)) @ vectors.T
    return 0.5 * (root + root.T)
