"""Tangent cones of the model families and the cone-projection objective.

The asymptotic law of the likelihood ratio statistic is driven by
min over tau in the tangent cone of || Z - I^(1/2) tau ||^2, with Z standard
normal in the saturated model's coordinates.  Three cone shapes cover all
families here:

* ``LinearSubspace``: span of a basis.  One-factor models inside the
  saturated Gaussian or multinomial, and the equal-variance null of the
  random-intercept model.
* ``HalfSpaceCone``: a linear span plus a single ray with a nonnegative
  coefficient.  The random-intercept alternative, where the between-group
  variance can only move upward.
* ``NonlinearImage``: a linear block plus a positive-semidefinite quadratic
  term in the extra-factor direction.  Two-factor alternatives at a
  one-factor truth, where the extra loadings enter the model only through
  their outer product.

The projection objective is closed form on the first two shapes.  On the
nonlinear image the linear block is profiled out exactly, leaving a quartic
polynomial in the free extra-factor coordinates that is minimized by
multi-start damped Newton steps (the quartic's Hessian is closed form).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import models
from .halfvec import half_vec, half_vec_size
from .models import IfaParams
from .quadrature import QuadratureRule, gauss_hermite
from .seeding import as_rng


class RankDeficientBasisError(ValueError):
    """Computed cone basis has lower rank than the cone's dimension."""


@dataclass(frozen=True)
class LinearSubspace:
    """Cone that is the column span of ``basis`` (k x m, full column rank)."""

    basis: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class HalfSpaceCone:
    """Span of ``linear_basis`` plus nonnegative multiples of ``ray``."""

    linear_basis: np.ndarray
    ray: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.ray.shape[0]


@dataclass(frozen=True)
class NonlinearImage:
    """Image of (c, b) -> linear_basis @ c + quadratic(b).

    ``quad_forms`` has shape (k, q, q); coordinate r of the quadratic part
    is b' quad_forms[r] b over the q free extra-factor coordinates (the
    pinned first coordinate is already excluded).  The image is a cone:
    scaling c by t and b by sqrt(t) scales the point by t.
    """

    linear_basis: np.ndarray
    quad_forms: np.ndarray
    linear_dims: int
    nonlinear_dims: int

    @property
    def ambient_dim(self) -> int:
        return self.linear_basis.shape[0]

    def point(self, linear_coef: np.ndarray, b_free: np.ndarray) -> np.ndarray:
        """Evaluate the image map at explicit block coordinates."""
        quad = np.einsum("rij,i,j->r", self.quad_forms, b_free, b_free)
        return self.linear_basis @ np.asarray(linear_coef, dtype=float) + quad


@dataclass(frozen=True)
class MixtureChi2Law:
    """Tag for the analytic law w^2 1{w >= 0}, w standard normal."""


@dataclass(frozen=True)
class ConeMinResult:
    value: float
    minimizer_params: np.ndarray
    n_starts_used: int


@dataclass(frozen=True)
class ConeMinConfig:
    """Multi-start settings for the nonlinear cone projection."""

    n_starts: int = 32
    max_iter: int = 200
    grad_tol: float = 1e-9


# --------------------------------------------------------------------------
# Cone constructions
# --------------------------------------------------------------------------


def _check_rank(basis: np.ndarray, expected: int, what: str) -> None:
    rank = np.linalg.matrix_rank(basis)
    if rank < expected:
        raise RankDeficientBasisError(f"{what}: basis rank {rank} below expected {expected}")


def cone_efa_null(a_star: np.ndarray) -> LinearSubspace:
    """Tangent cone of the one-factor covariance family at loadings a_star.

    Lives in the half-vectorized covariance space; the basis directions are
    the symmetrized rank-one updates a_star e_j' + e_j a_star' and the
    diagonal matrices E_jj, giving dimension 2J when no loading vanishes.
    """
    a_star = np.asarray(a_star, dtype=float)
    j = a_star.shape[0]
    if 2 * j > half_vec_size(j):
        raise ValueError(f"need J >= 3 so the cone dimension 2J fits the ambient space, got J={j}")
    if np.any(a_star == 0):
        warnings.warn("a zero loading degenerates the cone; basis may lose rank", RuntimeWarning)
    columns = []
    for l in range(j):
        mat = np.zeros((j, j))
        mat[l, :] += a_star
        mat[:, l] += a_star
        columns.append(half_vec(mat))
    for l in range(j):
        mat = np.zeros((j, j))
        mat[l, l] = 1.0
        columns.append(half_vec(mat))
    basis = np.column_stack(columns)
    _check_rank(basis, 2 * j, "one-factor covariance cone")
    return LinearSubspace(basis=basis)


def cone_efa_alt(a_star: np.ndarray) -> NonlinearImage:
    """Tangent cone of the two-factor covariance family at a one-factor truth.

    Same linear block as the one-factor cone, plus the outer-product term
    b2 b2' with the first coordinate of b2 pinned to zero.
    """
    a_star = np.asarray(a_star, dtype=float)
    j = a_star.shape[0]
    linear_basis = cone_efa_null(a_star).basis
    k = half_vec_size(j)
    rows, cols = np.triu_indices(j)
    quad_forms = np.zeros((k, j - 1, j - 1))
    for r, (i, jj) in enumerate(zip(rows, cols)):
        if i == 0 or jj == 0:
            continue  # pinned coordinate contributes nothing
        if i == jj:
            quad_forms[r, i - 1, jj - 1] = 1.0
        else:
            quad_forms[r, i - 1, jj - 1] = 0.5
            quad_forms[r, jj - 1, i - 1] = 0.5
    return NonlinearImage(
        linear_basis=linear_basis,
        quad_forms=quad_forms,
        linear_dims=2 * j,
        nonlinear_dims=j - 1,
    )


def _one_factor_truth(d_star: np.ndarray, a_star: np.ndarray) -> IfaParams:
    return IfaParams(easiness=np.asarray(d_star, float), discrimination_1=np.asarray(a_star, float))


def ifa_cone_vectors(
    d_star: np.ndarray, a_star: np.ndarray, quad: QuadratureRule | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pattern derivative vectors of the one-factor pattern probabilities.

    Returns (f, g), each of shape (2^J, J): column l of f is the integral of
    the joint response probability times the item-l residual; g carries an
    extra trait-node factor.  These span the one-factor tangent directions.
    All 2^J patterns are returned; the all-zeros row is kept so callers can
    check that each column sums to zero (the score identity).
    """
    params = _one_factor_truth(d_star, a_star)
    _, d_probs = models.ifa_pattern_prob_derivs(params, quad)
    j = params.n_items
    return d_probs[:, :j], d_probs[:, j : 2 * j]


def ifa_cone_curvature(
    d_star: np.ndarray, a_star: np.ndarray, quad: QuadratureRule | None = None
) -> np.ndarray:
    """Second-order pattern integrals H_x for the two-factor cone, (2^J, J, J).

    Off-diagonal entries integrate the joint probability times the product
    of two item residuals; diagonal entries subtract the Bernoulli variance
    p(1-p) of the item inside the integral.
    """
    params = _one_factor_truth(d_star, a_star)
    quad = quad if quad is not None else gauss_hermite()
    j = params.n_items
    patterns = models.all_patterns(j)
    eta = params.easiness[None, :] + np.outer(quad.nodes, params.discrimination_1)
    p = expit(eta)
    log_joint = models._pattern_log_joint(patterns, eta)
    weighted_joint = np.exp(log_joint) * quad.weights[None, :]
    resid = patterns.astype(float)[:, None, :] - p[None, :, :]
    curvature = np.einsum("xm,xmr,xms->xrs", weighted_joint, resid, resid)
    bernoulli_var = p * (1.0 - p)  # (n_nodes, J)
    diag_correction = np.einsum("xm,mr->xr", weighted_joint, bernoulli_var)
    idx = np.arange(j)
    curvature[:, idx, idx] -= diag_correction
    return curvature


def cone_ifa_null(
    d_star: np.ndarray, a_star: np.ndarray, quad: QuadratureRule | None = None
) -> LinearSubspace:
    """Tangent cone of the one-factor item factor model at (d_star, a_star).

    Lives in the 2^J - 1 pattern-probability coordinates (all-zeros pattern
    excluded); the basis stacks the f and g derivative vectors, giving
    dimension 2J.  With all discriminations zero the g block vanishes and
    the construction fails with a rank error.
    """
    j = np.asarray(d_star).shape[0]
    if j > 12:
        raise ValueError("pattern space 2^J - 1 is materialized; J <= 12 required")
    f_vecs, g_vecs = ifa_cone_vectors(d_star, a_star, quad)
    basis = np.column_stack([f_vecs[1:], g_vecs[1:]])
    _check_rank(basis, 2 * j, "one-factor item cone")
    return LinearSubspace(basis=basis)


def cone_ifa_alt(
    d_star: np.ndarray, a_star: np.ndarray, quad: QuadratureRule | None = None
) -> NonlinearImage:
    """Tangent cone of the two-factor item factor model at a one-factor truth."""
    j = np.asarray(d_star).shape[0]
    linear_basis = cone_ifa_null(d_star, a_star, quad).basis
    curvature = ifa_cone_curvature(d_star, a_star, quad)[1:]  # drop all-zeros pattern
    quad_forms = curvature[:, 1:, 1:]  # first coordinate of b2 pinned to zero
    return NonlinearImage(
        linear_basis=linear_basis,
        quad_forms=np.ascontiguousarray(quad_forms),
        linear_dims=2 * j,
        nonlinear_dims=j - 1,
    )


def _re_directions(j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k0 = half_vec_size(j)
    mean_dir = np.zeros(k0 + 1)
    mean_dir[-1] = 1.0
    ones_dir = np.concatenate([half_vec(np.ones((j, j))), [0.0]])
    eye_dir = np.concatenate([half_vec(np.eye(j)), [0.0]])
    return mean_dir, ones_dir, eye_dir


def cone_re_null(j: int) -> LinearSubspace:
    """Tangent cone of the equal-variance null in (half-vec covariance, mean).

    Spanned by the mean direction and the identity-covariance direction.
    """
    mean_dir, _, eye_dir = _re_directions(j)
    return LinearSubspace(basis=np.column_stack([mean_dir, eye_dir]))


def cone_re_alt(j: int) -> HalfSpaceCone:
    """Tangent cone of the random-intercept alternative: the null span plus
    the compound-symmetry ray, whose coefficient (the between-group
    variance direction) cannot go negative."""
    mean_dir, ones_dir, eye_dir = _re_directions(j)
    return HalfSpaceCone(linear_basis=np.column_stack([mean_dir, eye_dir]), ray=ones_dir)


def mixture_chi2_reduction(cone_null, cone_alt) -> MixtureChi2Law | None:
    """Recognize the subspace-plus-one-ray pair whose projection gap is the
    mixture law w^2 1{w >= 0}.

    Requires the null to be a linear subspace and the alternative a
    half-space cone over the same basis; returns None otherwise.
    """
    if not isinstance(cone_null, LinearSubspace) or not isinstance(cone_alt, HalfSpaceCone):
        return None
    if cone_null.basis.shape != cone_alt.linear_basis.shape:
        return None
    if not np.array_equal(cone_null.basis, cone_alt.linear_basis):
        return None
    return MixtureChi2Law()


# --------------------------------------------------------------------------
# Cone projection
# --------------------------------------------------------------------------


def _orthonormal_range(mat: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column span, rank-truncated by SVD."""
    if mat.size == 0:
        return np.zeros((mat.shape[0], 0))
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    keep = s > s[0] * 1e-12 if s.size else np.zeros(0, bool)
    return u[:, keep]


def _quartic_eval(tensor: np.ndarray, b: np.ndarray, targets: np.ndarray):
    """Residuals of the quartic || m(b) - target ||^2 with m_r(b) = b' M_r b.

    tensor is (k, q, q); b and targets carry one row per problem.
    Returns (values, residuals, Mb) where Mb[n, r] = M_r b_n.
    """
    mb = np.einsum("kij,nj->nki", tensor, b)
    forms = np.einsum("nki,ni->nk", mb, b)
    resid = forms - targets
    return (resid**2).sum(axis=1), resid, mb


def minimize_quartic_batch(
    tensor: np.ndarray,
    targets: np.ndarray,
    starts: np.ndarray,
    max_iter: int = 100,
    grad_tol: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize || m(b) - target ||^2 for a batch of (target, start) rows.

    Damped Newton with per-row adaptive (Levenberg-style) regularization:
    the exact Hessian of the quartic, 4 sum_r resid_r M_r
    + 8 sum_r (M_r b)(M_r b)', is shifted by lambda I until the step
    decreases the objective.  Every row iterates independently, so results
    do not depend on how rows are batched.  Returns (values, minimizers).
    """
    b = np.array(starts, dtype=float)
    n_rows, q = b.shape
    targets = np.asarray(targets, dtype=float)
    value, resid, mb = _quartic_eval(tensor, b, targets)
    damping = np.full(n_rows, 1e-3)
    active = np.ones(n_rows, dtype=bool)
    eye = np.eye(q)
    for _ in range(max_iter):
        grad = 4.0 * np.einsum("nk,nki->ni", resid, mb)
        grad_max = np.abs(grad).max(axis=1)
        active &= grad_max > grad_tol * (1.0 + value)
        if not active.any():
            break
        idx = np.where(active)[0]
        hess = 4.0 * np.einsum("nk,kij->nij", resid[idx], tensor)
        hess += 8.0 * np.einsum("nki,nkj->nij", mb[idx], mb[idx])
        # Scale the shift by the Hessian's own magnitude so damping is
        # dimensionless.
        hess_scale = np.abs(np.diagonal(hess, axis1=1, axis2=2)).mean(axis=1) + 1e-12
        remaining = np.arange(idx.shape[0])
        for _attempt in range(30):
            rows = idx[remaining]
            shift = (damping[rows] * hess_scale[remaining])[:, None, None] * eye
            try:
                direction = np.linalg.solve(hess[remaining] + shift, -grad[rows][..., None])[..., 0]
            except np.linalg.LinAlgError:
                damping[rows] *= 10.0
                continue
            trial = b[rows] + direction
            trial_value, trial_resid, trial_mb = _quartic_eval(tensor, trial, targets[rows])
            ok = trial_value < value[rows]
            accepted = rows[ok]
            b[accepted] = trial[ok]
            value[accepted] = trial_value[ok]
            resid[accepted] = trial_resid[ok]
            mb[accepted] = trial_mb[ok]
            damping[accepted] = np.maximum(damping[accepted] / 3.0, 1e-12)
            damping[rows[~ok]] *= 4.0
            remaining = remaining[~ok]
            if remaining.size == 0:
                break
        if remaining.size:
            # No decrease even under heavy damping: numerically at a minimum.
            active[idx[remaining]] = False
    return value, b


class ConeProjector:
    """Reusable minimizer of || z - isqrt @ tau ||^2 over tau in a cone.

    Precomputes everything that does not depend on z, so samplers can call
    ``minimize`` once per draw cheaply.  The nonlinear-image case profiles
    the linear block out in closed form; what remains is the quartic
    || z_perp - m(b) ||^2 with m_r(b) = b' M_r b, minimized by BFGS from a
    zero start plus random starts whose scale follows ||z||.
    """

    def __init__(self, cone, isqrt: np.ndarray):
        self.cone = cone
        self.isqrt = np.asarray(isqrt, dtype=float)
        k = self.isqrt.shape[0]
        if cone.ambient_dim != k:
            raise ValueError(f"cone lives in dim {cone.ambient_dim}, isqrt is {k} x {k}")
        if isinstance(cone, LinearSubspace):
            self._mapped = self.isqrt @ cone.basis
            self._range = _orthonormal_range(self._mapped)
            self._pinv = np.linalg.pinv(self._mapped) if cone.basis.size else None
        elif isinstance(cone, HalfSpaceCone):
            self._mapped_linear = self.isqrt @ cone.linear_basis
            self._range_linear = _orthonormal_range(self._mapped_linear)
            full = np.column_stack([cone.linear_basis, cone.ray])
            self._mapped_full = self.isqrt @ full
            self._pinv_full = np.linalg.pinv(self._mapped_full)
            self._pinv_linear = (
                np.linalg.pinv(self._mapped_linear) if cone.linear_basis.size else None
            )
        elif isinstance(cone, NonlinearImage):
            self._mapped = self.isqrt @ cone.linear_basis
            self._range = _orthonormal_range(self._mapped)
            self._pinv = np.linalg.pinv(self._mapped)
            mapped_quads = np.einsum("kr,rij->kij", self.isqrt, cone.quad_forms)
            projector = self._range @ self._range.T
            self._quad_tensor = mapped_quads - np.einsum("kl,lij->kij", projector, mapped_quads)
        else:
            raise TypeError(f"unknown cone type {type(cone).__name__}")

    def minimize(self, z: np.ndarray, rng=None, config: ConeMinConfig | None = None) -> ConeMinResult:
        z = np.asarray(z, dtype=float)
        if isinstance(self.cone, LinearSubspace):
            coef = self._pinv @ z if self._pinv is not None else np.zeros(0)
            proj = self._range.T @ z
            value = float(z @ z - proj @ proj)
            return ConeMinResult(value=max(value, 0.0), minimizer_params=coef, n_starts_used=0)
        if isinstance(self.cone, HalfSpaceCone):
            coef = self._pinv_full @ z
            if coef[-1] >= 0:
                resid = z - self._mapped_full @ coef
                return ConeMinResult(
                    value=float(resid @ resid), minimizer_params=coef, n_starts_used=0
                )
            # One inequality: a negative ray coefficient means the constrained
            # optimum sits on the linear face.
            lin_coef = self._pinv_linear @ z if self._pinv_linear is not None else np.zeros(0)
            proj = self._range_linear.T @ z
            value = float(z @ z - proj @ proj)
            params = np.concatenate([lin_coef, [0.0]])
            return ConeMinResult(value=max(value, 0.0), minimizer_params=params, n_starts_used=0)
        config = config or ConeMinConfig()
        rng = as_rng(rng if rng is not None else 0)
        values, minimizers, n_starts = self._nonlinear_batch(z[None, :], [rng], config)
        best_b = minimizers[0]
        lin_coef = self._pinv @ (
            z - self.isqrt @ self.cone.point(np.zeros(self.cone.linear_basis.shape[1]), best_b)
        )
        params = np.concatenate([lin_coef, best_b])
        return ConeMinResult(value=float(values[0]), minimizer_params=params, n_starts_used=n_starts)

    def minimize_many(self, z_rows: np.ndarray, rngs=None, config: ConeMinConfig | None = None) -> np.ndarray:
        """Minimum values for a batch of z vectors (one row each).

        ``rngs`` supplies one generator per row for the nonlinear random
        starts; linear and half-space cones solve in closed form and ignore
        it.
        """
        z_rows = np.atleast_2d(np.asarray(z_rows, dtype=float))
        if isinstance(self.cone, LinearSubspace):
            proj = z_rows @ self._range
            values = (z_rows**2).sum(axis=1) - (proj**2).sum(axis=1)
            return np.maximum(values, 0.0)
        if isinstance(self.cone, HalfSpaceCone):
            coef = z_rows @ self._pinv_full.T
            resid = z_rows - coef @ self._mapped_full.T
            value_full = (resid**2).sum(axis=1)
            proj = z_rows @ self._range_linear
            value_linear = (z_rows**2).sum(axis=1) - (proj**2).sum(axis=1)
            return np.maximum(np.where(coef[:, -1] >= 0, value_full, value_linear), 0.0)
        config = config or ConeMinConfig()
        if rngs is None:
            raise ValueError("nonlinear cones need one RNG per row for the random starts")
        values, _, _ = self._nonlinear_batch(z_rows, rngs, config)
        return values

    def _nonlinear_batch(self, z_rows, rngs, config):
        """Profile out the linear block, then solve the quartic in the free
        extra-factor coordinates for every (row, start) pair at once."""
        tensor = self._quad_tensor  # (k, q, q)
        q = tensor.shape[1]
        n_rows = z_rows.shape[0]
        z_perp = z_rows - (z_rows @ self._range) @ self._range.T
        n_starts = config.n_starts
        starts = np.zeros((n_rows, n_starts, q))
        # Random-start spread follows the data scale ||z||.
        for row, rng in enumerate(rngs):
            scale = np.sqrt(max(np.linalg.norm(z_rows[row]), 1e-12) / np.sqrt(z_rows.shape[1]))
            starts[row, 1:] = rng.normal(0.0, scale, size=(n_starts - 1, q))
        flat_starts = starts.reshape(n_rows * n_starts, q)
        flat_targets = np.repeat(z_perp, n_starts, axis=0)
        flat_values, flat_b = minimize_quartic_batch(
            tensor, flat_targets, flat_starts, max_iter=config.max_iter, grad_tol=config.grad_tol
        )
        values = flat_values.reshape(n_rows, n_starts)
        best = values.argmin(axis=1)
        rows = np.arange(n_rows)
        minimizers = flat_b.reshape(n_rows, n_starts, q)[rows, best]
        return np.maximum(values[rows, best], 0.0), minimizers, n_starts


def cone_minimize(
    cone, z: np.ndarray, isqrt: np.ndarray, config: ConeMinConfig | None = None, rng=None
) -> ConeMinResult:
    """One-shot projection onto a cone; see ConeProjector for the machinery."""
    return ConeProjector(cone, isqrt).minimize(z, rng=rng, config=config)
