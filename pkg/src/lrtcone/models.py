"""Model families: likelihoods, gradients, and data simulators.

Seven families are covered:

* one- and two-factor linear factor models for mean-centered continuous
  indicators (``EfaParams``),
* the saturated zero-mean Gaussian model (``SaturatedGaussianParams``),
* one- and two-factor logistic item factor models for binary responses
  (``IfaParams``), with marginal likelihoods integrated over standard
  normal traits by Gauss-Hermite quadrature,
* the saturated multinomial model over binary response patterns
  (``SaturatedMultinomialParams``),
* a balanced random-intercept model (``RandomEffectsParams``).

Identifiability follows the usual conventions: the second-factor loading or
discrimination of item 1 is pinned to zero, factor means are zero, factor
variances are one.  No mean structure is estimated for the continuous
indicators; data are treated as mean centered.

Binary response patterns are indexed little-endian: item 1 is bit 0 of the
pattern integer, so pattern 0 is the all-zeros response.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit, logsumexp

from .quadrature import QuadratureRule, gauss_hermite, tensor_rule
from .seeding import as_rng

LOG_2PI = float(np.log(2.0 * np.pi))


class NonSPDError(ValueError):
    """A covariance matrix that must be positive definite is not."""


class DegenerateVarianceError(ValueError):
    """A variance that must be strictly positive is not."""


class InvalidProbWarning(UserWarning):
    """Observed count on a zero-probability cell; log-likelihood is -inf."""


# --------------------------------------------------------------------------
# Parameter containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamVector:
    """Flat parameter vector with names tying coordinates to model symbols."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.shape[0] != len(self.names):
            raise ValueError("values and names must have matching length")

    def __len__(self) -> int:
        return self.values.shape[0]

    def get(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def asdict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.names, self.values)}


def _as_vector(x, length: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (length,):
        raise ValueError(f"{what} must have shape ({length},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite")
    return arr


@dataclass(frozen=True)
class EfaParams:
    """Linear factor model: Sigma = a1 a1' (+ a2 a2') + diag(uniquenesses)."""

    loadings_1: np.ndarray
    uniquenesses: np.ndarray
    loadings_2: np.ndarray | None = None

    def __post_init__(self):
        a1 = _as_vector(self.loadings_1, len(np.atleast_1d(self.loadings_1)), "loadings_1")
        delta = _as_vector(self.uniquenesses, a1.shape[0], "uniquenesses")
        if np.any(delta <= 0):
            raise ValueError("uniquenesses must be strictly positive")
        object.__setattr__(self, "loadings_1", a1)
        object.__setattr__(self, "uniquenesses", delta)
        if self.loadings_2 is not None:
            a2 = _as_vector(self.loadings_2, a1.shape[0], "loadings_2")
            if a2[0] != 0.0:
                raise ValueError("loadings_2[0] is fixed at 0 for identifiability")
            object.__setattr__(self, "loadings_2", a2)

    @property
    def n_items(self) -> int:
        return self.loadings_1.shape[0]

    @property
    def n_factors(self) -> int:
        return 1 if self.loadings_2 is None else 2


@dataclass(frozen=True)
class IfaParams:
    """Logistic item factor model with standard normal traits.

    Item j responds 1 with probability
    logistic(easiness_j + a_j1 xi_1 [+ a_j2 xi_2]) given the traits.
    """

    easiness: np.ndarray
    discrimination_1: np.ndarray
    discrimination_2: np.ndarray | None = None

    def __post_init__(self):
        d = _as_vector(self.easiness, len(np.atleast_1d(self.easiness)), "easiness")
        a1 = _as_vector(self.discrimination_1, d.shape[0], "discrimination_1")
        object.__setattr__(self, "easiness", d)
        object.__setattr__(self, "discrimination_1", a1)
        if self.discrimination_2 is not None:
            a2 = _as_vector(self.discrimination_2, d.shape[0], "discrimination_2")
            if a2[0] != 0.0:
                raise ValueError("discrimination_2[0] is fixed at 0 for identifiability")
            object.__setattr__(self, "discrimination_2", a2)

    @property
    def n_items(self) -> int:
        return self.easiness.shape[0]

    @property
    def n_factors(self) -> int:
        return 1 if self.discrimination_2 is None else 2


@dataclass(frozen=True)
class RandomEffectsParams:
    """Random-intercept model X_ij = beta0 + mu_i + eps_ij for balanced groups.

    ``group_size`` is the number of members per group; it is a design
    quantity carried here so that simulation and tangent-cone construction
    know the group dimension.
    """

    beta0: float
    var_between: float
    var_within: float
    group_size: int

    def __post_init__(self):
        if self.var_between < 0:
            raise ValueError("var_between must be nonnegative")
        if self.var_within <= 0:
            raise DegenerateVarianceError("var_within must be strictly positive")
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")


@dataclass(frozen=True)
class SaturatedGaussianParams:
    """Unrestricted zero-mean Gaussian, stored as the half-vectorized covariance."""

    cov_upper: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.cov_upper, dtype=float)
        object.__setattr__(self, "cov_upper", vec)
        cov = self.covariance()
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NonSPDError("implied covariance is not positive definite") from exc

    @property
    def n_items(self) -> int:
        # k = J(J+1)/2 inverted
        j = int(round((np.sqrt(8 * self.cov_upper.shape[0] + 1) - 1) / 2))
        return j

    def covariance(self) -> np.ndarray:
        from .halfvec import half_vec_inverse

        return half_vec_inverse(self.cov_upper, self.n_items)


@dataclass(frozen=True)
class SaturatedMultinomialParams:
    """Unrestricted multinomial over nonzero binary patterns.

    ``probs[i - 1]`` is the probability of pattern integer i for
    i = 1, ..., 2^J - 1; the all-zeros pattern takes the remaining mass.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if np.any(probs < 0):
            raise ValueError("pattern probabilities must be nonnegative")
        if probs.sum() > 1.0 + 1e-12:
            raise ValueError("pattern probabilities must sum to at most 1")
        object.__setattr__(self, "probs", probs)

    @property
    def n_items(self) -> int:
        return int(round(np.log2(self.probs.shape[0] + 1)))

    def full_probs(self) -> np.ndarray:
        """Probabilities over all 2^J patterns, zero pattern first."""
        return np.concatenate([[1.0 - self.probs.sum()], self.probs])


@dataclass(frozen=True)
class Dataset:
    """Observation matrix with a family tag.

    families: "gaussian" (N x J continuous), "binary" (N x J in {0,1}),
    "grouped" (N groups x J members for the random-intercept model).
    """

    values: np.ndarray
    family: str

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if self.family not in ("gaussian", "binary", "grouped"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "binary":
            if not np.isin(values, (0, 1)).all():
                raise ValueError("binary data must contain only 0 and 1")
            values = values.astype(np.int8)
        else:
            values = values.astype(float)
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


# --------------------------------------------------------------------------
# Parameter layouts (shared with estimation and Fisher-information code)
# --------------------------------------------------------------------------


def efa_layout(j: int, n_factors: int) -> tuple[str, ...]:
    """Canonical coordinate order (delta_1..J, a_11..a_J1 [, a_22..a_J2])."""
    names = [f"delta[{i + 1}]" for i in range(j)]
    names += [f"a[{i + 1},1]" for i in range(j)]
    if n_factors == 2:
        names += [f"a[{i + 1},2]" for i in range(1, j)]
    return tuple(names)


def ifa_layout(j: int, n_factors: int) -> tuple[str, ...]:
    """Canonical coordinate order (d_1..J, a_11..a_J1 [, a_22..a_J2])."""
    names = [f"d[{i + 1}]" for i in range(j)]
    names += [f"a[{i + 1},1]" for i in range(j)]
    if n_factors == 2:
        names += [f"a[{i + 1},2]" for i in range(1, j)]
    return tuple(names)


def efa_param_vector(params: EfaParams) -> ParamVector:
    parts = [params.uniquenesses, params.loadings_1]
    if params.n_factors == 2:
        parts.append(params.loadings_2[1:])
    return ParamVector(np.concatenate(parts), efa_layout(params.n_items, params.n_factors))


def efa_params_from_values(values: np.ndarray, j: int, n_factors: int) -> EfaParams:
    values = np.asarray(values, dtype=float)
    delta, a1 = values[:j], values[j : 2 * j]
    a2 = None
    if n_factors == 2:
        a2 = np.concatenate([[0.0], values[2 * j :]])
    return EfaParams(loadings_1=a1, uniquenesses=delta, loadings_2=a2)


def ifa_param_vector(params: IfaParams) -> ParamVector:
    parts = [params.easiness, params.discrimination_1]
    if params.n_factors == 2:
        parts.append(params.discrimination_2[1:])
    return ParamVector(np.concatenate(parts), ifa_layout(params.n_items, params.n_factors))


def ifa_params_from_values(values: np.ndarray, j: int, n_factors: int) -> IfaParams:
    values = np.asarray(values, dtype=float)
    d, a1 = values[:j], values[j : 2 * j]
    a2 = None
    if n_factors == 2:
        a2 = np.concatenate([[0.0], values[2 * j :]])
    return IfaParams(easiness=d, discrimination_1=a1, discrimination_2=a2)


# --------------------------------------------------------------------------
# Continuous indicators (linear factor model / saturated Gaussian)
# --------------------------------------------------------------------------


def efa_covariance(params: EfaParams) -> np.ndarray:
    """Implied covariance a1 a1' (+ a2 a2') + diag(uniquenesses)."""
    sigma = np.outer(params.loadings_1, params.loadings_1)
    if params.n_factors == 2:
        sigma = sigma + np.outer(params.loadings_2, params.loadings_2)
    sigma[np.diag_indices_from(sigma)] += params.uniquenesses
    return sigma


def gaussian_suffstats(data: Dataset | np.ndarray) -> tuple[np.ndarray, int]:
    """Second-moment matrix X'X / N and the row count (zero-mean convention)."""
    rows = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n = rows.shape[0]
    return rows.T @ rows / n, n


def gaussian_loglik_from_suffstats(cov: np.ndarray, s_hat: np.ndarray, n: int) -> float:
    """Zero-mean Gaussian log-likelihood from the second-moment matrix."""
    try:
        chol, lower = cho_factor(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NonSPDError("covariance is not positive definite") from exc
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    trace_term = np.trace(cho_solve((chol, lower), s_hat))
    j = cov.shape[0]
    return float(-0.5 * n * (j * LOG_2PI + log_det + trace_term))


def gaussian_loglik(cov: np.ndarray, data: Dataset | np.ndarray) -> float:
    """Sum of log N(x_i; 0, cov) over the rows of the data."""
    s_hat, n = gaussian_suffstats(data)
    return gaussian_loglik_from_suffstats(cov, s_hat, n)


def efa_loglik(params: EfaParams, data: Dataset | np.ndarray) -> float:
    return gaussian_loglik(efa_covariance(params), data)


def efa_loglik_grad(params: EfaParams, data: Dataset | np.ndarray) -> np.ndarray:
    """Gradient of the log-likelihood in the canonical (delta, a1 [, a2]) layout."""
    s_hat, n = gaussian_suffstats(data)
    sigma = efa_covariance(params)
    sigma_inv = np.linalg.inv(sigma)
    # d loglik / d Sigma in the full-matrix convention
    g_full = 0.5 * n * (sigma_inv @ s_hat @ sigma_inv - sigma_inv)
    parts = [np.diag(g_full).copy(), 2.0 * g_full @ params.loadings_1]
    if params.n_factors == 2:
        parts.append((2.0 * g_full @ params.loadings_2)[1:])
    return np.concatenate(parts)


# --------------------------------------------------------------------------
# Binary responses (item factor model / saturated multinomial)
# --------------------------------------------------------------------------


def all_patterns(j: int) -> np.ndarray:
    """All 2^J binary patterns, row i being the bits of i (item 1 = bit 0)."""
    ints = np.arange(2**j, dtype=np.int64)
    return ((ints[:, None] >> np.arange(j)) & 1).astype(np.int8)


def pattern_index(rows: np.ndarray) -> np.ndarray:
    """Pattern integers of binary rows under the little-endian convention."""
    rows = np.asarray(rows)
    return rows.astype(np.int64) @ (1 << np.arange(rows.shape[1], dtype=np.int64))


def pattern_counts(data: Dataset | np.ndarray, j: int | None = None) -> np.ndarray:
    """Counts over all 2^J patterns; accepts a binary dataset or a count vector."""
    values = data.values if isinstance(data, Dataset) else np.asarray(data)
    if values.ndim == 1:
        return values.astype(np.int64)
    if j is None:
        j = values.shape[1]
    return np.bincount(pattern_index(values), minlength=2**j)


def _ifa_rule_for(params: IfaParams, quad: QuadratureRule) -> QuadratureRule:
    if params.n_factors == 1:
        if quad.dimension != 1:
            raise ValueError("one-factor model needs a 1-D quadrature rule")
        return quad
    return tensor_rule(quad) if quad.dimension == 1 else quad


def _ifa_eta(params: IfaParams, rule: QuadratureRule) -> np.ndarray:
    """Linear predictors d_j + a_j' xi at every node, shape (n_nodes, J)."""
    if params.n_factors == 1:
        return params.easiness[None, :] + np.outer(rule.nodes, params.discrimination_1)
    loadings = np.column_stack([params.discrimination_1, params.discrimination_2])
    return params.easiness[None, :] + rule.nodes @ loadings.T


def _pattern_log_joint(patterns: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """log prod_j P(x_j | nodes) for each pattern, shape (n_patterns, n_nodes)."""
    log_p = -np.logaddexp(0.0, -eta)  # log logistic(eta)
    log_q = -np.logaddexp(0.0, eta)  # log (1 - logistic(eta))
    x = patterns.astype(float)
    return x @ log_p.T + (1.0 - x) @ log_q.T


def ifa_pattern_log_probs(
    params: IfaParams, quad: QuadratureRule | None = None, patterns: np.ndarray | None = None
) -> np.ndarray:
    """Log marginal probabilities of binary patterns (all 2^J by default)."""
    quad = quad if quad is not None else gauss_hermite()
    rule = _ifa_rule_for(params, quad)
    if patterns is None:
        patterns = all_patterns(params.n_items)
    log_joint = _pattern_log_joint(patterns, _ifa_eta(params, rule))
    return logsumexp(log_joint + np.log(rule.weights)[None, :], axis=1)


def ifa_pattern_prob(params: IfaParams, pattern: np.ndarray, quad: QuadratureRule | None = None) -> float:
    """Marginal probability of one response pattern."""
    pattern = np.asarray(pattern).reshape(1, -1)
    if pattern.shape[1] != params.n_items:
        raise ValueError("pattern length must match the number of items")
    return float(np.exp(ifa_pattern_log_probs(params, quad, patterns=pattern)[0]))


def ifa_loglik(params: IfaParams, data: Dataset | np.ndarray, quad: QuadratureRule | None = None) -> float:
    """Marginal log-likelihood, aggregated over distinct response patterns.

    The inner quadrature runs once per distinct pattern (at most 2^J of
    them) and is weighted by the observed counts, so the cost does not grow
    with the number of respondents.
    """
    counts = pattern_counts(data, params.n_items)
    observed = counts > 0
    log_probs = ifa_pattern_log_probs(params, quad, patterns=all_patterns(params.n_items)[observed])
    return float(counts[observed] @ log_probs)


def ifa_pattern_prob_derivs(
    params: IfaParams, quad: QuadratureRule | None = None, patterns: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Pattern probabilities and their gradients in the canonical layout.

    Returns (probs, d_probs) with d_probs of shape (n_patterns, P) where the
    P columns follow ``ifa_layout``: easiness block, first-discrimination
    block, and for two-factor models the free second-discrimination block.
    The columns for easiness are the integrals of the joint response
    probability times the residual x_l - logistic(eta_l); discrimination
    columns carry an extra factor-node multiplier.
    """
    quad = quad if quad is not None else gauss_hermite()
    rule = _ifa_rule_for(params, quad)
    j = params.n_items
    if patterns is None:
        patterns = all_patterns(j)
    eta = _ifa_eta(params, rule)
    log_joint = _pattern_log_joint(patterns, eta)
    weighted_joint = np.exp(log_joint) * rule.weights[None, :]  # (n_pat, n_nodes)
    probs = weighted_joint.sum(axis=1)
    resid = patterns.astype(float)[:, None, :] - expit(eta)[None, :, :]  # (n_pat, n_nodes, J)
    d_easiness = np.einsum("xm,xmj->xj", weighted_joint, resid)
    if params.n_factors == 1:
        xi = rule.nodes
        d_a1 = np.einsum("xm,m,xmj->xj", weighted_joint, xi, resid)
        d_probs = np.concatenate([d_easiness, d_a1], axis=1)
    else:
        xi1, xi2 = rule.nodes[:, 0], rule.nodes[:, 1]
        d_a1 = np.einsum("xm,m,xmj->xj", weighted_joint, xi1, resid)
        d_a2 = np.einsum("xm,m,xmj->xj", weighted_joint, xi2, resid)[:, 1:]
        d_probs = np.concatenate([d_easiness, d_a1, d_a2], axis=1)
    return probs, d_probs


def ifa_loglik_grad(
    params: IfaParams, data: Dataset | np.ndarray, quad: QuadratureRule | None = None
) -> np.ndarray:
    """Gradient of the marginal log-likelihood in the canonical layout."""
    counts = pattern_counts(data, params.n_items)
    observed = counts > 0
    probs, d_probs = ifa_pattern_prob_derivs(
        params, quad, patterns=all_patterns(params.n_items)[observed]
    )
    return (counts[observed] / probs) @ d_probs


def saturated_multinomial_loglik(
    params: SaturatedMultinomialParams, counts: Dataset | np.ndarray
) -> float:
    """Multinomial log-likelihood sum_x n_x log p_x with 0 log 0 = 0."""
    counts = pattern_counts(counts, params.n_items)
    probs = params.full_probs()
    observed = counts > 0
    if np.any(probs[observed] <= 0):
        warnings.warn(
            "observed pattern has zero model probability; log-likelihood is -inf",
            InvalidProbWarning,
        )
        return float("-inf")
    return float(counts[observed] @ np.log(probs[observed]))


# --------------------------------------------------------------------------
# Random-intercept model
# --------------------------------------------------------------------------


def re_loglik(params: RandomEffectsParams, data: Dataset | np.ndarray) -> float:
    """Log-likelihood of balanced grouped data.

    Each group row is J-variate normal with mean beta0 and covariance
    var_between * ones + var_within * I.  The rank-one structure gives the
    determinant and the quadratic form in closed form, so the cost is
    O(N J) instead of a dense J x J solve per group.
    """
    if params.var_within <= 0:
        raise DegenerateVarianceError("var_within must be strictly positive")
    rows = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n, j = rows.shape
    if params.group_size != j:
        raise ValueError(f"data has {j} members per group, params expect {params.group_size}")
    s1, s2 = params.var_between, params.var_within
    dev = rows - params.beta0
    row_sum = dev.sum(axis=1)
    row_sq = (dev**2).sum(axis=1)
    total_var = s2 + j * s1
    quad_form = (row_sq - (s1 / total_var) * row_sum**2) / s2
    log_det = (j - 1) * np.log(s2) + np.log(total_var)
    return float(-0.5 * (n * j * LOG_2PI + n * log_det + quad_form.sum()))


def re_loglik_grad(params: RandomEffectsParams, data: Dataset | np.ndarray) -> np.ndarray:
    """Gradient of re_loglik in (beta0, var_between, var_within).

    Uses the within/between decomposition: with group means m_i, the
    log-likelihood is -0.5 [NJ log 2pi + N(J-1) log s2 + N log psi
    + SSW / s2 + J sum_i (m_i - beta0)^2 / psi] where psi = s2 + J s1.
    """
    rows = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n, j = rows.shape
    s1, s2 = params.var_between, params.var_within
    psi = s2 + j * s1
    group_means = rows.mean(axis=1)
    ssw = ((rows - group_means[:, None]) ** 2).sum()
    u = group_means - params.beta0
    sum_u2 = (u**2).sum()
    g_beta = j * u.sum() / psi
    g_s1 = -0.5 * n * j / psi + 0.5 * j**2 * sum_u2 / psi**2
    g_s2 = -0.5 * (n * (j - 1) / s2 + n / psi - ssw / s2**2 - j * sum_u2 / psi**2)
    return np.array([g_beta, g_s1, g_s2])


# --------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------


def simulate(params, n_obs: int, seed_or_rng=0) -> Dataset:
    """Draw a dataset from a parameterized model; deterministic given the seed.

    EFA draws x = a1 xi_1 (+ a2 xi_2) + eps with eps ~ N(0, diag(delta));
    IFA draws traits then Bernoulli responses per item; the random-intercept
    model draws beta0 + mu_i + eps_ij over n_obs groups.
    """
    rng = as_rng(seed_or_rng)
    if isinstance(params, EfaParams):
        factor_1 = rng.standard_normal(n_obs)
        rows = np.outer(factor_1, params.loadings_1)
        if params.n_factors == 2:
            factor_2 = rng.standard_normal(n_obs)
            rows += np.outer(factor_2, params.loadings_2)
        rows += rng.standard_normal((n_obs, params.n_items)) * np.sqrt(params.uniquenesses)
        return Dataset(rows, "gaussian")
    if isinstance(params, IfaParams):
        eta = np.outer(rng.standard_normal(n_obs), params.discrimination_1)
        if params.n_factors == 2:
            eta += np.outer(rng.standard_normal(n_obs), params.discrimination_2)
        eta += params.easiness
        rows = (rng.random((n_obs, params.n_items)) < expit(eta)).astype(np.int8)
        return Dataset(rows, "binary")
    if isinstance(params, RandomEffectsParams):
        group_effect = rng.standard_normal(n_obs) * np.sqrt(params.var_between)
        rows = (
            params.beta0
            + group_effect[:, None]
            + rng.standard_normal((n_obs, params.group_size)) * np.sqrt(params.var_within)
        )
        return Dataset(rows, "grouped")
    if isinstance(params, SaturatedGaussianParams):
        chol = np.linalg.cholesky(params.covariance())
        rows = rng.standard_normal((n_obs, params.n_items)) @ chol.T
        return Dataset(rows, "gaussian")
    if isinstance(params, SaturatedMultinomialParams):
        idx = rng.choice(2**params.n_items, size=n_obs, p=params.full_probs())
        return Dataset(all_patterns(params.n_items)[idx], "binary")
    raise TypeError(f"cannot simulate from {type(params).__name__}")
