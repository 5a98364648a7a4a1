"""Maximum likelihood estimation and the likelihood ratio statistic.

Saturated Gaussian, saturated multinomial, and random-intercept fits are
closed form.  Factor-model fits run a multi-start quasi-Newton (BFGS)
optimizer with analytic gradients; uniquenesses are log-reparameterized so
the search is unconstrained, and the identifiability constraint on the
second factor (first coordinate zero) is enforced by excluding that
coordinate from the optimization vector.

Near a fit with singular information (two-factor fits of one-factor data)
the likelihood surface is flat along the extra loadings, which is why the
defaults lean on a warm start from the nested fit plus random restarts,
and why convergence diagnostics are part of every result.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import models
from .halfvec import half_vec, half_vec_names
from .models import Dataset, LOG_2PI, ParamVector, RandomEffectsParams
from .quadrature import gauss_hermite
from .seeding import as_rng

NEGATIVE_LRT_TOL = 1e-6


class AllStartsFailedError(RuntimeError):
    """Every optimization start produced a non-finite likelihood."""


class RankDeficientError(ValueError):
    """Sample second-moment matrix is not positive definite."""


class NegativeLrtError(RuntimeError):
    """LRT statistic is negative beyond optimizer noise: the alternative fit
    did not reach the null fit's likelihood, which signals a convergence
    failure."""


@dataclass(frozen=True)
class OptimConfig:
    """Knobs for the multi-start quasi-Newton fits.

    grad_tol applies to the sup-norm of the gradient of the per-observation
    mean log-likelihood (equivalently 1e-6 relative to N on the total).
    quad_nodes is the 1-D Gauss-Hermite size used inside item-factor fits;
    21 nodes already sits on the accuracy plateau for discriminations up to
    about 3 while keeping the two-factor tensor rule small.
    """

    n_starts: int = 10
    max_iter: int = 500
    grad_tol: float = 1e-6
    seed: int = 0
    quad_nodes: int = 21


@dataclass(frozen=True)
class FitResult:
    """Best fit over all optimization starts.

    best_start_index equals n_starts when the winner is the pinned
    second-factor-zero candidate that two-factor fits always score.
    """

    params: ParamVector
    loglik: float
    n_starts: int
    best_start_index: int
    converged: bool
    gradient_norm: float
    iterations: int


@dataclass(frozen=True)
class LrtStat:
    """LRT value with a flag marking values floored from tiny negatives."""

    value: float
    floored: bool

    def __float__(self) -> float:
        return self.value


def fit_saturated_gaussian(data: Dataset | np.ndarray) -> FitResult:
    """Closed-form saturated fit: Sigma_hat = X'X / N (zero-mean convention)."""
    s_hat, n = models.gaussian_suffstats(data)
    j = s_hat.shape[0]
    if n <= j:
        raise RankDeficientError(f"need more rows ({n}) than columns ({j})")
    try:
        loglik = models.gaussian_loglik_from_suffstats(s_hat, s_hat, n)
    except models.NonSPDError as exc:
        raise RankDeficientError("sample second-moment matrix is not positive definite") from exc
    params = ParamVector(half_vec(s_hat), half_vec_names(j))
    return FitResult(
        params=params,
        loglik=loglik,
        n_starts=1,
        best_start_index=0,
        converged=True,
        gradient_norm=0.0,
        iterations=0,
    )


def fit_saturated_multinomial(data: Dataset | np.ndarray) -> FitResult:
    """Closed-form saturated multinomial fit: p_hat_x = n_x / N."""
    counts = models.pattern_counts(data)
    n = counts.sum()
    if n == 0:
        raise ValueError("no observations")
    j = int(round(np.log2(counts.shape[0])))
    p_hat = counts / n
    observed = counts > 0
    loglik = float(counts[observed] @ np.log(p_hat[observed]))
    names = tuple(f"pi[{i}]" for i in range(1, 2**j))
    return FitResult(
        params=ParamVector(p_hat[1:], names),
        loglik=loglik,
        n_starts=1,
        best_start_index=0,
        converged=True,
        gradient_norm=0.0,
        iterations=0,
    )


# --------------------------------------------------------------------------
# Factor-model fits
# --------------------------------------------------------------------------


def _efa_objective(data, j, n_factors):
    """Negative mean log-likelihood and gradient over (log-delta, a1 [, a2])."""
    s_hat, n = models.gaussian_suffstats(data)

    def fun(vec):
        t, rest = vec[:j], vec[j:]
        delta = np.exp(np.clip(t, -60.0, 60.0))
        a1 = rest[:j]
        sigma = np.outer(a1, a1)
        if n_factors == 2:
            a2 = np.concatenate([[0.0], rest[j:]])
            sigma += np.outer(a2, a2)
        sigma[np.diag_indices_from(sigma)] += delta
        try:
            sigma_inv = np.linalg.inv(sigma)
            sign, log_det = np.linalg.slogdet(sigma)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(vec)
        if sign <= 0 or not np.isfinite(log_det):
            return np.inf, np.zeros_like(vec)
        value = 0.5 * (j * LOG_2PI + log_det + np.trace(sigma_inv @ s_hat))
        g_sigma = 0.5 * (sigma_inv @ s_hat @ sigma_inv - sigma_inv)  # of mean loglik
        grad_parts = [np.diag(g_sigma) * delta, 2.0 * g_sigma @ a1]
        if n_factors == 2:
            grad_parts.append((2.0 * g_sigma @ a2)[1:])
        return value, -np.concatenate(grad_parts)

    return fun


def _efa_spectral_start(data, j, n_factors, rng):
    s_hat, _ = models.gaussian_suffstats(data)
    evals, evecs = np.linalg.eigh(s_hat)
    delta0 = np.maximum(0.5 * np.diag(s_hat), 1e-2)
    a1 = evecs[:, -1] * np.sqrt(max(evals[-1] - delta0.mean(), 0.25 * evals[-1]))
    parts = [np.log(delta0), a1]
    if n_factors == 2:
        parts.append(rng.normal(0.0, 0.1, size=j - 1))
    return np.concatenate(parts)


def _efa_random_start(j, n_factors, rng):
    parts = [rng.normal(0.0, 0.5, size=j), rng.normal(0.0, 1.0, size=j)]
    if n_factors == 2:
        parts.append(rng.normal(0.0, 1.0, size=j - 1))
    return np.concatenate(parts)


def _efa_vec_from_fit(fit: FitResult, j: int, rng, exact_null: bool) -> np.ndarray:
    delta = fit.params.values[:j]
    a1 = fit.params.values[j : 2 * j]
    a2_free = np.zeros(j - 1) if exact_null else rng.normal(0.0, 0.1, size=j - 1)
    return np.concatenate([np.log(delta), a1, a2_free])


def _ifa_objective(data, j, n_factors, quad_nodes):
    counts = models.pattern_counts(data, j)
    n = counts.sum()
    observed = counts > 0
    obs_counts = counts[observed]
    obs_patterns = models.all_patterns(j)[observed]
    quad = gauss_hermite(quad_nodes)

    def fun(vec):
        params = models.ifa_params_from_values(vec, j, n_factors)
        probs, d_probs = models.ifa_pattern_prob_derivs(params, quad, patterns=obs_patterns)
        if np.any(probs <= 0) or not np.all(np.isfinite(probs)):
            return np.inf, np.zeros_like(vec)
        log_probs = np.log(probs)
        value = -float(obs_counts @ log_probs) / n
        grad = -((obs_counts / probs) @ d_probs) / n
        return value, grad

    return fun


def _ifa_start(data, j, n_factors, rng, kind, warm: FitResult | None = None):
    if kind == "warm":
        d = warm.params.values[:j]
        a1 = warm.params.values[j : 2 * j]
        return np.concatenate([d, a1, rng.normal(0.0, 0.1, size=j - 1)])
    if kind == "moment":
        means = np.clip(models.pattern_counts(data, j) @ models.all_patterns(j) / data.values.shape[0], 0.05, 0.95)
        parts = [np.log(means / (1 - means)), np.full(j, 1.0)]
        if n_factors == 2:
            parts.append(rng.normal(0.0, 0.1, size=j - 1))
        return np.concatenate(parts)
    parts = [rng.normal(0.0, 1.0, size=j), rng.normal(0.0, 1.0, size=j)]
    if n_factors == 2:
        parts.append(rng.normal(0.0, 1.0, size=j - 1))
    return np.concatenate(parts)


def _run_starts(fun, starts, config):
    best = None
    for index, x0 in enumerate(starts):
        result = minimize(
            fun,
            x0,
            jac=True,
            method="BFGS",
            options={"gtol": config.grad_tol, "maxiter": config.max_iter},
        )
        if not np.isfinite(result.fun):
            continue
        if best is None or result.fun < best[1].fun:
            best = (index, result)
    if best is None:
        raise AllStartsFailedError("all optimization starts diverged")
    return best


def fit_factor_model(
    data: Dataset,
    n_factors: int,
    config: OptimConfig | None = None,
    rng=None,
    warm_from: FitResult | None = None,
) -> FitResult:
    """Fit a one- or two-factor model by multi-start BFGS.

    Continuous data fit the linear factor model, binary data the logistic
    item factor model.  Start 1 is moment-based, or for two-factor fits with
    ``warm_from`` (the nested one-factor fit) the warm start augmented with
    small random second-factor values; the remaining starts are random.  For
    two-factor fits the point with the second factor exactly zero is always
    scored as a candidate, so the fitted log-likelihood can never fall below
    the nested fit it was warmed from.
    """
    if n_factors not in (1, 2):
        raise ValueError("n_factors must be 1 or 2")
    config = config or OptimConfig()
    rng = as_rng(config.seed if rng is None else rng)
    j = data.n_cols
    if data.family == "gaussian":
        fun = _efa_objective(data, j, n_factors)
        starts = []
        if n_factors == 2 and warm_from is not None:
            starts.append(_efa_vec_from_fit(warm_from, j, rng, exact_null=False))
        else:
            starts.append(_efa_spectral_start(data, j, n_factors, rng))
        starts += [_efa_random_start(j, n_factors, rng) for _ in range(config.n_starts - 1)]
        extra = None
        if n_factors == 2 and warm_from is not None:
            extra = _efa_vec_from_fit(warm_from, j, rng, exact_null=True)
        to_params = lambda vec: np.concatenate([np.exp(vec[:j]), vec[j:]])
        layout = models.efa_layout(j, n_factors)
    elif data.family == "binary":
        fun = _ifa_objective(data, j, n_factors, config.quad_nodes)
        starts = []
        if n_factors == 2 and warm_from is not None:
            starts.append(_ifa_start(data, j, n_factors, rng, "warm", warm_from))
        else:
            starts.append(_ifa_start(data, j, n_factors, rng, "moment"))
        starts += [_ifa_start(data, j, n_factors, rng, "random") for _ in range(config.n_starts - 1)]
        extra = None
        if n_factors == 2 and warm_from is not None:
            extra = np.concatenate([warm_from.params.values, np.zeros(j - 1)])
        to_params = lambda vec: vec
        layout = models.ifa_layout(j, n_factors)
    else:
        raise ValueError(f"no factor model for family {data.family!r}")

    best_index, best = _run_starts(fun, starts, config)
    best_x, best_f, iterations = best.x, best.fun, best.nit
    if extra is not None:
        # Candidate with the second factor pinned to zero: the flat direction
        # there has an exactly zero gradient, so it is scored, not optimized.
        f_extra, _ = fun(extra)
        if f_extra < best_f:
            best_index, best_x, best_f, iterations = len(starts), extra, f_extra, 0
    _, grad = fun(best_x)
    grad_norm = float(np.max(np.abs(grad)))
    n = data.n_rows
    return FitResult(
        params=ParamVector(to_params(best_x), layout),
        loglik=float(-best_f * n),
        n_starts=len(starts),
        best_start_index=best_index,
        converged=bool(best.success or grad_norm <= 10 * config.grad_tol),
        gradient_norm=grad_norm,
        iterations=int(iterations),
    )


# --------------------------------------------------------------------------
# Random-intercept fits (closed form)
# --------------------------------------------------------------------------


def fit_random_effects(data: Dataset | np.ndarray, constrain_null: bool) -> FitResult:
    """Closed-form MLE for the balanced random-intercept model.

    Under the null (between-group variance pinned to zero) the fit is the
    i.i.d. normal MLE over all cells.  Otherwise the balanced one-way
    decomposition gives the stationary point; when it asks for a negative
    between-group variance the estimate sits on the boundary and collapses
    to the null fit.
    """
    rows = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n, j = rows.shape
    grand_mean = rows.mean()
    group_means = rows.mean(axis=1)
    ssw = ((rows - group_means[:, None]) ** 2).sum()
    ssb = j * ((group_means - grand_mean) ** 2).sum()
    if constrain_null:
        var_between = 0.0
        var_within = (ssw + ssb) / (n * j)
    else:
        within_candidate = ssw / (n * (j - 1))
        between_total = ssb / n  # stationary value of s2 + J s1
        if between_total > within_candidate:
            var_within = within_candidate
            var_between = (between_total - within_candidate) / j
        else:
            var_between = 0.0
            var_within = (ssw + ssb) / (n * j)
    params = RandomEffectsParams(
        beta0=grand_mean, var_between=var_between, var_within=var_within, group_size=j
    )
    loglik = models.re_loglik(params, rows)
    vector = ParamVector(
        np.array([grand_mean, var_between, var_within]),
        ("beta0", "sigma1_sq", "sigma2_sq"),
    )
    return FitResult(
        params=vector,
        loglik=loglik,
        n_starts=1,
        best_start_index=0,
        converged=True,
        gradient_norm=0.0,
        iterations=0,
    )


# --------------------------------------------------------------------------
# LRT statistic
# --------------------------------------------------------------------------


def lrt_statistic(fit_alt: FitResult, fit_null: FitResult) -> LrtStat:
    """Twice the log-likelihood gap between nested fits, floored at zero.

    Raw values in (-1e-6, 0) are attributed to optimizer noise, floored to
    zero, and flagged; anything more negative raises, because it means the
    alternative fit failed to dominate the null fit.
    """
    raw = 2.0 * (fit_alt.loglik - fit_null.loglik)
    if raw >= 0:
        return LrtStat(value=float(raw), floored=False)
    if raw > -NEGATIVE_LRT_TOL:
        warnings.warn("LRT statistic slightly negative; floored to 0", RuntimeWarning)
        return LrtStat(value=0.0, floored=True)
    raise NegativeLrtError(f"LRT statistic {raw} below -{NEGATIVE_LRT_TOL}")
