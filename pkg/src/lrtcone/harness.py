"""Replication engine: simulate, fit, collect LRT statistics, compare CDFs.

Five scenarios are built in, each simulating under its null truth:

* ``efa_1a``  one-factor vs. two-factor linear factor model (J = 6)
* ``efa_1b``  one-factor vs. saturated Gaussian
* ``ifa_2a``  one-factor vs. two-factor item factor model (J = 6)
* ``ifa_2b``  one-factor vs. saturated multinomial
* ``re_3``    equal-variance null vs. random-intercept model (J = 20)

For each scenario the report compares the empirical LRT distribution with
the chi-square reference implied by parameter counting and, on request,
with the cone-projection reference and a parametric bootstrap.  In the
"a" scenarios the information matrix of the wider model is singular at the
truth and the chi-square reference over-rejects; in the "b" scenarios both
references agree; in the grouped scenario the truth sits on the boundary
and half the statistics are exactly zero.

Replication r always draws from the stream keyed by (master_seed,
"experiment", r), so reports are identical for any worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import models
from .cones import (
    ConeMinConfig,
    cone_efa_alt,
    cone_efa_null,
    cone_ifa_alt,
    cone_ifa_null,
    cone_re_alt,
    cone_re_null,
)
from .estimation import (
    FitResult,
    OptimConfig,
    fit_factor_model,
    fit_random_effects,
    fit_saturated_gaussian,
    fit_saturated_multinomial,
    lrt_statistic,
)
from .fisher import info_re_saturated, info_saturated_gaussian, info_saturated_multinomial
from .models import EfaParams, IfaParams, ParamVector, RandomEffectsParams
from .quadrature import gauss_hermite
from .refdist import (
    EmpiricalCDF,
    chi2_cdf,
    chi2_sf,
    ks_distance,
    mixture_chi2_survival,
    sample_cone_projection_law,
    sample_nested_cone_law,
)
from .seeding import child_rng

SCENARIOS = ("efa_1a", "efa_1b", "ifa_2a", "ifa_2b", "re_3")

DEFAULT_N_OBS = {"efa_1a": 2000, "efa_1b": 2000, "ifa_2a": 2000, "ifa_2b": 2000, "re_3": 200}
DEFAULT_N_REPS = {"efa_1a": 500, "efa_1b": 500, "ifa_2a": 300, "ifa_2b": 300, "re_3": 500}
FULL_SCALE_N_OBS = {"efa_1a": 5000, "efa_1b": 5000, "ifa_2a": 5000, "ifa_2b": 5000, "re_3": 200}
FULL_SCALE_N_REPS = 5000

MAX_FAILURE_FRACTION = 0.10


class ExperimentFailedError(RuntimeError):
    """More than the tolerated fraction of replications failed."""


def builtin_truths() -> dict[str, object]:
    """The shipped true parameter sets, one per scenario."""
    efa = EfaParams(
        loadings_1=np.array([1.17, 1.87, 1.42, 1.71, 1.23, 1.78]),
        uniquenesses=np.array([1.38, 0.85, 1.46, 0.78, 1.24, 0.60]),
    )
    ifa = IfaParams(
        easiness=np.array([-0.23, -0.12, 0.07, 0.31, -0.29, 0.19]),
        discrimination_1=np.array([0.83, 1.22, 0.96, 0.91, 1.02, 1.25]),
    )
    re = RandomEffectsParams(beta0=0.0, var_between=0.0, var_within=1.0, group_size=20)
    return {"efa_1a": efa, "efa_1b": efa, "ifa_2a": ifa, "ifa_2b": ifa, "re_3": re}


def wilks_df(scenario: str, truth) -> int:
    """Degrees of freedom from parameter counting for the scenario's test."""
    if scenario in ("efa_1a", "ifa_2a"):
        return truth.n_items - 1
    if scenario == "efa_1b":
        j = truth.n_items
        return j * (j + 1) // 2 - 2 * j
    if scenario == "ifa_2b":
        j = truth.n_items
        return 2**j - 1 - 2 * j
    if scenario == "re_3":
        return 1
    raise ValueError(f"unknown scenario {scenario!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to run one replication study."""

    scenario: str
    n_obs: int | None = None
    n_reps: int | None = None
    optim: OptimConfig = field(default_factory=OptimConfig)
    references: tuple[str, ...] = ("wilks", "cone")
    n_draws: int = 10_000
    bootstrap_b: int = 200
    master_seed: int = 0
    truth: object | None = None
    full_scale: bool = False

    def resolved(self) -> "ExperimentSpec":
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        truth = self.truth if self.truth is not None else builtin_truths()[self.scenario]
        obs_defaults = FULL_SCALE_N_OBS if self.full_scale else DEFAULT_N_OBS
        n_obs = self.n_obs if self.n_obs is not None else obs_defaults[self.scenario]
        if self.n_reps is not None:
            n_reps = self.n_reps
        else:
            n_reps = FULL_SCALE_N_REPS if self.full_scale else DEFAULT_N_REPS[self.scenario]
        if n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        for ref in self.references:
            if ref not in ("wilks", "cone", "bootstrap"):
                raise ValueError(f"unknown reference {ref!r}")
        return replace(self, n_obs=n_obs, n_reps=n_reps, truth=truth)


@dataclass(frozen=True)
class RepOutcome:
    lrt: float
    floored: bool
    converged_null: bool
    converged_alt: bool
    error: str | None = None


@dataclass
class ExperimentReport:
    scenario: str
    lrt_values: np.ndarray
    convergence_null: np.ndarray
    convergence_alt: np.ndarray
    n_reps: int
    n_failed: int
    fraction_floored: float
    wilks_df: int
    ks_vs_wilks: float
    rejection_rate_at_05_wilks: float
    ks_vs_cone: float | None
    rejection_rate_at_05_cone: float | None
    ks_vs_bootstrap: float | None
    runtime_seconds: float
    master_seed: int
    n_obs: int
    config_echo: dict
    cone_cdf: EmpiricalCDF | None = None
    bootstrap_cdf: EmpiricalCDF | None = None

    def to_dict(self) -> dict:
        """JSON-ready summary (CDFs are serialized separately as CSV)."""
        return {
            "scenario": self.scenario,
            "n_obs": self.n_obs,
            "n_reps": self.n_reps,
            "n_failed": self.n_failed,
            "fraction_floored": self.fraction_floored,
            "wilks_df": self.wilks_df,
            "ks_vs_wilks": self.ks_vs_wilks,
            "rejection_rate_at_05_wilks": self.rejection_rate_at_05_wilks,
            "ks_vs_cone": self.ks_vs_cone,
            "rejection_rate_at_05_cone": self.rejection_rate_at_05_cone,
            "ks_vs_bootstrap": self.ks_vs_bootstrap,
            "master_seed": self.master_seed,
            "runtime_seconds": self.runtime_seconds,
            "lrt_values": [float(v) for v in self.lrt_values],
            "convergence_null": [bool(v) for v in self.convergence_null],
            "convergence_alt": [bool(v) for v in self.convergence_alt],
            "config_echo": self.config_echo,
        }


def _fit_pair(scenario: str, data, optim: OptimConfig, rng) -> tuple[FitResult, FitResult]:
    """Null and alternative fits for one dataset under a scenario."""
    if scenario in ("efa_1a", "ifa_2a"):
        fit_null = fit_factor_model(data, 1, optim, rng)
        fit_alt = fit_factor_model(data, 2, optim, rng, warm_from=fit_null)
    elif scenario == "efa_1b":
        fit_null = fit_factor_model(data, 1, optim, rng)
        fit_alt = fit_saturated_gaussian(data)
    elif scenario == "ifa_2b":
        fit_null = fit_factor_model(data, 1, optim, rng)
        fit_alt = fit_saturated_multinomial(data)
    elif scenario == "re_3":
        fit_null = fit_random_effects(data, constrain_null=True)
        fit_alt = fit_random_effects(data, constrain_null=False)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return fit_null, fit_alt


def _replicate_range(args) -> list[RepOutcome]:
    scenario, truth, n_obs, optim, master_seed, lo, hi = args
    outcomes = []
    for rep in range(lo, hi):
        rng = child_rng(master_seed, "experiment", rep)
        try:
            data = models.simulate(truth, n_obs, rng)
            fit_null, fit_alt = _fit_pair(scenario, data, optim, rng)
            stat = lrt_statistic(fit_alt, fit_null)
            outcomes.append(
                RepOutcome(
                    lrt=stat.value,
                    floored=stat.floored,
                    converged_null=fit_null.converged,
                    converged_alt=fit_alt.converged,
                )
            )
        except Exception as exc:  # recorded, not fatal, unless too frequent
            outcomes.append(
                RepOutcome(
                    lrt=float("nan"),
                    floored=False,
                    converged_null=False,
                    converged_alt=False,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return outcomes


def cone_reference(
    scenario: str,
    truth,
    n_draws: int = 10_000,
    seed: int = 0,
    n_workers: int = 1,
    min_config: ConeMinConfig | None = None,
    quad_nodes: int = 49,
) -> EmpiricalCDF:
    """Cone-projection reference distribution for a scenario at its truth."""
    if scenario in ("efa_1a", "efa_1b"):
        info = info_saturated_gaussian(models.efa_covariance(truth))
        null = cone_efa_null(truth.loadings_1)
        if scenario == "efa_1b":
            return sample_cone_projection_law(null, info, n_draws, seed, n_workers, min_config)
        alt = cone_efa_alt(truth.loadings_1)
        return sample_nested_cone_law(null, alt, info, n_draws, seed, n_workers, min_config)
    if scenario in ("ifa_2a", "ifa_2b"):
        quad = gauss_hermite(quad_nodes)
        probs = np.exp(models.ifa_pattern_log_probs(truth, quad))
        info = info_saturated_multinomial(probs[1:])
        null = cone_ifa_null(truth.easiness, truth.discrimination_1, quad)
        if scenario == "ifa_2b":
            return sample_cone_projection_law(null, info, n_draws, seed, n_workers, min_config)
        alt = cone_ifa_alt(truth.easiness, truth.discrimination_1, quad)
        return sample_nested_cone_law(null, alt, info, n_draws, seed, n_workers, min_config)
    if scenario == "re_3":
        j = truth.group_size
        info = info_re_saturated(truth.var_within * np.eye(j))
        return sample_nested_cone_law(
            cone_re_null(j), cone_re_alt(j), info, n_draws, seed, n_workers, min_config
        )
    raise ValueError(f"unknown scenario {scenario!r}")


def run_experiment(spec: ExperimentSpec, n_workers: int = 1) -> ExperimentReport:
    """Simulate, fit, and summarize one scenario.

    Per-replication failures are recorded and excluded from the CDFs; the
    experiment raises only if more than 10 percent of replications fail.
    """
    spec = spec.resolved()
    start_time = time.perf_counter()
    chunks = max(4 * n_workers, 1)
    edges = np.linspace(0, spec.n_reps, chunks + 1).astype(int)
    payloads = [
        (spec.scenario, spec.truth, spec.n_obs, spec.optim, spec.master_seed, int(lo), int(hi))
        for lo, hi in zip(edges[:-1], edges[1:])
        if hi > lo
    ]
    if n_workers <= 1 or len(payloads) <= 1:
        chunk_results = [_replicate_range(payload) for payload in payloads]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            chunk_results = list(pool.map(_replicate_range, payloads))
    outcomes = [outcome for chunk in chunk_results for outcome in chunk]

    failed = [o for o in outcomes if o.error is not None]
    if len(failed) > MAX_FAILURE_FRACTION * spec.n_reps:
        raise ExperimentFailedError(
            f"{len(failed)} of {spec.n_reps} replications failed; first: {failed[0].error}"
        )
    good = [o for o in outcomes if o.error is None]
    lrt_values = np.array([o.lrt for o in good])
    fraction_floored = float(np.mean([o.floored for o in good])) if good else 0.0
    ecdf = EmpiricalCDF.from_samples(lrt_values)

    df = wilks_df(spec.scenario, spec.truth)
    ks_wilks = ks_distance(ecdf, lambda x: chi2_cdf(df, x))
    reject_wilks = float(np.mean(chi2_sf(df, lrt_values) < 0.05))

    cone_cdf = None
    ks_cone = None
    reject_cone = None
    if "cone" in spec.references:
        # Cone integrals are one-dimensional and cheap, so they stay on the
        # 49-node module default regardless of the fitting quadrature.
        cone_cdf = cone_reference(
            spec.scenario,
            spec.truth,
            n_draws=spec.n_draws,
            seed=spec.master_seed,
            n_workers=n_workers,
        )
        ks_cone = ks_distance(ecdf, cone_cdf)
        reject_cone = float(np.mean(cone_cdf.survival(lrt_values) < 0.05))

    bootstrap_cdf = None
    ks_bootstrap = None
    if "bootstrap" in spec.references:
        data0 = models.simulate(spec.truth, spec.n_obs, child_rng(spec.master_seed, "experiment", 0))
        fit_null0, _ = _fit_pair(spec.scenario, data0, spec.optim, child_rng(spec.master_seed, "experiment", 0))
        bootstrap_cdf = run_bootstrap_reference(
            spec.scenario,
            fit_null0.params,
            spec.n_obs,
            spec.bootstrap_b,
            spec.master_seed,
            optim=spec.optim,
            n_workers=n_workers,
            group_size=getattr(spec.truth, "group_size", None),
        )
        ks_bootstrap = ks_distance(ecdf, bootstrap_cdf)

    config_echo = {
        "scenario": spec.scenario,
        "n_obs": spec.n_obs,
        "n_reps": spec.n_reps,
        "references": list(spec.references),
        "n_draws": spec.n_draws,
        "bootstrap_b": spec.bootstrap_b,
        "master_seed": spec.master_seed,
        "optim": {
            "n_starts": spec.optim.n_starts,
            "max_iter": spec.optim.max_iter,
            "grad_tol": spec.optim.grad_tol,
            "seed": spec.optim.seed,
            "quad_nodes": spec.optim.quad_nodes,
        },
    }
    return ExperimentReport(
        scenario=spec.scenario,
        lrt_values=lrt_values,
        convergence_null=np.array([o.converged_null for o in good]),
        convergence_alt=np.array([o.converged_alt for o in good]),
        n_reps=spec.n_reps,
        n_failed=len(failed),
        fraction_floored=fraction_floored,
        wilks_df=df,
        ks_vs_wilks=ks_wilks,
        rejection_rate_at_05_wilks=reject_wilks,
        ks_vs_cone=ks_cone,
        rejection_rate_at_05_cone=reject_cone,
        ks_vs_bootstrap=ks_bootstrap,
        runtime_seconds=time.perf_counter() - start_time,
        master_seed=spec.master_seed,
        n_obs=spec.n_obs,
        config_echo=config_echo,
        cone_cdf=cone_cdf,
        bootstrap_cdf=bootstrap_cdf,
    )


def _null_params_for(scenario: str, fitted_null, group_size: int | None = None) -> object:
    """Turn a fitted null parameter vector back into a simulable model."""
    if isinstance(fitted_null, (EfaParams, IfaParams, RandomEffectsParams)):
        return fitted_null
    values = fitted_null.values if isinstance(fitted_null, ParamVector) else np.asarray(fitted_null)
    if scenario in ("efa_1a", "efa_1b"):
        j = values.shape[0] // 2
        return models.efa_params_from_values(values, j, 1)
    if scenario in ("ifa_2a", "ifa_2b"):
        j = values.shape[0] // 2
        return models.ifa_params_from_values(values, j, 1)
    if scenario == "re_3":
        if group_size is None:
            raise ValueError(
                "pass RandomEffectsParams or group_size for the grouped scenario"
            )
        return RandomEffectsParams(
            beta0=values[0], var_between=values[1], var_within=values[2], group_size=group_size
        )
    raise ValueError(f"unknown scenario {scenario!r}")


def _bootstrap_range(args) -> list[RepOutcome]:
    scenario, null_params, n_obs, optim, seed, lo, hi = args
    outcomes = []
    for b in range(lo, hi):
        rng = child_rng(seed, "bootstrap", b)
        try:
            data = models.simulate(null_params, n_obs, rng)
            fit_null, fit_alt = _fit_pair(scenario, data, optim, rng)
            stat = lrt_statistic(fit_alt, fit_null)
            outcomes.append(RepOutcome(stat.value, stat.floored, fit_null.converged, fit_alt.converged))
        except Exception as exc:
            outcomes.append(RepOutcome(float("nan"), False, False, False, f"{type(exc).__name__}: {exc}"))
    return outcomes


def run_bootstrap_reference(
    scenario: str,
    fitted_null,
    n_obs: int,
    n_boot: int,
    seed: int = 0,
    optim: OptimConfig | None = None,
    n_workers: int = 1,
    group_size: int | None = None,
) -> EmpiricalCDF:
    """Parametric bootstrap reference: refit on data simulated from the
    fitted null, once per bootstrap replicate.

    ``fitted_null`` may be the family parameter object or the flat fitted
    vector; the grouped scenario additionally needs ``group_size`` when a
    flat vector is passed.
    """
    if n_boot < 1:
        raise ValueError("need at least one bootstrap replicate")
    optim = optim or OptimConfig()
    null_params = _null_params_for(scenario, fitted_null, group_size)
    chunks = max(4 * n_workers, 1)
    edges = np.linspace(0, n_boot, chunks + 1).astype(int)
    payloads = [
        (scenario, null_params, n_obs, optim, seed, int(lo), int(hi))
        for lo, hi in zip(edges[:-1], edges[1:])
        if hi > lo
    ]
    if n_workers <= 1 or len(payloads) <= 1:
        chunk_results = [_bootstrap_range(payload) for payload in payloads]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            chunk_results = list(pool.map(_bootstrap_range, payloads))
    outcomes = [o for chunk in chunk_results for o in chunk]
    failed = [o for o in outcomes if o.error is not None]
    if len(failed) > MAX_FAILURE_FRACTION * n_boot:
        raise ExperimentFailedError(
            f"{len(failed)} of {n_boot} bootstrap refits failed; first: {failed[0].error}"
        )
    return EmpiricalCDF.from_samples(np.array([o.lrt for o in outcomes if o.error is None]))


def typeI_error(report_or_values, alpha: float, reference) -> float:
    """Fraction of replications whose reference-based p-value is below alpha.

    P-values use the inclusive survival P(ref >= lambda), so point masses
    (the boundary scenario's mass at zero) are handled correctly.
    """
    values = (
        report_or_values.lrt_values
        if isinstance(report_or_values, ExperimentReport)
        else np.asarray(report_or_values, dtype=float)
    )
    from .cones import MixtureChi2Law

    if isinstance(reference, EmpiricalCDF):
        p_values = reference.survival(values)
    elif isinstance(reference, MixtureChi2Law):
        p_values = mixture_chi2_survival(values)
    elif isinstance(reference, int):
        p_values = chi2_sf(reference, values)
    elif callable(reference):
        p_values = 1.0 - np.asarray(reference(values), dtype=float)
    else:
        raise TypeError("reference must be an EmpiricalCDF, mixture law, chi-square df, or CDF callable")
    return float(np.mean(np.asarray(p_values) < alpha))
