"""Likelihood ratio tests for latent variable models whose chi-square
approximation fails, with the correct cone-projection reference laws.

The package covers three worked model classes: linear factor analysis,
logistic item factor analysis, and a balanced random-intercept model.  For
each it provides simulators, maximum likelihood fits, exact Fisher
informations with singularity diagnostics, tangent-cone constructions, and
Monte Carlo reference distributions, plus a replication harness and a batch
CLI (``lrtcone``).
"""

from .cones import (
    ConeMinConfig,
    ConeMinResult,
    HalfSpaceCone,
    LinearSubspace,
    MixtureChi2Law,
    NonlinearImage,
    cone_efa_alt,
    cone_efa_null,
    cone_ifa_alt,
    cone_ifa_null,
    cone_minimize,
    cone_re_alt,
    cone_re_null,
    mixture_chi2_reduction,
)
from .estimation import (
    AllStartsFailedError,
    FitResult,
    LrtStat,
    NegativeLrtError,
    OptimConfig,
    fit_factor_model,
    fit_random_effects,
    fit_saturated_gaussian,
    fit_saturated_multinomial,
    lrt_statistic,
)
from .fisher import (
    InfoMatrix,
    info_factor_submodel,
    info_re_saturated,
    info_saturated_gaussian,
    info_saturated_multinomial,
    sqrt_psd,
)
from .harness import (
    ExperimentFailedError,
    ExperimentReport,
    ExperimentSpec,
    builtin_truths,
    cone_reference,
    run_bootstrap_reference,
    run_experiment,
    typeI_error,
    wilks_df,
)
from .models import (
    Dataset,
    EfaParams,
    IfaParams,
    ParamVector,
    RandomEffectsParams,
    SaturatedGaussianParams,
    SaturatedMultinomialParams,
    efa_covariance,
    gaussian_loglik,
    ifa_loglik,
    ifa_pattern_prob,
    re_loglik,
    saturated_multinomial_loglik,
    simulate,
)
from .quadrature import QuadratureRule, gauss_hermite, integrate, tensor_rule
from .refdist import (
    EmpiricalCDF,
    NegativeDrawError,
    SingularInfoError,
    chi2_cdf,
    ks_distance,
    mixture_chi2_cdf,
    sample_cone_projection_law,
    sample_nested_cone_law,
)

__version__ = "0.1.0"
