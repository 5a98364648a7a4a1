"""A parametric bootstrap as the simulation-based alternative.

Instead of deriving the limit law from tangent cones, one can refit the
null model, simulate from the fit, and recompute the statistic B times.
Both routes approximate the same limit; the bootstrap needs B full refits
per test, while the cone route needs one Monte Carlo pass that is reused
for every dataset.  Here both are compared on the variance-component
scenario, where the limit is the analytic mixture law.
"""

from lrtcone import (
    RandomEffectsParams,
    builtin_truths,
    fit_random_effects,
    ks_distance,
    lrt_statistic,
    mixture_chi2_cdf,
    run_bootstrap_reference,
    simulate,
)
from lrtcone.refdist import mixture_chi2_survival

truth = builtin_truths()["re_3"]
data = simulate(truth, 200, seed_or_rng=3)

fit_null = fit_random_effects(data, constrain_null=True)
fit_alt = fit_random_effects(data, constrain_null=False)
observed = lrt_statistic(fit_alt, fit_null).value
print(f"observed statistic: {observed:.4f}")

fitted = RandomEffectsParams(
    beta0=fit_null.params.get("beta0"),
    var_between=0.0,
    var_within=fit_null.params.get("sigma2_sq"),
    group_size=truth.group_size,
)
boot = run_bootstrap_reference("re_3", fitted, n_obs=200, n_boot=200, seed=4)
print(f"bootstrap replicates: {boot.n}")
print(f"bootstrap p-value   : {boot.survival(observed):.3f}")
print(f"mixture-law p-value : {mixture_chi2_survival(observed):.3f}")
print(f"KS(bootstrap CDF, mixture law): {ks_distance(boot, mixture_chi2_cdf):.3f}")
print()
print("At 200 replicates the bootstrap CDF already hugs the analytic mixture;")
print("for models where each refit is expensive, the cone route is the cheaper path.")
