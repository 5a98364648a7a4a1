"""Reading the information-matrix spectrum as a singularity diagnostic.

The failure mode behind the factor-count test is visible before running
any simulation: write the two-factor model in its own parameter space and
evaluate the exact information matrix at a point whose second factor is
zero.  The derivative of the model in every second-factor coordinate
vanishes there, so the corresponding rows and columns are identically zero
and the matrix cannot be inverted.  The same computation at the one-factor
model, or at the saturated model, is comfortably positive definite.
"""

import numpy as np

from lrtcone import (
    EfaParams,
    IfaParams,
    builtin_truths,
    efa_covariance,
    info_factor_submodel,
    info_saturated_gaussian,
)

truths = builtin_truths()
efa = truths["efa_1a"]
j = efa.n_items

two_factor_at_null = EfaParams(
    loadings_1=efa.loadings_1,
    uniquenesses=efa.uniquenesses,
    loadings_2=np.zeros(j),
)
info = info_factor_submodel(two_factor_at_null)
second_factor_rows = [i for i, name in enumerate(info.layout) if name.endswith(",2]")]

print("two-factor linear model at a one-factor truth")
print(f"  parameter space dimension : {info.dim} (= 3J - 1)")
print(f"  rank estimate             : {info.rank_estimate} (= 2J)")
print(f"  largest |entry| in the second-factor rows: {np.abs(info.matrix[second_factor_rows]).max():.2e}")
print(f"  eigenvalues (smallest five): {np.round(info.eigenvalues[:5], 12)}")
print()

info_one = info_factor_submodel(efa)
info_sat = info_saturated_gaussian(efa_covariance(efa))
print(f"one-factor model  : min/max eigenvalue ratio = {info_one.eigen_ratio():.2e}")
print(f"saturated Gaussian: min/max eigenvalue ratio = {info_sat.eigen_ratio():.2e}")
print()

ifa = truths["ifa_2a"]
info_ifa = info_factor_submodel(
    IfaParams(
        easiness=ifa.easiness,
        discrimination_1=ifa.discrimination_1,
        discrimination_2=np.zeros(j),
    )
)
print(f"two-factor item model at a one-factor truth: rank {info_ifa.rank_estimate} of {info_ifa.dim}")
print()
print("The same diagnostic is available from the command line:")
print("  lrtcone fisher-check --scenario efa_2factor_null")
