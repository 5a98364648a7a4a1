import numpy as np
import pytest

from lrtcone.cones import LinearSubspace, cone_efa_null, cone_re_alt, cone_re_null
from lrtcone.fisher import info_re_saturated, info_saturated_gaussian, _build_info
from lrtcone.harness import builtin_truths
from lrtcone.models import efa_covariance
from lrtcone.refdist import (
    EmpiricalCDF,
    SingularInfoError,
    chi2_cdf,
    ks_distance,
    mixture_chi2_cdf,
    mixture_chi2_survival,
    sample_cone_projection_law,
    sample_nested_cone_law,
)


def _identity_info(k):
    return _build_info(np.eye(k), tuple(f"x{i}" for i in range(k)))


# --------------------------------------------------------------------------
# analytic CDFs
# --------------------------------------------------------------------------


def test_chi2_cdf_limits():
    assert chi2_cdf(5, 1e9) == pytest.approx(1.0, abs=1e-12)
    assert chi2_cdf(5, -1.0) == 0.0
    assert chi2_cdf(5, 0.0) == 0.0


def test_chi2_cdf_quantile_value_against_quadrature():
    # Integrate the chi-square(1) density numerically; the substitution
    # x = u^2 removes the 1/sqrt(x) endpoint singularity.
    u = np.linspace(0.0, np.sqrt(3.8415), 400_001)
    integrand = 2.0 * np.exp(-(u**2) / 2) / np.sqrt(2 * np.pi)
    integral = np.trapezoid(integrand, u)
    assert chi2_cdf(1, 3.8415) == pytest.approx(integral, abs=1e-8)
    assert chi2_cdf(1, 3.8415) == pytest.approx(0.95, abs=1e-4)


def test_chi2_cdf_against_simulation():
    rng = np.random.default_rng(0)
    draws = rng.chisquare(9, size=100_000)
    q95 = np.quantile(draws, 0.95)
    assert chi2_cdf(9, q95) == pytest.approx(0.95, abs=0.01)


def test_mixture_cdf_values():
    assert mixture_chi2_cdf(0.0) == pytest.approx(0.5, abs=1e-14)
    assert mixture_chi2_cdf(-1.0) == 0.0
    # via the chi-square(1) tail: F(x) = 1 - 0.5 (1 - F_chi2_1(x))
    assert mixture_chi2_cdf(3.8415) == pytest.approx(1 - 0.5 * (1 - chi2_cdf(1, 3.8415)), rel=1e-12)
    assert mixture_chi2_cdf(3.8415) == pytest.approx(0.975, abs=1e-4)


def test_mixture_cdf_monotone():
    grid = np.linspace(-1.0, 20.0, 10_000)
    values = mixture_chi2_cdf(grid)
    assert np.all(np.diff(values) >= 0)


def test_mixture_survival_includes_point_mass():
    assert mixture_chi2_survival(0.0) == 1.0
    assert mixture_chi2_survival(-1.0) == 1.0
    assert mixture_chi2_survival(1e9) == pytest.approx(0.0, abs=1e-12)


# --------------------------------------------------------------------------
# EmpiricalCDF
# --------------------------------------------------------------------------


def test_ecdf_basic_queries():
    ecdf = EmpiricalCDF.from_samples(np.array([3.0, 1.0, 2.0, 2.0]))
    assert np.array_equal(ecdf.values, [1.0, 2.0, 2.0, 3.0])
    assert ecdf.cdf(0.5) == 0.0
    assert ecdf.cdf(2.0) == 0.75
    assert ecdf.cdf(10.0) == 1.0
    assert ecdf.survival(2.0) == 0.75
    assert ecdf.quantile(0.5) == 2.0
    assert ecdf.quantile(1.0) == 3.0


def test_ecdf_quantile_cdf_inequality():
    rng = np.random.default_rng(1)
    ecdf = EmpiricalCDF.from_samples(rng.normal(size=200))
    for x in rng.normal(size=50):
        p = ecdf.cdf(x)
        if p > 0:
            assert ecdf.quantile(p) <= x


def test_ecdf_csv_roundtrip(tmp_path):
    ecdf = EmpiricalCDF.from_samples(np.random.default_rng(2).exponential(size=77))
    path = tmp_path / "cdf.csv"
    ecdf.to_csv(path)
    back = EmpiricalCDF.from_csv(path)
    assert back.n == ecdf.n
    assert np.array_equal(back.values, ecdf.values)


# --------------------------------------------------------------------------
# KS distance
# --------------------------------------------------------------------------


def test_ks_identical_cdfs_zero():
    values = np.random.default_rng(3).normal(size=100)
    a = EmpiricalCDF.from_samples(values)
    b = EmpiricalCDF.from_samples(values.copy())
    assert ks_distance(a, b) == 0.0


def test_ks_disjoint_samples_one():
    a = EmpiricalCDF.from_samples(np.arange(10.0))
    b = EmpiricalCDF.from_samples(np.arange(10.0) + 1e9)
    assert ks_distance(a, b) == 1.0


def test_ks_uniform_dkw_bound():
    rng = np.random.default_rng(4)
    draws = rng.random(10_000)
    ecdf = EmpiricalCDF.from_samples(draws)
    assert ks_distance(ecdf, lambda x: np.clip(x, 0.0, 1.0)) < 0.02


def test_ks_handles_reference_atoms():
    # half the sample at exactly zero, matching the mixture law's point mass
    rng = np.random.default_rng(5)
    w = rng.standard_normal(20_000)
    draws = np.where(w >= 0, w**2, 0.0)
    ecdf = EmpiricalCDF.from_samples(draws)
    assert ks_distance(ecdf, mixture_chi2_cdf) < 0.02


# --------------------------------------------------------------------------
# cone-projection laws
# --------------------------------------------------------------------------


def test_projection_law_full_space_all_zero():
    law = sample_cone_projection_law(LinearSubspace(np.eye(6)), _identity_info(6), 200, seed=1)
    assert np.all(law.values <= 1e-18)


def test_projection_law_subspace_reduces_to_chi2():
    rng = np.random.default_rng(6)
    for k, m in [(5, 2), (8, 3), (10, 9), (7, 0), (12, 6)]:
        basis = rng.normal(size=(k, m))
        law = sample_cone_projection_law(
            LinearSubspace(basis), _identity_info(k), 10_000, seed=k * 10 + m
        )
        assert ks_distance(law, lambda x: chi2_cdf(k - m, x)) < 0.02


def test_projection_law_shipped_factor_cone_is_chi2_nine():
    truth = builtin_truths()["efa_1a"]
    info = info_saturated_gaussian(efa_covariance(truth))
    law = sample_cone_projection_law(cone_efa_null(truth.loadings_1), info, 10_000, seed=7)
    assert ks_distance(law, lambda x: chi2_cdf(9, x)) < 0.02


def test_projection_law_rejects_singular_info():
    singular = _build_info(np.diag([1.0, 0.0, 1.0]), ("a", "b", "c"))
    with pytest.raises(SingularInfoError):
        sample_cone_projection_law(LinearSubspace(np.eye(3)[:, :1]), singular, 10, seed=0)


def test_nested_law_equal_cones_all_zero():
    rng = np.random.default_rng(8)
    basis = rng.normal(size=(6, 2))
    law = sample_nested_cone_law(
        LinearSubspace(basis), LinearSubspace(basis.copy()), _identity_info(6), 500, seed=2
    )
    assert np.all(law.values <= 1e-16)


def test_nested_law_subspace_pair_is_chi2_difference():
    rng = np.random.default_rng(9)
    wide = rng.normal(size=(9, 5))
    narrow = wide[:, :2]
    law = sample_nested_cone_law(
        LinearSubspace(narrow), LinearSubspace(wide), _identity_info(9), 10_000, seed=3
    )
    assert np.all(law.values >= 0)
    assert ks_distance(law, lambda x: chi2_cdf(3, x)) < 0.02


def test_nested_law_grouped_cones_follow_mixture():
    truth = builtin_truths()["re_3"]
    j = truth.group_size
    info = info_re_saturated(truth.var_within * np.eye(j))
    law = sample_nested_cone_law(cone_re_null(j), cone_re_alt(j), info, 10_000, seed=4)
    assert ks_distance(law, mixture_chi2_cdf) < 0.02
    assert np.mean(law.values == 0.0) == pytest.approx(0.5, abs=0.02)


def test_sampling_reproducible_and_worker_invariant():
    truth = builtin_truths()["efa_1a"]
    info = info_saturated_gaussian(efa_covariance(truth))
    cone = cone_efa_null(truth.loadings_1)
    law_a = sample_cone_projection_law(cone, info, 600, seed=11, n_workers=1)
    law_b = sample_cone_projection_law(cone, info, 600, seed=11, n_workers=1)
    law_c = sample_cone_projection_law(cone, info, 600, seed=11, n_workers=3)
    assert np.array_equal(law_a.values, law_b.values)
    assert np.array_equal(law_a.values, law_c.values)
    law_d = sample_cone_projection_law(cone, info, 600, seed=12)
    assert not np.array_equal(law_a.values, law_d.values)


def test_nested_sampling_worker_invariant_nonlinear():
    from lrtcone.cones import cone_efa_alt

    truth = builtin_truths()["efa_1a"]
    info = info_saturated_gaussian(efa_covariance(truth))
    null, alt = cone_efa_null(truth.loadings_1), cone_efa_alt(truth.loadings_1)
    law_a = sample_nested_cone_law(null, alt, info, 120, seed=13, n_workers=1)
    law_b = sample_nested_cone_law(null, alt, info, 120, seed=13, n_workers=2)
    assert np.array_equal(law_a.values, law_b.values)
    assert np.all(law_a.values >= 0)
    assert np.isfinite(law_a.values.mean())


def test_nested_law_rejects_singular_info():
    singular = _build_info(np.diag([1.0, 1.0, 0.0]), ("a", "b", "c"))
    with pytest.raises(SingularInfoError):
        sample_nested_cone_law(
            LinearSubspace(np.eye(3)[:, :1]), LinearSubspace(np.eye(3)[:, :2]), singular, 10, seed=0
        )


def test_nested_law_flags_non_nested_cones():
    from lrtcone.refdist import NegativeDrawError

    # alternative smaller than the null: the paired difference goes negative
    wide = LinearSubspace(np.eye(5)[:, :3])
    point = LinearSubspace(np.zeros((5, 0)))
    with pytest.raises(NegativeDrawError):
        sample_nested_cone_law(wide, point, _identity_info(5), 50, seed=1)
