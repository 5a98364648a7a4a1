import numpy as np
import pytest

from lrtcone.fisher import (
    DegenerateCellError,
    NegativeEigenError,
    info_factor_submodel,
    info_re_saturated,
    info_saturated_gaussian,
    info_saturated_multinomial,
    sqrt_psd,
)
from lrtcone.halfvec import half_vec, half_vec_size
from lrtcone.harness import builtin_truths
from lrtcone.models import (
    EfaParams,
    IfaParams,
    NonSPDError,
    SaturatedGaussianParams,
    SaturatedMultinomialParams,
    efa_covariance,
    pattern_index,
    simulate,
)


# --------------------------------------------------------------------------
# Monte Carlo score oracle: E[score score'] estimated from simulated data
# --------------------------------------------------------------------------


def _gaussian_scores(rows, cov):
    """Per-row scores in the half-vectorized covariance coordinates."""
    j = cov.shape[0]
    inv = np.linalg.inv(cov)
    n = rows.shape[0]
    scores = np.empty((n, half_vec_size(j)))
    for index, row in enumerate(rows):
        g_full = 0.5 * (np.outer(inv @ row, inv @ row) - inv)
        mat = 2.0 * g_full - np.diag(np.diag(g_full))  # off-diagonals doubled
        scores[index] = half_vec(mat)
    return scores


def _assert_mc_close(analytic, scores):
    n = scores.shape[0]
    outer = scores[:, :, None] * scores[:, None, :]
    mc = outer.mean(axis=0)
    se = outer.std(axis=0) / np.sqrt(n)
    assert np.all(np.abs(mc - analytic) <= 3 * se + 1e-9)


def test_gaussian_info_identity_hand_values():
    info = info_saturated_gaussian(np.eye(2))
    expected = np.diag([0.5, 1.0, 0.5])
    assert np.allclose(info.matrix, expected, atol=1e-12)


def test_gaussian_info_matches_mc_score_oracle():
    params = SaturatedGaussianParams(cov_upper=np.array([1.5, 0.4, -0.2, 1.0, 0.3, 0.8]))
    cov = params.covariance()
    rows = simulate(params, 100_000, 21).values
    info = info_saturated_gaussian(params)
    _assert_mc_close(info.matrix, _gaussian_scores(rows, cov))


def test_gaussian_info_scaling_law():
    rng = np.random.default_rng(22)
    root = rng.normal(size=(3, 3))
    cov = root @ root.T + 3 * np.eye(3)
    base = info_saturated_gaussian(cov)
    scaled = info_saturated_gaussian(2.5 * cov)
    assert np.allclose(scaled.matrix, base.matrix / 2.5**2, rtol=1e-10)


def test_gaussian_info_rejects_non_spd():
    with pytest.raises(NonSPDError):
        info_saturated_gaussian(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_multinomial_info_bernoulli_case():
    p = 0.3
    info = info_saturated_multinomial(np.array([p]))
    # analytic differentiation of the Bernoulli log-density: 1 / (p (1 - p))
    assert info.matrix[0, 0] == pytest.approx(1.0 / (p * (1 - p)), rel=1e-12)


def test_multinomial_info_matches_mc_score_oracle():
    probs = np.array([0.25, 0.25, 0.25])
    params = SaturatedMultinomialParams(probs=probs)
    data = simulate(params, 100_000, 23)
    idx = pattern_index(data.values)
    indicators = np.eye(4)[idx][:, 1:]
    zero = (idx == 0).astype(float)
    scores = indicators / probs - zero[:, None] / 0.25
    info = info_saturated_multinomial(params)
    _assert_mc_close(info.matrix, scores)


def test_multinomial_info_sherman_morrison_inverse():
    probs = np.array([0.2, 0.35, 0.15])
    info = info_saturated_multinomial(probs)
    inverse_identity = np.diag(probs) - np.outer(probs, probs)
    assert np.allclose(info.matrix @ inverse_identity, np.eye(3), atol=1e-12)


def test_multinomial_info_rejects_degenerate_cells():
    with pytest.raises(DegenerateCellError):
        info_saturated_multinomial(np.array([0.5, 0.5, 0.0]))


def test_re_info_blocks():
    j = 4
    sigma_sq = 1.7
    info = info_re_saturated(sigma_sq * np.eye(j))
    k0 = half_vec_size(j)
    assert info.matrix[k0, k0] == pytest.approx(j / sigma_sq, rel=1e-12)
    assert np.allclose(info.matrix[k0, :k0], 0.0)
    assert np.allclose(info.matrix[:k0, k0], 0.0)


def test_re_info_mean_block_matches_mc():
    j = 3
    cov = np.array([[1.0, 0.3, 0.1], [0.3, 1.2, 0.2], [0.1, 0.2, 0.9]])
    rng = np.random.default_rng(24)
    rows = rng.multivariate_normal(np.zeros(j), cov, size=100_000)
    inv = np.linalg.inv(cov)
    scores = rows @ inv @ np.ones(j)
    mc = (scores**2).mean()
    se = (scores**2).std() / np.sqrt(len(scores))
    info = info_re_saturated(cov)
    assert abs(info.matrix[-1, -1] - mc) <= 3 * se


# --------------------------------------------------------------------------
# submodel information and the singularity diagnostic
# --------------------------------------------------------------------------


def test_two_factor_efa_info_has_zero_second_factor_rows():
    truth = builtin_truths()["efa_1a"]
    j = truth.n_items
    params = EfaParams(
        loadings_1=truth.loadings_1,
        uniquenesses=truth.uniquenesses,
        loadings_2=np.zeros(j),
    )
    info = info_factor_submodel(params)
    assert info.dim == 3 * j - 1
    tail = [i for i, name in enumerate(info.layout) if name.endswith(",2]")]
    assert len(tail) == j - 1
    assert np.abs(info.matrix[tail, :]).max() < 1e-10
    assert np.abs(info.matrix[:, tail]).max() < 1e-10
    assert info.rank_estimate <= 2 * j


def test_two_factor_ifa_info_has_zero_second_factor_rows():
    truth = builtin_truths()["ifa_2a"]
    j = truth.n_items
    params = IfaParams(
        easiness=truth.easiness,
        discrimination_1=truth.discrimination_1,
        discrimination_2=np.zeros(j),
    )
    info = info_factor_submodel(params)
    tail = [i for i, name in enumerate(info.layout) if name.endswith(",2]")]
    assert np.abs(info.matrix[tail, :]).max() < 1e-10
    assert info.rank_estimate <= 2 * j


def test_one_factor_infos_are_well_conditioned():
    efa = builtin_truths()["efa_1a"]
    ifa = builtin_truths()["ifa_2a"]
    assert info_factor_submodel(efa).eigen_ratio() > 1e-3
    assert info_factor_submodel(ifa).eigen_ratio() > 1e-6


def test_efa_submodel_info_matches_mc_score_oracle():
    # Scores of the structured model are chain-rule pullbacks of the
    # saturated Gaussian scores; simulate and compare.
    truth = EfaParams(
        loadings_1=np.array([1.0, 0.8, 1.2]), uniquenesses=np.array([0.9, 1.1, 0.7])
    )
    cov = efa_covariance(truth)
    rows = simulate(truth, 100_000, 25).values
    inv = np.linalg.inv(cov)
    j = 3
    derivs = []
    for l in range(j):
        d = np.zeros((j, j))
        d[l, l] = 1.0
        derivs.append(d)
    for l in range(j):
        d = np.zeros((j, j))
        d[l, :] += truth.loadings_1
        d[:, l] += truth.loadings_1
        derivs.append(d)
    scores = np.empty((rows.shape[0], 2 * j))
    for index, row in enumerate(rows):
        g_full = 0.5 * (np.outer(inv @ row, inv @ row) - inv)
        scores[index] = [np.sum(g_full * d) for d in derivs]
    info = info_factor_submodel(truth)
    _assert_mc_close(info.matrix, scores)


def test_ifa_submodel_info_matches_mc_score_oracle():
    truth = IfaParams(easiness=np.array([0.2, -0.4]), discrimination_1=np.array([0.9, 1.1]))
    from lrtcone.models import ifa_pattern_prob_derivs

    probs, d_probs = ifa_pattern_prob_derivs(truth)
    data = simulate(truth, 100_000, 26)
    idx = pattern_index(data.values)
    scores = (d_probs / probs[:, None])[idx]
    info = info_factor_submodel(truth)
    _assert_mc_close(info.matrix, scores)


# --------------------------------------------------------------------------
# PSD square root
# --------------------------------------------------------------------------


def test_sqrt_psd_identity_and_diagonal():
    assert np.allclose(sqrt_psd(np.eye(3)), np.eye(3), atol=1e-14)
    assert np.allclose(sqrt_psd(np.diag([4.0, 1.0])), np.diag([2.0, 1.0]), atol=1e-14)


def test_sqrt_psd_multiply_back():
    rng = np.random.default_rng(27)
    for _ in range(10):
        root = rng.normal(size=(6, 6))
        mat = root @ root.T + 1e-3 * np.eye(6)
        s = sqrt_psd(mat)
        assert np.array_equal(s, s.T)
        scale = np.linalg.norm(mat)
        assert np.linalg.norm(s @ s - mat) < 1e-10 * scale


def test_sqrt_psd_clips_tiny_negatives_and_rejects_big_ones():
    mat = np.diag([1.0, -1e-12])
    s = sqrt_psd(mat)
    assert s[1, 1] == 0.0
    with pytest.raises(NegativeEigenError):
        sqrt_psd(np.diag([1.0, -1e-3]))


def test_info_matrix_spectrum_fields():
    info = info_saturated_gaussian(np.eye(3))
    assert info.rank_estimate == info.dim == 6
    assert np.all(np.diff(info.eigenvalues) >= 0)
    assert len(info.layout) == 6
