import numpy as np
import pytest

from lrtcone.harness import builtin_truths
from lrtcone.models import (
    Dataset,
    DegenerateVarianceError,
    EfaParams,
    IfaParams,
    InvalidProbWarning,
    NonSPDError,
    RandomEffectsParams,
    SaturatedGaussianParams,
    SaturatedMultinomialParams,
    all_patterns,
    efa_covariance,
    efa_loglik,
    efa_loglik_grad,
    efa_param_vector,
    gaussian_loglik,
    ifa_loglik,
    ifa_loglik_grad,
    ifa_param_vector,
    ifa_pattern_log_probs,
    ifa_pattern_prob,
    pattern_index,
    re_loglik,
    re_loglik_grad,
    saturated_multinomial_loglik,
    simulate,
)
from lrtcone.quadrature import gauss_hermite

LOG_2PI = np.log(2 * np.pi)


# --------------------------------------------------------------------------
# implied covariance
# --------------------------------------------------------------------------


def test_efa_covariance_rank_one_plus_identity():
    j = 5
    params = EfaParams(loadings_1=np.eye(j)[0], uniquenesses=np.ones(j))
    expected = np.diag([2.0, 1.0, 1.0, 1.0, 1.0])
    assert np.array_equal(efa_covariance(params), expected)


def test_efa_covariance_shipped_truth_first_entry():
    truth = builtin_truths()["efa_1a"]
    assert efa_covariance(truth)[0, 0] == pytest.approx(2.7489, abs=1e-12)


def test_efa_covariance_matches_elementwise_loop():
    rng = np.random.default_rng(0)
    for _ in range(5):
        j = 4
        a1 = rng.normal(size=j)
        a2 = np.concatenate([[0.0], rng.normal(size=j - 1)])
        delta = rng.uniform(0.5, 2.0, size=j)
        params = EfaParams(loadings_1=a1, uniquenesses=delta, loadings_2=a2)
        sigma = efa_covariance(params)
        for r in range(j):
            for c in range(j):
                expected = a1[r] * a1[c] + a2[r] * a2[c] + (delta[r] if r == c else 0.0)
                assert sigma[r, c] == pytest.approx(expected, rel=1e-14)


def test_efa_covariance_bitwise_symmetric():
    rng = np.random.default_rng(1)
    params = EfaParams(loadings_1=rng.normal(size=6), uniquenesses=rng.uniform(0.5, 2, 6))
    sigma = efa_covariance(params)
    assert np.array_equal(sigma, sigma.T)


# --------------------------------------------------------------------------
# Gaussian log-likelihood
# --------------------------------------------------------------------------


def test_gaussian_loglik_identity_at_zero():
    j = 4
    data = Dataset(np.zeros((1, j)), "gaussian")
    assert gaussian_loglik(np.eye(j), data) == pytest.approx(-j / 2 * LOG_2PI, abs=1e-12)


def test_gaussian_loglik_diagonal_case():
    j = 3
    cov = np.diag([2.0, 1.0, 1.0])
    data = Dataset(np.eye(j)[:1], "gaussian")
    expected = -j / 2 * LOG_2PI - 0.5 * np.log(2.0) - 0.25
    assert gaussian_loglik(cov, data) == pytest.approx(expected, abs=1e-12)


def test_gaussian_loglik_matches_dense_inverse_oracle():
    rng = np.random.default_rng(2)
    j, n = 5, 10
    root = rng.normal(size=(j, j))
    cov = root @ root.T + j * np.eye(j)
    rows = rng.normal(size=(n, j))
    inv = np.linalg.inv(cov)
    _, log_det = np.linalg.slogdet(cov)
    oracle = sum(
        -0.5 * (j * LOG_2PI + log_det + row @ inv @ row) for row in rows
    )
    value = gaussian_loglik(cov, Dataset(rows, "gaussian"))
    assert value == pytest.approx(oracle, rel=1e-10)


def test_gaussian_loglik_rejects_non_spd():
    with pytest.raises(NonSPDError):
        gaussian_loglik(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros((3, 2)))


# --------------------------------------------------------------------------
# item factor model
# --------------------------------------------------------------------------


def test_ifa_pattern_prob_zero_discrimination_closed_form():
    rng = np.random.default_rng(3)
    j = 4
    d = rng.normal(size=j)
    params = IfaParams(easiness=d, discrimination_1=np.zeros(j))
    quad = gauss_hermite(21)
    for pattern in all_patterns(j)[[0, 3, 9, 15]]:
        expected = np.prod(np.exp(pattern * d) / (1 + np.exp(d)))
        assert ifa_pattern_prob(params, pattern, quad) == pytest.approx(expected, rel=1e-12)


def test_ifa_pattern_prob_symmetric_case():
    j = 5
    params = IfaParams(easiness=np.zeros(j), discrimination_1=np.zeros(j))
    quad = gauss_hermite(21)
    for pattern in all_patterns(j)[[0, 7, 31]]:
        assert ifa_pattern_prob(params, pattern, quad) == pytest.approx(2.0**-j, rel=1e-12)


def test_ifa_pattern_prob_matches_dense_trapezoid_oracle():
    truth = builtin_truths()["ifa_2a"]
    pattern = np.ones(truth.n_items, dtype=int)
    grid = np.linspace(-8.0, 8.0, 10_000)
    eta = truth.easiness[None, :] + np.outer(grid, truth.discrimination_1)
    joint = np.prod(1.0 / (1.0 + np.exp(-eta)), axis=1)
    density = np.exp(-0.5 * grid**2) / np.sqrt(2 * np.pi)
    oracle = np.trapezoid(joint * density, grid)
    assert ifa_pattern_prob(params=truth, pattern=pattern) == pytest.approx(oracle, abs=1e-8)


def test_ifa_pattern_probs_sum_to_one():
    rng = np.random.default_rng(4)
    for j in (3, 6, 8):
        params = IfaParams(easiness=rng.normal(size=j), discrimination_1=rng.normal(size=j))
        total = np.exp(ifa_pattern_log_probs(params)).sum()
        assert total == pytest.approx(1.0, abs=1e-8)


def test_ifa_loglik_matches_naive_row_loop():
    rng = np.random.default_rng(5)
    truth = builtin_truths()["ifa_2a"]
    data = simulate(truth, 200, rng)
    quad = gauss_hermite(21)
    naive = sum(
        np.log(ifa_pattern_prob(truth, row, quad)) for row in data.values
    )
    assert ifa_loglik(truth, data, quad) == pytest.approx(naive, rel=1e-10)


def test_ifa_loglik_zero_discrimination_closed_form():
    rng = np.random.default_rng(6)
    j = 4
    d = rng.normal(size=j)
    params = IfaParams(easiness=d, discrimination_1=np.zeros(j))
    data = simulate(params, 300, rng)
    x = data.values.astype(float)
    closed = float((x @ d - np.log(1 + np.exp(d)).sum() * np.ones(len(x))).sum())
    assert ifa_loglik(params, data, gauss_hermite(21)) == pytest.approx(closed, rel=1e-10)


def test_pattern_indexing_little_endian():
    # item 1 is bit 0: pattern (1, 0, 0) -> 1, (0, 1, 0) -> 2, (1, 1, 0) -> 3
    rows = np.array([[1, 0, 0], [0, 1, 0], [1, 1, 0], [1, 1, 1]])
    assert pattern_index(rows).tolist() == [1, 2, 3, 7]
    assert np.array_equal(all_patterns(3)[5], np.array([1, 0, 1]))


# --------------------------------------------------------------------------
# random-intercept model
# --------------------------------------------------------------------------


def test_re_loglik_collapses_to_iid_when_no_between_variance():
    rng = np.random.default_rng(7)
    n, j = 30, 5
    rows = rng.normal(size=(n, j))
    params = RandomEffectsParams(beta0=0.3, var_between=0.0, var_within=1.7, group_size=j)
    cells = rows.reshape(-1)
    iid = np.sum(-0.5 * (LOG_2PI + np.log(1.7) + (cells - 0.3) ** 2 / 1.7))
    assert re_loglik(params, rows) == pytest.approx(iid, rel=1e-12)


def test_re_loglik_two_member_hand_value():
    params = RandomEffectsParams(beta0=0.0, var_between=1.0, var_within=1.0, group_size=2)
    value = re_loglik(params, np.zeros((1, 2)))
    assert value == pytest.approx(-LOG_2PI - 0.5 * np.log(3.0), abs=1e-12)


def test_re_loglik_matches_dense_gaussian_oracle():
    rng = np.random.default_rng(8)
    n, j = 12, 6
    rows = rng.normal(size=(n, j))
    for _ in range(5):
        beta0 = rng.normal()
        s1 = rng.uniform(0.0, 2.0)
        s2 = rng.uniform(0.5, 2.0)
        params = RandomEffectsParams(beta0=beta0, var_between=s1, var_within=s2, group_size=j)
        cov = s1 * np.ones((j, j)) + s2 * np.eye(j)
        inv = np.linalg.inv(cov)
        _, log_det = np.linalg.slogdet(cov)
        dev = rows - beta0
        oracle = sum(-0.5 * (j * LOG_2PI + log_det + row @ inv @ row) for row in dev)
        assert re_loglik(params, rows) == pytest.approx(oracle, rel=1e-10)


def test_re_params_reject_nonpositive_within_variance():
    with pytest.raises(DegenerateVarianceError):
        RandomEffectsParams(beta0=0.0, var_between=0.0, var_within=0.0, group_size=4)


# --------------------------------------------------------------------------
# saturated multinomial
# --------------------------------------------------------------------------


def test_multinomial_loglik_uniform():
    j, n = 3, 120
    probs = np.full(2**j - 1, 2.0**-j)
    params = SaturatedMultinomialParams(probs=probs)
    counts = np.full(2**j, n // 2**j)
    assert saturated_multinomial_loglik(params, counts) == pytest.approx(-n * j * np.log(2.0))


def test_multinomial_loglik_matches_naive_sum():
    rng = np.random.default_rng(9)
    j = 3
    raw = rng.uniform(0.1, 1.0, size=2**j)
    probs = raw / raw.sum()
    params = SaturatedMultinomialParams(probs=probs[1:])
    counts = rng.integers(0, 20, size=2**j)
    naive = sum(c * np.log(p) for c, p in zip(counts, probs) if c > 0)
    assert saturated_multinomial_loglik(params, counts) == pytest.approx(naive, rel=1e-12)


def test_multinomial_loglik_zero_count_zero_prob_convention():
    params = SaturatedMultinomialParams(probs=np.array([0.0, 0.5, 0.25]))
    counts = np.array([10, 0, 20, 10])  # pattern with prob 0 has count 0
    expected = 10 * np.log(0.25) + 20 * np.log(0.5) + 10 * np.log(0.25)
    assert saturated_multinomial_loglik(params, counts) == pytest.approx(expected)
    with pytest.warns(InvalidProbWarning):
        value = saturated_multinomial_loglik(params, np.array([10, 1, 20, 10]))
    assert value == -np.inf


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------


def test_simulate_efa_sample_covariance_converges():
    truth = builtin_truths()["efa_1a"]
    data = simulate(truth, 1_000_000, 10)
    sample_cov = data.values.T @ data.values / data.n_rows
    assert np.abs(sample_cov - efa_covariance(truth)).max() < 0.02


def test_simulate_ifa_marginal_means():
    rng = np.random.default_rng(11)
    j, n = 4, 20_000
    d = rng.normal(size=j)
    params = IfaParams(easiness=d, discrimination_1=np.zeros(j))
    data = simulate(params, n, 12)
    means = data.values.mean(axis=0)
    expected = 1 / (1 + np.exp(-d))
    se = np.sqrt(expected * (1 - expected) / n)
    assert np.all(np.abs(means - expected) < 3 * se + 1e-9)


def test_simulate_re_cell_variance():
    params = RandomEffectsParams(beta0=1.0, var_between=0.5, var_within=1.5, group_size=10)
    data = simulate(params, 20_000, 13)
    assert data.values.var() == pytest.approx(2.0, abs=0.05)
    assert data.values.mean() == pytest.approx(1.0, abs=0.05)


def test_simulate_deterministic_and_streams_independent():
    truth = builtin_truths()["efa_1a"]
    a = simulate(truth, 100, 42)
    b = simulate(truth, 100, 42)
    assert np.array_equal(a.values, b.values)
    c = simulate(truth, 100, 43)
    assert not np.array_equal(a.values, c.values)
    corr = np.corrcoef(a.values.ravel(), c.values.ravel())[0, 1]
    assert abs(corr) < 0.1


def test_simulate_saturated_families():
    gauss = SaturatedGaussianParams(cov_upper=np.array([2.0, 0.5, 1.0]))
    data = simulate(gauss, 50_000, 14)
    cov = data.values.T @ data.values / data.n_rows
    assert np.abs(cov - gauss.covariance()).max() < 0.05
    mult = SaturatedMultinomialParams(probs=np.array([0.2, 0.3, 0.1]))
    draws = simulate(mult, 50_000, 15)
    counts = np.bincount(pattern_index(draws.values), minlength=4) / 50_000
    assert np.abs(counts - mult.full_probs()).max() < 0.02


# --------------------------------------------------------------------------
# analytic gradients vs. central finite differences
# --------------------------------------------------------------------------


def _central_diff(fun, x0, step=1e-5):
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        up, down = x0.copy(), x0.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (fun(up) - fun(down)) / (2 * step)
    return grad


def _assert_grad_close(analytic, numeric, rel=1e-4):
    scale = np.maximum(np.abs(numeric), 1.0)
    assert np.max(np.abs(analytic - numeric) / scale) < rel


def test_efa_gradient_matches_finite_differences():
    rng = np.random.default_rng(16)
    truth = builtin_truths()["efa_1a"]
    data = simulate(truth, 400, rng)
    j = truth.n_items
    for _ in range(10):
        a1 = rng.normal(0.8, 0.3, size=j)
        a2 = np.concatenate([[0.0], rng.normal(0.0, 0.3, size=j - 1)])
        delta = rng.uniform(0.6, 1.8, size=j)
        params = EfaParams(loadings_1=a1, uniquenesses=delta, loadings_2=a2)
        vec = efa_param_vector(params).values

        def fun(values):
            p = EfaParams(
                loadings_1=values[j : 2 * j],
                uniquenesses=values[:j],
                loadings_2=np.concatenate([[0.0], values[2 * j :]]),
            )
            return efa_loglik(p, data)

        _assert_grad_close(efa_loglik_grad(params, data), _central_diff(fun, vec))


def test_ifa_gradient_matches_finite_differences():
    rng = np.random.default_rng(17)
    truth = builtin_truths()["ifa_2a"]
    data = simulate(truth, 300, rng)
    j = truth.n_items
    quad = gauss_hermite(21)
    for _ in range(5):
        d = rng.normal(0.0, 0.5, size=j)
        a1 = rng.normal(0.8, 0.3, size=j)
        a2 = np.concatenate([[0.0], rng.normal(0.0, 0.3, size=j - 1)])
        params = IfaParams(easiness=d, discrimination_1=a1, discrimination_2=a2)
        vec = ifa_param_vector(params).values

        def fun(values):
            p = IfaParams(
                easiness=values[:j],
                discrimination_1=values[j : 2 * j],
                discrimination_2=np.concatenate([[0.0], values[2 * j :]]),
            )
            return ifa_loglik(p, data, quad)

        _assert_grad_close(ifa_loglik_grad(params, data, quad), _central_diff(fun, vec))


def test_re_gradient_matches_finite_differences():
    rng = np.random.default_rng(18)
    rows = rng.normal(size=(25, 6)) + 0.4
    for _ in range(5):
        theta = np.array([rng.normal(), rng.uniform(0.1, 1.0), rng.uniform(0.5, 2.0)])

        def fun(values):
            p = RandomEffectsParams(
                beta0=values[0], var_between=values[1], var_within=values[2], group_size=6
            )
            return re_loglik(p, rows)

        params = RandomEffectsParams(
            beta0=theta[0], var_between=theta[1], var_within=theta[2], group_size=6
        )
        _assert_grad_close(re_loglik_grad(params, rows), _central_diff(fun, theta))


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def test_param_containers_validate():
    with pytest.raises(ValueError):
        EfaParams(loadings_1=np.ones(3), uniquenesses=np.array([1.0, -0.5, 1.0]))
    with pytest.raises(ValueError):
        EfaParams(loadings_1=np.ones(3), uniquenesses=np.ones(3), loadings_2=np.ones(3))
    with pytest.raises(ValueError):
        IfaParams(easiness=np.zeros(3), discrimination_1=np.zeros(3), discrimination_2=np.ones(3))
    with pytest.raises(ValueError):
        Dataset(np.array([[0, 2]]), "binary")
    with pytest.raises(NonSPDError):
        SaturatedGaussianParams(cov_upper=np.array([1.0, 2.0, 1.0]))


def test_ifa_probabilities_stable_at_extreme_predictors():
    # linear predictors beyond +-700 must not overflow
    params = IfaParams(easiness=np.array([800.0, -800.0]), discrimination_1=np.zeros(2))
    prob = ifa_pattern_prob(params, np.array([1, 0]), gauss_hermite(21))
    assert prob == pytest.approx(1.0, abs=1e-12)
    prob0 = ifa_pattern_prob(params, np.array([0, 0]), gauss_hermite(21))
    assert prob0 == pytest.approx(0.0, abs=1e-12)
