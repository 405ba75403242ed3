import math

import numpy as np
import pytest

from privrank import (KIND_RAW, MECH_ADRR, ComparisonModel, ConvergenceError,
                      EstimatorConfig, PairwiseDataset, PrivacyProfile,
                      centered_uniform_preferences, default_lambda, fit,
                      generate, gradient, hessian,
                      hessian_min_nonzero_eigenvalue, objective, privatize)

BTL = ComparisonModel("btl")
ALL_MODELS = [ComparisonModel("btl"), ComparisonModel("tm"), ComparisonModel("dt")]


def _random_instance(seed, m=4, L=3, mechanism=MECH_ADRR):
    rng = np.random.default_rng(seed)
    theta_star = centered_uniform_preferences(m, rng)
    raw = generate(theta_star, BTL, L=L, p=0.9, rng=rng)
    profile = PrivacyProfile.uniform(L, 0.5, 3.0, rng)
    ds = privatize(raw, profile, mechanism, rng)
    theta = 0.5 * rng.standard_normal(m)
    return theta, ds


def _objective_oracle(theta, ds, model, lam):
    """Naive per-record double loop, no aggregation or log-space tricks."""
    total = 0.0
    if ds.kind == "debiased_weighted":
        w_all = ds.profile.weights
        zs = ds.values
        ws = [w_all[l] for l in ds.users]
    else:
        zs = ds.values / ds.L
        ws = [1.0 / ds.L for _ in range(len(ds))]
    for (l, i, j, _), z, w in zip(ds.records, zs, ws):
        gap = theta[i] - theta[j]
        total -= z * math.log(model.cdf(gap)) + (w - z) * math.log(1.0 - model.cdf(gap))
    return total + lam * float(np.dot(theta, theta))


def test_objective_at_zero_closed_form():
    theta, ds = _random_instance(0)
    w = ds.profile.weights
    expected = math.log(2.0) * sum(w[l] for l, _, _, _ in ds.records)
    assert objective(np.zeros(ds.m), ds, BTL, lam=0.0) == pytest.approx(expected, rel=1e-12)


def test_objective_empty_dataset_is_penalty():
    empty = PairwiseDataset(m=3, L=1, users=[], item_i=[], item_j=[],
                            values=[], kind=KIND_RAW)
    theta = np.array([1.0, -2.0, 1.0])
    assert objective(theta, empty, BTL, lam=0.7) == pytest.approx(0.7 * 6.0)
    np.testing.assert_allclose(gradient(theta, empty, BTL, lam=0.7), 1.4 * theta)
    np.testing.assert_allclose(gradient(np.zeros(3), empty, BTL, lam=0.7), 0.0)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.kind)
def test_objective_matches_double_loop_oracle(model):
    for seed in range(5):
        theta, ds = _random_instance(seed)
        ours = objective(theta, ds, model, lam=0.3)
        oracle = _objective_oracle(theta, ds, model, lam=0.3)
        assert ours == pytest.approx(oracle, abs=1e-10)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.kind)
def test_gradient_matches_finite_differences(model):
    h = 1e-6
    for seed in range(5):
        theta, ds = _random_instance(seed + 10)
        grad = gradient(theta, ds, model, lam=0.2)
        for k in range(ds.m):
            e = np.zeros(ds.m)
            e[k] = h
            fd = (objective(theta + e, ds, model, 0.2)
                  - objective(theta - e, ds, model, 0.2)) / (2.0 * h)
            assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_two_item_fit_inverts_empirical_frequency():
    rng = np.random.default_rng(2)
    raw = generate(np.array([0.4, -0.4]), BTL, L=50, p=1.0, rng=rng)
    z_bar = raw.values.mean()
    est = fit(raw, BTL, EstimatorConfig(lam=1e-10))
    gap = est.theta_hat[0] - est.theta_hat[1]
    assert gap == pytest.approx(math.log(z_bar / (1.0 - z_bar)), abs=1e-6)
    assert abs(est.theta_hat.sum()) <= 1e-8


def test_all_ties_give_zero_estimate():
    ds = PairwiseDataset(m=2, L=2, users=[0, 1], item_i=[0, 0], item_j=[1, 1],
                         values=[1.0, 0.0], kind=KIND_RAW)
    est = fit(ds, BTL, EstimatorConfig(lam=0.1))
    np.testing.assert_allclose(est.theta_hat, 0.0, atol=1e-9)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.kind)
def test_fit_centering_lemma(model):
    for seed in range(3):
        _, ds = _random_instance(seed + 20, m=5, L=10)
        est = fit(ds, model, EstimatorConfig(lam=0.05))
        assert abs(est.theta_hat.sum()) <= 1e-8
        assert est.final_grad_norm <= 1e-8


def test_monotone_descent_trace():
    _, ds = _random_instance(33, m=6, L=15)
    est = fit(ds, BTL, EstimatorConfig(lam=0.02, keep_trace=True))
    trace = np.asarray(est.objective_trace)
    assert np.all(np.diff(trace) <= 0.0)
    assert trace[-1] == pytest.approx(est.objective_value)


def test_non_private_limit_equals_raw_fit():
    rng = np.random.default_rng(4)
    raw = generate(centered_uniform_preferences(5, rng), BTL, L=12, p=0.8, rng=rng)
    adrr = privatize(raw, PrivacyProfile.non_private(12), MECH_ADRR,
                     np.random.default_rng(0))
    cfg = EstimatorConfig(lam=0.01)
    np.testing.assert_allclose(fit(adrr, BTL, cfg).theta_hat,
                               fit(raw, BTL, cfg).theta_hat, atol=1e-8)


def test_fixed_step_mode():
    _, ds = _random_instance(8, m=4, L=10)
    est = fit(ds, BTL, EstimatorConfig(lam=0.05, step_size=0.5, grad_tol=1e-6))
    assert est.final_grad_norm <= 1e-6


def test_convergence_error_carries_diagnostics():
    _, ds = _random_instance(9, m=5, L=10)
    with pytest.raises(ConvergenceError) as err:
        fit(ds, BTL, EstimatorConfig(lam=0.01, max_iters=2))
    assert err.value.iterations == 2
    assert err.value.final_grad_norm > 0.0


def test_isolated_item_warns():
    ds = PairwiseDataset(m=3, L=2, users=[0, 1], item_i=[0, 0], item_j=[1, 1],
                         values=[1.0, 1.0], kind=KIND_RAW)
    with pytest.warns(UserWarning, match="no observed comparison"):
        fit(ds, BTL, EstimatorConfig(lam=0.1))


def test_fit_requires_profile_for_weighted_data():
    _, ds = _random_instance(12)
    stripped = PairwiseDataset(m=ds.m, L=ds.L, users=ds.users, item_i=ds.item_i,
                               item_j=ds.item_j, values=ds.values, kind=ds.kind)
    with pytest.raises(ValueError, match="profile"):
        fit(stripped, BTL, EstimatorConfig(lam=0.1))
    with pytest.raises(ValueError, match="empty"):
        fit(PairwiseDataset(m=2, L=1, users=[], item_i=[], item_j=[],
                            values=[], kind=KIND_RAW), BTL, EstimatorConfig())


def test_default_lambda():
    assert default_lambda(PrivacyProfile.non_private(100)) == pytest.approx(0.01)
    eps_half = 2.0 * math.atanh(math.sqrt(0.5))
    profile = PrivacyProfile(np.full(200, eps_half))  # B = 0.5
    assert default_lambda(profile) == pytest.approx(1.0 / 100.0)
    eps = np.array([0.2, 2.0, 1.0])
    t2 = np.tanh(eps / 2.0) ** 2
    assert default_lambda(PrivacyProfile(eps)) == pytest.approx(1.0 / t2.sum())


def test_hessian_annihilates_ones_and_matches_fd():
    theta, ds = _random_instance(21, m=5, L=8)
    H = hessian(theta, ds, BTL)
    np.testing.assert_allclose(H @ np.ones(5), 0.0, atol=1e-12)

    h = 1e-5
    H_fd = np.zeros((5, 5))
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        H_fd[:, k] = (gradient(theta + e, ds, BTL, 0.0)
                      - gradient(theta - e, ds, BTL, 0.0)) / (2.0 * h)
    np.testing.assert_allclose(H, H_fd, atol=1e-6)

    # reference eigensolve: eigenvalues of the dense matrix, discarding the
    # structural zero of the all-ones direction
    ours = hessian_min_nonzero_eigenvalue(theta, ds, BTL)
    eigvals = np.sort(np.linalg.eigvalsh(H))
    assert ours == pytest.approx(eigvals[1], abs=1e-8)


def test_hessian_diagnostic_cap():
    ds = PairwiseDataset(m=501, L=1, users=[0], item_i=[0], item_j=[500],
                         values=[1.0], kind=KIND_RAW)
    with pytest.raises(ValueError, match="cap"):
        hessian_min_nonzero_eigenvalue(np.zeros(501), ds, BTL)


def test_btl_hessian_diagnostic_nonnegative():
    for seed in range(5):
        theta, ds = _random_instance(seed + 40, m=5, L=10)
        assert hessian_min_nonzero_eigenvalue(theta, ds, BTL) >= 0.0
