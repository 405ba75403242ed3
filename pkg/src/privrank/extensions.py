"""Mixed-effects estimation, likelihood-based model selection, budget guidance."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from .data import KIND_RAW, PairwiseDataset
from .estimator import ConvergenceError, EstimatorConfig, _gradient_descent, fit, objective
from .models import BTL, ComparisonModel

logger = logging.getLogger(__name__)


@dataclass
class MixedEffectsEstimate:
    theta_hat: np.ndarray
    gamma_hat: np.ndarray
    sigma_hat: float
    iterations: int
    final_grad_norm: float
    objective_value: float


def mixed_effects_objective(raw: PairwiseDataset, theta, gamma, lam: float) -> float:
    """Joint loss sum(-y*eta + log(1+e^eta)) + lam*||theta||^2 with
    eta = gamma_l + theta_i - theta_j."""
    if raw.kind != KIND_RAW:
        raise ValueError("mixed-effects objective expects a raw_binary dataset")
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta = gamma[raw.users] + theta[raw.item_i] - theta[raw.item_j]
    return float(np.sum(-raw.values * eta + np.logaddexp(0.0, eta)) + lam * np.dot(theta, theta))


def fit_mixed_effects(raw: PairwiseDataset, lam: float,
                      config: EstimatorConfig | None = None) -> MixedEffectsEstimate:
    """Two-step mixed-effects estimator for logistic comparisons.

    Step one treats the per-user effects gamma as fixed and jointly minimizes

        sum over records [ -y * eta + log(1 + e^eta) ] + lam * ||theta||^2,
        eta = gamma_l + theta_i - theta_j,

    which is jointly convex, by gradient descent from zero. Step two sets
    sigma_hat to the sample standard deviation of the fitted effects
    (mean-centered, L-1 denominator).
    """
    if raw.kind != KIND_RAW:
        raise ValueError("mixed-effects fit expects a raw_binary dataset")
    if len(raw) == 0:
        raise ValueError("cannot fit an empty dataset")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if config is None:
        config = EstimatorConfig()
    m, L = raw.m, raw.L
    users, ii, jj, y = raw.users, raw.item_i, raw.item_j, raw.values

    def value(x):
        theta, gamma = x[:m], x[m:]
        eta = gamma[users] + theta[ii] - theta[jj]
        return float(np.sum(-y * eta + np.logaddexp(0.0, eta)) + lam * np.dot(theta, theta))

    def grad(x):
        theta, gamma = x[:m], x[m:]
        eta = gamma[users] + theta[ii] - theta[jj]
        s = special.expit(eta) - y
        g_theta = (np.bincount(ii, weights=s, minlength=m)
                   - np.bincount(jj, weights=s, minlength=m) + 2.0 * lam * theta)
        g_gamma = np.bincount(users, weights=s, minlength=L)
        return np.concatenate([g_theta, g_gamma])

    x, iterations, grad_norm, obj, _ = _gradient_descent(
        np.zeros(m + L), value, grad, config)
    theta_hat, gamma_hat = x[:m], x[m:]
    sigma_hat = float(np.std(gamma_hat, ddof=1)) if L > 1 else 0.0
    logger.info("mixed-effects fit m=%d L=%d records=%d iters=%d grad_norm=%.3e",
                m, L, len(raw), iterations, grad_norm)
    return MixedEffectsEstimate(theta_hat=theta_hat, gamma_hat=gamma_hat,
                                sigma_hat=sigma_hat, iterations=iterations,
                                final_grad_norm=grad_norm, objective_value=obj)


def select_model(dataset: PairwiseDataset, candidates, lam: float,
                 config: EstimatorConfig | None = None) -> ComparisonModel:
    """Fit every candidate and return the one with the smallest unpenalized
    loss at its own optimum; ties keep the earliest candidate."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("need at least one candidate model")
    if config is None:
        config = EstimatorConfig(lam=lam)
    best = None
    best_loss = np.inf
    for cand in candidates:
        try:
            est = fit(dataset, cand, EstimatorConfig(
                lam=lam, step_size=config.step_size, grad_tol=config.grad_tol,
                max_iters=config.max_iters, restart_seed=config.restart_seed))
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"model selection: candidate {cand.kind!r} failed to converge: {exc}",
                final_grad_norm=exc.final_grad_norm, iterations=exc.iterations) from exc
        loss = objective(est.theta_hat, dataset, cand, lam=0.0)
        if loss < best_loss:
            best, best_loss = cand, loss
    return best


def budget_check(epsilons, alpha_threshold: float) -> tuple[float, bool]:
    """Total retained signal G = sum of tanh(eps_l/2)^2 and whether it clears
    the collection threshold; collecting continues until it does."""
    if not (alpha_threshold > 0):
        raise ValueError("alpha_threshold must be positive")
    eps = np.asarray(epsilons, dtype=float)
    if eps.size == 0:
        return 0.0, False
    if np.any(np.isnan(eps)) or np.any(eps <= 0):
        raise ValueError("epsilons must be strictly positive")
    G = float(np.sum(np.tanh(eps / 2.0) ** 2))
    return G, G > alpha_threshold
