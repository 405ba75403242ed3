"""Regularized weighted maximum-likelihood estimation of preference vectors.

The loss is the negative weighted log-likelihood of the privatized surrogate
comparisons plus an l2 penalty:

    L(theta) = -sum over records [ z log F(theta_i - theta_j)
                                   + (w_l - z) log(1 - F(theta_i - theta_j)) ]
               + lam * ||theta||^2

For adaptively debiased data z = w_l * debias(y~) with the profile weights
w_l; binary and Laplace surrogates embed with uniform weights w_l = 1/L and
z = value/L, which reproduces the standard regularized MLE on raw data.

Because the loss depends on records only through per-pair sums of z and w,
records are aggregated per item pair once, making each gradient evaluation
O(m^2) regardless of the user count.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import KIND_ADRR, KIND_LAPLACE, KIND_RAW, KIND_RR, PairwiseDataset
from .mechanisms import PrivacyProfile
from .models import ComparisonModel

logger = logging.getLogger(__name__)

# Gap magnitude beyond which log F is evaluated at the clipped argument.
# Far outside any realistic preference spread; prevents -inf objectives when
# noisy surrogates push iterates outward (mostly a TM concern).
GAP_CLIP = 36.0

# Largest m accepted by the dense Hessian eigenvalue diagnostic.
HESSIAN_M_CAP = 500


class ConvergenceError(RuntimeError):
    """Gradient descent ran out of iterations or restarts."""

    def __init__(self, message: str, final_grad_norm: float, iterations: int):
        super().__init__(message)
        self.final_grad_norm = final_grad_norm
        self.iterations = iterations


@dataclass
class EstimatorConfig:
    lam: float = 0.0
    step_size: float | str = "auto"  # "auto" = backtracking line search
    grad_tol: float = 1e-8
    max_iters: int = 50_000
    restart_seed: int = 0
    keep_trace: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.step_size != "auto" and not (isinstance(self.step_size, (int, float)) and self.step_size > 0):
            raise ValueError("step_size must be 'auto' or a positive real")


@dataclass
class Estimate:
    theta_hat: np.ndarray
    iterations: int
    final_grad_norm: float
    objective_value: float
    objective_trace: list[float] | None = field(default=None, repr=False)


@dataclass(frozen=True)
class _PairTotals:
    """Per-pair sums of the surrogate values z and of the user weights w."""

    m: int
    i: np.ndarray
    j: np.ndarray
    zsum: np.ndarray
    wsum: np.ndarray


def _embed(dataset: PairwiseDataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-record (z, w) for every supported dataset kind."""
    if dataset.kind == KIND_ADRR:
        if dataset.profile is None:
            raise ValueError("debiased_weighted dataset requires its privacy profile")
        w = dataset.profile.weights[dataset.users]
        return dataset.values, w
    if dataset.kind in (KIND_RAW, KIND_RR, KIND_LAPLACE):
        w = np.full(len(dataset), 1.0 / dataset.L)
        return dataset.values / dataset.L, w
    raise ValueError(f"cannot fit dataset of kind {dataset.kind!r}")


def _pair_totals(dataset: PairwiseDataset) -> _PairTotals:
    z, w = _embed(dataset)
    pair_key = dataset.item_i * dataset.m + dataset.item_j
    uniq, inverse = np.unique(pair_key, return_inverse=True)
    zsum = np.zeros(uniq.size)
    wsum = np.zeros(uniq.size)
    np.add.at(zsum, inverse, z)
    np.add.at(wsum, inverse, w)
    return _PairTotals(m=dataset.m, i=uniq // dataset.m, j=uniq % dataset.m,
                       zsum=zsum, wsum=wsum)


def _objective_at(totals: _PairTotals, model: ComparisonModel, lam: float,
                  theta: np.ndarray) -> float:
    gaps = np.clip(theta[totals.i] - theta[totals.j], -GAP_CLIP, GAP_CLIP)
    ll = totals.zsum * model.log_cdf(gaps) + (totals.wsum - totals.zsum) * model.log_cdf(-gaps)
    return float(-np.sum(ll) + lam * np.dot(theta, theta))


def _gradient_at(totals: _PairTotals, model: ComparisonModel, lam: float,
                 theta: np.ndarray) -> np.ndarray:
    gaps = np.clip(theta[totals.i] - theta[totals.j], -GAP_CLIP, GAP_CLIP)
    s = totals.zsum * model.g(gaps) - (totals.wsum - totals.zsum) * model.g(-gaps)
    grad = np.zeros(theta.size)
    np.add.at(grad, totals.i, -s)
    np.add.at(grad, totals.j, s)
    return grad + 2.0 * lam * theta


def objective(theta, dataset: PairwiseDataset, model: ComparisonModel, lam: float) -> float:
    """Regularized loss at theta; empty datasets give the bare penalty."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != dataset.m:
        raise ValueError("theta length must equal the item count")
    if len(dataset) == 0:
        return float(lam * np.dot(theta, theta))
    return _objective_at(_pair_totals(dataset), model, lam, theta)


def gradient(theta, dataset: PairwiseDataset, model: ComparisonModel, lam: float) -> np.ndarray:
    """Analytic gradient of :func:`objective` with respect to theta."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != dataset.m:
        raise ValueError("theta length must equal the item count")
    if len(dataset) == 0:
        return 2.0 * lam * theta
    return _gradient_at(_pair_totals(dataset), model, lam, theta)


def default_lambda(profile: PrivacyProfile, c: float = 1.0) -> float:
    """Regularization c / (L * B(eps)) matched to the privacy profile."""
    if c <= 0:
        raise ValueError("c must be positive")
    return c / profile.G


def _gradient_descent(x0, value, grad, config: EstimatorConfig):
    """Descent loop shared by the main and mixed-effects fitters.

    Armijo backtracking when ``step_size`` is "auto"; once the provable
    decrease sinks below float rounding, any non-increasing step is accepted
    so iterates keep contracting. A stalled line search restarts once from a
    small seeded centered perturbation before raising.
    """
    x = np.asarray(x0, dtype=float).copy()
    obj = value(x)
    trace = [obj] if config.keep_trace else None
    step = 1.0 if config.step_size == "auto" else float(config.step_size)
    restarted = False
    eps64 = float(np.finfo(float).eps)

    iterations = 0
    while True:
        g = grad(x)
        grad_norm = float(np.max(np.abs(g))) if g.size else 0.0
        if grad_norm <= config.grad_tol:
            return x, iterations, grad_norm, obj, trace
        if iterations >= config.max_iters:
            raise ConvergenceError(
                f"no convergence after {iterations} iterations "
                f"(grad sup-norm {grad_norm:.3e} > tol {config.grad_tol:.3e})",
                final_grad_norm=grad_norm, iterations=iterations)
        iterations += 1

        if config.step_size != "auto":
            x = x - step * g
            obj = value(x)
            if trace is not None:
                trace.append(obj)
            continue

        gg = float(np.dot(g, g))
        alpha = min(step * 2.0, 1e8)
        if 1e-4 * alpha * gg < 8.0 * eps64 * max(abs(obj), 1.0):
            # The Armijo decrease is below float resolution, so acceptance
            # tests are meaningless; glide at half the last stable step (the
            # gradient itself stays accurate) until the tolerance is met.
            x = x - 0.5 * step * g
            obj = value(x)
            continue
        accepted = False
        weak = []  # non-increasing steps seen while hunting for Armijo decrease
        for _ in range(200):
            cand = x - alpha * g
            cand_obj = value(cand)
            if np.isfinite(cand_obj) and cand_obj <= obj - 1e-4 * alpha * gg:
                accepted = True
                break
            if len(weak) < 2 and np.isfinite(cand_obj) and cand_obj <= obj:
                weak.append((cand, cand_obj, alpha))
            alpha *= 0.5
        if not accepted and weak:
            # The largest non-increasing step can sit at a zero-contraction
            # "mirror" point, so prefer the next halving below it.
            cand, cand_obj, alpha = weak[-1]
            accepted = True
        if not accepted:
            if restarted:
                raise ConvergenceError(
                    "line search stalled twice; objective may be locally non-convex",
                    final_grad_norm=grad_norm, iterations=iterations)
            restarted = True
            rng = np.random.default_rng(config.restart_seed)
            x = 1e-2 * rng.standard_normal(x.size)
            x -= x.mean()
            obj = value(x)
            step = 1.0
            continue
        x, obj, step = cand, cand_obj, alpha
        if trace is not None:
            trace.append(obj)


def fit(dataset: PairwiseDataset, model: ComparisonModel, config: EstimatorConfig) -> Estimate:
    """Gradient descent from theta = 0 until the sup-norm of the gradient
    drops below ``grad_tol``.

    The zero start satisfies the sum-zero constraint, and because the data
    part of the gradient sums to zero over items, every iterate (hence the
    returned estimate) keeps sum(theta) = 0 without projection.
    """
    if len(dataset) == 0:
        raise ValueError("cannot fit an empty dataset")
    totals = _pair_totals(dataset)
    present = np.zeros(dataset.m, dtype=bool)
    present[totals.i] = True
    present[totals.j] = True
    if not present.all():
        warnings.warn(
            f"{int((~present).sum())} item(s) appear in no observed comparison; "
            "their estimates are driven purely by the regularizer",
            stacklevel=2,
        )

    theta, iterations, grad_norm, obj, trace = _gradient_descent(
        np.zeros(dataset.m),
        lambda th: _objective_at(totals, model, config.lam, th),
        lambda th: _gradient_at(totals, model, config.lam, th),
        config)
    logger.info("fit model=%s m=%d records=%d lam=%.3e iters=%d grad_norm=%.3e objective=%.10g",
                model.kind, dataset.m, len(dataset), config.lam, iterations, grad_norm, obj)
    return Estimate(theta_hat=theta, iterations=iterations,
                    final_grad_norm=grad_norm, objective_value=obj,
                    objective_trace=trace)


def hessian(theta, dataset: PairwiseDataset, model: ComparisonModel) -> np.ndarray:
    """Dense Hessian of the unpenalized loss. Laplacian-structured: rows sum
    to zero, so the all-ones vector is always in the kernel."""
    theta = np.asarray(theta, dtype=float)
    totals = _pair_totals(dataset)
    gaps = np.clip(theta[totals.i] - theta[totals.j], -GAP_CLIP, GAP_CLIP)
    a = totals.zsum * model.g_prime(gaps) + (totals.wsum - totals.zsum) * model.g_prime(-gaps)
    H = np.zeros((dataset.m, dataset.m))
    H[totals.i, totals.j] = a
    H += H.T
    np.fill_diagonal(H, 0.0)
    np.fill_diagonal(H, -H.sum(axis=1))
    return H


def hessian_min_nonzero_eigenvalue(theta, dataset: PairwiseDataset,
                                   model: ComparisonModel) -> float:
    """Smallest eigenvalue of the loss Hessian restricted to the subspace
    orthogonal to the all-ones direction (the structural null space)."""
    if dataset.m > HESSIAN_M_CAP:
        raise ValueError(f"dense eigensolve capped at m={HESSIAN_M_CAP}")
    H = hessian(theta, dataset, model)
    m = dataset.m
    basis = np.eye(m)
    basis[:, 0] = 1.0 / np.sqrt(m)
    q, _ = np.linalg.qr(basis)
    Q = q[:, 1:]  # orthonormal basis of the complement of span{1}
    return float(np.linalg.eigvalsh(Q.T @ H @ Q).min())
