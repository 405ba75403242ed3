"""Randomized response, debiasing/weighting transforms and privacy accounting.

Every user carries a personal budget ``epsilon``; ``math.inf`` is the
"no privacy" sentinel (spelled ``inf`` in profile CSV files). Stochastic
functions take an explicit ``numpy.random.Generator`` so callers own the
seeding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special


def _check_epsilon(epsilon, allow_zero: bool) -> np.ndarray:
    eps = np.asarray(epsilon, dtype=float)
    if np.any(np.isnan(eps)):
        raise ValueError("epsilon must not be NaN")
    if allow_zero:
        if np.any(eps < 0):
            raise ValueError("epsilon must be >= 0")
    elif np.any(eps <= 0):
        raise ValueError("epsilon must be strictly positive")
    return eps


def flip_probability(epsilon):
    """Flip probability p = 1/(e^eps + 1) of the randomized response coin."""
    eps = _check_epsilon(epsilon, allow_zero=True)
    out = special.expit(-eps)
    return out[()] if out.ndim == 0 else out


def retention(epsilon):
    """t = (e^eps - 1)/(e^eps + 1) = tanh(eps/2), the per-user signal kept."""
    eps = _check_epsilon(epsilon, allow_zero=True)
    out = np.tanh(eps / 2.0)
    return out[()] if out.ndim == 0 else out


def randomized_response(y, epsilon, rng: np.random.Generator):
    """Flip the bit(s) y with probability 1/(e^eps + 1).

    eps = 0 degenerates to a fair coin; eps = inf returns y unchanged.
    """
    y = np.asarray(y)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("randomized response expects binary input")
    p = flip_probability(epsilon)
    flips = rng.random(size=y.shape) < p
    out = np.where(flips, 1 - y, y)
    return out[()] if out.ndim == 0 else out


def debias(y_tilde, epsilon):
    """Unbias a randomized-response bit: ((e^eps+1) y~ - 1)/(e^eps - 1).

    Undefined at eps = 0; the inf sentinel gives the identity map.
    """
    eps = _check_epsilon(epsilon, allow_zero=True)
    if np.any(eps == 0):
        raise ValueError("debias undefined at epsilon=0")
    y_tilde = np.asarray(y_tilde, dtype=float)
    a = 1.0 / np.expm1(eps)  # 1/(e^eps - 1), 0 at the inf sentinel
    out = y_tilde * (1.0 + 2.0 * a) - a
    return out[()] if out.ndim == 0 else out


def debias_variance(epsilon, F_value):
    """Variance of the debiased value when P(y=1) = F_value."""
    eps = _check_epsilon(epsilon, allow_zero=True)
    if np.any(eps == 0):
        raise ValueError("debias undefined at epsilon=0")
    F_value = np.asarray(F_value, dtype=float)
    if np.any((F_value <= 0) | (F_value >= 1)):
        raise ValueError("F_value must lie in (0,1)")
    a = 1.0 / np.expm1(eps)
    out = 0.25 * ((1.0 + 2.0 * a) ** 2 - (2.0 * F_value - 1.0) ** 2)
    return out[()] if out.ndim == 0 else out


def adaptive_weights(epsilons) -> np.ndarray:
    """Weights w_l proportional to t_l^2 with t_l = tanh(eps_l/2); they sum to 1."""
    eps = _check_epsilon(epsilons, allow_zero=False)
    if eps.ndim != 1 or eps.size == 0:
        raise ValueError("epsilons must be a non-empty vector")
    t2 = np.tanh(eps / 2.0) ** 2
    return t2 / t2.sum()


def laplace_perturb(y, epsilon, rng: np.random.Generator):
    """Add Laplace(0, 1/eps) noise; eps-LDP for values of sensitivity 1."""
    eps = _check_epsilon(epsilon, allow_zero=False)
    y = np.asarray(y, dtype=float)
    scale = np.broadcast_to(1.0 / eps, y.shape)
    out = y + rng.laplace(0.0, 1.0, size=y.shape) * scale
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PrivacyProfile:
    """Per-user privacy budgets with the derived weights and averages.

    ``B`` is the mean of t_l^2 over users and ``G = L * B`` the total; both
    measure how much signal survives privatization.
    """

    epsilons: np.ndarray = field()

    def __post_init__(self):
        eps = np.atleast_1d(np.asarray(self.epsilons, dtype=float))
        _check_epsilon(eps, allow_zero=False)
        object.__setattr__(self, "epsilons", eps)

    @classmethod
    def non_private(cls, L: int) -> "PrivacyProfile":
        return cls(np.full(L, math.inf))

    @classmethod
    def uniform(cls, L: int, low: float, high: float, rng: np.random.Generator) -> "PrivacyProfile":
        return cls(rng.uniform(low, high, size=L))

    def __len__(self) -> int:
        return self.epsilons.size

    @property
    def weights(self) -> np.ndarray:
        return adaptive_weights(self.epsilons)

    @property
    def B(self) -> float:
        return float(np.mean(np.tanh(self.epsilons / 2.0) ** 2))

    @property
    def G(self) -> float:
        return len(self) * self.B


def central_dp_epsilon(profile: PrivacyProfile, counts) -> float:
    """Central-DP budget max_l S_l * eps_l implied by per-comparison RR."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape != profile.epsilons.shape:
        raise ValueError("counts must have one entry per user")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    if np.all(counts == 0):
        return 0.0
    prods = counts * profile.epsilons
    return float(np.max(prods[counts > 0]))


def write_profile_csv(profile: PrivacyProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "epsilon"])
        for l, eps in enumerate(profile.epsilons, start=1):
            writer.writerow([l, "inf" if math.isinf(eps) else format(eps, ".17g")])


def load_profile_csv(path) -> PrivacyProfile:
    epsilons = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["user_id", "epsilon"]:
            raise ValueError(f"{path}: expected header 'user_id,epsilon'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                user = int(row[0])
                eps = float(row[1])
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed profile row {row!r}") from exc
            if user in epsilons:
                raise ValueError(f"{path}:{lineno}: duplicate user_id {user}")
            epsilons[user] = eps
    if not epsilons:
        raise ValueError(f"{path}: empty privacy profile")
    if sorted(epsilons) != list(range(1, len(epsilons) + 1)):
        raise ValueError(f"{path}: user ids must be 1..L without gaps")
    return PrivacyProfile(np.array([epsilons[l] for l in sorted(epsilons)]))
