"""Rank permutations and ranking-error functionals.

All metrics depend on preference vectors only through their induced rank
permutation, with ties broken by ascending item index so that degenerate
fits still score deterministically.
"""

from __future__ import annotations

import numpy as np


def rank_of(theta) -> np.ndarray:
    """Descending-value ranks: rank 1 is the largest entry.

    Ties rank the lower item index better.
    """
    theta = np.asarray(theta, dtype=float)
    m = theta.size
    order = np.lexsort((np.arange(m), -theta))
    ranks = np.empty(m, dtype=np.int64)
    ranks[order] = np.arange(1, m + 1)
    return ranks


def topk_hamming(theta_hat, theta_star, K: int) -> float:
    """Normalized Hamming distance between the two top-K item sets."""
    sigma_hat = rank_of(theta_hat)
    sigma_star = rank_of(theta_star)
    m = sigma_hat.size
    if sigma_star.size != m:
        raise ValueError("preference vectors must have equal length")
    if not (1 <= K <= m - 1):
        raise ValueError("K must satisfy 1 <= K <= m-1")
    missed = np.sum((sigma_hat > K) & (sigma_star <= K))
    spurious = np.sum((sigma_hat <= K) & (sigma_star > K))
    return float(missed + spurious) / (2.0 * K)


def kendall(theta_hat, theta_star) -> float:
    """Fraction of item pairs ordered discordantly by the two rankings."""
    sigma_hat = rank_of(theta_hat)
    sigma_star = rank_of(theta_star)
    m = sigma_hat.size
    if sigma_star.size != m:
        raise ValueError("preference vectors must have equal length")
    if m < 2:
        raise ValueError("need at least two items")
    dh = sigma_hat[:, None] - sigma_hat[None, :]
    ds = sigma_star[:, None] - sigma_star[None, :]
    discordant = np.sum((dh * ds) < 0) // 2
    return 2.0 * float(discordant) / (m * (m - 1))


def spearman_footrule(theta_hat, theta_star) -> float:
    """Normalized total absolute rank displacement, (2/m^2) sum |dis|."""
    sigma_hat = rank_of(theta_hat)
    sigma_star = rank_of(theta_star)
    m = sigma_hat.size
    if sigma_star.size != m:
        raise ValueError("preference vectors must have equal length")
    return 2.0 * float(np.sum(np.abs(sigma_hat - sigma_star))) / (m * m)
