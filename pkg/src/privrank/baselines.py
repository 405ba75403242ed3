"""Competing private rank-aggregation baselines.

The count method tallies randomized-response wins without any model; the
Laplace baseline perturbs comparisons with additive noise and feeds them to
the regular fitter with uniform weights.
"""

from __future__ import annotations

import numpy as np

from .data import BINARY_KINDS, MECH_LAPLACE, PairwiseDataset, privatize
from .estimator import Estimate, EstimatorConfig, fit
from .mechanisms import PrivacyProfile
from .models import ComparisonModel


def count_scores(dataset: PairwiseDataset) -> np.ndarray:
    """Per-item win totals: a record (l,i,j,y) credits y to i and 1-y to j.

    Defined for binary datasets (randomized-response output in the private
    pipeline, raw comparisons for the non-private reference ranking).
    """
    if dataset.kind not in BINARY_KINDS:
        raise ValueError("count method expects a binary dataset")
    scores = np.zeros(dataset.m)
    np.add.at(scores, dataset.item_i, dataset.values)
    np.add.at(scores, dataset.item_j, 1.0 - dataset.values)
    return scores


def fit_laplace_baseline(raw: PairwiseDataset, profile: PrivacyProfile,
                         model: ComparisonModel, config: EstimatorConfig,
                         rng: np.random.Generator) -> Estimate:
    """Privatize with per-user Laplace noise, then fit the noisy values as
    surrogate comparisons with uniform weights (the noise is zero-mean, so
    the plug-in keeps the population objective unbiased)."""
    noisy = privatize(raw, profile, MECH_LAPLACE, rng)
    return fit(noisy, model, config)
