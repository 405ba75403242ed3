"""Comparison-model function family for linear stochastic transitivity models.

Three model families are supported, each given by a zero-symmetric CDF F:
logistic (``btl``), standard normal (``tm``) and Laplace (``dt``, with a
configurable scale). Besides F itself the estimator needs the density f,
a numerically safe log F, the ratio g = f/F and its derivative g'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

BTL = "btl"
TM = "tm"
DT = "dt"

_KINDS = (BTL, TM, DT)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _as_finite_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("comparison-model functions require finite input")
    return arr


@dataclass(frozen=True)
class ComparisonModel:
    """One member of the LST family, selected by ``kind`` token.

    ``scale`` is the Laplace scale of the ``dt`` model and is ignored by the
    other two. All methods are pure; scalar inputs give scalar outputs and
    array inputs broadcast elementwise.
    """

    kind: str = BTL
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown comparison model {self.kind!r}; expected one of {_KINDS}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError("dt scale must be a positive finite real")

    @classmethod
    def from_token(cls, token: str, scale: float = 1.0) -> "ComparisonModel":
        return cls(kind=token.strip().lower(), scale=scale)

    def cdf(self, x):
        x = _as_finite_array(x)
        if self.kind == BTL:
            out = special.expit(x)
        elif self.kind == TM:
            out = special.ndtr(x)
        else:
            u = x / self.scale
            out = np.where(u <= 0, 0.5 * np.exp(np.minimum(u, 0.0)), 1.0 - 0.5 * np.exp(-np.abs(u)))
        return out[()] if out.ndim == 0 else out

    def pdf(self, x):
        x = _as_finite_array(x)
        if self.kind == BTL:
            s = special.expit(x)
            out = s * (1.0 - s)
        elif self.kind == TM:
            out = np.exp(-0.5 * x * x) / _SQRT_2PI
        else:
            out = np.exp(-np.abs(x) / self.scale) / (2.0 * self.scale)
        return out[()] if out.ndim == 0 else out

    def log_cdf(self, x):
        """log F(x), stable for large negative x (no underflow to -inf)."""
        x = _as_finite_array(x)
        if self.kind == BTL:
            # log sigmoid(x) = -softplus(-x)
            out = -np.logaddexp(0.0, -x)
        elif self.kind == TM:
            out = special.log_ndtr(x)
        else:
            u = x / self.scale
            out = np.where(u <= 0, math.log(0.5) + np.minimum(u, 0.0),
                           np.log1p(-0.5 * np.exp(-np.abs(u))))
        return out[()] if out.ndim == 0 else out

    def g(self, x):
        """g(x) = f(x)/F(x), evaluated in log space where needed."""
        x = _as_finite_array(x)
        if self.kind == BTL:
            # f/F = F(1-F)/F = F(-x)
            out = special.expit(-x)
        elif self.kind == TM:
            log_pdf = -0.5 * x * x - math.log(_SQRT_2PI)
            out = np.exp(log_pdf - special.log_ndtr(x))
        else:
            b = self.scale
            u = x / b
            pos = u > 0
            out = np.where(pos, np.exp(-np.abs(u)) / (b * (2.0 - np.exp(-np.abs(u)))), 1.0 / b)
        return out[()] if out.ndim == 0 else out

    def g_prime(self, x):
        """Analytic derivative of g. Nonpositive everywhere (log-concave F).

        The dt model has a kink in f at 0: g' jumps from 0 (x<0) to -2/b^2
        (x>0); at exactly 0 the symmetric value -1/b^2 is returned.
        """
        x = _as_finite_array(x)
        if self.kind == BTL:
            out = -self.pdf(x)
        elif self.kind == TM:
            gv = self.g(x)
            out = -gv * (x + gv)
        else:
            b = self.scale
            u = x / b
            e = np.exp(-np.abs(u))
            right = -2.0 * e / (b * b * (2.0 - e) ** 2)
            out = np.where(u > 0, right, np.where(u == 0, -1.0 / (b * b), 0.0))
        return out[()] if out.ndim == 0 else out
