"""Chi-squared test measure, incomplete gamma, and sign probabilities."""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix

_EPS = 1e-15
_FPMIN = 1e-300
_MAX_ITER = 10_000


def test_measure(r, SigmaInv):
    """Quadratic form ``r^T Sigma^-1 r``.

    ``r`` may be one residual (s,) or a stack of residuals (n, s); the result
    is a float or an (n,) array accordingly.
    """
    r = np.asarray(r, dtype=float)
    SigmaInv = np.asarray(SigmaInv, dtype=float)
    if r.ndim == 1:
        z = float(r @ SigmaInv @ r)
        if z < -1e-12:
            raise ValueError(f"negative quadratic form {z}; SigmaInv is not PSD")
        return max(z, 0.0)
    z = np.einsum("ij,jk,ik->i", r, SigmaInv, r)
    if z.size and z.min() < -1e-12:
        raise ValueError("negative quadratic form; SigmaInv is not PSD")
    return np.clip(z, 0.0, None)


# prevent pytest from collecting the function above when imported into tests
test_measure.__test__ = False


def _gamma_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_continued_fraction(a, x):
    # modified Lentz evaluation of the upper tail Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def reg_lower_gamma(a, x):
    """Regularized lower incomplete gamma function P(a, x).

    Series expansion below ``x = a + 1``, continued fraction above.
    """
    if not a > 0:
        raise ValueError(f"shape parameter a must be positive, got {a}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_continued_fraction(a, x))


def chi2_cdf(z, s):
    """CDF of a chi-squared variable with ``s`` degrees of freedom."""
    return reg_lower_gamma(0.5 * s, 0.5 * z)


def median_reference(s):
    """Wilson-Hilferty approximation ``s (1 - 2/(9 s))^3`` of the chi2_s median."""
    if s < 1:
        raise ValueError(f"sensor count must be >= 1, got {s}")
    return s * (1.0 - 2.0 / (9.0 * s)) ** 3


def reference_for_probability(s, p_minus, tol=1e-13):
    """Reference point whose lower-tail probability is ``p_minus`` (bisection)."""
    if not 0.0 < p_minus < 1.0:
        raise ValueError(f"p_minus must lie in (0, 1), got {p_minus}")
    lo, hi = 0.0, max(1.0, float(s))
    while chi2_cdf(hi, s) < p_minus:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, s) < p_minus:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ChiSquareContext:
    """Degrees of freedom, reference point, and derived sign probabilities."""

    s: int
    z_ref: float
    T: float | None = None
    p_minus: float = field(init=False)
    p_plus: float = field(init=False)

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if not self.z_ref > 0:
            raise ValueError(f"z_ref must be positive, got {self.z_ref}")
        if self.T is not None and not self.T > 0:
            raise ValueError(f"threshold T must be positive, got {self.T}")
        p_minus = chi2_cdf(self.z_ref, self.s)
        object.__setattr__(self, "p_minus", p_minus)
        object.__setattr__(self, "p_plus", 1.0 - p_minus)

    @classmethod
    def at_median(cls, s, T=None):
        return cls(s=s, z_ref=median_reference(s), T=T)


def sign_probabilities(ctx):
    """``(p_minus, p_plus)`` = ``(Pr(z < z_ref), Pr(z > z_ref))`` for ``z ~ chi2_s``."""
    return ctx.p_minus, ctx.p_plus


def chi2_threshold_alarm(z, T):
    """Baseline detector: alarm iff ``z > T``."""
    if not T > 0:
        raise ValueError(f"threshold T must be positive, got {T}")
    return bool(z > T)


class ChiSquareDetector(TransformerMixin, BaseEstimator):
    """Reduce residual vectors to the scalar chi-squared test measure.

    Parameters
    ----------
    sigma : array-like of shape (s, s), optional
        Residual covariance. When omitted it is estimated from the residuals
        passed to ``fit`` (zero-mean sample covariance).
    threshold : float, optional
        Alarm threshold used by ``predict``.
    """

    def __init__(self, sigma=None, threshold=None):
        self.sigma = sigma
        self.threshold = threshold

    def fit(self, X, y=None):
        X = as_matrix(X, "X")
        if self.sigma is None:
            sigma = X.T @ X / X.shape[0]
        else:
            sigma = as_matrix(self.sigma, "sigma", (X.shape[1], X.shape[1]))
        self.sigma_ = 0.5 * (sigma + sigma.T)
        self.sigma_inv_ = np.linalg.inv(self.sigma_)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "sigma_inv_")
        X = as_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have {self.n_features_in_} columns, got {X.shape[1]}")
        return test_measure(X, self.sigma_inv_)

    def predict(self, X):
        if self.threshold is None:
            raise ValueError("set `threshold` to use predict")
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        return self.transform(X) > self.threshold

    def expected_false_alarm_rate(self):
        check_is_fitted(self, "sigma_inv_")
        return 1.0 - chi2_cdf(self.threshold, self.n_features_in_)
