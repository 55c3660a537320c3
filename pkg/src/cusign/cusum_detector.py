"""Model-based CUSUM on the chi-squared test measure.

``C <- max(0, C + z - b)``; when ``C`` rises above the threshold an alarm is
raised and ``C`` is zeroed on that same step. The realized alarm rate is
tracked over a sliding window of the last ``ell`` alarm flags.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import as_measure_stream
from .exceptions import TuningError
from .lti import make_rng

MAX_THRESHOLD = 1e3


@dataclass(frozen=True)
class CusumConfig:
    bias: float
    threshold: float
    target_rate: float | None = None
    window: int = 100

    def __post_init__(self):
        if not self.bias > 0:
            raise ValueError(f"bias must be positive, got {self.bias}")
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if int(self.window) != self.window or self.window < 1:
            raise ValueError(f"window must be a positive integer, got {self.window}")
        if self.target_rate is not None and not 0.0 < self.target_rate < 1.0:
            raise ValueError(f"target_rate must lie in (0, 1), got {self.target_rate}")


@dataclass
class CusumState:
    """Accumulator plus a ring buffer of recent alarm flags (mutated in place)."""

    window: int = 100
    c: float = 0.0
    zeta: int = 0
    buffer: np.ndarray = field(default=None, repr=False)
    n_seen: int = 0
    n_alarms_in_window: int = 0

    def __post_init__(self):
        if self.buffer is None:
            self.buffer = np.zeros(self.window, dtype=np.int8)

    @classmethod
    def for_config(cls, cfg):
        return cls(window=cfg.window)

    def push_flag(self, flag):
        slot = self.n_seen % self.window
        self.n_alarms_in_window += int(flag) - int(self.buffer[slot])
        self.buffer[slot] = flag
        self.n_seen += 1


def cusum_step(state, cfg, z):
    """Advance the accumulator by one test measure; returns ``(state, zeta)``.

    ``state`` is updated in place. A state left above the threshold (only
    possible when constructed by hand) alarms and resets without accumulating.
    """
    if state.c > cfg.threshold:
        c, zeta = 0.0, 1
    else:
        c = max(0.0, state.c + z - cfg.bias)
        zeta = 0
        if c > cfg.threshold:
            c, zeta = 0.0, 1
    state.c = c
    state.zeta = zeta
    state.push_flag(zeta)
    return state, zeta


def windowed_alarm_rate(state):
    """Mean of the stored alarm flags; divides by the samples seen before the window fills."""
    if state.n_seen == 0:
        return 0.0
    return state.n_alarms_in_window / min(state.n_seen, state.window)


def run_cusum(z, bias, threshold):
    """Batch accumulator and alarm flags over a stream, from ``C = 0``."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    return _kernels.cusum_run(z, float(bias), float(threshold))


def alarm_rate(z, bias, threshold):
    z = np.ascontiguousarray(z, dtype=np.float64)
    return _kernels.cusum_alarm_count(z, float(bias), float(threshold)) / z.size


def rolling_alarm_rate(flags, window):
    return _kernels.windowed_mean(np.ascontiguousarray(flags, dtype=np.int64), int(window))


def tune_threshold_on_sample(z, bias, target_rate, tol=0.002, max_threshold=MAX_THRESHOLD, resolution=1e-5):
    """Bisect the threshold so the realized alarm rate on ``z`` matches ``target_rate``.

    The same sample is reused at every evaluation, which makes the realized
    rate a non-increasing step function of the threshold.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    if not 0.0 < target_rate < 1.0:
        raise ValueError(f"target_rate must lie in (0, 1), got {target_rate}")
    lo, hi = 0.0, float(max_threshold)
    rate_hi = alarm_rate(z, bias, hi)
    rate_lo = alarm_rate(z, bias, resolution)
    if rate_hi > target_rate + tol or rate_lo < target_rate - tol:
        raise TuningError(
            f"target rate {target_rate} unreachable for threshold in (0, {max_threshold}]: "
            f"rates span [{rate_hi:.4f}, {rate_lo:.4f}]"
        )
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if alarm_rate(z, bias, mid) > target_rate:
            lo = mid
        else:
            hi = mid
    threshold = 0.5 * (lo + hi)
    realized = alarm_rate(z, bias, threshold)
    if abs(realized - target_rate) > tol:
        raise TuningError(f"realized rate {realized:.4f} misses target {target_rate} by more than {tol}")
    return threshold


def tune_threshold(b, s, target_rate, rng=None, n_samples=2_000_000, tol=0.002):
    """Monte Carlo threshold for bias ``b`` on a chi2_s test measure."""
    if not b > s:
        raise ValueError(f"bias must exceed E[z] = s = {s} to keep the accumulator bounded, got {b}")
    if not 0.0 < target_rate < 0.5:
        raise ValueError(f"target_rate must lie in (0, 0.5), got {target_rate}")
    rng = make_rng(0) if rng is None else rng
    z = rng.chisquare(s, n_samples)
    return tune_threshold_on_sample(z, b, target_rate, tol)


def rate_band(expected_rate, window, Z=3.0):
    """Binomial band ``E +/- Z sqrt(E (1 - E) / window)`` for a windowed rate."""
    half = Z * np.sqrt(expected_rate * (1.0 - expected_rate) / window)
    return max(0.0, expected_rate - half), expected_rate + half


class CusumDetector(BaseEstimator):
    """CUSUM detector with a windowed alarm-rate monitor.

    ``fit`` takes nominal test measures. With ``threshold=None`` the threshold
    is tuned on that sample to reach ``target_rate``; otherwise the realized
    rate on the sample is only recorded. ``predict`` flags steps whose windowed
    alarm rate rises above ``E[rate] + Z sqrt(E (1 - E) / window)``.
    A drop in the rate is not flagged.

    Parameters
    ----------
    bias : float
        Drift subtracted from each test measure; must exceed the nominal mean.
    threshold : float, optional
        Accumulator threshold.
    target_rate : float
        Design alarm rate; also the centre of the monitoring band.
    window : int
        Length of the sliding alarm-rate window.
    Z : float
        Band width in binomial standard deviations.
    """

    def __init__(self, bias=3.3, threshold=None, target_rate=0.15, window=100, Z=3.0):
        self.bias = bias
        self.threshold = threshold
        self.target_rate = target_rate
        self.window = window
        self.Z = Z

    def fit(self, X, y=None):
        z = as_measure_stream(X)
        if self.threshold is None:
            threshold = tune_threshold_on_sample(z, self.bias, self.target_rate)
        else:
            threshold = float(self.threshold)
        self.config_ = CusumConfig(self.bias, threshold, self.target_rate, self.window)
        self.threshold_ = threshold
        self.realized_rate_ = alarm_rate(z, self.bias, threshold)
        expected = self.target_rate if self.target_rate is not None else self.realized_rate_
        self.band_ = rate_band(expected, self.window, self.Z)
        self.state_ = CusumState.for_config(self.config_)
        return self

    def transform(self, X):
        """Columns: accumulator, alarm flag, windowed alarm rate."""
        check_is_fitted(self, "config_")
        c, zeta = run_cusum(as_measure_stream(X), self.bias, self.threshold_)
        return np.column_stack([c, zeta, rolling_alarm_rate(zeta, self.window)])

    def predict(self, X):
        return self.transform(X)[:, 2] > self.band_[1]

    def update(self, z):
        check_is_fitted(self, "config_")
        cusum_step(self.state_, self.config_, z)
        return windowed_alarm_rate(self.state_) > self.band_[1]
