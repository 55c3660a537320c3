"""Discrete LTI plant, steady-state Kalman filter, and residual generation.

The plant is

    x[k+1] = A x[k] + B u[k] + nu[k],    nu ~ N(0, Q)
    y[k]   = C x[k] + eta[k] + xi[k],    eta ~ N(0, R)

and the filter runs at its steady-state gain, so the residual
``r = y - C xhat`` has the constant covariance ``Sigma = C P C^T + R``.

Noise is drawn from :func:`make_rng` generators (numpy ``PCG64`` bit
generator, ziggurat normal sampler). Per step the measurement noise is
drawn before the process noise, whether or not an attack is active, so
attacked and clean runs share one noise stream.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_vector, check_square, check_symmetric
from .exceptions import ConditioningError, NotPSDError, RiccatiDivergenceError

RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 1_000_000
PSD_TOL = 1e-9
CHOL_JITTER = 1e-12


def make_rng(seed):
    """Return the package's reproducible generator for a 64-bit ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed, n):
    """Derive ``n`` independent generators from one master seed.

    Child ``i`` uses ``SeedSequence(seed).spawn(n)[i]``; the split depends only
    on ``seed`` and ``n``.
    """
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def mat_sqrt_sym(S):
    """Symmetric PSD square root by eigendecomposition.

    Eigenvalues in ``[-1e-9, 0)`` are treated as round-off and zeroed; anything
    more negative raises :class:`NotPSDError`.
    """
    S = check_symmetric(as_matrix(S, "S"), "S")
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w.size and w.min() < -PSD_TOL:
        raise NotPSDError(f"matrix has eigenvalue {w.min():.3e} below -{PSD_TOL}")
    H = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (H + H.T)


def noise_factor(S):
    """Return F with F F^T = S for sampling N(0, S) as F @ w.

    Cholesky with a 1e-12 diagonal jitter; a singular S (e.g. all zeros) falls
    back to the symmetric square root so that zero covariance means zero noise.
    """
    S = np.asarray(S, dtype=float)
    if not np.any(S):
        return np.zeros_like(S)
    try:
        return np.linalg.cholesky(S + CHOL_JITTER * np.eye(S.shape[0]))
    except np.linalg.LinAlgError:
        return mat_sqrt_sym(S)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Discrete LTI matrices and noise covariances."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = check_square(as_matrix(self.A, "A"), "A")
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(n, -1) if B.size else np.zeros((n, 0))
        C = as_matrix(self.C, "C")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got shape {C.shape}")
        s = C.shape[0]
        Q = check_symmetric(as_matrix(self.Q, "Q", (n, n)), "Q")
        R = check_symmetric(as_matrix(self.R, "R", (s, s)), "R")
        for name, M in (("Q", Q), ("R", R)):
            if np.linalg.eigvalsh(0.5 * (M + M.T)).min() < -PSD_TOL:
                raise NotPSDError(f"{name} is not positive semidefinite")
        for name, M in (("A", A), ("B", B), ("C", C), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, M)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def s(self):
        return self.C.shape[0]

    @cached_property
    def process_noise_factor(self):
        return noise_factor(self.Q)

    @cached_property
    def measurement_noise_factor(self):
        return noise_factor(self.R)


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Steady-state filter quantities plus the current state estimate."""

    P: np.ndarray
    L: np.ndarray
    Sigma: np.ndarray
    SigmaInv: np.ndarray
    SigmaHalf: np.ndarray
    xhat: np.ndarray
    iterations: int = field(default=0, compare=False)

    def with_estimate(self, xhat):
        return replace(self, xhat=as_vector(xhat, "xhat", self.P.shape[0]).copy())


def is_detectable(A, C, tol=1e-9):
    """PBH test: every mode with ``|lambda| >= 1`` must be observable through C."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) < 1.0 - tol:
            continue
        pbh = np.vstack([lam * np.eye(n) - A, C.astype(complex)])
        if np.linalg.matrix_rank(pbh, tol=1e-8) < n:
            return False
    return True


def riccati_map(P, A, C, Q, R):
    """One step of the filter Riccati recursion."""
    S = C @ P @ C.T + R
    APCt = A @ P @ C.T
    Pn = A @ P @ A.T + Q - APCt @ np.linalg.solve(S, APCt.T)
    return 0.5 * (Pn + Pn.T)


def solve_steady_state(model, xhat0=None, tol=RICCATI_TOL, max_iter=RICCATI_MAX_ITER):
    """Solve the filter Riccati equation by fixed-point iteration from ``P0 = Q``.

    Raises :class:`ConditioningError` when ``R`` is not positive definite (its
    smallest eigenvalue must exceed 1e-12) or ``C P C^T + R`` becomes singular,
    and :class:`RiccatiDivergenceError` if the update does not drop below
    ``tol`` within ``max_iter`` iterations.
    """
    A, C, Q, R = model.A, model.C, model.Q, model.R
    if np.linalg.eigvalsh(R).min() <= 1e-12:
        raise ConditioningError("measurement covariance R must be positive definite")
    if not is_detectable(A, C):
        raise ValueError("(A, C) is not detectable; no stabilising steady-state filter exists")

    P = Q.copy()
    for it in range(1, max_iter + 1):
        try:
            Pn = riccati_map(P, A, C, Q, R)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError("C P C^T + R is singular") from exc
        if not np.all(np.isfinite(Pn)):
            raise RiccatiDivergenceError(f"Riccati iteration overflowed at iteration {it}")
        delta = np.max(np.abs(Pn - P), initial=0.0)
        P = Pn
        if delta < tol:
            break
    else:
        raise RiccatiDivergenceError(f"Riccati iteration did not converge in {max_iter} iterations")

    Sigma = C @ P @ C.T + R
    Sigma = 0.5 * (Sigma + Sigma.T)
    if np.linalg.cond(Sigma) > 1e14:
        raise ConditioningError("residual covariance is numerically singular")
    SigmaInv = np.linalg.inv(Sigma)
    SigmaInv = 0.5 * (SigmaInv + SigmaInv.T)
    # L = A P C^T Sigma^-1, solved rather than multiplied by the inverse
    L = np.linalg.solve(Sigma, C @ P @ A.T).T
    xhat = np.zeros(model.n) if xhat0 is None else as_vector(xhat0, "xhat0", model.n).copy()
    return EstimatorState(
        P=P, L=L, Sigma=Sigma, SigmaInv=SigmaInv, SigmaHalf=mat_sqrt_sym(Sigma), xhat=xhat, iterations=it
    )


def riccati_residual(model, P):
    """Max-abs violation of the Riccati fixed point at ``P``."""
    return float(np.max(np.abs(P - riccati_map(P, model.A, model.C, model.Q, model.R))))


def kf_step(est, model, u, y):
    """Advance the filter one step.

    Returns the updated state and the residual ``r = y - C xhat`` computed with
    the estimate held *before* the update.
    """
    u = as_vector(u, "u", model.m)
    y = as_vector(y, "y", model.s)
    r = y - model.C @ est.xhat
    xhat = model.A @ est.xhat + model.B @ u + est.L @ r
    return replace(est, xhat=xhat), r


def measure(model, x, rng):
    """Clean sensor reading ``C x + eta`` (no attack term)."""
    eta = model.measurement_noise_factor @ rng.standard_normal(model.s)
    return model.C @ x + eta


def propagate(model, x, u, rng):
    nu = model.process_noise_factor @ rng.standard_normal(model.n)
    return model.A @ x + model.B @ u + nu


def simulate_step(model, x, u, attack, rng):
    """One plant step: returns ``(x_next, y)`` with ``y = C x + eta + attack``."""
    x = as_vector(x, "x", model.n)
    u = as_vector(u, "u", model.m)
    attack = as_vector(attack, "attack", model.s)
    y = measure(model, x, rng) + attack
    return propagate(model, x, u, rng), y


class SteadyStateKalmanFilter(TransformerMixin, BaseEstimator):
    """Steady-state Kalman filter as a residual transformer.

    ``fit`` solves the Riccati equation for the given model; ``transform``
    maps a measurement sequence ``Y`` (n_steps, s), with optional inputs ``U``
    (n_steps, m), to the residual sequence (n_steps, s).

    Parameters
    ----------
    A, B, C, Q, R : array-like
        Plant and noise matrices.
    xhat0 : array-like, optional
        Initial state estimate; zeros when omitted.
    """

    def __init__(self, A, B, C, Q, R, xhat0=None):
        self.A = A
        self.B = B
        self.C = C
        self.Q = Q
        self.R = R
        self.xhat0 = xhat0

    def fit(self, X=None, y=None):
        self.model_ = SystemModel(self.A, self.B, self.C, self.Q, self.R)
        self.state_ = solve_steady_state(self.model_, self.xhat0)
        self.gain_ = self.state_.L
        self.residual_covariance_ = self.state_.Sigma
        self.n_features_in_ = self.model_.s
        return self

    def transform(self, X, U=None):
        check_is_fitted(self, "state_")
        model = self.model_
        Y = as_matrix(X, "X")
        if Y.shape[1] != model.s:
            raise ValueError(f"X must have {model.s} columns, got {Y.shape[1]}")
        if U is None:
            U = np.zeros((Y.shape[0], model.m))
        U = np.asarray(U, dtype=float).reshape(Y.shape[0], model.m)
        est = self.state_
        out = np.empty_like(Y)
        for k in range(Y.shape[0]):
            est, out[k] = kf_step(est, model, U[k], Y[k])
        return out
