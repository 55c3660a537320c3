"""Input validation helpers shared by the estimators and the functional API."""

import numpy as np


def as_matrix(value, name, shape=None):
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(value, name, size=None):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if size is not None and arr.size != size:
        raise ValueError(f"{name} must have length {size}, got {arr.size}")
    return arr


def check_square(arr, name):
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_symmetric(arr, name, tol=1e-9):
    check_square(arr, name)
    if np.max(np.abs(arr - arr.T), initial=0.0) > tol * max(1.0, np.max(np.abs(arr), initial=0.0)):
        raise ValueError(f"{name} must be symmetric")
    return arr


def as_measure_stream(X, name="X"):
    """Flatten a stream of scalar test measures given as (n,) or (n, 1)."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D stream of test measures, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(arr < 0):
        raise ValueError(f"{name} holds quadratic-form values and must be nonnegative")
    return arr


def check_probability_pair(p_plus, p_minus, tol=1e-12):
    if not (0.0 <= p_plus <= 1.0 and 0.0 <= p_minus <= 1.0):
        raise ValueError(f"sign probabilities must lie in [0, 1], got ({p_plus}, {p_minus})")
    if abs(p_plus + p_minus - 1.0) > tol:
        raise ValueError(f"p_plus + p_minus must equal 1, got {p_plus + p_minus!r}")
