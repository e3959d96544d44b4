"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import numpy as np

EPS = np.finfo(float).eps


class RankDeficientError(ValueError):
    """Raised when a data matrix lacks full row rank.

    Attributes
    ----------
    sigma_min, sigma_max : float
        Extreme singular values of the offending matrix.
    """

    def __init__(self, message, sigma_min=float("nan"), sigma_max=float("nan")):
        super().__init__(message)
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)


class NumericalOverflowError(ArithmeticError):
    """Raised when an iterated computation leaves the representable range."""

    def __init__(self, message, last_finite=None):
        super().__init__(message)
        self.last_finite = last_finite


def check_square_matrix(A, name="A"):
    """Return ``A`` as a complex 2-D square array, raising ``ValueError`` otherwise."""
    arr = np.asarray(A)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must have dimension >= 1")
    arr = arr.astype(complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def maybe_real(arr, tol=0.0):
    """Drop the imaginary part when it is identically (or within ``tol``) zero."""
    arr = np.asarray(arr)
    if np.iscomplexobj(arr) and np.all(np.abs(arr.imag) <= tol):
        return arr.real.copy()
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_data_matrix(X, name="X"):
    """Return a 2-D float/complex array (rows = coordinates, columns = time)."""
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    return arr


def rank_threshold(sigma_max, shape, rtol=None):
    """Default singular-value cutoff ``max(shape) * eps * sigma_max``."""
    if rtol is None:
        rtol = max(shape) * EPS
    return rtol * sigma_max


def check_full_row_rank(Y, name="X"):
    """Validate ``Y`` (d x p) has d <= p and full row rank; return its singular values."""
    d, p = Y.shape
    if d > p:
        raise RankDeficientError(
            f"{name} has more rows ({d}) than columns ({p}); full row rank impossible"
        )
    s = np.linalg.svd(Y, compute_uv=False)
    thr = rank_threshold(s[0], Y.shape) if s[0] > 0 else np.inf
    if s[0] == 0 or s[-1] <= thr:
        raise RankDeficientError(
            f"{name} is rank deficient: sigma_min={s[-1]:.3e}, sigma_max={s[0]:.3e}",
            sigma_min=s[-1],
            sigma_max=s[0],
        )
    return s
